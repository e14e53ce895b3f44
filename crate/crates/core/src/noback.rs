//! Rate allocation without buffer feedback.
//!
//! Consumption rates are only known in distribution: `p_i ~ G_i` on
//! `[a_i, b_i]`. With linear costs `V_i(x) = w_i x` the expected cost
//! `E[w_i (p_i - alpha_i)^+]` is convex in `alpha_i`, and the optimum is a
//! water-filling solution: a multiplier `lambda` separates starved users
//! (`w_i < lambda`) from served ones, which receive `G_i^{-1}(1 - lambda / w_i)`.

use log::warn;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::model::{rational_to_f64, Rational};

pub const BISECTION_TOL: f64 = 1e-9;
pub const BISECTION_MAX_ITER: usize = 200;
const TIE_PERTURBATION: f64 = 1e-12;

/// Shape of a consumption-rate distribution on its support `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateDistribution {
    Uniform,
    /// Density `1 + tilt * (t - 1/2)` in the normalised coordinate
    /// `t = (x - a) / (b - a)`, `|tilt| < 2`.
    LinearDensity { tilt: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NobackUser {
    pub weight: f64,
    pub a: f64,
    pub b: f64,
    pub dist: RateDistribution,
}

impl NobackUser {
    pub fn uniform(weight: f64, a: f64, b: f64) -> Self {
        NobackUser { weight, a, b, dist: RateDistribution::Uniform }
    }

    fn validate(&self, i: usize) -> Result<()> {
        if !(self.weight > 0.0 && self.weight.is_finite()) {
            return Err(Error::domain(format!("user {i}: weight {} must be positive", self.weight)));
        }
        if !(0.0 <= self.a && self.a < self.b && self.b <= 1.0) {
            return Err(Error::domain(format!(
                "user {i}: support [{}, {}] must satisfy 0 <= a < b <= 1",
                self.a, self.b
            )));
        }
        if let RateDistribution::LinearDensity { tilt } = self.dist {
            if tilt.is_nan() || tilt.abs() >= 2.0 {
                return Err(Error::domain(format!(
                    "user {i}: tilt {tilt} makes the CDF non-increasing somewhere"
                )));
            }
        }
        Ok(())
    }

    /// `G(x)`, clamped to `[0, 1]` outside the support.
    pub fn cdf(&self, x: f64) -> f64 {
        let t = ((x - self.a) / (self.b - self.a)).clamp(0.0, 1.0);
        match self.dist {
            RateDistribution::Uniform => t,
            RateDistribution::LinearDensity { tilt } => t + tilt * (t * t - t) / 2.0,
        }
    }

    /// `G^{-1}(u)` for `u` in `[0, 1]`.
    pub fn inv_cdf(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let t = match self.dist {
            RateDistribution::Uniform => u,
            RateDistribution::LinearDensity { tilt } if tilt.abs() < 1e-12 => u,
            RateDistribution::LinearDensity { tilt } => {
                // tilt/2 t^2 + (1 - tilt/2) t - u = 0, positive root
                let lin = 1.0 - tilt / 2.0;
                let disc = lin * lin + 2.0 * tilt * u;
                // stable form of (-lin + sqrt(disc)) / tilt
                2.0 * u / (lin + disc.max(0.0).sqrt())
            }
        };
        self.a + (self.b - self.a) * t.clamp(0.0, 1.0)
    }

    /// `E[(p - alpha)^+] = integral from alpha to b of (1 - G(x)) dx`.
    pub fn expected_shortfall(&self, alpha: f64) -> f64 {
        let (a, b) = (self.a, self.b);
        if alpha >= b {
            return 0.0;
        }
        let below = (a - alpha).max(0.0);
        let from = alpha.max(a);
        let tail = match self.dist {
            RateDistribution::Uniform => (b - from).powi(2) / (2.0 * (b - a)),
            RateDistribution::LinearDensity { tilt } => {
                // integral of 1 - t - tilt (t^2 - t)/2 over [t0, 1], scaled by (b - a)
                let t0 = (from - a) / (b - a);
                let anti = |t: f64| t - t * t / 2.0 - tilt * (t.powi(3) / 3.0 - t * t / 2.0) / 2.0;
                (b - a) * (anti(1.0) - anti(t0))
            }
        };
        below + tail
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NobackInstance {
    pub users: Vec<NobackUser>,
    pub capacity: Rational,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NobackSolution {
    /// Rates in the instance's user order.
    pub rates: Vec<f64>,
    /// KKT multiplier of the capacity constraint.
    pub multiplier: f64,
    /// Lowest-weight user (original index) with `w_i >= multiplier` that was served.
    pub threshold_user: Option<usize>,
    /// Set when tied weights were perturbed to make them distinct.
    pub weights_perturbed: bool,
    /// Quantile evaluations performed; quadratic in `n` for uniform instances.
    pub ops: u64,
}

/// Users sorted by increasing (distinct) weight.
struct Sorted<'a> {
    order: Vec<usize>,
    users: Vec<&'a NobackUser>,
    weights: Vec<f64>,
    perturbed: bool,
}

impl NobackInstance {
    pub fn new(users: Vec<NobackUser>, capacity: Rational) -> Result<Self> {
        if users.is_empty() {
            return Err(Error::domain("instance has no users"));
        }
        if capacity < Rational::zero() {
            return Err(Error::domain("capacity must be non-negative"));
        }
        for (i, u) in users.iter().enumerate() {
            u.validate(i)?;
        }
        Ok(NobackInstance { users, capacity })
    }

    pub fn capacity_f64(&self) -> f64 {
        rational_to_f64(self.capacity)
    }

    fn all_uniform(&self) -> bool {
        self.users.iter().all(|u| u.dist == RateDistribution::Uniform)
    }

    fn sorted(&self) -> Sorted<'_> {
        let mut order: Vec<usize> = (0..self.users.len()).collect();
        order.sort_by(|&i, &j| self.users[i].weight.total_cmp(&self.users[j].weight).then(i.cmp(&j)));
        let mut weights: Vec<f64> = order.iter().map(|&i| self.users[i].weight).collect();
        let mut perturbed = false;
        for k in 1..weights.len() {
            if weights[k] <= weights[k - 1] {
                weights[k] = weights[k - 1] + TIE_PERTURBATION * k as f64;
                perturbed = true;
            }
        }
        if perturbed {
            warn!("tied noback weights perturbed to make them distinct");
        }
        let users = order.iter().map(|&i| &self.users[i]).collect();
        Sorted { order, users, weights, perturbed }
    }
}

impl Sorted<'_> {
    /// `sum_{k >= l} G_k^{-1}(1 - lambda / w_k)`.
    fn served_mass(&self, l: usize, lambda: f64, ops: &mut u64) -> f64 {
        *ops += (self.users.len() - l) as u64;
        (l..self.users.len())
            .map(|k| self.users[k].inv_cdf(1.0 - lambda / self.weights[k]))
            .sum()
    }
}

/// Closed-form multiplier for uniform distributions, `l` being a position in
/// increasing-weight order:
/// `(sum_{k>=l} b_k - c) / (sum_{k>=l} (b_k - a_k) / w_k)`.
pub fn lambda_uniform(instance: &NobackInstance, l: usize) -> Result<f64> {
    if !instance.all_uniform() {
        return Err(Error::domain("closed-form multiplier needs uniform distributions"));
    }
    let s = instance.sorted();
    lambda_uniform_sorted(&s, l, instance.capacity_f64(), &mut 0)
}

fn lambda_uniform_sorted(s: &Sorted<'_>, l: usize, c: f64, ops: &mut u64) -> Result<f64> {
    if l >= s.users.len() {
        return Err(Error::domain(format!("threshold position {l} out of range")));
    }
    *ops += (s.users.len() - l) as u64;
    let (num, den) = (l..s.users.len()).fold((-c, 0.0), |(num, den), k| {
        let u = s.users[k];
        (num + u.b, den + (u.b - u.a) / s.weights[k])
    });
    Ok(num / den)
}

/// Multiplier in `(0, w_l]` solving `sum_{k>=l} G_k^{-1}(1 - lambda / w_k) = c`
/// by bisection; the left side is non-increasing in `lambda`.
pub fn lambda_bisect(instance: &NobackInstance, l: usize, tol: f64) -> Result<f64> {
    let s = instance.sorted();
    if l >= s.users.len() {
        return Err(Error::domain(format!("threshold position {l} out of range")));
    }
    bisect(&s, l, 0.0, s.weights[l], instance.capacity_f64(), tol, &mut 0)
}

fn bisect(
    s: &Sorted<'_>,
    l: usize,
    lo: f64,
    hi: f64,
    c: f64,
    tol: f64,
    ops: &mut u64,
) -> Result<f64> {
    let at_hi = s.served_mass(l, hi, ops);
    if (at_hi - c).abs() <= tol {
        return Ok(hi);
    }
    let at_lo = s.served_mass(l, lo, ops);
    if !(at_lo >= c - tol && at_hi <= c + tol) {
        return Err(Error::Numerical(format!(
            "multiplier not bracketed on [{lo}, {hi}]: mass {at_lo} .. {at_hi} vs capacity {c}"
        )));
    }
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let mass = s.served_mass(l, mid, ops);
        if (mass - c).abs() <= tol {
            return Ok(mid);
        }
        if mass > c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = 0.5 * (lo + hi);
    if (s.served_mass(l, mid, ops) - c).abs() <= tol {
        Ok(mid)
    } else {
        Err(Error::Numerical(format!(
            "bisection did not reach tolerance {tol} in {BISECTION_MAX_ITER} iterations"
        )))
    }
}

/// Optimal feedback-free rates for linear costs.
pub fn noback_solve(instance: &NobackInstance) -> Result<NobackSolution> {
    let n = instance.users.len();
    let c = instance.capacity_f64();
    let s = instance.sorted();
    let mut ops = 0u64;
    let mut sorted_rates = vec![0.0; n];

    let finish = |sorted_rates: Vec<f64>, multiplier: f64, threshold: Option<usize>, ops: u64| {
        let mut rates = vec![0.0; n];
        for (pos, &orig) in s.order.iter().enumerate() {
            rates[orig] = sorted_rates[pos];
        }
        Ok(NobackSolution {
            rates,
            multiplier,
            threshold_user: threshold.map(|pos| s.order[pos]),
            weights_perturbed: s.perturbed,
            ops,
        })
    };

    if s.users.iter().map(|u| u.b).sum::<f64>() <= c {
        return finish(s.users.iter().map(|u| u.b).collect(), 0.0, Some(0), ops);
    }

    // first position whose own weight already pushes the served mass under capacity
    let l = (0..n)
        .find(|&l| s.served_mass(l, s.weights[l], &mut ops) <= c)
        .unwrap_or(n);
    let prev_weight = if l == 0 { 0.0 } else { s.weights[l - 1] };

    let interior = if l == n {
        None
    } else if instance.all_uniform() {
        let lambda = lambda_uniform_sorted(&s, l, c, &mut ops)?;
        (lambda > prev_weight).then_some(lambda)
    } else if l > 0 && s.served_mass(l, prev_weight, &mut ops) <= c {
        None
    } else {
        Some(bisect(&s, l, prev_weight, s.weights[l], c, BISECTION_TOL, &mut ops)?)
    };

    match interior {
        Some(lambda) => {
            for (k, rate) in sorted_rates.iter_mut().enumerate().skip(l) {
                *rate = s.users[k].inv_cdf(1.0 - lambda / s.weights[k]);
            }
            ops += (n - l) as u64;
            finish(sorted_rates, lambda, Some(l), ops)
        }
        None => {
            // multiplier sits at w_{l-1}; user l-1 absorbs the leftover capacity
            for (k, rate) in sorted_rates.iter_mut().enumerate().skip(l) {
                *rate = s.users[k].inv_cdf(1.0 - prev_weight / s.weights[k]);
            }
            ops += (n - l) as u64;
            let used: f64 = sorted_rates[l..].iter().sum();
            sorted_rates[l - 1] = (c - used).max(0.0);
            finish(sorted_rates, prev_weight, Some(l - 1), ops)
        }
    }
}

/// `sum_i w_i E[(p_i - alpha_i)^+]`.
pub fn expected_cost(instance: &NobackInstance, alpha: &[f64]) -> Result<f64> {
    if alpha.len() != instance.users.len() {
        return Err(Error::domain("rate vector length does not match user count"));
    }
    alpha
        .iter()
        .zip(&instance.users)
        .enumerate()
        .map(|(i, (&a, u))| {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::domain(format!("alpha[{i}] = {a} outside [0, 1]")));
            }
            Ok(u.weight * u.expected_shortfall(a))
        })
        .sum()
}

/// Optimality certificate for a noback solution.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// Largest `|lambda - w_i (1 - G_i(alpha_i))|` over users with `alpha_i` in `(a_i, b_i)`.
    pub interior_residual: f64,
    /// Largest `w_i - lambda` over starved users (should be <= 0).
    pub starved_excess: f64,
    /// A starved user outweighs a served one.
    pub threshold_violated: bool,
    /// `sum alpha - c` (0 when capacity binds).
    pub capacity_gap: f64,
}

pub fn kkt_report(instance: &NobackInstance, sol: &NobackSolution) -> KktReport {
    let lambda = sol.multiplier;
    let mut interior_residual: f64 = 0.0;
    let mut starved_excess = f64::NEG_INFINITY;
    for (u, &a) in instance.users.iter().zip(&sol.rates) {
        if a > u.a && a < u.b {
            interior_residual = interior_residual.max((lambda - u.weight * (1.0 - u.cdf(a))).abs());
        }
        if a == 0.0 {
            starved_excess = starved_excess.max(u.weight - lambda);
        }
    }
    let threshold_violated = instance.users.iter().zip(&sol.rates).any(|(ui, &ai)| {
        ai == 0.0
            && instance
                .users
                .iter()
                .zip(&sol.rates)
                .any(|(uj, &aj)| uj.weight < ui.weight && aj > 0.0)
    });
    KktReport {
        interior_residual,
        starved_excess,
        threshold_violated,
        capacity_gap: sol.rates.iter().sum::<f64>() - instance.capacity_f64(),
    }
}
