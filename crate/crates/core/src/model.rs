//! Domain types shared by the solvers and the simulator.
//!
//! Consumption rates live on a finite grid `z / Z` with one denominator per
//! system. Everything on the feasibility path (rate sums, capacity checks,
//! slot filling) is carried as exact rationals; floating point only appears
//! inside cost evaluation and statistics.

use std::cmp::Ordering;
use std::fmt;

use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Exact rational used for rates and capacities.
pub type Rational = Ratio<i64>;

/// Absolute slack used by the midpoint-concavity check.
pub const CONCAVITY_EPS: f64 = 1e-9;

/// Slack allowed when a cost is evaluated at a point computed in floating point.
const DOMAIN_EPS: f64 = 1e-12;

pub fn rational_to_f64(r: Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// A probability of the form `z / Z` on the consumption grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridProb {
    z: u32,
    denom: u32,
}

impl GridProb {
    pub fn new(z: u32, denom: u32) -> Result<Self> {
        if denom == 0 {
            return Err(Error::domain("grid denominator must be positive"));
        }
        if z > denom {
            return Err(Error::domain(format!("grid value {z}/{denom} exceeds 1")));
        }
        Ok(GridProb { z, denom })
    }

    pub fn zero(denom: u32) -> Self {
        GridProb { z: 0, denom }
    }

    pub fn one(denom: u32) -> Self {
        GridProb { z: denom, denom }
    }

    /// Numerator on the grid.
    pub fn z(&self) -> u32 {
        self.z
    }

    /// Shared grid denominator `Z`.
    pub fn denom(&self) -> u32 {
        self.denom
    }

    pub fn to_rational(self) -> Rational {
        Rational::new(self.z as i64, self.denom as i64)
    }

    pub fn to_f64(self) -> f64 {
        self.z as f64 / self.denom as f64
    }

    /// Nearest grid point to `x`, rounding half-way values up.
    pub fn nearest(x: f64, denom: u32) -> Self {
        let scaled = (x.clamp(0.0, 1.0) * denom as f64 + 0.5).floor();
        GridProb {
            z: (scaled as u32).min(denom),
            denom,
        }
    }

    /// Nearest grid point to the exact ratio `num / den`, rounding half-way up.
    pub fn nearest_ratio(num: u64, den: u64, denom: u32) -> Self {
        assert!(den > 0, "ratio with zero denominator");
        // round(num * Z / den) with ties up == floor((2 num Z + den) / (2 den))
        let z = (2 * num * denom as u64 + den) / (2 * den);
        GridProb {
            z: (z as u32).min(denom),
            denom,
        }
    }
}

impl PartialOrd for GridProb {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for GridProb {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.z as u64 * other.denom as u64).cmp(&(other.z as u64 * self.denom as u64))
    }
}

impl fmt::Display for GridProb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.z, self.denom)
    }
}

/// Checks that all values share one denominator and returns it.
pub fn shared_denominator<'a>(values: impl IntoIterator<Item = &'a GridProb>) -> Result<u32> {
    let mut it = values.into_iter();
    let first = match it.next() {
        Some(g) => g.denom,
        None => return Err(Error::domain("empty grid value set")),
    };
    for g in it {
        if g.denom != first {
            return Err(Error::domain(format!(
                "mixed grid denominators {} and {}",
                first, g.denom
            )));
        }
    }
    Ok(first)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CostKind {
    /// `V(x) = p^theta * x^(1 - theta)`, so that `V(p) = p`.
    PowerLaw { theta: f64 },
    /// `V(x) = slope * x`.
    Linear { slope: f64 },
    /// Piecewise-linear interpolation through `(x, V(x))` breakpoints sorted by `x`.
    /// Beyond the last breakpoint the final segment is extended.
    Table { breakpoints: Vec<(f64, f64)> },
}

/// A user's dissatisfaction as a function of its pause frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct CostFunction {
    kind: CostKind,
    anchor: GridProb,
}

impl CostFunction {
    pub fn new(kind: CostKind, anchor: GridProb) -> Result<Self> {
        match &kind {
            CostKind::PowerLaw { theta } if !(*theta > 0.0 && *theta < 1.0) => {
                return Err(Error::domain(format!("power-law theta {theta} not in (0,1)")));
            }
            CostKind::Linear { slope } if !(*slope > 0.0 && slope.is_finite()) => {
                return Err(Error::domain(format!("linear slope {slope} must be positive")));
            }
            CostKind::Table { breakpoints } => {
                if breakpoints.len() < 2 {
                    return Err(Error::domain("cost table needs at least two breakpoints"));
                }
                if breakpoints.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return Err(Error::domain("cost table breakpoints must be strictly increasing in x"));
                }
                if breakpoints[0].0 > 0.0 {
                    return Err(Error::domain("cost table must start at x = 0"));
                }
            }
            _ => {}
        }
        Ok(CostFunction { kind, anchor })
    }

    pub fn power_law(theta: f64, anchor: GridProb) -> Result<Self> {
        Self::new(CostKind::PowerLaw { theta }, anchor)
    }

    pub fn linear(slope: f64, anchor: GridProb) -> Result<Self> {
        Self::new(CostKind::Linear { slope }, anchor)
    }

    pub fn kind(&self) -> &CostKind {
        &self.kind
    }

    /// The rate `p` at which the terminal value `V(p)` is anchored.
    pub fn anchor(&self) -> GridProb {
        self.anchor
    }

    /// `V(x)` for `x` in `[0, p]`.
    pub fn eval(&self, x: f64) -> Result<f64> {
        let p = self.anchor.to_f64();
        if !(x >= -DOMAIN_EPS && x <= p + DOMAIN_EPS) {
            return Err(Error::domain(format!("cost argument {x} outside [0, {p}]")));
        }
        Ok(self.value(x.clamp(0.0, p)))
    }

    /// `V(x)` on the whole unit interval; used for empirical pause frequencies,
    /// which can overshoot `p` on finite horizons. Negative inputs are clamped to 0.
    pub fn value(&self, x: f64) -> f64 {
        let x = x.max(0.0);
        match &self.kind {
            CostKind::PowerLaw { theta } => {
                self.anchor.to_f64().powf(*theta) * x.powf(1.0 - theta)
            }
            CostKind::Linear { slope } => slope * x,
            CostKind::Table { breakpoints } => interpolate(breakpoints, x),
        }
    }
}

fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let seg = points
        .windows(2)
        .position(|w| x <= w[1].0)
        .unwrap_or(points.len() - 2);
    let (x0, y0) = points[seg];
    let (x1, y1) = points[seg + 1];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// Free-function form of [`CostFunction::eval`] with an explicit rate.
pub fn eval_cost(cost: &CostFunction, p: GridProb, x: f64) -> Result<f64> {
    if p != cost.anchor {
        return Err(Error::domain(format!(
            "cost anchored at {} evaluated for rate {p}",
            cost.anchor
        )));
    }
    cost.eval(x)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CostViolation {
    NonzeroOrigin { value: f64 },
    Decreasing { x: f64, y: f64 },
    NotConcave { x: f64, y: f64, gap: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub points: usize,
    pub violation: Option<CostViolation>,
}

impl CostReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

/// Samples `[0, p]` uniformly and checks `V(0) = 0`, monotonicity and
/// midpoint concavity. Reports the first violation found.
pub fn validate_cost(cost: &CostFunction, grid_points: usize) -> Result<CostReport> {
    if grid_points < 3 {
        return Err(Error::domain("cost validation needs at least 3 grid points"));
    }
    let p = cost.anchor.to_f64();
    let xs: Vec<f64> = (0..grid_points)
        .map(|k| p * k as f64 / (grid_points - 1) as f64)
        .collect();
    let vs: Vec<f64> = xs.iter().map(|&x| cost.value(x)).collect();
    let report = |violation| Ok(CostReport { points: grid_points, violation });

    let origin = cost.value(0.0);
    if origin.abs() > CONCAVITY_EPS {
        return report(Some(CostViolation::NonzeroOrigin { value: origin }));
    }
    for k in 1..grid_points {
        if vs[k] < vs[k - 1] - CONCAVITY_EPS {
            return report(Some(CostViolation::Decreasing { x: xs[k - 1], y: xs[k] }));
        }
    }
    // Pairs with even index sum have their midpoint on the grid.
    for i in 0..grid_points {
        for j in (i + 2..grid_points).step_by(2) {
            let mid = (i + j) / 2;
            let gap = (vs[i] + vs[j]) / 2.0 - vs[mid];
            if gap > CONCAVITY_EPS {
                return report(Some(CostViolation::NotConcave { x: xs[i], y: xs[j], gap }));
            }
        }
    }
    report(None)
}

/// A streaming user: mean consumption rate and cost of pausing.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    pub p: GridProb,
    pub cost: CostFunction,
}

impl UserProfile {
    pub fn new(p: GridProb, cost: CostFunction) -> Result<Self> {
        if cost.anchor() != p {
            return Err(Error::domain(format!(
                "cost anchored at {} for a user with rate {p}",
                cost.anchor()
            )));
        }
        Ok(UserProfile { p, cost })
    }

    pub fn power_law(p: GridProb, theta: f64) -> Result<Self> {
        Self::new(p, CostFunction::power_law(theta, p)?)
    }

    pub fn linear(p: GridProb, slope: f64) -> Result<Self> {
        Self::new(p, CostFunction::linear(slope, p)?)
    }
}

/// Per-(user, channel) ON probabilities of the block-fading channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelModel {
    n: usize,
    m: usize,
    on_prob: Vec<f64>,
}

impl ChannelModel {
    pub fn uniform(n: usize, m: usize, h: f64) -> Result<Self> {
        Self::from_matrix(n, m, vec![h; n * m])
    }

    /// Row-major `n x m` ON probabilities.
    pub fn from_matrix(n: usize, m: usize, on_prob: Vec<f64>) -> Result<Self> {
        if on_prob.len() != n * m {
            return Err(Error::domain(format!(
                "channel matrix has {} entries, expected {}",
                on_prob.len(),
                n * m
            )));
        }
        if let Some(h) = on_prob.iter().find(|&&h| !(h > 0.0 && h <= 1.0)) {
            return Err(Error::domain(format!("ON probability {h} not in (0, 1]")));
        }
        Ok(ChannelModel { n, m, on_prob })
    }

    pub fn users(&self) -> usize {
        self.n
    }

    pub fn channels(&self) -> usize {
        self.m
    }

    pub fn on_prob(&self, user: usize, channel: usize) -> f64 {
        self.on_prob[user * self.m + channel]
    }

    /// True when every channel is always ON (no fading).
    pub fn is_ideal(&self) -> bool {
        self.on_prob.iter().all(|&h| h >= 1.0)
    }

    /// Smallest ON probability across all pairs.
    pub fn min_on_prob(&self) -> f64 {
        self.on_prob.iter().copied().fold(1.0, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub n: usize,
    pub m: usize,
    /// Frame-size multiplier: one frame occupies `frame_mult` channel-epochs.
    pub frame_mult: u32,
    pub slots_per_epoch: u32,
    pub channel: ChannelModel,
    pub seed: u64,
    pub horizon: u64,
}

impl SystemConfig {
    pub fn new(n: usize, m: usize, h: f64, seed: u64, horizon: u64) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(Error::domain("system needs at least one user and one channel"));
        }
        Ok(SystemConfig {
            n,
            m,
            frame_mult: 1,
            slots_per_epoch: 1,
            channel: ChannelModel::uniform(n, m, h)?,
            seed,
            horizon,
        })
    }

    /// Capacity `m / b` in frames per epoch.
    pub fn capacity(&self) -> Rational {
        Rational::new(self.m as i64, self.frame_mult as i64)
    }
}

/// Per-user service rates `alpha_i` in frames per epoch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RateVector {
    pub alpha: Vec<Rational>,
}

impl RateVector {
    pub fn new(alpha: Vec<Rational>) -> Self {
        RateVector { alpha }
    }

    pub fn zeros(n: usize) -> Self {
        RateVector {
            alpha: vec![Rational::zero(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn total(&self) -> Rational {
        self.alpha.iter().copied().sum()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.alpha.iter().map(|&a| rational_to_f64(a)).collect()
    }

    /// Checks `0 <= alpha_i <= p_i` and `sum alpha_i <= capacity`.
    pub fn check_feasible(&self, rates: &[GridProb], capacity: Rational) -> Result<()> {
        if rates.len() != self.alpha.len() {
            return Err(Error::domain("rate vector length does not match user count"));
        }
        for (i, (&a, p)) in self.alpha.iter().zip(rates).enumerate() {
            if a < Rational::zero() || a > p.to_rational() {
                return Err(Error::domain(format!("alpha[{i}] = {a} outside [0, {p}]")));
            }
        }
        if self.total() > capacity {
            return Err(Error::domain(format!(
                "total rate {} exceeds capacity {capacity}",
                self.total()
            )));
        }
        Ok(())
    }
}
