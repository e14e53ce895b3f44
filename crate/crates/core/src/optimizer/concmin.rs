//! Concave cost minimisation over the rate polytope
//! `{0 <= alpha_i <= p_i, sum alpha_i <= c}`.
//!
//! A concave objective is minimised at a vertex, and every vertex has at most
//! one user whose rate is strictly between `0` and `p_i`. For each candidate
//! fractional user `k` the remaining users are either fully served or fully
//! starved; the cost is then a concave function of the served mass, so only
//! the largest served set (`L_k`) and the largest starved set (`R_k`) need to
//! be compared. Both come from the subset-sum table.

use num_traits::Zero;

use super::subset_sum::{subset_sum_counted, OpCounter};
use crate::error::{Error, Result};
use crate::model::{rational_to_f64, shared_denominator, GridProb, RateVector, Rational, UserProfile};

#[derive(Debug, Clone, PartialEq)]
pub struct ConcMinSolution {
    pub rates: RateVector,
    pub cost: f64,
    /// The user whose rate is strictly inside `(0, p_k)`, if any.
    pub fractional_user: Option<usize>,
}

/// `sum_i V_i(p_i - alpha_i)`.
pub fn solution_cost(users: &[UserProfile], rates: &RateVector) -> Result<f64> {
    if users.len() != rates.len() {
        return Err(Error::domain("rate vector length does not match user count"));
    }
    users
        .iter()
        .zip(&rates.alpha)
        .map(|(u, &a)| u.cost.eval(rational_to_f64(u.p.to_rational() - a)))
        .sum()
}

pub(crate) fn validate_instance(users: &[UserProfile], c: Rational) -> Result<()> {
    if users.is_empty() {
        return Err(Error::domain("instance has no users"));
    }
    if c <= Rational::zero() {
        return Err(Error::domain(format!("capacity {c} must be positive")));
    }
    shared_denominator(users.iter().map(|u| &u.p))?;
    Ok(())
}

pub(crate) fn finish(users: &[UserProfile], alpha: Vec<Rational>) -> Result<ConcMinSolution> {
    let fractional_user = alpha
        .iter()
        .zip(users)
        .position(|(&a, u)| a > Rational::zero() && a < u.p.to_rational());
    let rates = RateVector::new(alpha);
    let cost = solution_cost(users, &rates)?;
    Ok(ConcMinSolution { rates, cost, fractional_user })
}

pub(crate) fn underloaded(users: &[UserProfile], c: Rational) -> bool {
    users.iter().map(|u| u.p.to_rational()).sum::<Rational>() <= c
}

/// Optimal rates for the lower-bound program.
///
/// Optimality needs a shared terminal slope: `V_i(p_i) = V * p_i` with the same
/// `V` for every user. Instances mixing, say, linear slopes get a feasible
/// extreme point that may not be the cheapest.
pub fn conc_min(users: &[UserProfile], c: Rational) -> Result<ConcMinSolution> {
    conc_min_counted(users, c, &mut OpCounter::default())
}

/// [`conc_min`] recording subset-sum table work in `counter`.
pub fn conc_min_counted(
    users: &[UserProfile],
    c: Rational,
    counter: &mut OpCounter,
) -> Result<ConcMinSolution> {
    validate_instance(users, c)?;
    let n = users.len();
    let p: Vec<GridProb> = users.iter().map(|u| u.p).collect();
    let p_rat: Vec<Rational> = p.iter().map(|g| g.to_rational()).collect();
    let total: Rational = p_rat.iter().copied().sum();

    if total <= c {
        return finish(users, p_rat);
    }
    if n == 1 {
        return finish(users, vec![c.min(p_rat[0])]);
    }

    let mut best: Option<(f64, Vec<Rational>)> = None;
    for k in 0..n {
        let others: Vec<usize> = (0..n).filter(|&i| i != k).collect();
        let others_total = total - p_rat[k];

        // L: fully serve the heaviest set that fits, k takes the remainder.
        let served = subset_sum_counted(&others, &p, c, counter)?;
        let left = {
            let alpha_k = c - served.total;
            (alpha_k <= p_rat[k]).then(|| {
                let mut alpha = vec![Rational::zero(); n];
                for &i in &served.chosen {
                    alpha[i] = p_rat[i];
                }
                alpha[k] = alpha_k;
                alpha
            })
        };

        // R: fully starve the heaviest set whose loss fits in the overload.
        let starved = subset_sum_counted(&others, &p, total - c, counter)?;
        let right = {
            let alpha_k = c - others_total + starved.total;
            (alpha_k >= Rational::zero() && alpha_k <= p_rat[k]).then(|| {
                let mut alpha = p_rat.clone();
                for &i in &starved.chosen {
                    alpha[i] = Rational::zero();
                }
                alpha[k] = alpha_k;
                alpha
            })
        };

        let scored = |alpha: Option<Vec<Rational>>| -> Result<Option<(f64, Vec<Rational>)>> {
            match alpha {
                Some(a) => Ok(Some((solution_cost(users, &RateVector::new(a.clone()))?, a))),
                None => Ok(None),
            }
        };
        let candidate = match (scored(left)?, scored(right)?) {
            (Some(l), Some(r)) => Some(if l.0 <= r.0 { l } else { r }),
            (l, r) => l.or(r),
        };
        if let Some((cost, alpha)) = candidate {
            if best.as_ref().is_none_or(|(b, _)| cost < *b) {
                best = Some((cost, alpha));
            }
        }
    }

    let (_, alpha) = best.ok_or_else(|| {
        Error::Numerical("no feasible extreme point found in an overloaded instance".into())
    })?;
    finish(users, alpha)
}

/// The lower bound on the asymptotic cost of any ergodic policy.
pub fn benchmark_cost(users: &[UserProfile], c: Rational) -> Result<f64> {
    Ok(conc_min(users, c)?.cost)
}
