use num_traits::Zero;

use super::concmin::{conc_min, ConcMinSolution};
use crate::error::{Error, Result};
use crate::model::{CostFunction, CostKind, GridProb, RateVector, Rational, UserProfile};

/// A user that is already guaranteed pause-free service and can be upgraded
/// towards its full-quality consumption rate.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityUser {
    /// Consumption rate at the lowest acceptable quality.
    pub p: GridProb,
    /// Consumption rate at the highest available quality.
    pub q_full: GridProb,
    /// Concave degradation cost, evaluated on the shortfall `q - rate`.
    pub degradation: CostKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityAllocation {
    /// Total service rates `p_i + beta_i`.
    pub rates: RateVector,
    /// The headroom instance actually solved: rates `q_i - p_i`.
    pub surrogate: Vec<UserProfile>,
    pub surrogate_capacity: Rational,
    pub surrogate_solution: ConcMinSolution,
}

/// Spends the capacity left over after pause-free service on quality upgrades.
///
/// With `beta_i = rate_i - p_i` the degradation program has the same shape as
/// the pause program: headroom `q_i - p_i`, capacity `m / b - sum p_i`.
pub fn reduce_quality_degradation(
    users: &[QualityUser],
    channels: usize,
    frame_mult: u32,
) -> Result<QualityAllocation> {
    if users.is_empty() {
        return Err(Error::domain("instance has no users"));
    }
    let c = Rational::new(channels as i64, frame_mult as i64);
    let base: Rational = users.iter().map(|u| u.p.to_rational()).sum();
    if base > c {
        return Err(Error::Refused(
            "quality upgrades need an underloaded system (sum p * b <= m)".into(),
        ));
    }

    let mut surrogate = Vec::with_capacity(users.len());
    for (i, u) in users.iter().enumerate() {
        if u.q_full.denom() != u.p.denom() {
            return Err(Error::domain(format!("user {i}: p and q on different grids")));
        }
        if u.q_full < u.p {
            return Err(Error::domain(format!("user {i}: q = {} below p = {}", u.q_full, u.p)));
        }
        let headroom = GridProb::new(u.q_full.z() - u.p.z(), u.p.denom())?;
        surrogate.push(UserProfile::new(
            headroom,
            CostFunction::new(u.degradation.clone(), headroom)?,
        )?);
    }

    let surrogate_capacity = c - base;
    let surrogate_solution = if surrogate_capacity.is_zero() {
        // nothing to distribute; conc_min requires positive capacity
        let rates = RateVector::zeros(users.len());
        let cost = super::concmin::solution_cost(&surrogate, &rates)?;
        ConcMinSolution { rates, cost, fractional_user: None }
    } else {
        conc_min(&surrogate, surrogate_capacity)?
    };
    let rates = RateVector::new(
        users
            .iter()
            .zip(&surrogate_solution.rates.alpha)
            .map(|(u, &beta)| u.p.to_rational() + beta)
            .collect(),
    );
    Ok(QualityAllocation { rates, surrogate, surrogate_capacity, surrogate_solution })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::brute_force_alpha;

    fn qu(p: u32, q: u32, d: u32) -> QualityUser {
        QualityUser {
            p: GridProb::new(p, d).unwrap(),
            q_full: GridProb::new(q, d).unwrap(),
            degradation: CostKind::PowerLaw { theta: 0.5 },
        }
    }

    #[test]
    fn no_headroom_keeps_base_rates() {
        let users = vec![qu(2, 2, 10), qu(3, 3, 10)];
        let a = reduce_quality_degradation(&users, 1, 1).unwrap();
        assert_eq!(a.rates.alpha, vec![Rational::new(1, 5), Rational::new(3, 10)]);
    }

    #[test]
    fn enough_capacity_gives_full_quality() {
        let users = vec![qu(2, 6, 10), qu(2, 8, 10)];
        let a = reduce_quality_degradation(&users, 2, 1).unwrap();
        assert_eq!(a.rates.alpha, vec![Rational::new(3, 5), Rational::new(4, 5)]);
    }

    #[test]
    fn two_user_upgrade_matches_enumeration() {
        let users = vec![qu(2, 6, 10), qu(2, 8, 10)];
        let a = reduce_quality_degradation(&users, 1, 1).unwrap();
        assert_eq!(a.surrogate_capacity, Rational::new(3, 5));
        let heads: Vec<_> = a.surrogate.iter().map(|u| u.p.to_rational()).collect();
        assert_eq!(heads, vec![Rational::new(2, 5), Rational::new(3, 5)]);
        let oracle = brute_force_alpha(&a.surrogate, a.surrogate_capacity).unwrap();
        assert!((oracle.cost - a.surrogate_solution.cost).abs() < 1e-12);
        assert_eq!(a.rates.total(), Rational::from_integer(1));
    }

    #[test]
    fn overloaded_is_refused() {
        let users = vec![qu(6, 8, 10), qu(6, 8, 10)];
        assert!(matches!(reduce_quality_degradation(&users, 1, 1), Err(Error::Refused(_))));
    }
}
