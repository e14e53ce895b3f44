use num_traits::Zero;

use super::concmin::{finish, underloaded, validate_instance, ConcMinSolution};
use crate::error::{Error, Result};
use crate::model::{Rational, UserProfile};

/// Largest instance the exhaustive vertex enumeration accepts.
pub const BRUTE_FORCE_MAX_USERS: usize = 12;

/// Enumerates every vertex of the rate polytope: each user but one is either
/// fully served or starved, the remaining user takes whatever capacity is left.
/// Exponential in `n`; used as an independent check on [`super::conc_min`].
pub fn brute_force_alpha(users: &[UserProfile], c: Rational) -> Result<ConcMinSolution> {
    validate_instance(users, c)?;
    let n = users.len();
    if n > BRUTE_FORCE_MAX_USERS {
        return Err(Error::Refused(format!(
            "brute force limited to {BRUTE_FORCE_MAX_USERS} users, got {n}"
        )));
    }
    let p: Vec<Rational> = users.iter().map(|u| u.p.to_rational()).collect();
    if underloaded(users, c) {
        return finish(users, p);
    }

    let mut best: Option<(f64, Vec<Rational>)> = None;
    for k in 0..n {
        let others: Vec<usize> = (0..n).filter(|&i| i != k).collect();
        for mask in 0u32..(1 << others.len()) {
            let mut alpha = vec![Rational::zero(); n];
            let mut served = Rational::zero();
            for (bit, &i) in others.iter().enumerate() {
                if mask >> bit & 1 == 1 {
                    alpha[i] = p[i];
                    served += p[i];
                }
            }
            let rest = c - served;
            if rest < Rational::zero() || rest > p[k] {
                continue;
            }
            alpha[k] = rest;
            let cost: f64 = users
                .iter()
                .zip(&alpha)
                .map(|(u, &a)| u.cost.value(crate::model::rational_to_f64(u.p.to_rational() - a)))
                .sum();
            if best.as_ref().is_none_or(|(b, _)| cost < *b) {
                best = Some((cost, alpha));
            }
        }
    }
    let (_, alpha) = best.ok_or_else(|| Error::Numerical("no feasible vertex".into()))?;
    finish(users, alpha)
}
