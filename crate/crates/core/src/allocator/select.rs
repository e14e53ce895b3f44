use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{rational_to_f64, RateVector, Rational};

/// `m` slots, each holding a user index or `None` (vacant).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotList {
    pub slots: Vec<Option<usize>>,
}

impl SlotList {
    /// How many slots each of `n` users occupies.
    pub fn counts(&self, n: usize) -> Vec<u32> {
        let mut c = vec![0; n];
        for u in self.slots.iter().flatten() {
            c[*u] += 1;
        }
        c
    }
}

/// The unit-interval decomposition of a rate vector over `m` slots.
///
/// Rates are poured into consecutive unit intervals in user order; a rate
/// that overflows a slot spills into the next one, so each user spans at most
/// two slots. Boundaries are computed exactly; only the per-draw comparison
/// uses floating point.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotPlan {
    /// Per slot: `(user, mass)` pairs in fill order.
    slots: Vec<Vec<(usize, Rational)>>,
    /// Per slot: cumulative masses as floats, for sampling.
    cumulative: Vec<Vec<f64>>,
}

impl SlotPlan {
    pub fn new(alpha: &RateVector, m: usize) -> Result<Self> {
        let one = Rational::one();
        for (i, &a) in alpha.alpha.iter().enumerate() {
            if a < Rational::zero() || a > one {
                return Err(Error::domain(format!("alpha[{i}] = {a} outside [0, 1]")));
            }
        }
        if alpha.total() > Rational::from_integer(m as i64) {
            return Err(Error::domain(format!(
                "total rate {} exceeds {m} slots",
                alpha.total()
            )));
        }

        let mut slots: Vec<Vec<(usize, Rational)>> = vec![Vec::new(); m];
        let mut slot = 0;
        let mut filled = Rational::zero();
        for (user, &a) in alpha.alpha.iter().enumerate() {
            let mut left = a;
            while left > Rational::zero() {
                let room = one - filled;
                let take = left.min(room);
                slots[slot].push((user, take));
                filled += take;
                left -= take;
                if filled == one {
                    slot += 1;
                    filled = Rational::zero();
                }
            }
        }
        let cumulative = slots
            .iter()
            .map(|s| {
                let mut acc = Rational::zero();
                s.iter()
                    .map(|&(_, b)| {
                        acc += b;
                        rational_to_f64(acc)
                    })
                    .collect()
            })
            .collect();
        Ok(SlotPlan { slots, cumulative })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// `(user, mass)` pairs of one slot.
    pub fn slot(&self, j: usize) -> &[(usize, Rational)] {
        &self.slots[j]
    }

    /// Draws one user per slot with probability equal to its mass there.
    ///
    /// This is an inverse-CDF categorical draw; it has the same law as taking
    /// the argmax of independent exponentials with rates equal to the masses.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> SlotList {
        let slots = self
            .slots
            .iter()
            .zip(&self.cumulative)
            .map(|(entries, cum)| {
                if entries.is_empty() {
                    return None;
                }
                let u: f64 = rng.random();
                cum.iter().position(|&c| u < c).map(|k| entries[k].0)
            })
            .collect();
        SlotList { slots }
    }
}

/// One random draw of `m` slot users for the rate vector `alpha`.
pub fn select_users<R: Rng + ?Sized>(alpha: &RateVector, m: usize, rng: &mut R) -> Result<SlotList> {
    Ok(SlotPlan::new(alpha, m)?.draw(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rv(xs: &[(i64, i64)]) -> RateVector {
        RateVector::new(xs.iter().map(|&(a, b)| Rational::new(a, b)).collect())
    }

    #[test]
    fn exact_fill() {
        let plan = SlotPlan::new(&rv(&[(1, 2), (1, 2), (1, 1)]), 2).unwrap();
        assert_eq!(plan.slot(0), &[(0, Rational::new(1, 2)), (1, Rational::new(1, 2))]);
        assert_eq!(plan.slot(1), &[(2, Rational::from_integer(1))]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let s = plan.draw(&mut rng);
            assert_eq!(s.slots[1], Some(2));
            assert!(matches!(s.slots[0], Some(0) | Some(1)));
        }
    }

    #[test]
    fn single_full_user() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = select_users(&rv(&[(1, 1)]), 1, &mut rng).unwrap();
        assert_eq!(s.slots, vec![Some(0)]);
    }

    #[test]
    fn spill_over() {
        let plan = SlotPlan::new(&rv(&[(7, 10), (7, 10), (6, 10)]), 2).unwrap();
        assert_eq!(plan.slot(0), &[(0, Rational::new(7, 10)), (1, Rational::new(3, 10))]);
        assert_eq!(plan.slot(1), &[(1, Rational::new(2, 5)), (2, Rational::new(3, 5))]);
    }

    #[test]
    fn underloaded_leaves_vacancies() {
        let plan = SlotPlan::new(&rv(&[(1, 2), (1, 4)]), 3).unwrap();
        assert!(plan.slot(1).is_empty() && plan.slot(2).is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut vacant = 0;
        for _ in 0..10_000 {
            let s = plan.draw(&mut rng);
            assert_eq!(s.slots[1], None);
            assert_eq!(s.slots[2], None);
            if s.slots[0].is_none() {
                vacant += 1;
            }
        }
        // residual mass 1/4
        assert!((vacant as f64 / 10_000.0 - 0.25).abs() < 0.03);
    }

    #[test]
    fn rejects_rates_above_one() {
        assert!(SlotPlan::new(&rv(&[(3, 2)]), 2).is_err());
        assert!(SlotPlan::new(&rv(&[(1, 1), (1, 1)]), 1).is_err());
    }
}
