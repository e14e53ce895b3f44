use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::model::{GridProb, Rational};

/// Counts dynamic-programming cell updates.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct OpCounter {
    pub cells: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetSumResult {
    /// Chosen user indices, ascending.
    pub chosen: Vec<usize>,
    pub total: Rational,
}

/// Largest subset sum of `weights[i]` over `i` in `pool` not exceeding `capacity`.
pub fn subset_sum(pool: &[usize], weights: &[GridProb], capacity: Rational) -> Result<SubsetSumResult> {
    subset_sum_counted(pool, weights, capacity, &mut OpCounter::default())
}

/// [`subset_sum`] that also records the number of table cells touched.
///
/// The table runs over integer grid numerators with capacity `floor(capacity * Z)`.
/// Backtracking excludes an item whenever the remaining sum is reachable
/// without it, so ties resolve towards lower indices.
pub fn subset_sum_counted(
    pool: &[usize],
    weights: &[GridProb],
    capacity: Rational,
    counter: &mut OpCounter,
) -> Result<SubsetSumResult> {
    if capacity < Rational::zero() {
        return Err(Error::domain(format!("subset-sum capacity {capacity} is negative")));
    }
    if pool.is_empty() {
        return Ok(SubsetSumResult { chosen: Vec::new(), total: Rational::zero() });
    }
    let denom = weights[pool[0]].denom();
    if pool.iter().any(|&i| weights[i].denom() != denom) {
        return Err(Error::domain("subset-sum weights are not on one grid"));
    }

    let pool_sum: u64 = pool.iter().map(|&i| weights[i].z() as u64).sum();
    let scaled = (capacity * Rational::from_integer(denom as i64)).floor();
    let cap = scaled.to_integer().to_u64().unwrap_or(0).min(pool_sum) as usize;

    // reach[k][s]: sum s is attainable using the first k pool items
    let mut reach = vec![vec![false; cap + 1]; pool.len() + 1];
    reach[0][0] = true;
    for (k, &item) in pool.iter().enumerate() {
        let w = weights[item].z() as usize;
        let (done, rest) = reach.split_at_mut(k + 1);
        let prev = &done[k];
        let next = &mut rest[0];
        for s in 0..=cap {
            next[s] = prev[s] || (s >= w && prev[s - w]);
        }
        counter.cells += cap as u64 + 1;
    }

    let best = (0..=cap).rev().find(|&s| reach[pool.len()][s]).unwrap_or(0);
    let mut chosen = Vec::new();
    let mut s = best;
    for k in (0..pool.len()).rev() {
        if reach[k][s] {
            continue;
        }
        let item = pool[k];
        chosen.push(item);
        s -= weights[item].z() as usize;
    }
    debug_assert_eq!(s, 0);
    chosen.sort_unstable();
    Ok(SubsetSumResult {
        chosen,
        total: Rational::new(best as i64, denom as i64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(zs: &[u32], d: u32) -> Vec<GridProb> {
        zs.iter().map(|&z| GridProb::new(z, d).unwrap()).collect()
    }

    // exhaustive reference, also used to freeze the worked example below
    fn exhaustive(pool: &[usize], w: &[GridProb], cap: Rational) -> Rational {
        let mut best = Rational::zero();
        for mask in 0u32..(1 << pool.len()) {
            let s: Rational = pool
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &i)| w[i].to_rational())
                .sum();
            if s <= cap && s > best {
                best = s;
            }
        }
        best
    }

    #[test]
    fn worked_example() {
        let w = grid(&[8, 9, 10], 20);
        let cap = Rational::new(9, 10);
        assert_eq!(exhaustive(&[0, 1, 2], &w, cap), Rational::new(9, 10));
        let r = subset_sum(&[0, 1, 2], &w, cap).unwrap();
        assert_eq!(r.chosen, vec![0, 2]);
        assert_eq!(r.total, Rational::new(9, 10));
    }

    #[test]
    fn zero_capacity_takes_nothing() {
        let w = grid(&[3, 7, 1], 10);
        let r = subset_sum(&[0, 1, 2], &w, Rational::zero()).unwrap();
        assert!(r.chosen.is_empty());
        assert_eq!(r.total, Rational::zero());
    }

    #[test]
    fn large_capacity_takes_everything() {
        let w = grid(&[1, 1], 2);
        let r = subset_sum(&[0, 1], &w, Rational::from_integer(2)).unwrap();
        assert_eq!(r.chosen, vec![0, 1]);
        assert_eq!(r.total, Rational::from_integer(1));
    }

    #[test]
    fn off_grid_capacity_floors() {
        let w = grid(&[1, 2], 4);
        // 5/6 of a unit is 3.33 grid steps: best is 3/4
        let r = subset_sum(&[0, 1], &w, Rational::new(5, 6)).unwrap();
        assert_eq!(r.total, Rational::new(3, 4));
    }

    #[test]
    fn ties_prefer_low_indices() {
        let w = grid(&[1, 1, 1], 4);
        let r = subset_sum(&[0, 1, 2], &w, Rational::new(1, 2)).unwrap();
        assert_eq!(r.chosen, vec![0, 1]);
    }

    #[test]
    fn negative_capacity_is_error() {
        let w = grid(&[1], 4);
        assert!(subset_sum(&[0], &w, Rational::new(-1, 4)).is_err());
    }

    #[test]
    fn respects_pool() {
        let w = grid(&[5, 5, 5], 10);
        let r = subset_sum(&[2], &w, Rational::from_integer(3)).unwrap();
        assert_eq!(r.chosen, vec![2]);
    }
}
