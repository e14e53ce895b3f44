//! Exact solvers for the rate-allocation lower bound.

mod brute;
mod concmin;
mod quality;
mod subset_sum;

pub use brute::{brute_force_alpha, BRUTE_FORCE_MAX_USERS};
pub use concmin::{benchmark_cost, conc_min, conc_min_counted, solution_cost, ConcMinSolution};
pub use quality::{reduce_quality_degradation, QualityAllocation, QualityUser};
pub use subset_sum::{subset_sum, subset_sum_counted, OpCounter, SubsetSumResult};
