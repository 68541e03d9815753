//! Exact distributions, variances and moments of partial sums for finite-state
//! models. Every other module checks itself against these.

pub mod functional;
pub mod montecarlo;
pub mod moments;
pub mod pmf;
pub mod variance;

pub use functional::{cross_moment, lp_norm, path_extremes, raw_moments, tail_moments, Additive};
pub use montecarlo::MonteCarloOracle;
pub use moments::{moments_and_cumulants, Moments};
pub use pmf::{exact_sum_pmf, exact_sum_pmf_with_budget, LatticePmf, Side, Tail, DEFAULT_LATTICE_BUDGET};
pub use variance::{
    covariance, covariance_of_sets, prefix_set_variances, sum_functional, variance_of_range, variance_of_set, Estimate, RangeScan,
    VarianceOracle, VarianceProfile,
};

/// `P(S ≥ t)` or `P(S ≤ t)` of an exact lattice law.
pub fn tail_probability(pmf: &LatticePmf, threshold: f64, side: Side) -> Tail {
    pmf.tail(threshold, side)
}
