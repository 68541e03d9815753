use std::path::Path;

use super::functional::{cross_moment, Additive, Forward};
use super::pmf::check_range;
use crate::error::Result;
use crate::generators::finite::FiniteArray;
use crate::generators::ArrayModel;

/// A variance value with its standard error (zero for exact oracles).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, se: 0.0 }
    }
}

/// Incremental evaluation of `Var(S_{a..b})` for `b = a, a+1, ...`.
pub trait RangeScan {
    /// Extends the range by one index and returns the new variance, or `None`
    /// past the end of the row.
    fn next_variance(&mut self) -> Option<Estimate>;
}

/// Source of partial-sum variances for the block construction.
pub trait VarianceOracle: Sync {
    /// Row length `n`.
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Scanner over ranges starting at `a`.
    fn scan(&self, a: usize) -> Box<dyn RangeScan + '_>;

    fn range_variance(&self, a: usize, b: usize) -> Estimate {
        let mut s = self.scan(a);
        let mut last = Estimate::exact(0.0);
        for _ in a..=b {
            last = s.next_variance().expect("range within row");
        }
        last
    }

    /// `true` when values are exact.
    fn is_exact(&self) -> bool;

    /// `Var(Σ_{j ∈ I_1 ∪ ⋯ ∪ I_k} ξ_j)` for every prefix `k` of a sorted family
    /// of disjoint intervals.
    fn prefix_set_variances(&self, intervals: &[(usize, usize)]) -> Vec<Estimate>;

    /// `Cov(ξ_j, S_n)` for `j = 1..n` (index 0 of the result is `j = 1`).
    fn total_covariances(&self) -> Vec<Estimate>;
}

/// Additive functional of `Σ_{j ∈ I} ξ_j` for a union of index intervals.
pub fn sum_functional(arr: &FiniteArray, intervals: &[(usize, usize)]) -> Additive {
    let mut z = Additive { start: 0, funcs: Vec::new() };
    let m = arr.window();
    for &(a, b) in intervals {
        if b < a {
            continue;
        }
        for p in a..=b + 2 * m {
            let f = arr.combined(p, a, b);
            z.add_at(p, &f, 1.0);
        }
    }
    z
}

/// Exact `Var(Σ_{j=a}^{b} ξ_j)`.
pub fn variance_of_range(model: &ArrayModel, a: usize, b: usize) -> Result<f64> {
    let arr = model.finite()?;
    check_range(arr.n(), a, b)?;
    Ok(arr.range_variance(a, b).value)
}

/// Exact `Cov(ξ_i, ξ_j)` from the joint law of the two windows.
pub fn covariance(model: &ArrayModel, i: usize, j: usize) -> Result<f64> {
    let arr = model.finite()?;
    check_range(arr.n(), i.min(j), i.max(j))?;
    let zi = sum_functional(arr, &[(i, i)]);
    let zj = sum_functional(arr, &[(j, j)]);
    Ok(cross_moment(arr.chain(), arr.marginals(), &zi, &zj))
}

/// Exact `Var(Σ_{j ∈ I} ξ_j)` for a union of intervals.
pub fn variance_of_set(arr: &FiniteArray, intervals: &[(usize, usize)]) -> f64 {
    let z = sum_functional(arr, intervals);
    cross_moment(arr.chain(), arr.marginals(), &z, &z).max(0.0)
}

/// Exact `Cov(Σ_{I} ξ, Σ_{J} ξ)`.
pub fn covariance_of_sets(arr: &FiniteArray, a: &[(usize, usize)], b: &[(usize, usize)]) -> f64 {
    let za = sum_functional(arr, a);
    let zb = sum_functional(arr, b);
    cross_moment(arr.chain(), arr.marginals(), &za, &zb)
}

/// Incremental exact scanner. Positions `≤ b` are final once `ξ_b` is in the
/// sum; the remaining `2m` positions of the window are replayed from a copy.
pub struct ExactScan<'a> {
    arr: &'a FiniteArray,
    a: usize,
    b: usize,
    fwd: Forward,
}

impl<'a> ExactScan<'a> {
    pub fn new(arr: &'a FiniteArray, a: usize) -> Self {
        ExactScan { arr, a, b: a - 1, fwd: Forward::at(a - 1, arr.marginal(a - 1)) }
    }

    fn current(&self) -> f64 {
        let m = self.arr.window();
        if m == 0 {
            return self.fwd.variance();
        }
        let mut tail = self.fwd.clone();
        for p in self.b + 1..=self.b + 2 * m {
            let h = self.arr.combined(p, self.a, self.b);
            tail.advance(self.arr.chain(), Some(&h));
        }
        tail.variance()
    }
}

impl RangeScan for ExactScan<'_> {
    fn next_variance(&mut self) -> Option<Estimate> {
        if self.b >= self.arr.n() {
            return None;
        }
        self.b += 1;
        let h = self.arr.combined(self.b, self.a, self.b);
        self.fwd.advance(self.arr.chain(), Some(&h));
        Some(Estimate::exact(self.current()))
    }
}

impl VarianceOracle for FiniteArray {
    fn len(&self) -> usize {
        self.n()
    }

    fn scan(&self, a: usize) -> Box<dyn RangeScan + '_> {
        Box::new(ExactScan::new(self, a))
    }

    fn is_exact(&self) -> bool {
        true
    }

    fn prefix_set_variances(&self, intervals: &[(usize, usize)]) -> Vec<Estimate> {
        prefix_set_variances(self, intervals).into_iter().map(Estimate::exact).collect()
    }

    fn total_covariances(&self) -> Vec<Estimate> {
        self.covariances_with_total().into_iter().map(Estimate::exact).collect()
    }
}

/// Exact prefix-family variances in one forward sweep: positions up to the
/// end of interval `k` only carry terms of intervals `1..=k`, and the `2m`
/// trailing positions are replayed from a copy.
pub fn prefix_set_variances(arr: &FiniteArray, intervals: &[(usize, usize)]) -> Vec<f64> {
    let m = arr.window();
    let chain = arr.chain();
    let d = arr.states();
    let mut fwd = Forward::at(0, arr.marginal(0));
    let mut out = Vec::with_capacity(intervals.len());
    // contribution at position p of intervals 0..=upto
    let at = |p: usize, upto: usize| -> Vec<f64> {
        let mut acc = vec![0.0; d];
        for &(a, b) in intervals[..=upto].iter().rev() {
            if b + 2 * m < p {
                break;
            }
            if a <= p {
                for (x, y) in acc.iter_mut().zip(arr.combined(p, a, b)) {
                    *x += y;
                }
            }
        }
        acc
    };
    for (k, &(_, b)) in intervals.iter().enumerate() {
        while fwd.p < b {
            let p = fwd.p + 1;
            let h = at(p, k);
            fwd.advance(chain, Some(&h));
        }
        let mut tail = fwd.clone();
        for p in b + 1..=(b + 2 * m).min(arr.last_position()) {
            let h = at(p, k);
            tail.advance(chain, Some(&h));
        }
        out.push(tail.variance());
    }
    out
}

/// Variances `σ²_k = Var(S_k)` for `k = 1..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct VarianceProfile {
    /// `values[k]` is `σ²_k`, with `values[0] = 0`.
    pub values: Vec<f64>,
}

impl VarianceProfile {
    pub fn compute(model: &ArrayModel) -> Result<Self> {
        let arr = model.finite()?;
        Ok(Self::from_oracle(arr))
    }

    pub fn from_oracle(oracle: &dyn VarianceOracle) -> Self {
        let mut values = Vec::with_capacity(oracle.len() + 1);
        values.push(0.0);
        let mut s = oracle.scan(1);
        while let Some(e) = s.next_variance() {
            values.push(e.value);
        }
        VarianceProfile { values }
    }

    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn variance(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn sigma(&self) -> f64 {
        self.values[self.n()].sqrt()
    }

    /// Writes CSV `k, variance`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["k", "variance"])?;
        for (k, v) in self.values.iter().enumerate().skip(1) {
            w.write_record([k.to_string(), format!("{v:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl FiniteArray {
    /// Exact `Var(S_{a..b})` through the scanner.
    pub fn range_variance(&self, a: usize, b: usize) -> Estimate {
        VarianceOracle::range_variance(self, a, b)
    }

    /// `Cov(ξ_j, S_n)` for every `j`, in `O(n·|S|²·(2m+1))` total.
    ///
    /// Uses `E[S_n 1{X_p = s}]`, assembled from the forward prefix statistic,
    /// the observable at `p` and the backward future sum at `p`.
    pub fn covariances_with_total(&self) -> Vec<f64> {
        let d = self.states();
        let last = self.last_position();
        let chain = self.chain();
        let h: Vec<Vec<f64>> = (0..=last).map(|p| self.combined(p, 1, self.n())).collect();
        // future[p](s) = E[Σ_{q>p} H_q(X_q) | X_p = s]
        let mut future = vec![vec![0.0; d]; last + 1];
        for p in (0..last).rev() {
            let mat = chain.transition(p + 1);
            let nxt: Vec<f64> = (0..d).map(|s| h[p + 1][s] + future[p + 1][s]).collect();
            let mut out = vec![0.0; d];
            mat.apply(&nxt, &mut out);
            future[p] = out;
        }
        // w[p](s) = E[S_n 1{X_p = s}]
        let mut fwd = Forward::at(0, self.marginal(0));
        let mut w = vec![vec![0.0; d]; last + 1];
        for p in 0..=last {
            if p > 0 {
                fwd.advance(chain, None);
            }
            // fwd.e1 holds E[Σ_{q<p} H_q 1{X_p = s}]
            let pi = self.marginal(p);
            for s in 0..d {
                w[p][s] = fwd.e1[s] + pi[s] * (h[p][s] + future[p][s]);
            }
            let mut hp = fwd.clone();
            hp.e1.iter_mut().zip(pi).zip(&h[p]).for_each(|((e, &m), &v)| *e += m * v);
            fwd.e1 = hp.e1;
        }
        (1..=self.n())
            .map(|j| {
                (0..=2 * self.window())
                    .filter_map(|k| self.term_values(j, k).map(|v| (j + k, v)))
                    .map(|(p, v)| v.iter().zip(&w[p]).map(|(a, b)| a * b).sum::<f64>())
                    .sum()
            })
            .collect()
    }
}
