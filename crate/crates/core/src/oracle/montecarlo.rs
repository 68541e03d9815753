//! Monte Carlo variance oracle for models without an exact one.

use rayon::prelude::*;

use super::variance::{Estimate, RangeScan, VarianceOracle};
use crate::error::{Error, Result};
use crate::generators::{sample_path, ArrayModel};

/// Largest `replicates × n` table kept in memory.
pub const MC_BUDGET: usize = 1 << 25;

/// Variances estimated from stored replicate paths (prefix sums per path).
#[derive(Clone, Debug)]
pub struct MonteCarloOracle {
    n: usize,
    /// `prefix[r][b] = S_b` of replicate `r`.
    prefix: Vec<Vec<f64>>,
}

impl MonteCarloOracle {
    pub fn sample(model: &ArrayModel, replicates: usize, seed: u64) -> Result<Self> {
        let n = model.n();
        if replicates < 2 {
            return Err(Error::Precondition("Monte Carlo oracle needs at least 2 replicates".into()));
        }
        if replicates.saturating_mul(n + 1) > MC_BUDGET {
            return Err(Error::Resource(format!("{replicates} replicates of length {n} exceed the path budget")));
        }
        let prefix = (0..replicates as u64)
            .into_par_iter()
            .map(|r| {
                let path = sample_path(model, n, seed, r)?;
                let mut acc = Vec::with_capacity(n + 1);
                acc.push(0.0);
                let mut s = 0.0;
                for v in path.values {
                    s += v;
                    acc.push(s);
                }
                Ok(acc)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MonteCarloOracle { n, prefix })
    }

    pub fn replicates(&self) -> usize {
        self.prefix.len()
    }

    fn estimate(&self, mut value: impl FnMut(&[f64]) -> f64) -> Estimate {
        let xs: Vec<f64> = self.prefix.iter().map(|p| value(p)).collect();
        variance_estimate(&xs)
    }
}

/// Sample variance with the standard error `√((m₄ − s⁴)/R)`.
pub fn variance_estimate(xs: &[f64]) -> Estimate {
    let r = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / r;
    let (mut m2, mut m4) = (0.0, 0.0);
    for x in xs {
        let d = (x - mean) * (x - mean);
        m2 += d;
        m4 += d * d;
    }
    let var = m2 / (r - 1.0);
    let se = ((m4 / r - (m2 / r).powi(2)).max(0.0) / r).sqrt();
    Estimate { value: var, se }
}

struct McScan<'a> {
    oracle: &'a MonteCarloOracle,
    a: usize,
    b: usize,
}

impl RangeScan for McScan<'_> {
    fn next_variance(&mut self) -> Option<Estimate> {
        if self.b >= self.oracle.n {
            return None;
        }
        self.b += 1;
        let (a, b) = (self.a, self.b);
        Some(self.oracle.estimate(|p| p[b] - p[a - 1]))
    }
}

impl VarianceOracle for MonteCarloOracle {
    fn len(&self) -> usize {
        self.n
    }

    fn scan(&self, a: usize) -> Box<dyn RangeScan + '_> {
        Box::new(McScan { oracle: self, a, b: a - 1 })
    }

    fn is_exact(&self) -> bool {
        false
    }

    fn prefix_set_variances(&self, intervals: &[(usize, usize)]) -> Vec<Estimate> {
        let sums: Vec<Vec<f64>> = self
            .prefix
            .iter()
            .map(|p| {
                let mut s = 0.0;
                intervals
                    .iter()
                    .map(|&(a, b)| {
                        s += p[b] - p[a - 1];
                        s
                    })
                    .collect()
            })
            .collect();
        (0..intervals.len())
            .map(|k| variance_estimate(&sums.iter().map(|v| v[k]).collect::<Vec<_>>()))
            .collect()
    }

    fn total_covariances(&self) -> Vec<Estimate> {
        let r = self.prefix.len() as f64;
        let n = self.n;
        let mean_total = self.prefix.iter().map(|p| p[n]).sum::<f64>() / r;
        (1..=n)
            .into_par_iter()
            .map(|j| {
                let xs: Vec<f64> = self.prefix.iter().map(|p| p[j] - p[j - 1]).collect();
                let mean = xs.iter().sum::<f64>() / r;
                let prods: Vec<f64> =
                    xs.iter().zip(&self.prefix).map(|(x, p)| (x - mean) * (p[n] - mean_total)).collect();
                let c = prods.iter().sum::<f64>() / (r - 1.0);
                let sd = (prods.iter().map(|v| (v - c) * (v - c)).sum::<f64>() / (r - 1.0)).sqrt();
                Estimate { value: c, se: sd / r.sqrt() }
            })
            .collect()
    }
}
