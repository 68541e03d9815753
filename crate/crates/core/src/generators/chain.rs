//! Finite-state inhomogeneous Markov chains.
//!
//! A [`Chain`] describes `X_0, X_1, ..., X_L` through an initial law and the
//! transition matrices `P_1, ..., P_L` (row `s` of `P_p` is the law of `X_p`
//! given `X_{p-1} = s`). Distinct matrices are stored once and referenced by a
//! schedule, so a homogeneous chain of length `2^20` costs one matrix.

use crate::error::{Error, Result};

const STOCHASTIC_TOL: f64 = 1e-12;

/// Dense row-stochastic matrix in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Stochastic {
    dim: usize,
    data: Vec<f64>,
}

impl Stochastic {
    /// Builds a matrix from rows, checking non-negativity and unit row sums.
    pub fn new(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::validation("transition", "empty matrix"));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for (s, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::validation(
                    format!("transition row {s}"),
                    format!("expected {dim} entries, found {}", row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        let m = Stochastic { dim, data };
        m.validate("transition")?;
        Ok(m)
    }

    pub(crate) fn from_flat_unchecked(dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dim * dim);
        Stochastic { dim, data }
    }

    /// Matrix whose rows all equal `law` (one-step forgetting).
    pub fn constant_rows(law: &[f64]) -> Result<Self> {
        let rows: Vec<Vec<f64>> = (0..law.len()).map(|_| law.to_vec()).collect();
        Stochastic::new(&rows)
    }

    pub(crate) fn validate(&self, location: &str) -> Result<()> {
        for s in 0..self.dim {
            let row = self.row(s);
            let mut sum = 0.0;
            for (t, &v) in row.iter().enumerate() {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::validation(
                        format!("{location} row {s}"),
                        format!("entry {t} = {v} is not a probability"),
                    ));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::validation(
                    format!("{location} row {s}"),
                    format!("row sums to {sum}"),
                ));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.data[s * self.dim..(s + 1) * self.dim]
    }

    pub fn get(&self, s: usize, t: usize) -> f64 {
        self.data[s * self.dim + t]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|s| self.row(s).to_vec()).collect()
    }

    /// Matrix product `self · other`.
    pub fn compose(&self, other: &Stochastic) -> Stochastic {
        let d = self.dim;
        let mut out = vec![0.0; d * d];
        for s in 0..d {
            for k in 0..d {
                let a = self.data[s * d + k];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out[s * d..(s + 1) * d];
                for t in 0..d {
                    dst[t] += a * orow[t];
                }
            }
        }
        Stochastic { dim: d, data: out }
    }

    /// Law after one step: `out = law · P`.
    pub fn push_forward(&self, law: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (s, &w) in law.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (o, &p) in out.iter_mut().zip(self.row(s)) {
                *o += w * p;
            }
        }
    }

    /// Conditional expectation one step back: `out = P f`.
    pub fn apply(&self, f: &[f64], out: &mut [f64]) {
        for (s, o) in out.iter_mut().enumerate() {
            *o = self.row(s).iter().zip(f).map(|(p, v)| p * v).sum();
        }
    }

    /// Dobrushin contraction coefficient
    /// `δ(P) = ½ max_{s,s'} Σ_t |P(s,t) − P(s',t)|`, restricted to rows whose
    /// flag in `support` is set (all rows when `support` is `None`).
    pub fn contraction(&self, support: Option<&[bool]>) -> f64 {
        let live: Vec<usize> = (0..self.dim)
            .filter(|&s| support.is_none_or(|m| m[s]))
            .collect();
        let mut best: f64 = 0.0;
        for (i, &s) in live.iter().enumerate() {
            for &s2 in &live[i + 1..] {
                let tv: f64 = self
                    .row(s)
                    .iter()
                    .zip(self.row(s2))
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
                    * 0.5;
                best = best.max(tv);
            }
        }
        best.min(1.0)
    }
}

/// A finite-state chain `X_0, ..., X_L` with time-varying transitions.
#[derive(Clone, Debug)]
pub struct Chain {
    initial: Vec<f64>,
    mats: Vec<Stochastic>,
    schedule: Vec<u32>,
}

impl Chain {
    /// `schedule[p - 1]` selects the matrix used for the transition into
    /// position `p`.
    pub fn new(initial: Vec<f64>, mats: Vec<Stochastic>, schedule: Vec<u32>) -> Result<Self> {
        let d = initial.len();
        if d == 0 {
            return Err(Error::validation("initial law", "empty state space"));
        }
        let sum: f64 = initial.iter().sum();
        if initial.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::validation("initial law", format!("not a probability vector (sum {sum})")));
        }
        for (i, m) in mats.iter().enumerate() {
            if m.dim() != d {
                return Err(Error::validation(
                    format!("transition matrix {i}"),
                    format!("dimension {} does not match {d} states", m.dim()),
                ));
            }
            m.validate(&format!("transition matrix {i}"))?;
        }
        for (p, &idx) in schedule.iter().enumerate() {
            if idx as usize >= mats.len() {
                return Err(Error::validation(
                    format!("transition P_{}", p + 1),
                    format!("references missing matrix {idx}"),
                ));
            }
        }
        Ok(Chain { initial, mats, schedule })
    }

    /// Homogeneous chain with `steps` transitions.
    pub fn homogeneous(initial: Vec<f64>, p: Stochastic, steps: usize) -> Result<Self> {
        Chain::new(initial, vec![p], vec![0; steps])
    }

    /// Chain with one explicit matrix per step; identical matrices are shared.
    pub fn from_steps(initial: Vec<f64>, steps: Vec<Stochastic>) -> Result<Self> {
        let mut mats: Vec<Stochastic> = Vec::new();
        let mut schedule = Vec::with_capacity(steps.len());
        for m in steps {
            let idx = match mats.iter().position(|q| *q == m) {
                Some(i) => i,
                None => {
                    mats.push(m);
                    mats.len() - 1
                }
            };
            schedule.push(idx as u32);
        }
        Chain::new(initial, mats, schedule)
    }

    pub fn states(&self) -> usize {
        self.initial.len()
    }

    /// Number of transitions `L`.
    pub fn steps(&self) -> usize {
        self.schedule.len()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// Matrix of the transition into position `p` (`1 ≤ p ≤ L`).
    pub fn transition(&self, p: usize) -> &Stochastic {
        &self.mats[self.schedule[p - 1] as usize]
    }

    pub(crate) fn schedule(&self) -> &[u32] {
        &self.schedule
    }

    pub(crate) fn matrices(&self) -> &[Stochastic] {
        &self.mats
    }

    /// Marginal laws of `X_0, ..., X_L`.
    pub fn marginals(&self) -> Vec<Vec<f64>> {
        let mut out = Vec::with_capacity(self.steps() + 1);
        out.push(self.initial.clone());
        let mut next = vec![0.0; self.states()];
        for p in 1..=self.steps() {
            self.transition(p).push_forward(&out[p - 1], &mut next);
            out.push(next.clone());
        }
        out
    }

    /// Restriction to positions `0..=steps` (a prefix of the chain).
    pub fn truncated(&self, steps: usize) -> Chain {
        Chain {
            initial: self.initial.clone(),
            mats: self.mats.clone(),
            schedule: self.schedule[..steps.min(self.steps())].to_vec(),
        }
    }
}
