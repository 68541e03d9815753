//! Finite-state arrays: additive window observables over a finite chain.
//!
//! Row `n` of the array is described by a base chain `X_0, ..., X_{n+2m}`
//! (positions) and observables
//!
//! ```text
//! ξ_j = Σ_{k=0}^{2m} h_{j,k}(X_{j+k}),     j = 1..n,
//! ```
//!
//! so `ξ_j` depends on the window of positions `j..=j+2m`. With `m = 0` this
//! is an ordinary chain observable `ξ_j = g_j(X_j)`; with `m > 0` the window
//! state `ζ_j = (X_j, ..., X_{j+2m})` generates the filtration
//! `σ(ζ_0, ..., ζ_j) = σ(X_0, ..., X_{j+2m})`.
//!
//! Term values are declared on the lattice `step·ℤ` and centered at build time
//! with the exact marginal laws, so every sum lives on `offset + step·ℤ`.

use std::collections::HashMap;

use super::chain::Chain;
use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;

/// How the mixing profile of a finite array relates to the Dobrushin bound of
/// its chain: `φ(j) ≤ δ-bound(j + lag_shift)`, with lags `≤ 0` bounded by 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixingShift {
    pub lag_shift: isize,
    /// `true` when the shift is an analytic statement about the model rather
    /// than a direct Dobrushin evaluation.
    pub declared: bool,
}

impl MixingShift {
    pub const DIRECT: MixingShift = MixingShift { lag_shift: 0, declared: false };
}

/// Exact finite-state description of one row of a triangular array.
#[derive(Clone, Debug)]
pub struct FiniteArray {
    chain: Chain,
    marginals: Vec<Vec<f64>>,
    n: usize,
    window: usize,
    step: f64,
    tables: Vec<Vec<i64>>,
    term_table: Vec<u32>,
    term_offset: Vec<f64>,
    memory: Option<usize>,
    mixing_shift: MixingShift,
}

impl FiniteArray {
    /// Builds and validates an array.
    ///
    /// `terms(j, k)` returns the raw values of `h_{j,k}` per state (or `None`
    /// for an identically zero term); values must be integer multiples of
    /// `step` and are centered against the exact marginal law.
    pub fn build<F>(chain: Chain, n: usize, window: usize, step: f64, mut terms: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Option<Vec<f64>>,
    {
        if n == 0 {
            return Err(Error::validation("model", "n must be at least 1"));
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::validation("lattice", format!("step {step} must be positive")));
        }
        let positions = n + 2 * window;
        if chain.steps() < positions {
            return Err(Error::validation(
                "chain",
                format!("needs {positions} transitions for n = {n} and window {window}, found {}", chain.steps()),
            ));
        }
        let chain = chain.truncated(positions);
        let marginals = chain.marginals();
        let d = chain.states();
        let width = 2 * window + 1;
        let mut tables: Vec<Vec<i64>> = Vec::new();
        let mut lookup: HashMap<Vec<i64>, u32> = HashMap::new();
        let mut term_table = vec![NONE; n * width];
        let mut term_offset = vec![0.0; n * width];
        for j in 1..=n {
            for k in 0..width {
                let Some(values) = terms(j, k) else { continue };
                let location = || format!("observable ξ_{j} term {k}");
                if values.len() != d {
                    return Err(Error::validation(location(), format!("expected {d} values, found {}", values.len())));
                }
                let mut ints = Vec::with_capacity(d);
                for (s, &v) in values.iter().enumerate() {
                    if !v.is_finite() {
                        return Err(Error::validation(location(), format!("value at state {s} is not finite")));
                    }
                    let q = (v / step).round();
                    if (q * step - v).abs() > 1e-9 * v.abs().max(1.0) {
                        return Err(Error::validation(
                            location(),
                            format!("value {v} at state {s} is not on the lattice step {step}"),
                        ));
                    }
                    ints.push(q as i64);
                }
                if ints.iter().all(|&v| v == 0) {
                    continue;
                }
                let marg = &marginals[j + k];
                let mean: f64 = marg.iter().zip(&ints).map(|(p, &v)| p * v as f64 * step).sum();
                let idx = match lookup.get(&ints) {
                    Some(&i) => i,
                    None => {
                        let i = tables.len() as u32;
                        lookup.insert(ints.clone(), i);
                        tables.push(ints);
                        i
                    }
                };
                let t = (j - 1) * width + k;
                term_table[t] = idx;
                term_offset[t] = -mean;
            }
        }
        let array = FiniteArray {
            chain,
            marginals,
            n,
            window,
            step,
            tables,
            term_table,
            term_offset,
            memory: None,
            mixing_shift: MixingShift::DIRECT,
        };
        array.validate()?;
        Ok(array)
    }

    /// Checks the model invariants: stochastic rows (enforced by [`Chain`])
    /// and exact centering of every observable.
    pub fn validate(&self) -> Result<()> {
        for j in 1..=self.n {
            let mut mean = 0.0;
            let mut scale: f64 = 1.0;
            for k in 0..=2 * self.window {
                if let Some(vals) = self.term_values(j, k) {
                    let marg = &self.marginals[j + k];
                    mean += marg.iter().zip(&vals).map(|(p, v)| p * v).sum::<f64>();
                    scale = scale.max(vals.iter().fold(0.0, |a: f64, v| a.max(v.abs())));
                }
            }
            if mean.abs() > 1e-12 * scale {
                return Err(Error::validation(format!("observable ξ_{j}"), format!("mean {mean} is not zero")));
            }
        }
        Ok(())
    }

    pub(crate) fn with_memory(mut self, memory: usize) -> Self {
        self.memory = Some(memory);
        self
    }

    pub(crate) fn with_mixing_shift(mut self, shift: MixingShift) -> Self {
        self.mixing_shift = shift;
        self
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Window half-width `m`.
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn states(&self) -> usize {
        self.chain.states()
    }

    /// Index of the last chain position, `n + 2m`.
    pub fn last_position(&self) -> usize {
        self.n + 2 * self.window
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn chain(&self) -> &Chain {
        &self.chain
    }

    pub fn marginal(&self, p: usize) -> &[f64] {
        &self.marginals[p]
    }

    pub fn marginals(&self) -> &[Vec<f64>] {
        &self.marginals
    }

    /// Markov memory of `ζ`, when known.
    pub fn memory(&self) -> Option<usize> {
        self.memory
    }

    pub fn mixing_shift(&self) -> MixingShift {
        self.mixing_shift
    }

    fn term_index(&self, j: usize, k: usize) -> usize {
        (j - 1) * (2 * self.window + 1) + k
    }

    /// Integer lattice values and centering offset of `h_{j,k}`.
    pub fn term_lattice(&self, j: usize, k: usize) -> Option<(&[i64], f64)> {
        let t = self.term_index(j, k);
        let idx = self.term_table[t];
        (idx != NONE).then(|| (self.tables[idx as usize].as_slice(), self.term_offset[t]))
    }

    /// Centered values of `h_{j,k}` per state.
    pub fn term_values(&self, j: usize, k: usize) -> Option<Vec<f64>> {
        self.term_lattice(j, k)
            .map(|(ints, off)| ints.iter().map(|&v| v as f64 * self.step + off).collect())
    }

    /// Adds `h_{j,k}` into `acc` (per state).
    pub(crate) fn add_term(&self, j: usize, k: usize, acc: &mut [f64]) {
        if let Some((ints, off)) = self.term_lattice(j, k) {
            for (a, &v) in acc.iter_mut().zip(ints) {
                *a += v as f64 * self.step + off;
            }
        }
    }

    /// Combined observable at position `p` restricted to indices `j ∈ lo..=hi`.
    pub(crate) fn combined(&self, p: usize, lo: usize, hi: usize) -> Vec<f64> {
        let mut acc = vec![0.0; self.states()];
        let (jlo, jhi) = self.touching(p);
        for j in jlo.max(lo)..=jhi.min(hi) {
            self.add_term(j, p - j, &mut acc);
        }
        acc
    }

    /// Indices `j` whose window contains position `p` (may be an empty range).
    pub(crate) fn touching(&self, p: usize) -> (usize, usize) {
        let lo = p.saturating_sub(2 * self.window).max(1);
        let hi = p.min(self.n);
        (lo, hi)
    }

    /// Upper bound on `‖ξ_j‖_∞`: sum of the term sup-norms over reachable states.
    pub fn sup_norm(&self, j: usize) -> f64 {
        let mut total = 0.0;
        for k in 0..=2 * self.window {
            if let Some(vals) = self.term_values(j, k) {
                let marg = &self.marginals[j + k];
                total += vals
                    .iter()
                    .zip(marg)
                    .filter(|(_, &p)| p > 0.0)
                    .fold(0.0, |a: f64, (v, _)| a.max(v.abs()));
            }
        }
        total
    }

    /// Values `ξ_1..ξ_n` along a realised chain path `X_0..X_{n+2m}`.
    pub fn observe(&self, path: &[usize]) -> Vec<f64> {
        (1..=self.n)
            .map(|j| {
                (0..=2 * self.window)
                    .filter_map(|k| self.term_lattice(j, k).map(|(ints, off)| ints[path[j + k]] as f64 * self.step + off))
                    .sum()
            })
            .collect()
    }
}
