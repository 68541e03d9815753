use std::path::Path;

use crate::error::{Error, Result};
use crate::generators::ArrayModel;
use crate::numeric::NeumaierSum;

/// Default cap on `states × lattice width` cells held by the forward DP.
pub const DEFAULT_LATTICE_BUDGET: usize = 1 << 25;

/// Exact law of a lattice-valued random variable: mass `weights[k]` at
/// `offset + k·step`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticePmf {
    pub offset: f64,
    pub step: f64,
    pub weights: Vec<f64>,
}

/// Side of a tail event.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `P(S ≥ t)`
    Upper,
    /// `P(S ≤ t)`
    Lower,
}

/// A tail probability together with its natural logarithm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tail {
    pub probability: f64,
    pub ln_probability: f64,
}

impl LatticePmf {
    pub fn new(offset: f64, step: f64, weights: Vec<f64>) -> Result<Self> {
        let pmf = LatticePmf { offset, step, weights };
        pmf.validate()?;
        Ok(pmf)
    }

    /// Point mass at `value`.
    pub fn point_mass(value: f64) -> Self {
        LatticePmf { offset: value, step: 1.0, weights: vec![1.0] }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) {
            return Err(Error::validation("pmf", format!("step {} must be positive", self.step)));
        }
        if let Some(k) = self.weights.iter().position(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::validation(format!("pmf weight {k}"), "not a probability"));
        }
        let total = self.total_mass();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::validation("pmf", format!("total mass {total} differs from 1")));
        }
        Ok(())
    }

    pub fn total_mass(&self) -> f64 {
        let mut s = NeumaierSum::default();
        self.weights.iter().for_each(|&w| s.add(w));
        s.value()
    }

    pub fn value(&self, k: usize) -> f64 {
        self.offset + self.step * k as f64
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Non-zero atoms as `(value, probability)` pairs.
    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.weights.iter().enumerate().filter(|(_, &w)| w > 0.0).map(|(k, &w)| (self.value(k), w))
    }

    pub fn mean(&self) -> f64 {
        let mut s = NeumaierSum::default();
        let mut m = NeumaierSum::default();
        for (k, &w) in self.weights.iter().enumerate() {
            s.add(w * k as f64);
            m.add(w);
        }
        self.offset + self.step * s.value() / m.value()
    }

    /// Pmf of `a·S` for `a > 0`.
    pub fn scaled(&self, a: f64) -> LatticePmf {
        LatticePmf { offset: self.offset * a, step: self.step * a, weights: self.weights.clone() }
    }

    /// Exact `P(S ≥ t)` or `P(S ≤ t)` by lattice suffix/prefix sums, with the
    /// logarithm accumulated relative to the largest term so that tails far
    /// below `1e-300` keep full relative accuracy.
    pub fn tail(&self, threshold: f64, side: Side) -> Tail {
        let x = (threshold - self.offset) / self.step;
        let len = self.weights.len() as f64;
        let range = match side {
            Side::Upper => {
                let k = (x - 1e-9).ceil().max(0.0);
                if k >= len { None } else { Some(k as usize..self.weights.len()) }
            }
            Side::Lower => {
                let k = (x + 1e-9).floor();
                if k < 0.0 { None } else { Some(0..(k.min(len - 1.0) as usize + 1)) }
            }
        };
        let Some(range) = range else {
            return Tail { probability: 0.0, ln_probability: f64::NEG_INFINITY };
        };
        let slice = &self.weights[range];
        let peak = slice.iter().cloned().fold(0.0, f64::max);
        if peak == 0.0 {
            return Tail { probability: 0.0, ln_probability: f64::NEG_INFINITY };
        }
        let mut rel = NeumaierSum::default();
        let mut abs = NeumaierSum::default();
        let mut ordered: Vec<f64> = slice.to_vec();
        ordered.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for w in ordered {
            rel.add(w / peak);
            abs.add(w);
        }
        Tail { probability: abs.value().min(1.0), ln_probability: (peak.ln() + rel.value().ln()).min(0.0) }
    }

    /// Writes CSV `value, probability`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["value", "probability"])?;
        for (v, p) in self.atoms() {
            w.write_record([format!("{v:.17e}"), format!("{p:.17e}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Exact law of `Σ_{j=a}^{b} ξ_j` by forward dynamic programming over
/// (state, lattice position).
pub fn exact_sum_pmf(model: &ArrayModel, a: usize, b: usize) -> Result<LatticePmf> {
    exact_sum_pmf_with_budget(model, a, b, DEFAULT_LATTICE_BUDGET)
}

pub fn exact_sum_pmf_with_budget(model: &ArrayModel, a: usize, b: usize, budget: usize) -> Result<LatticePmf> {
    let arr = model.finite()?;
    check_range(arr.n(), a, b)?;
    let d = arr.states();
    let chain = arr.chain();
    let m = arr.window();
    let mut offset = 0.0;
    for j in a..=b {
        for k in 0..=2 * m {
            if let Some((_, off)) = arr.term_lattice(j, k) {
                offset += off;
            }
        }
    }
    // dp[s * width + i] = P(X_p = s, Z_{≤p} = offset + (lo + i)·step)
    let mut width = 1usize;
    let mut lo: i64 = 0;
    let mut dp: Vec<f64> = arr.marginal(a - 1).to_vec();
    let mut h = vec![0i64; d];
    let mut acc: Vec<f64> = Vec::new();
    for p in a..=b + 2 * m {
        h.iter_mut().for_each(|v| *v = 0);
        let (jlo, jhi) = arr.touching(p);
        for j in jlo.max(a)..=jhi.min(b) {
            if let Some((ints, _)) = arr.term_lattice(j, p - j) {
                h.iter_mut().zip(ints).for_each(|(x, &v)| *x += v);
            }
        }
        let hmin = *h.iter().min().unwrap();
        let hmax = *h.iter().max().unwrap();
        let new_width = width + (hmax - hmin) as usize;
        if new_width.saturating_mul(d) > budget {
            return Err(Error::Resource(format!(
                "lattice DP needs {} cells at position {p}, budget {budget}",
                new_width * d
            )));
        }
        let mut next = vec![0.0; d * new_width];
        let mat = chain.transition(p);
        acc.resize(width, 0.0);
        for t in 0..d {
            acc.iter_mut().for_each(|v| *v = 0.0);
            for s in 0..d {
                let pst = mat.get(s, t);
                if pst == 0.0 {
                    continue;
                }
                let src = &dp[s * width..(s + 1) * width];
                for (x, &y) in acc.iter_mut().zip(src) {
                    *x += pst * y;
                }
            }
            let shift = (h[t] - hmin) as usize;
            next[t * new_width + shift..t * new_width + shift + width].copy_from_slice(&acc);
        }
        lo += hmin;
        // trim lattice cells that carry no mass in any state
        let col_live = |i: usize| (0..d).any(|s| next[s * new_width + i] != 0.0);
        let first = (0..new_width).find(|&i| col_live(i)).unwrap_or(0);
        let last = (0..new_width).rev().find(|&i| col_live(i)).unwrap_or(0);
        let trimmed = last + 1 - first;
        if trimmed == new_width {
            dp = next;
        } else {
            let mut t2 = vec![0.0; d * trimmed];
            for s in 0..d {
                t2[s * trimmed..(s + 1) * trimmed]
                    .copy_from_slice(&next[s * new_width + first..s * new_width + first + trimmed]);
            }
            dp = t2;
        }
        lo += first as i64;
        width = trimmed;
    }
    let mut weights = vec![0.0; width];
    for s in 0..d {
        for (w, &v) in weights.iter_mut().zip(&dp[s * width..(s + 1) * width]) {
            *w += v;
        }
    }
    // Decimal transition rows are stochastic only up to rounding, so the mass
    // drifts by about one ulp per step. Anything beyond that is a lost cell.
    let steps = (b + 2 * m + 2 - a) as f64;
    let total = {
        let mut s = NeumaierSum::default();
        weights.iter().for_each(|&w| s.add(w));
        s.value()
    };
    if !((total - 1.0).abs() <= 1e-12 + 4.0 * steps * d as f64 * f64::EPSILON) {
        return Err(Error::Resource(format!("pmf lost mass beyond tolerance: total mass {total}")));
    }
    weights.iter_mut().for_each(|w| *w /= total);
    let step = arr.step();
    let pmf = LatticePmf { offset: offset + lo as f64 * step, step, weights };
    pmf.validate().map_err(|e| Error::Resource(format!("pmf lost mass beyond tolerance: {e}")))?;
    Ok(pmf)
}

pub(crate) fn check_range(n: usize, a: usize, b: usize) -> Result<()> {
    if a < 1 || b < a || b > n {
        return Err(Error::Precondition(format!("index range [{a}, {b}] outside 1..={n}")));
    }
    Ok(())
}
