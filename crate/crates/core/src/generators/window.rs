//! Local-window arrays `ξ_j = f_j(X_j, ..., X_{j+2𝔪})` over a finite chain.
//!
//! Two representations are offered. [`local_window_array`] enumerates the
//! `(2𝔪+1)`-tuples and builds the enlarged chain explicitly, which admits any
//! window functional but costs `|S|^{2𝔪+1}` states. [`additive_window_array`]
//! keeps the base chain and handles functionals that split into a sum of
//! per-position terms, which scales to large windows.

use super::chain::{Chain, Stochastic};
use super::finite::{FiniteArray, MixingShift};
use super::{ArrayModel, ModelKind};
use crate::error::{Error, Result};

/// Default cap on the number of enlarged states.
pub const DEFAULT_TUPLE_BUDGET: usize = 4096;

/// Array `ζ_j = (X_j, ..., X_{j+2𝔪})`, `ξ_j = f(j, ζ_j)` over the chain of a
/// finite base model. The row length is `base.n − 2𝔪`.
pub fn local_window_array<F>(base: &ArrayModel, window: usize, step: f64, f: F) -> Result<ArrayModel>
where
    F: FnMut(usize, &[usize]) -> f64,
{
    local_window_array_with_budget(base, window, step, f, DEFAULT_TUPLE_BUDGET)
}

pub fn local_window_array_with_budget<F>(
    base: &ArrayModel,
    window: usize,
    step: f64,
    mut f: F,
    budget: usize,
) -> Result<ArrayModel>
where
    F: FnMut(usize, &[usize]) -> f64,
{
    let arr = base.finite()?;
    if arr.window() != 0 || base.kind == ModelKind::SequentialExpanding {
        return Err(Error::Unsupported("local windows are built over a plain finite-state chain".into()));
    }
    let width = 2 * window + 1;
    let n_base = arr.n();
    if n_base <= 2 * window {
        return Err(Error::Precondition(format!("base row length {n_base} leaves no window of width {width}")));
    }
    let n = n_base - 2 * window;
    let d = arr.states();
    let tuples = (d as u128).checked_pow(width as u32).filter(|&t| t <= budget as u128).ok_or_else(|| {
        Error::Resource(format!("{d}^{width} enlarged states exceed the budget of {budget}"))
    })? as usize;
    let base_chain = arr.chain();
    let low = tuples / d;
    let decode = |mut code: usize, out: &mut [usize]| {
        for slot in out.iter_mut().rev() {
            *slot = code % d;
            code /= d;
        }
    };
    // joint law of X_0..X_{2𝔪}
    let mut joint = base_chain.initial().to_vec();
    for p in 1..width {
        let mat = base_chain.transition(p);
        let mut next = vec![0.0; joint.len() * d];
        for (code, &w) in joint.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let last = code % d;
            for t in 0..d {
                next[code * d + t] = w * mat.get(last, t);
            }
        }
        joint = next;
    }
    // one enlarged matrix per distinct base matrix
    let lift = |m: &Stochastic| {
        let mut data = vec![0.0; tuples * tuples];
        for u in 0..tuples {
            let last = u % d;
            let head = (u % low) * d;
            for t in 0..d {
                data[u * tuples + head + t] = m.get(last, t);
            }
        }
        Stochastic::from_flat_unchecked(tuples, data)
    };
    let mats: Vec<Stochastic> = base_chain.matrices().iter().map(lift).collect();
    let schedule: Vec<u32> = (1..=n).map(|j| base_chain.schedule()[j + 2 * window - 1]).collect();
    let chain = Chain::new(joint, mats, schedule)?;
    let mut buf = vec![0usize; width];
    let table: Vec<Vec<f64>> = (1..=n)
        .map(|j| {
            (0..tuples)
                .map(|code| {
                    decode(code, &mut buf);
                    f(j, &buf)
                })
                .collect()
        })
        .collect();
    let array = FiniteArray::build(chain, n, 0, step, |j, _| Some(table[j - 1].clone()))?.with_memory(2 * window);
    Ok(ArrayModel::from_finite(format!("{}-window{window}", base.id), ModelKind::LocalWindow, array))
}

/// Number of enlarged states with positive probability at some index.
pub fn reachable_tuples(array: &FiniteArray) -> usize {
    (0..array.states())
        .filter(|&s| array.marginals().iter().any(|m| m[s] > 0.0))
        .count()
}

/// Array `ξ_j = Σ_{k=0}^{2𝔪} h_{j,k}(X_{j+k})` over `chain`, whose φ profile
/// is declared through the base chain: `φ(2𝔪 + j) ≤ φ(j; X)`.
pub fn additive_window_array<F>(
    id: impl Into<String>,
    chain: Chain,
    n: usize,
    window: usize,
    step: f64,
    terms: F,
) -> Result<ArrayModel>
where
    F: FnMut(usize, usize) -> Option<Vec<f64>>,
{
    let array = FiniteArray::build(chain, n, window, step, terms)?
        .with_memory(2 * window)
        .with_mixing_shift(MixingShift { lag_shift: -2 * window as isize, declared: true });
    Ok(ArrayModel::from_finite(id, ModelKind::LocalWindow, array))
}
