//! Model builders, including the reference models used by the acceptance
//! suite.

use super::chain::{Chain, Stochastic};
use super::finite::{FiniteArray, MixingShift};
use super::window::additive_window_array;
use super::{ArrayModel, ModelKind};
use crate::error::{Error, Result};
use crate::numeric::linear_fit;
use crate::oracle::VarianceProfile;

/// `ξ_j` iid with `P(ξ = values[s]) = probs[s]`, centered.
pub fn iid_lattice(id: &str, n: usize, values: &[f64], probs: &[f64], step: f64) -> Result<ArrayModel> {
    if values.len() != probs.len() {
        return Err(Error::validation("iid law", "values and probabilities differ in length"));
    }
    let p = Stochastic::constant_rows(probs)?;
    let chain = Chain::homogeneous(probs.to_vec(), p, n)?;
    let array = FiniteArray::build(chain, n, 0, step, |_, _| Some(values.to_vec()))?;
    Ok(ArrayModel::from_finite(id, ModelKind::IidLattice, array))
}

/// Fair `±1` signs.
pub fn iid_sign(n: usize) -> Result<ArrayModel> {
    iid_lattice("iid_sign", n, &[-1.0, 1.0], &[0.5, 0.5], 1.0)
}

/// `ξ_j = g(j, X_j)` over a chain with one transition matrix per step.
pub fn inhom_markov<G>(id: &str, chain: Chain, n: usize, step: f64, mut g: G) -> Result<ArrayModel>
where
    G: FnMut(usize, usize) -> f64,
{
    let d = chain.states();
    let array = FiniteArray::build(chain, n, 0, step, |j, _| Some((0..d).map(|s| g(j, s)).collect()))?;
    Ok(ArrayModel::from_finite(id, ModelKind::InhomMarkov, array))
}

/// Stationary law of a 2-state matrix.
fn stationary2(p: &[[f64; 2]; 2]) -> Vec<f64> {
    let a = p[0][1];
    let b = p[1][0];
    vec![b / (a + b), a / (a + b)]
}

/// Uniformly elliptic stationary chain `P = [[0.6, 0.4], [0.35, 0.65]]`
/// observed through `ξ_j = X_j − E X_j` (`δ(P) = 0.25`).
pub fn elliptic_chain(n: usize) -> Result<ArrayModel> {
    let rows = [[0.6, 0.4], [0.35, 0.65]];
    let p = Stochastic::new(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())?;
    let chain = Chain::homogeneous(stationary2(&rows), p, n)?;
    inhom_markov("elliptic", chain, n, 1.0, |_, s| s as f64)
}

/// Symmetric 2-state chain with second eigenvalue `λ`, observed through
/// `ξ_j = ±1`; its correlations decay like `λ^j`.
pub fn geometric_chain(n: usize, lambda: f64) -> Result<ArrayModel> {
    if !(lambda.abs() < 1.0) {
        return Err(Error::validation("lambda", format!("{lambda} outside (−1, 1)")));
    }
    let stay = (1.0 + lambda) / 2.0;
    let p = Stochastic::new(&[vec![stay, 1.0 - stay], vec![1.0 - stay, stay]])?;
    let chain = Chain::homogeneous(vec![0.5, 0.5], p, n)?;
    inhom_markov("geometric", chain, n, 1.0, |_, s| if s == 0 { -1.0 } else { 1.0 })
}

/// Active signal indices `{j : ⌊c·j^γ⌋ > ⌊c·(j−1)^γ⌋}`.
fn active(j: usize, c: f64, gamma: f64) -> bool {
    let f = |x: f64| (c * x.powf(gamma)).floor();
    f(j as f64) > f(j as f64 - 1.0)
}

/// Density constant of the sparse signal.
pub const SLOW_VARIANCE_DENSITY: f64 = 8.0;
/// Coboundary weight of the slow-variance model.
pub const SLOW_VARIANCE_EPS: f64 = 0.25;
/// Allowed deviation of the fitted variance exponent from `γ`.
pub const SLOW_VARIANCE_TOLERANCE: f64 = 0.15;

/// Sublinear-variance model over the pair chain `ζ_j = (X_{j−1}, X_j)` of
/// fair bits:
///
/// ```text
/// ξ_j = ε·(X_j − X_{j−1}) + X_j·1{j active},
/// ```
///
/// a coboundary (bounded contribution to `Var(S_m)`) plus a signal on about
/// `c·n^γ` indices. The fitted exponent of `log Var(S_m)` against `log m` on
/// `[n/16, n]` is checked before the model is returned.
pub fn build_slow_variance_model(gamma: f64, n: usize) -> Result<ArrayModel> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::validation("gamma", format!("{gamma} outside (0, 1]")));
    }
    if n < 16 {
        return Err(Error::Precondition(format!("n = {n} too small to fit a variance exponent")));
    }
    // state code 2·X_{j−1} + X_j
    let mut rows = vec![vec![0.0; 4]; 4];
    for (u, row) in rows.iter_mut().enumerate() {
        let last = u & 1;
        row[2 * last] = 0.5;
        row[2 * last + 1] = 0.5;
    }
    let chain = Chain::homogeneous(vec![0.25; 4], Stochastic::new(&rows)?, n)?;
    let c = SLOW_VARIANCE_DENSITY;
    let eps = SLOW_VARIANCE_EPS;
    let model = inhom_markov("slow_variance", chain, n, 0.25, |j, s| {
        let (prev, cur) = ((s >> 1) as f64, (s & 1) as f64);
        let signal = if active(j, c, gamma) { cur } else { 0.0 };
        eps * (cur - prev) + signal
    })?;
    let achieved = variance_exponent(&model, n / 16, n)?;
    if (achieved - gamma).abs() > SLOW_VARIANCE_TOLERANCE {
        return Err(Error::Construction(format!(
            "fitted variance exponent {achieved:.4} misses γ = {gamma} by more than {SLOW_VARIANCE_TOLERANCE}"
        )));
    }
    Ok(model)
}

/// Least-squares slope of `log Var(S_m)` against `log m` on 32 log-spaced
/// points of `[lo, hi]`.
pub fn variance_exponent(model: &ArrayModel, lo: usize, hi: usize) -> Result<f64> {
    let profile = VarianceProfile::compute(model)?;
    let lo = lo.max(1);
    let points = 32;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for i in 0..points {
        let t = i as f64 / (points - 1) as f64;
        let m = ((lo as f64).ln() * (1.0 - t) + (hi as f64).ln() * t).exp().round() as usize;
        let v = profile.variance(m.clamp(lo, hi));
        if v > 0.0 {
            x.push((m as f64).ln());
            y.push(v.ln());
        }
    }
    if x.len() < 4 {
        return Err(Error::InsufficientData("variance vanishes on the fit range".into()));
    }
    Ok(linear_fit(&x, &y).0)
}

/// Half-width `𝔪_n = ⌈log₂ n⌉` of the local-window reference model.
pub fn reference_window(n: usize) -> usize {
    (n as f64).log2().ceil() as usize
}

/// Moving sum `ξ_j = Σ_{k=0}^{2𝔪} X_{j+k}` (centered) over the stationary
/// chain `[[0.55, 0.45], [0.45, 0.55]]`, `𝔪 = ⌈log₂ n⌉`.
pub fn local_window_reference(n: usize) -> Result<ArrayModel> {
    local_window_sum(n, reference_window(n))
}

pub fn local_window_sum(n: usize, window: usize) -> Result<ArrayModel> {
    let rows = [[0.55, 0.45], [0.45, 0.55]];
    let p = Stochastic::new(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())?;
    let chain = Chain::homogeneous(stationary2(&rows), p, n + 2 * window)?;
    additive_window_array("local_window", chain, n, window, 1.0, |_, _| Some(vec![0.0, 1.0]))
}

/// Memory `m_n = ⌊log₂ n / 2⌋ − 3` (at least 1) of the memory reference model.
pub fn reference_memory(n: usize) -> usize {
    (((n as f64).log2() / 2.0).floor() as usize).saturating_sub(3).max(1)
}

/// Binary chain of order `m` with `P(X_j = 1 | last m) = ¼ + ½·(#ones)/m`,
/// lifted to `m`-tuples, observed through its newest bit.
pub fn memory_chain(n: usize, memory: usize) -> Result<ArrayModel> {
    if memory == 0 || memory > 16 {
        return Err(Error::validation("memory", format!("{memory} outside 1..=16")));
    }
    let d = 1usize << memory;
    let mut rows = vec![vec![0.0; d]; d];
    for (u, row) in rows.iter_mut().enumerate() {
        let p1 = 0.25 + 0.5 * u.count_ones() as f64 / memory as f64;
        let head = (u << 1) & (d - 1);
        row[head] += 1.0 - p1;
        row[head | 1] += p1;
    }
    let chain = Chain::homogeneous(vec![1.0 / d as f64; d], Stochastic::new(&rows)?, n)?;
    let array = FiniteArray::build(chain, n, 0, 1.0, |_, _| Some((0..d).map(|s| (s & 1) as f64).collect()))?
        .with_memory(memory)
        .with_mixing_shift(MixingShift { lag_shift: memory as isize - 1, declared: true });
    Ok(ArrayModel::from_finite("memory", ModelKind::InhomMarkov, array))
}

/// Memory reference model with `m_n` from [`reference_memory`].
pub fn memory_reference(n: usize) -> Result<ArrayModel> {
    memory_chain(n, reference_memory(n))
}

/// Names accepted by [`reference_model`].
pub const REFERENCE_NAMES: [&str; 5] = ["iid_sign", "elliptic", "slow_variance", "local_window", "memory"];

/// One of the five reference models by name (`gamma` is used by
/// `slow_variance` only).
pub fn reference_model(name: &str, n: usize, gamma: f64) -> Result<ArrayModel> {
    match name {
        "iid_sign" => iid_sign(n),
        "elliptic" => elliptic_chain(n),
        "slow_variance" => build_slow_variance_model(gamma, n),
        "local_window" => local_window_reference(n),
        "memory" => memory_reference(n),
        other => Err(Error::Config(format!("unknown reference model '{other}'"))),
    }
}
