//! Mixing coefficients `α`, `ρ`, `φ` and `ϖ_{q,p}`.
//!
//! Profiles are either exact (tiny joint laws enumerated by
//! [`brute_force_varpi`]), certified upper bounds from Dobrushin products, or
//! declared analytic bounds. Every downstream constant is monotone in the
//! coefficients, so upper bounds are always safe inputs.

use std::collections::HashMap;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::generators::chain::{Chain, Stochastic};
use crate::generators::finite::FiniteArray;
use crate::generators::ArrayModel;

/// Lags evaluated by exact Dobrushin products before sub-multiplicative
/// extension takes over.
pub const EXACT_LAGS: usize = 128;

const TOL: f64 = 1e-12;

/// Where a coefficient sequence comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    ExactTiny,
    DobrushinBound,
    Declared,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::ExactTiny => "exact-tiny",
            Provenance::DobrushinBound => "dobrushin-bound",
            Provenance::Declared => "declared",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "exact-tiny" => Ok(Provenance::ExactTiny),
            "dobrushin-bound" => Ok(Provenance::DobrushinBound),
            "declared" => Ok(Provenance::Declared),
            other => Err(Error::Config(format!("unknown provenance '{other}'"))),
        }
    }
}

/// A coefficient sequence indexed by lag: `values[j]` for `j = 0..=n`
/// (`values[0] = 1` by convention).
#[derive(Clone, Debug, PartialEq)]
pub struct Sequence {
    pub values: Vec<f64>,
    pub provenance: Provenance,
}

impl Sequence {
    pub fn at(&self, j: usize) -> f64 {
        if j == 0 {
            return 1.0;
        }
        // past the stored range the last value is still a valid bound
        *self.values.get(j).or(self.values.last()).unwrap_or(&1.0)
    }
}

/// Per-lag mixing coefficients of one row.
#[derive(Clone, Debug, PartialEq)]
pub struct MixingProfile {
    pub n: usize,
    pub alpha: Option<Sequence>,
    pub rho: Option<Sequence>,
    pub phi: Option<Sequence>,
    /// `(q, ϖ_{q,q}(j) bounds)` for requested `q`.
    pub varpi: Vec<(f64, Vec<f64>)>,
    /// Future horizon used by exact profiles (`None` when the Markov
    /// property makes the horizon irrelevant).
    pub horizon: Option<usize>,
}

impl MixingProfile {
    /// Profile derived from a `φ` bound: `ρ = min(1, 2√φ)`, `α = min(φ, ρ/4)`.
    pub fn from_phi(phi: Vec<f64>, provenance: Provenance) -> Self {
        let n = phi.len().saturating_sub(1);
        let rho: Vec<f64> = phi.iter().map(|&f| (2.0 * f.max(0.0).sqrt()).min(1.0)).collect();
        let alpha: Vec<f64> = phi.iter().zip(&rho).map(|(&f, &r)| f.min(r / 4.0)).collect();
        let mut p = MixingProfile {
            n,
            alpha: Some(Sequence { values: alpha, provenance }),
            rho: Some(Sequence { values: rho, provenance }),
            phi: Some(Sequence { values: phi, provenance }),
            varpi: Vec::new(),
            horizon: None,
        };
        p.pin_lag_zero();
        p
    }

    /// Profile carrying only a `ρ` sequence (`rho[j]`, `j = 0..=n`).
    pub fn from_rho(rho: Vec<f64>, provenance: Provenance) -> Self {
        let n = rho.len().saturating_sub(1);
        let mut p = MixingProfile {
            n,
            alpha: None,
            rho: Some(Sequence { values: rho, provenance }),
            phi: None,
            varpi: Vec::new(),
            horizon: None,
        };
        p.pin_lag_zero();
        p
    }

    fn pin_lag_zero(&mut self) {
        for s in [&mut self.alpha, &mut self.rho, &mut self.phi].into_iter().flatten() {
            if let Some(v) = s.values.first_mut() {
                *v = 1.0;
            }
        }
    }

    pub fn phi(&self, j: usize) -> Option<f64> {
        self.phi.as_ref().map(|s| s.at(j))
    }

    pub fn rho(&self, j: usize) -> Option<f64> {
        self.rho.as_ref().map(|s| s.at(j))
    }

    pub fn alpha(&self, j: usize) -> Option<f64> {
        self.alpha.as_ref().map(|s| s.at(j))
    }

    /// `ρ(j)`, or an error when the profile has no `ρ` sequence.
    pub fn rho_required(&self, j: usize) -> Result<f64> {
        self.rho(j).ok_or_else(|| Error::MissingData("profile has no ρ sequence".into()))
    }

    /// Adds the interpolated `ϖ_{q,q}(j)` sequence for `j = 1..=n`.
    pub fn with_varpi(mut self, q: f64) -> Result<Self> {
        let mut v = vec![1.0];
        for j in 1..=self.n {
            v.push(interpolate_bound(&self, q, j)?.value);
        }
        self.varpi.retain(|(qq, _)| *qq != q);
        self.varpi.push((q, v));
        Ok(self)
    }

    /// `Σ_{s=1}^{n} ϖ_{q,q}(s)` through [`interpolate_bound`].
    pub fn varpi_sum(&self, q: f64) -> Result<f64> {
        if let Some((_, v)) = self.varpi.iter().find(|(qq, _)| *qq == q) {
            return Ok(v[1..].iter().sum());
        }
        (1..=self.n).map(|j| interpolate_bound(self, q, j).map(|b| b.value)).sum()
    }

    /// Pointwise maximum of two profiles (an upper bound on both).
    pub fn pointwise_max(&self, other: &MixingProfile) -> MixingProfile {
        let merge = |a: &Option<Sequence>, b: &Option<Sequence>| match (a, b) {
            (Some(x), Some(y)) => {
                let n = x.values.len().max(y.values.len());
                Some(Sequence { values: (0..n).map(|j| x.at(j).max(y.at(j))).collect(), provenance: x.provenance })
            }
            _ => None,
        };
        MixingProfile {
            n: self.n.max(other.n),
            alpha: merge(&self.alpha, &other.alpha),
            rho: merge(&self.rho, &other.rho),
            phi: merge(&self.phi, &other.phi),
            varpi: Vec::new(),
            horizon: self.horizon.max(other.horizon),
        }
    }

    /// Writes CSV `lag, alpha, rho, phi, provenance`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["lag", "alpha", "rho", "phi", "provenance"])?;
        let cell = |s: &Option<Sequence>, j: usize| s.as_ref().map(|s| format!("{:.17e}", s.at(j))).unwrap_or_default();
        let prov = self.phi.as_ref().or(self.rho.as_ref()).or(self.alpha.as_ref()).map(|s| s.provenance);
        for j in 1..=self.n {
            w.write_record([
                j.to_string(),
                cell(&self.alpha, j),
                cell(&self.rho, j),
                cell(&self.phi, j),
                prov.map(|p| p.name().to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`MixingProfile::write_csv`] (or supplied by
    /// hand; empty cells mark absent sequences).
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut cols: [Vec<Option<f64>>; 3] = [vec![None], vec![None], vec![None]];
        let mut prov = Provenance::Declared;
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let lag: usize = rec.get(0).unwrap_or("").trim().parse().map_err(|_| Error::Config(format!("row {}: bad lag", i + 1)))?;
            if lag != i + 1 {
                return Err(Error::Config(format!("row {}: lags must run 1, 2, ... (found {lag})", i + 1)));
            }
            for (c, col) in cols.iter_mut().enumerate() {
                let text = rec.get(c + 1).unwrap_or("").trim();
                col.push(if text.is_empty() {
                    None
                } else {
                    Some(text.parse().map_err(|_| Error::Config(format!("row {}: bad value '{text}'", i + 1)))?)
                });
            }
            if let Some(p) = rec.get(4).filter(|s| !s.trim().is_empty()) {
                prov = Provenance::parse(p)?;
            }
        }
        let seq = |col: &Vec<Option<f64>>| -> Option<Sequence> {
            if col.len() > 1 && col[1..].iter().all(Option::is_some) {
                Some(Sequence { values: col.iter().map(|v| v.unwrap_or(1.0)).collect(), provenance: prov })
            } else {
                None
            }
        };
        let mut p = MixingProfile {
            n: cols[0].len() - 1,
            alpha: seq(&cols[0]),
            rho: seq(&cols[1]),
            phi: seq(&cols[2]),
            varpi: Vec::new(),
            horizon: None,
        };
        p.pin_lag_zero();
        Ok(p)
    }
}

/// `max_k δ(P_{k+1}⋯P_{k+L})` for `L = 1..=max_lag` over starts `k` in
/// `0..=last − L`, with rows restricted to the support of `X_k`. Lags past
/// [`EXACT_LAGS`] use `δ(L) ≤ min_i δ(i)·δ(L − i)`.
pub fn chain_contraction_profile(chain: &Chain, marginals: &[Vec<f64>], last: usize, max_lag: usize) -> Vec<f64> {
    let exact = max_lag.min(EXACT_LAGS).min(last);
    let mut best = vec![0.0; exact + 1];
    best[0] = 1.0;
    let mut groups: HashMap<(Vec<bool>, Vec<u32>), ()> = HashMap::new();
    let sched = chain.schedule();
    for k in 0..last {
        let span = exact.min(last - k);
        let support: Vec<bool> = marginals[k].iter().map(|&p| p > 0.0).collect();
        let key = (support.clone(), sched[k..k + span].to_vec());
        if groups.insert(key, ()).is_some() {
            continue;
        }
        let mut prod: Option<Stochastic> = None;
        for l in 1..=span {
            let step = chain.transition(k + l);
            let next = match &prod {
                None => step.clone(),
                Some(p) => p.compose(step),
            };
            let d = next.contraction(Some(&support));
            if d > best[l] {
                best[l] = d;
            }
            prod = Some(next);
        }
    }
    // products of more steps never contract less
    for l in 1..best.len() {
        best[l] = best[l].min(best[l - 1]);
    }
    let mut out = best.clone();
    out.resize(max_lag + 1, 0.0);
    for l in best.len()..=max_lag {
        let mut v = out[l - 1];
        for i in 1..best.len() {
            v = v.min(best[i] * out[l - i]);
        }
        out[l] = v;
    }
    out
}

/// `φ` bound of a finite array from Dobrushin products of its chain, with
/// the derived `ρ ≤ 2√φ` and `α ≤ φ` bounds.
pub fn dobrushin_phi_profile(model: &ArrayModel) -> Result<MixingProfile> {
    let arr = model.finite()?;
    Ok(array_profile(arr))
}

pub(crate) fn array_profile(arr: &FiniteArray) -> MixingProfile {
    let n = arr.n();
    let shift = arr.mixing_shift();
    let last = arr.last_position();
    let max_lag = (n as isize + shift.lag_shift.max(0)).max(1) as usize;
    let delta = chain_contraction_profile(arr.chain(), arr.marginals(), last, max_lag);
    let phi: Vec<f64> = (0..=n)
        .map(|j| {
            let l = j as isize + shift.lag_shift;
            if l <= 0 {
                1.0
            } else {
                delta.get(l as usize).copied().unwrap_or(0.0)
            }
        })
        .collect();
    let prov = if shift.declared { Provenance::Declared } else { Provenance::DobrushinBound };
    MixingProfile::from_phi(phi, prov)
}

/// Norm index of `ϖ_{q,p}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    One,
    Two,
    Infinity,
}

/// Exact joint law of a (past, future) pair of finite blocks:
/// `weights[a][b] = P(past = a, future = b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointLaw {
    pub weights: Vec<Vec<f64>>,
}

impl JointLaw {
    pub fn new(weights: Vec<Vec<f64>>) -> Result<Self> {
        let nb = weights.first().map_or(0, Vec::len);
        if weights.is_empty() || nb == 0 || weights.iter().any(|r| r.len() != nb) {
            return Err(Error::validation("joint law", "needs a non-empty rectangular table"));
        }
        if weights.iter().flatten().any(|&w| !(w >= 0.0)) {
            return Err(Error::validation("joint law", "negative or non-finite weight"));
        }
        let total: f64 = weights.iter().flatten().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::validation("joint law", format!("total mass {total}")));
        }
        Ok(JointLaw { weights })
    }

    pub fn past_marginal(&self) -> Vec<f64> {
        self.weights.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn future_marginal(&self) -> Vec<f64> {
        let nb = self.weights[0].len();
        (0..nb).map(|b| self.weights.iter().map(|r| r[b]).sum()).collect()
    }
}

/// Vertex budget for `q = ∞`.
pub const VERTEX_BUDGET: usize = 1 << 20;
/// State budget for `q = 2`.
pub const SVD_BUDGET: usize = 256;

/// Exact `ϖ_{q,p} = sup{‖E[h|G] − E h‖_p : ‖h‖_q ≤ 1, h future-measurable}`.
///
/// For `q = ∞` the supremum of the convex functional over the cube is
/// attained at a sign vector and found by enumeration; for `q = p = 2` it is
/// the largest singular value of the centered conditional-expectation
/// operator between the weighted `L²` spaces.
pub fn brute_force_varpi(joint: &JointLaw, q: Norm, p: Norm) -> Result<f64> {
    let pa = joint.past_marginal();
    let pb = joint.future_marginal();
    let (na, nb) = (pa.len(), pb.len());
    match q {
        Norm::Infinity => {
            if nb >= 64 || (1usize << nb) > VERTEX_BUDGET || (na << nb) > VERTEX_BUDGET * 16 {
                return Err(Error::Resource(format!("{nb} future atoms exceed the vertex budget")));
            }
            // kernel[a][b] = P(b | a) − P(b)
            let kernel: Vec<Vec<f64>> = (0..na)
                .map(|a| {
                    (0..nb).map(|b| if pa[a] > 0.0 { joint.weights[a][b] / pa[a] - pb[b] } else { 0.0 }).collect()
                })
                .collect();
            let mut best: f64 = 0.0;
            // h and −h give the same norm; fix the sign of the first atom
            for mask in 0..(1usize << (nb - 1).min(63)) {
                let h = |b: usize| if b == 0 || (mask >> (b - 1)) & 1 == 0 { 1.0 } else { -1.0 };
                let g: Vec<f64> = kernel.iter().map(|row| row.iter().enumerate().map(|(b, k)| k * h(b)).sum()).collect();
                let v = match p {
                    Norm::One => g.iter().zip(&pa).map(|(x, w)| w * x.abs()).sum(),
                    Norm::Two => g.iter().zip(&pa).map(|(x, w)| w * x * x).sum::<f64>().sqrt(),
                    Norm::Infinity => {
                        g.iter().zip(&pa).filter(|(_, &w)| w > 0.0).fold(0.0, |m: f64, (x, _)| m.max(x.abs()))
                    }
                };
                best = best.max(v);
            }
            Ok(best)
        }
        Norm::Two => {
            if p != Norm::Two {
                return Err(Error::Unsupported("ϖ_{2,p} is computed for p = 2 only".into()));
            }
            if na > SVD_BUDGET || nb > SVD_BUDGET {
                return Err(Error::Resource(format!("{na}×{nb} law exceeds the {SVD_BUDGET}-state budget")));
            }
            let m = DMatrix::from_fn(na, nb, |a, b| {
                let w = pa[a] * pb[b];
                if w > 0.0 {
                    (joint.weights[a][b] - w) / w.sqrt()
                } else {
                    0.0
                }
            });
            Ok(m.singular_values().iter().cloned().fold(0.0, f64::max))
        }
        Norm::One => Err(Error::Unsupported("ϖ_{1,p} is not used".into())),
    }
}

/// Definitional `α = sup |P(A∩B) − P(A)P(B)|` and
/// `φ = sup |P(B|A) − P(B)|` by enumerating all events.
pub fn definitional_alpha_phi(joint: &JointLaw) -> Result<(f64, f64)> {
    let pa = joint.past_marginal();
    let pb = joint.future_marginal();
    let (na, nb) = (pa.len(), pb.len());
    if na + nb > 24 {
        return Err(Error::Resource(format!("2^{} event pairs exceed the budget", na + nb)));
    }
    let (mut alpha, mut phi): (f64, f64) = (0.0, 0.0);
    for sa in 1..(1usize << na) {
        let p_a: f64 = (0..na).filter(|a| sa >> a & 1 == 1).map(|a| pa[a]).sum();
        for sb in 1..(1usize << nb) {
            let p_b: f64 = (0..nb).filter(|b| sb >> b & 1 == 1).map(|b| pb[b]).sum();
            let p_ab: f64 = (0..na)
                .filter(|a| sa >> a & 1 == 1)
                .flat_map(|a| (0..nb).filter(move |b| sb >> b & 1 == 1).map(move |b| (a, b)))
                .map(|(a, b)| joint.weights[a][b])
                .sum();
            alpha = alpha.max((p_ab - p_a * p_b).abs());
            if p_a > 0.0 {
                phi = phi.max((p_ab / p_a - p_b).abs());
            }
        }
    }
    Ok((alpha, phi))
}

/// `(α, ρ, φ)` of a joint law through `ϖ`: `α = ¼ϖ_{∞,1}`, `ρ = ϖ_{2,2}`,
/// `φ = ½ϖ_{∞,∞}`.
pub fn coefficients(joint: &JointLaw) -> Result<(f64, f64, f64)> {
    Ok((
        brute_force_varpi(joint, Norm::Infinity, Norm::One)? / 4.0,
        brute_force_varpi(joint, Norm::Two, Norm::Two)?,
        brute_force_varpi(joint, Norm::Infinity, Norm::Infinity)? / 2.0,
    ))
}

/// Joint law of `(ζ_{k−h+1..k}, ζ_{k+j..k+j+h−1})` for a finite array with
/// `m = 0` (blocks clipped to positions `1..=n`).
pub fn block_joint_law(arr: &FiniteArray, k: usize, j: usize, horizon: usize) -> Result<JointLaw> {
    let chain = arr.chain();
    let d = chain.states();
    let n = arr.n();
    if k == 0 || k + j > n || horizon == 0 || j == 0 {
        return Err(Error::Precondition(format!("blocks at k = {k}, lag {j} outside 1..={n}")));
    }
    let p0 = k.saturating_sub(horizon - 1).max(1);
    let f_end = (k + j + horizon - 1).min(n);
    let (la, lb) = (k - p0 + 1, f_end - (k + j) + 1);
    let size = |l: usize| d.checked_pow(l as u32).filter(|&s| s <= SVD_BUDGET);
    let (na, nb) = match (size(la), size(lb)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Resource(format!("blocks of {la} and {lb} positions exceed the budget"))),
    };
    // past tuples: forward from the marginal at p0
    let mut past: Vec<f64> = arr.marginal(p0).to_vec();
    for p in p0 + 1..=k {
        let mat = chain.transition(p);
        let mut next = vec![0.0; past.len() * d];
        for (code, &w) in past.iter().enumerate() {
            for t in 0..d {
                next[code * d + t] = w * mat.get(code % d, t);
            }
        }
        past = next;
    }
    // bridge X_k → X_{k+j}
    let mut bridge = chain.transition(k + 1).clone();
    for p in k + 2..=k + j {
        bridge = bridge.compose(chain.transition(p));
    }
    let mut weights = vec![vec![0.0; nb]; na];
    for (a, &wa) in past.iter().enumerate() {
        if wa == 0.0 {
            continue;
        }
        let mut fut: Vec<f64> = bridge.row(a % d).iter().map(|&v| wa * v).collect();
        for p in k + j + 1..=f_end {
            let mat = chain.transition(p);
            let mut next = vec![0.0; fut.len() * d];
            for (code, &w) in fut.iter().enumerate() {
                for t in 0..d {
                    next[code * d + t] = w * mat.get(code % d, t);
                }
            }
            fut = next;
        }
        weights[a] = fut;
    }
    JointLaw::new(weights)
}

/// Exact coefficients of a tiny chain array (`m = 0`) with blocks of
/// `horizon` positions on each side, maximised over the split point.
pub fn exact_tiny_profile(model: &ArrayModel, horizon: usize) -> Result<MixingProfile> {
    let arr = model.finite()?;
    if arr.window() != 0 {
        return Err(Error::Unsupported("exact profiles are computed for window 0 arrays".into()));
    }
    let n = arr.n();
    let (mut alpha, mut rho, mut phi) = (vec![1.0; n + 1], vec![1.0; n + 1], vec![1.0; n + 1]);
    for j in 1..=n {
        let (mut a, mut r, mut f): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for k in 1..=n - j {
            let law = block_joint_law(arr, k, j, horizon)?;
            let (x, y, z) = coefficients(&law)?;
            a = a.max(x);
            r = r.max(y);
            f = f.max(z);
        }
        alpha[j] = a;
        rho[j] = r;
        phi[j] = f;
    }
    let prov = Provenance::ExactTiny;
    Ok(MixingProfile {
        n,
        alpha: Some(Sequence { values: alpha, provenance: prov }),
        rho: Some(Sequence { values: rho, provenance: prov }),
        phi: Some(Sequence { values: phi, provenance: prov }),
        varpi: Vec::new(),
        horizon: Some(horizon),
    })
}

/// Which branch of the interpolation bound won.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Phi,
    Rho,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterpolatedBound {
    pub value: f64,
    pub branch: Branch,
}

/// `ϖ_{q,q}(j) ≤ min(φ(j)^{1−1/q}, ρ(j)^{2/q})` over the available branches.
pub fn interpolate_bound(profile: &MixingProfile, q: f64, j: usize) -> Result<InterpolatedBound> {
    if !(q >= 2.0) {
        return Err(Error::Domain(format!("interpolation index q = {q} must be at least 2")));
    }
    let phi = profile.phi(j).map(|f| f.max(0.0).powf(1.0 - 1.0 / q));
    let rho = profile.rho(j).map(|r| r.max(0.0).powf(2.0 / q));
    match (phi, rho) {
        (Some(f), Some(r)) if r < f => Ok(InterpolatedBound { value: r, branch: Branch::Rho }),
        (Some(f), _) => Ok(InterpolatedBound { value: f, branch: Branch::Phi }),
        (None, Some(r)) => Ok(InterpolatedBound { value: r, branch: Branch::Rho }),
        (None, None) => Err(Error::MissingData(format!("profile has neither φ nor ρ at lag {j}"))),
    }
}

/// One failed inequality.
#[derive(Clone, Debug, PartialEq)]
pub struct Violation {
    pub lag: usize,
    pub inequality: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

/// Checks `α ≤ φ`, `α ≤ ρ/4` and `ρ ≤ 2√φ` at every lag where both sides
/// are present.
pub fn consistency_check(profile: &MixingProfile) -> Vec<Violation> {
    let mut out = Vec::new();
    for j in 1..=profile.n {
        let (a, r, f) = (profile.alpha(j), profile.rho(j), profile.phi(j));
        let mut check = |inequality, lhs: f64, rhs: f64| {
            if lhs > rhs + TOL {
                out.push(Violation { lag: j, inequality, lhs, rhs });
            }
        };
        if let (Some(a), Some(f)) = (a, f) {
            check("alpha<=phi", a, f);
        }
        if let (Some(a), Some(r)) = (a, r) {
            check("alpha<=rho/4", a, r / 4.0);
        }
        if let (Some(r), Some(f)) = (r, f) {
            check("rho<=2sqrt(phi)", r, 2.0 * f.sqrt());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fair_copy() -> JointLaw {
        JointLaw::new(vec![vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap()
    }

    #[test]
    fn one_fair_bit_on_both_sides() {
        let (a, r, f) = coefficients(&fair_copy()).unwrap();
        assert!((f - 0.5).abs() < 1e-15);
        assert!((a - 0.25).abs() < 1e-15);
        assert!((r - 1.0).abs() < 1e-12);
        let (da, df) = definitional_alpha_phi(&fair_copy()).unwrap();
        assert!((da - 0.25).abs() < 1e-15 && (df - 0.5).abs() < 1e-15);
    }

    #[test]
    fn independent_blocks_vanish() {
        let law = JointLaw::new(vec![vec![0.12, 0.28], vec![0.18, 0.42]]).unwrap();
        for (q, p) in [(Norm::Infinity, Norm::One), (Norm::Infinity, Norm::Two), (Norm::Infinity, Norm::Infinity), (Norm::Two, Norm::Two)] {
            assert!(brute_force_varpi(&law, q, p).unwrap() < 1e-12);
        }
    }

    #[test]
    fn interpolation_examples() {
        let p = MixingProfile {
            n: 1,
            alpha: None,
            rho: Some(Sequence { values: vec![1.0, 0.9], provenance: Provenance::Declared }),
            phi: Some(Sequence { values: vec![1.0, 0.25], provenance: Provenance::Declared }),
            varpi: Vec::new(),
            horizon: None,
        };
        let b = interpolate_bound(&p, 4.0, 1).unwrap();
        assert!((b.value - 0.25f64.powf(0.75)).abs() < 1e-15);
        assert_eq!(b.branch, Branch::Phi);
        let only_phi = MixingProfile::from_phi(vec![1.0, 0.04], Provenance::Declared);
        let mut no_rho = only_phi.clone();
        no_rho.rho = None;
        assert!((interpolate_bound(&no_rho, 2.0, 1).unwrap().value - 0.2).abs() < 1e-15);
        let mut empty = only_phi;
        empty.rho = None;
        empty.phi = None;
        assert!(matches!(interpolate_bound(&empty, 3.0, 1), Err(Error::MissingData(_))));
    }

    #[test]
    fn adversarial_profile_is_flagged() {
        let mut p = MixingProfile::from_phi(vec![1.0, 0.1, 0.05], Provenance::Declared);
        p.alpha.as_mut().unwrap().values[1] = 0.5;
        let v = consistency_check(&p);
        assert!(!v.is_empty() && v.iter().all(|x| x.lag == 1));
        assert!(v.iter().any(|x| x.inequality == "alpha<=phi"));
    }

    #[test]
    fn homogeneous_contraction_powers() {
        let p = Stochastic::new(&[vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        let chain = Chain::homogeneous(vec![0.5, 0.5], p, 300).unwrap();
        let prof = chain_contraction_profile(&chain, &chain.marginals(), 300, 300);
        for j in 1..=300 {
            assert!((prof[j] - 0.8f64.powi(j as i32)).abs() <= 1e-12 * 0.8f64.powi(j as i32).max(1e-300) + 1e-15);
        }
    }
}
