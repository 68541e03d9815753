//! Coboundary/martingale decomposition over a certified block partition,
//! time-changed paths, quadratic variation and the closed-form rate bounds.
//!
//! For a finite array with window `m`, `G_j = σ(X_0..X_{j+2m})` and
//!
//! ```text
//! R_j = E[S_n − S_j | G_j],   d_j = ξ_j + R_j − R_{j−1},   D_i = Σ_{j ∈ B_i} d_j.
//! ```
//!
//! Writing `H_p` for the full observable at chain position `p` and
//! `F_u(x) = E[Σ_{q>u} H_q(X_q) | X_u = x]`, the residual is
//! `R_j = Σ_{p=j+1}^{j+2m} h^{(>j)}_p(X_p) + F_{j+2m}(X_{j+2m})`, where
//! `h^{(>j)}_p` keeps only the terms of indices above `j`.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generators::finite::FiniteArray;
use crate::generators::{sample_chain_path, ArrayModel};
use crate::linearize::{BlockPartition, Check, GrowthConstants};
use crate::mixing::{interpolate_bound, MixingProfile};
use crate::numeric::NeumaierSum;
use crate::oracle::functional::{lp_norm, path_extremes, prefix_family_variances, tail_moments, variance};
use crate::oracle::{cross_moment, sum_functional, Additive, VarianceProfile};

/// Tolerance of the martingale and telescoping checks.
pub const MARTINGALE_TOL: f64 = 1e-10;

/// Relative tolerance of the orthogonality and variance-transfer checks.
pub const ORTHO_TOL: f64 = 1e-9;

/// Constant of the time-change gap bound, calibrated once on iid signs.
pub const C_GAP: f64 = 2.0;

/// Universal constant of the rate bounds (unknown; outputs compare across `n`).
pub const C_P0: f64 = 1.0;

/// Default number of intervals of the `t`-grid.
pub const DEFAULT_GRID: usize = 1024;

/// `F_u` for every chain position `u` (one backward sweep).
pub(crate) fn future_sums(arr: &FiniteArray, observable: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = arr.states();
    let last = arr.last_position();
    let chain = arr.chain();
    let mut future = vec![vec![0.0; d]; last + 1];
    for p in (0..last).rev() {
        let nxt: Vec<f64> = (0..d).map(|s| observable[p + 1][s] + future[p + 1][s]).collect();
        let mut out = vec![0.0; d];
        chain.transition(p + 1).apply(&nxt, &mut out);
        future[p] = out;
    }
    future
}

fn observables(arr: &FiniteArray) -> Vec<Vec<f64>> {
    (0..=arr.last_position()).map(|p| arr.combined(p, 1, arr.n())).collect()
}

/// `R_j = E[Σ_{s>j} ξ_s | X_j]` as a state vector, for arrays without a window.
pub fn future_conditional_sum(model: &ArrayModel, j: usize) -> Result<Vec<f64>> {
    let arr = model.finite()?;
    if arr.window() > 0 {
        return Err(Error::Unsupported(format!(
            "R_j of a window-{} array depends on {} positions, not on one state",
            arr.window(),
            2 * arr.window() + 1
        )));
    }
    if j > arr.n() {
        return Err(Error::Domain(format!("index {j} outside 0..={}", arr.n())));
    }
    let h = observables(arr);
    Ok(future_sums(arr, &h).swap_remove(j))
}

/// `R_j` as an additive functional of the chain.
fn residual_functional(arr: &FiniteArray, future: &[Vec<f64>], j: usize) -> Additive {
    let m = arr.window();
    let n = arr.n();
    let mut z = Additive { start: 0, funcs: Vec::new() };
    for p in j + 1..=j + 2 * m {
        if j < n {
            z.add_at(p, &arr.combined(p, j + 1, n), 1.0);
        }
    }
    z.add_at(j + 2 * m, &future[j + 2 * m], 1.0);
    z
}

/// Per-block data for conditional moments given `G_{a−1}`.
#[derive(Clone, Debug)]
struct BlockTerm {
    /// `D_i` as an additive functional.
    z: Additive,
    /// Last position known at the start of the block, `a − 1 + 2m`.
    u: usize,
    /// `E[part of D_i after u | X_u]` and its second moment.
    g1: Vec<f64>,
    g2: Vec<f64>,
}

/// Coboundary decomposition of one row over a block partition.
#[derive(Clone, Debug)]
pub struct CoboundaryDecomp {
    pub n: usize,
    pub window: usize,
    pub p0: f64,
    pub sigma: f64,
    /// Blocks `(a_i, b_i)`.
    pub blocks: Vec<(usize, usize)>,
    /// `Var(S_k)` for `k = 0..=n`.
    pub variances: Vec<f64>,
    /// `E[D_i²]`.
    pub block_second_moments: Vec<f64>,
    /// `‖D_i‖_{p0}` (upper bounds when not exact).
    pub block_norms: Vec<f64>,
    /// `max_{i, reachable past} |E[D_i | G_{a_i − 1}]|`.
    pub martingale_residual: f64,
    /// `‖R_j‖_2` for `j = 0..=n`.
    pub residual_l2: Vec<f64>,
    /// `‖R‖_{2,n}` and `‖R‖_{p0,n}`.
    pub r_norm_2: f64,
    pub r_norm_p0: f64,
    /// `K_{p0,n} = max_j ‖ξ_j‖_{p0}`.
    pub k_p0: f64,
    /// Whether all `p0` norms are exact (even `p0` or state functions).
    pub norms_exact: bool,
    observable: Vec<Vec<f64>>,
    future: Vec<Vec<f64>>,
    terms: Vec<BlockTerm>,
}

/// Builds the decomposition and certifies the martingale property.
///
/// Fails with an invariant error when some `|E[D_i | G_{a_i−1}]|` exceeds
/// [`MARTINGALE_TOL`] on a reachable past.
pub fn martingale_differences(model: &ArrayModel, partition: &BlockPartition, p0: f64) -> Result<CoboundaryDecomp> {
    let arr = model.finite()?;
    if partition.n != arr.n() {
        return Err(Error::Precondition(format!("partition of length {} for a row of length {}", partition.n, arr.n())));
    }
    if !(p0 >= 2.0) {
        return Err(Error::validation("p0", format!("{p0} must be at least 2")));
    }
    let n = arr.n();
    let m = arr.window();
    let chain = arr.chain();
    let marg = arr.marginals();
    let observable = observables(arr);
    let future = future_sums(arr, &observable);
    let blocks: Vec<(usize, usize)> = partition.blocks.iter().map(|b| (b.a, b.b)).collect();
    let variances = VarianceProfile::compute(model)?.values;
    let sigma = variances[n].sqrt();

    struct BlockOut {
        term: BlockTerm,
        second: f64,
        norm: (f64, bool),
        residual: f64,
    }
    let per_block: Vec<BlockOut> = blocks
        .par_iter()
        .map(|&(a, b)| {
            let mut z = sum_functional(arr, &[(a, b)]);
            z.add(&residual_functional(arr, &future, b), 1.0);
            z.add(&residual_functional(arr, &future, a - 1), -1.0);
            let u = a - 1 + 2 * m;
            let (g1, g2) = tail_moments(chain, &z, u);
            let lo = z.start.min(u);
            let (lo_val, hi_val) = path_extremes(chain, marg, &z, lo, u, &g1);
            let residual = lo_val.abs().max(hi_val.abs());
            BlockOut {
                second: variance(chain, marg, &z),
                norm: lp_norm(chain, marg, &z, p0),
                residual,
                term: BlockTerm { z, u, g1, g2 },
            }
        })
        .collect();
    let martingale_residual = per_block.iter().map(|b| b.residual).fold(0.0, f64::max);
    if martingale_residual > MARTINGALE_TOL {
        return Err(Error::invariant(
            "martingale_property",
            format!("max |E[D_i | G_(i-1)]| = {martingale_residual:.3e} exceeds {MARTINGALE_TOL:e}"),
        ));
    }
    let residual_norms: Vec<(f64, (f64, bool))> = (0..=n)
        .into_par_iter()
        .map(|j| {
            let r = residual_functional(arr, &future, j);
            (variance(chain, marg, &r).sqrt(), lp_norm(chain, marg, &r, p0))
        })
        .collect();
    let xi_norms: Vec<(f64, bool)> =
        (1..=n).into_par_iter().map(|j| lp_norm(chain, marg, &sum_functional(arr, &[(j, j)]), p0)).collect();
    let norms_exact = per_block.iter().all(|b| b.norm.1)
        && residual_norms.iter().all(|r| r.1 .1)
        && xi_norms.iter().all(|x| x.1);
    let residual_l2: Vec<f64> = residual_norms.iter().map(|r| r.0).collect();
    Ok(CoboundaryDecomp {
        n,
        window: m,
        p0,
        sigma,
        blocks,
        variances,
        block_second_moments: per_block.iter().map(|b| b.second).collect(),
        block_norms: per_block.iter().map(|b| b.norm.0).collect(),
        martingale_residual,
        r_norm_2: residual_l2.iter().copied().fold(0.0, f64::max),
        r_norm_p0: residual_norms.iter().map(|r| r.1 .0).fold(0.0, f64::max),
        residual_l2,
        k_p0: xi_norms.iter().map(|x| x.0).fold(0.0, f64::max),
        norms_exact,
        observable,
        future,
        terms: per_block.into_iter().map(|b| b.term).collect(),
    })
}

/// One chain path pushed through the decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct PathEval {
    /// `S_k`, `k = 0..=n`.
    pub partial: Vec<f64>,
    /// `R_j`, `j = 0..=n`.
    pub residual: Vec<f64>,
    /// `d_j`, `j = 1..=n` (index 0 is `j = 1`).
    pub d: Vec<f64>,
    /// `D_i` per block.
    pub block_d: Vec<f64>,
    /// `E[D_i² | G_{a_i−1}]` per block.
    pub conditional_second: Vec<f64>,
    /// `max_k |Σ_{j≤k} d_j − (S_k + R_k − R_0)|`, together with the gap
    /// between `Σ_{j ∈ B_i} d_j` and the block functional evaluated directly.
    pub telescoping_residual: f64,
}

impl CoboundaryDecomp {
    pub fn k_n(&self) -> usize {
        self.blocks.len()
    }

    /// Evaluates `S`, `R`, `d`, `D` and the conditional second moments on a
    /// chain path `X_0..X_{n+2m}`.
    pub fn evaluate(&self, arr: &FiniteArray, path: &[usize]) -> PathEval {
        let n = self.n;
        let m = self.window;
        let xi = arr.observe(path);
        let mut partial = Vec::with_capacity(n + 1);
        partial.push(0.0);
        let mut acc = NeumaierSum::default();
        for &v in &xi {
            acc.add(v);
            partial.push(acc.value());
        }
        // t[u] = Σ_{p ≤ u} H_p(x_p)
        let mut t = Vec::with_capacity(path.len());
        let mut acc = NeumaierSum::default();
        for (p, &x) in path.iter().enumerate() {
            acc.add(self.observable[p][x]);
            t.push(acc.value());
        }
        let residual: Vec<f64> =
            (0..=n).map(|j| t[j + 2 * m] - partial[j] + self.future[j + 2 * m][path[j + 2 * m]]).collect();
        let d: Vec<f64> = (1..=n).map(|j| xi[j - 1] + residual[j] - residual[j - 1]).collect();
        let mut worst: f64 = 0.0;
        let mut cum = NeumaierSum::default();
        for k in 1..=n {
            cum.add(d[k - 1]);
            worst = worst.max((cum.value() - (partial[k] + residual[k] - residual[0])).abs());
        }
        let mut block_d = Vec::with_capacity(self.blocks.len());
        let mut conditional_second = Vec::with_capacity(self.blocks.len());
        for (&(a, b), term) in self.blocks.iter().zip(&self.terms) {
            let from_d: f64 = d[a - 1..b].iter().sum();
            worst = worst.max((from_d - term.z.evaluate(path)).abs());
            block_d.push(from_d);
            let x = path[term.u];
            let known: f64 = (term.z.start..=term.u).filter_map(|p| term.z.at(p).map(|f| f[path[p]])).sum();
            conditional_second.push(known * known + 2.0 * known * term.g1[x] + term.g2[x]);
        }
        PathEval { partial, residual, d, block_d, conditional_second, telescoping_residual: worst }
    }

    /// Exact `Var(Σ_{i≤k} D_i)` and `Var(2S_{b_k} + R_{b_k} − R_0)` for every
    /// prefix `k`, in two forward sweeps.
    pub fn prefix_variances(&self, arr: &FiniteArray) -> (Vec<f64>, Vec<f64>) {
        let m = self.window;
        let chain = arr.chain();
        let marg = arr.marginals();
        let f0 = &self.future[2 * m];
        let d = arr.states();
        let h = |p: usize, weight: f64| -> Vec<f64> {
            let mut v: Vec<f64> = self.observable[p].iter().map(|x| weight * x).collect();
            if p == 2 * m {
                v.iter_mut().zip(f0).for_each(|(a, b)| *a -= b);
            }
            v
        };
        // Σ_{i≤k} D_i = Σ_{2m<p≤b_k+2m} H_p + F_{b_k+2m} − F_{2m}
        let ends: Vec<usize> = self.blocks.iter().map(|&(_, b)| b + 2 * m).collect();
        let mart = prefix_family_variances(
            chain,
            marg,
            &ends,
            0,
            |p| h(p, if p > 2 * m { 1.0 } else { 0.0 }),
            |_, _| vec![0.0; d],
            |k| self.future[ends[k]].clone(),
        );
        let ends: Vec<usize> = self.blocks.iter().map(|&(_, b)| b).collect();
        let sum = prefix_family_variances(
            chain,
            marg,
            &ends,
            2 * m,
            |p| h(p, if p > 2 * m { 2.0 } else { 1.0 }),
            |k, p| {
                let mut v = h(p, if p > 2 * m { 1.0 } else { 0.0 });
                v.iter_mut().zip(arr.combined(p, 1, ends[k])).for_each(|(a, b)| *a += b);
                v
            },
            |k| self.future[ends[k] + 2 * m].clone(),
        );
        (mart, sum)
    }

    /// Orthogonality and variance-transfer checks (exact).
    pub fn orthogonality_checks(&self, arr: &FiniteArray) -> Vec<Check> {
        let chain = arr.chain();
        let marg = arr.marginals();
        let scale = self.sigma * self.sigma;
        let tol = ORTHO_TOL * scale.max(1.0);
        let mut checks = Vec::new();
        let mut worst: f64 = 0.0;
        for w in self.terms.windows(2) {
            worst = worst.max(cross_moment(chain, marg, &w[0].z, &w[1].z).abs());
        }
        checks.push(Check::new("orthogonality_adjacent", worst, 0.0, tol));
        let (mart, _) = self.prefix_variances(arr);
        let mut cum = 0.0;
        let mut worst: f64 = 0.0;
        for (k, v) in mart.iter().enumerate() {
            cum += self.block_second_moments[k];
            worst = worst.max((v - cum).abs());
        }
        checks.push(Check::new("orthogonality_prefix", worst, 0.0, tol));
        let mut total = sum_functional(arr, &[(1, self.n)]);
        total.add(&residual_functional(arr, &self.future, 0), -1.0);
        let transfer = variance(chain, marg, &total);
        checks.push(Check::new("variance_transfer", (transfer - cum).abs(), 0.0, tol));
        checks
    }

    /// `‖R‖_{p0} ≤ min(K_{p0}, Q^{1/2}β)·Π_{p0}`.
    pub fn residual_norm_check(&self, q_n: f64, beta_n: f64, pi_p0: f64) -> Check {
        let rhs = self.k_p0.min(q_n.sqrt() * beta_n) * pi_p0;
        Check::new("residual_norm", self.r_norm_p0, rhs, 0.0)
    }

    /// `L_{p0} = Σ_i ‖D_i/σ‖_{p0}^{p0}`.
    pub fn lyapunov_sum(&self) -> f64 {
        self.block_norms.iter().map(|v| (v / self.sigma).powf(self.p0)).sum()
    }

    /// `E⟨M⟩_1 = Σ_i E[D_i²]/σ²`.
    pub fn expected_qv(&self) -> f64 {
        self.block_second_moments.iter().sum::<f64>() / (self.sigma * self.sigma)
    }
}

/// Minimal `k` with `σ²_k ≥ t·σ²_n` and the block containing it.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeChange {
    pub t: f64,
    pub v: usize,
    /// 1-based block index `j_n(t)`.
    pub j: usize,
    /// `|σ²_{b_{j_n(t)}} − t·σ²_n|`.
    pub gap: f64,
}

/// Time change over a variance profile and a partition.
#[derive(Clone, Debug)]
pub struct TimeChanger {
    running_max: Vec<f64>,
    variances: Vec<f64>,
    ends: Vec<usize>,
}

impl TimeChanger {
    pub fn new(profile: &VarianceProfile, partition: &BlockPartition) -> Result<Self> {
        if profile.n() != partition.n {
            return Err(Error::Precondition("profile and partition lengths differ".into()));
        }
        let mut running_max = Vec::with_capacity(profile.values.len());
        let mut best = f64::NEG_INFINITY;
        for &v in &profile.values {
            best = best.max(v);
            running_max.push(best);
        }
        Ok(TimeChanger {
            running_max,
            variances: profile.values.clone(),
            ends: partition.blocks.iter().map(|b| b.b).collect(),
        })
    }

    pub fn at(&self, t: f64) -> Result<TimeChange> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("t = {t} outside [0, 1]")));
        }
        let n = self.variances.len() - 1;
        let target = t * self.variances[n];
        // running_max is non-decreasing, so the first crossing is a partition point
        let v = 1 + self.running_max[1..].partition_point(|&x| x < target);
        let v = v.min(n);
        let j = 1 + self.ends.partition_point(|&b| b < v);
        let gap = (self.variances[self.ends[j - 1]] - target).abs();
        Ok(TimeChange { t, v, j, gap })
    }
}

/// `(v_n(t), j_n(t))` with the time-change gap.
pub fn time_change(profile: &VarianceProfile, partition: &BlockPartition, t: f64) -> Result<TimeChange> {
    TimeChanger::new(profile, partition)?.at(t)
}

/// `C·(K_n(1 + C_n) + Q_n + C_n√Q_n)` with the frozen [`C_GAP`].
pub fn time_change_gap_bound(constants: &GrowthConstants) -> f64 {
    let c = constants;
    C_GAP * (c.k_n * (1.0 + c.c_n) + c.q_n + c.c_n * c.q_n.sqrt())
}

/// The `t`-grid `i/g`, `i = 0..=g`.
pub fn t_grid(g: usize) -> Vec<f64> {
    (0..=g).map(|i| i as f64 / g as f64).collect()
}

/// Time-changed paths of a replicate set.
#[derive(Clone, Debug)]
pub struct PathPair {
    pub t: Vec<f64>,
    pub v: Vec<usize>,
    pub j: Vec<usize>,
    /// Replicate indices (stream numbers).
    pub replicates: Vec<u64>,
    /// `W_n(t) = S_{v_n(t)}/σ`.
    pub w: Vec<Vec<f64>>,
    /// `𝒲_n(t) = S_{b_{j_n(t)}}/σ`.
    pub cal_w: Vec<Vec<f64>>,
    /// `M_n(t) = Σ_{i≤j_n(t)} D_i/σ`.
    pub m: Vec<Vec<f64>>,
    /// `⟨M_n⟩_t = Σ_{i≤j_n(t)} E[D_i² | G_{i−1}]/σ²`.
    pub qv: Vec<Vec<f64>>,
    /// Worst telescoping residual over all replicates.
    pub telescoping_residual: f64,
    /// Worst `|M_n(1) − 𝒲_n(1) − (R_n − R_0)/σ|`.
    pub endpoint_residual: f64,
    /// Per replicate `max_k max_{l∈B_k} |S_{b_k} − S_l|/σ`.
    pub block_oscillation: Vec<f64>,
}

/// Samples `replicates` chain paths and evaluates the four processes on the grid.
pub fn path_pair(
    model: &ArrayModel,
    decomp: &CoboundaryDecomp,
    changer: &TimeChanger,
    grid: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<PathPair> {
    let arr = model.finite()?;
    let changes: Vec<TimeChange> = grid.iter().map(|&t| changer.at(t)).collect::<Result<_>>()?;
    let sigma = decomp.sigma;
    let s2 = sigma * sigma;
    struct Rep {
        w: Vec<f64>,
        cal_w: Vec<f64>,
        m: Vec<f64>,
        qv: Vec<f64>,
        tele: f64,
        endpoint: f64,
        osc: f64,
    }
    let reps: Vec<Rep> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let path = sample_chain_path(arr, seed, r);
            let e = decomp.evaluate(arr, &path);
            let mut cm = vec![0.0];
            let mut cq = vec![0.0];
            for (dv, qv) in e.block_d.iter().zip(&e.conditional_second) {
                cm.push(cm.last().unwrap() + dv / sigma);
                cq.push(cq.last().unwrap() + qv / s2);
            }
            let k = decomp.k_n();
            let endpoint = (cm[k] - e.partial[decomp.n] / sigma - (e.residual[decomp.n] - e.residual[0]) / sigma).abs();
            let osc = decomp
                .blocks
                .iter()
                .map(|&(a, b)| (a..=b).map(|l| (e.partial[b] - e.partial[l]).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max)
                / sigma;
            Rep {
                w: changes.iter().map(|c| e.partial[c.v] / sigma).collect(),
                cal_w: changes.iter().map(|c| e.partial[decomp.blocks[c.j - 1].1] / sigma).collect(),
                m: changes.iter().map(|c| cm[c.j]).collect(),
                qv: changes.iter().map(|c| cq[c.j]).collect(),
                tele: e.telescoping_residual,
                endpoint,
                osc,
            }
        })
        .collect();
    Ok(PathPair {
        t: grid.to_vec(),
        v: changes.iter().map(|c| c.v).collect(),
        j: changes.iter().map(|c| c.j).collect(),
        replicates: (0..replicates as u64).collect(),
        telescoping_residual: reps.iter().map(|r| r.tele).fold(0.0, f64::max),
        endpoint_residual: reps.iter().map(|r| r.endpoint).fold(0.0, f64::max),
        block_oscillation: reps.iter().map(|r| r.osc).collect(),
        w: reps.iter().map(|r| r.w.clone()).collect(),
        cal_w: reps.iter().map(|r| r.cal_w.clone()).collect(),
        m: reps.iter().map(|r| r.m.clone()).collect(),
        qv: reps.into_iter().map(|r| r.qv).collect(),
    })
}

impl PathPair {
    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// Per-replicate `sup_t |a(t) − b(t)|` over the grid.
    pub fn sup_distance(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.iter().zip(y).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max))
            .collect()
    }

    /// Writes CSV `replicate,t,W,cal_W,M,QV`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["replicate", "t", "W", "cal_W", "M", "QV"])?;
        for (r, rep) in self.replicates.iter().enumerate() {
            for (i, t) in self.t.iter().enumerate() {
                w.write_record([
                    rep.to_string(),
                    format!("{t}"),
                    format!("{:.17e}", self.w[r][i]),
                    format!("{:.17e}", self.cal_w[r][i]),
                    format!("{:.17e}", self.m[r][i]),
                    format!("{:.17e}", self.qv[r][i]),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `inf{ε > 0 : P̂(Z > ε) < ε}` for the empirical law of `samples`.
pub fn ky_fan_estimate(samples: &[f64]) -> f64 {
    let mut z: Vec<f64> = samples.to_vec();
    z.sort_by(f64::total_cmp);
    let r = z.len();
    for i in 0..=r {
        let lo = if i == 0 { 0.0 } else { z[i - 1] };
        let hi = if i == r { f64::INFINITY } else { z[i] };
        let g = (r - i) as f64 / r as f64;
        let cand = lo.max(g);
        if cand < hi {
            return cand;
        }
    }
    0.0
}

/// `‖Z‖_q^{q/(q+1)}`, the Markov-inequality bound on Ky Fan and Prokhorov
/// distances, from samples of `Z`.
pub fn coupling_bound(samples: &[f64], q: f64) -> f64 {
    let moment = samples.iter().map(|z| z.abs().powf(q)).sum::<f64>() / samples.len() as f64;
    moment.powf(1.0 / (q + 1.0))
}

/// `k^{1/p}·max_j ‖Z_j‖_p`.
pub fn maximal_moment_bound(norms: &[f64], p: f64) -> f64 {
    (norms.len() as f64).powf(1.0 / p) * norms.iter().copied().fold(0.0, f64::max)
}

/// Quadratic-variation summary.
#[derive(Clone, Debug)]
pub struct QvReport {
    /// `E⟨M_n⟩_1`.
    pub expected_qv: f64,
    /// `Σ_{i≤j_n(t)} E[𝒟_i²] − t` on the grid.
    pub deterministic_gap: Vec<f64>,
    /// Per-replicate `sup_t |⟨M_n⟩_t − t|`.
    pub sup_deviation: Vec<f64>,
    /// Ky Fan estimate `k̃_n`.
    pub ky_fan: f64,
    /// `‖sup_t |⟨M_n⟩_t − t|‖_q^{q/(q+1)}` with `q = p0/2`.
    pub qv1_bound: f64,
    /// Difference-of-squares gap per prefix, and the per-`t` gap bound.
    pub checks: Vec<Check>,
}

/// Quadratic variation, Ky Fan estimate and the deterministic gap checks.
pub fn quadratic_variation(
    model: &ArrayModel,
    decomp: &CoboundaryDecomp,
    constants: &GrowthConstants,
    pi_p0: f64,
    paths: &PathPair,
) -> Result<QvReport> {
    if paths.len() < 100 {
        return Err(Error::Precondition(format!("{} replicates; at least 100 are needed", paths.len())));
    }
    let arr = model.finite()?;
    let s2 = decomp.sigma * decomp.sigma;
    let mut cum = vec![0.0];
    for v in &decomp.block_second_moments {
        cum.push(cum.last().unwrap() + v / s2);
    }
    let deterministic_gap: Vec<f64> = paths.t.iter().zip(&paths.j).map(|(t, &j)| cum[j] - t).collect();
    let sup_deviation: Vec<f64> = paths
        .qv
        .iter()
        .map(|q| q.iter().zip(&paths.t).map(|(a, t)| (a - t).abs()).fold(0.0, f64::max))
        .collect();
    let ky_fan = ky_fan_estimate(&sup_deviation);
    let qv1_bound = coupling_bound(&sup_deviation, decomp.p0 / 2.0);

    let mut checks = Vec::new();
    let (mart, plus) = decomp.prefix_variances(arr);
    let r2 = decomp.r_norm_2;
    for (k, (&vm, &vp)) in mart.iter().zip(&plus).enumerate() {
        let b = decomp.blocks[k].1;
        let lhs = (vm - decomp.variances[b]).abs() / s2;
        let rhs = 2.0 * r2 * (r2 + vp.sqrt()) / s2;
        checks.push(Check::new(format!("ff[{}]", k + 1), lhs, rhs, 1e-12 * (1.0 + rhs)));
    }
    let c = constants;
    let last_rhs = C_GAP
        * (c.k_n * c.d_n + c.q_n + c.c_n * c.q_n.sqrt() + r2 * (r2 + pi_p0.sqrt() * c.beta_n * decomp.sigma))
        / s2;
    let worst = deterministic_gap.iter().map(|g| g.abs()).fold(0.0, f64::max);
    checks.push(Check::new("qv_gap", worst, last_rhs, 0.0));
    Ok(QvReport { expected_qv: cum[decomp.k_n()], deterministic_gap, sup_deviation, ky_fan, qv1_bound, checks })
}

/// Memory coefficient `r_n(p, m)` and the tail bound.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryCoefficient {
    pub p: f64,
    pub m: usize,
    /// `r_n(p, m)`: exact when `exact`, otherwise the bound.
    pub value: f64,
    pub exact: bool,
    /// `c_n(p, m)` bound used in the tail formula.
    pub c: f64,
    /// `m·c + min(K_p, β√Q)·Σ_{m<k≤n} ϖ_{p,p}(k)`.
    pub bound: f64,
}

/// `m·c + C·min(K_p, β√Q)·Σ_{m<k≤n} ϖ(k)` with `C = 1`; `varpi[k]` is `ϖ(k)`.
pub fn memory_tail_bound(m: usize, c: f64, k_p: f64, beta_sqrt_q: f64, varpi: &[f64]) -> f64 {
    let tail: f64 = varpi.iter().skip(m + 1).sum();
    m as f64 * c + k_p.min(beta_sqrt_q) * tail
}

/// `r_n(p, m)` of a finite array.
///
/// Zero when `m ≥ n`, when `m` reaches the declared memory, or for a
/// first-order chain observed without a window. For the tuple-lifted memory
/// chain (states are bit histories, newest bit lowest) the coefficient is
/// computed exactly by conditioning on the newest `m + 1` bits. Otherwise the
/// tail bound is returned with `c_n(p, m) ≤ 2·K_p`.
pub fn memory_coefficient(
    model: &ArrayModel,
    profile: &MixingProfile,
    constants: &GrowthConstants,
    p: f64,
    m: usize,
) -> Result<MemoryCoefficient> {
    let arr = model.finite()?;
    let n = arr.n();
    let chain = arr.chain();
    let marg = arr.marginals();
    let k_p = (1..=n)
        .into_par_iter()
        .map(|j| lp_norm(chain, marg, &sum_functional(arr, &[(j, j)]), p).0)
        .reduce(|| 0.0, f64::max);
    let c = 2.0 * k_p;
    let varpi: Vec<f64> = (0..=n)
        .map(|k| if k == 0 { Ok(1.0) } else { interpolate_bound(profile, p, k).map(|b| b.value) })
        .collect::<Result<_>>()?;
    let bound = memory_tail_bound(m, c, k_p, constants.beta_n * constants.q_n.sqrt(), &varpi);
    let out = |value: f64, exact: bool| Ok(MemoryCoefficient { p, m, value, exact, c, bound });
    if m >= n || arr.memory().is_some_and(|mm| m >= mm) {
        return out(0.0, true);
    }
    if arr.window() == 0 {
        match arr.memory() {
            None => return out(0.0, true),
            Some(mm) if arr.states() == 1 << mm => {
                let h = observables(arr);
                let future = future_sums(arr, &h);
                let mask = (1usize << (m + 1)) - 1;
                let worst = (m..=n)
                    .into_par_iter()
                    .map(|j| {
                        let w = &marg[j];
                        let f = &future[j];
                        let mut num = vec![0.0; mask + 1];
                        let mut den = vec![0.0; mask + 1];
                        for s in 0..w.len() {
                            num[s & mask] += w[s] * f[s];
                            den[s & mask] += w[s];
                        }
                        let moment: f64 = (0..w.len())
                            .filter(|&s| w[s] > 0.0)
                            .map(|s| w[s] * (f[s] - num[s & mask] / den[s & mask]).abs().powf(p))
                            .sum();
                        moment.powf(1.0 / p)
                    })
                    .reduce(|| 0.0, f64::max);
                return out(worst, true);
            }
            Some(_) => {}
        }
    }
    out(bound, false)
}

/// Inputs of the sequential constants beyond the growth constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SequentialInputs {
    /// `K_{p0,n}`.
    pub k_p0: f64,
    /// `Π_{p0} = 1 + Σ ϖ_{p0,p0}(s)`.
    pub pi_p0: f64,
    /// `Π_{p0/2} = 1 + Σ ϖ_{p0/2,p0/2}(s)`.
    pub pi_half: f64,
}

impl SequentialInputs {
    /// Reads the two `Π` sums off a mixing profile (`p0 ≥ 4` so that both
    /// orders are at least 2).
    pub fn from_profile(profile: &MixingProfile, k_p0: f64, p0: f64) -> Result<Self> {
        Ok(SequentialInputs {
            k_p0,
            pi_p0: 1.0 + profile.varpi_sum(p0)?,
            pi_half: 1.0 + profile.varpi_sum(p0 / 2.0)?,
        })
    }
}

/// Multiplicative constants of the functional CLT rates.
#[derive(Clone, Debug, PartialEq)]
pub struct SequentialConstants {
    pub p0: f64,
    pub q_n: f64,
    pub a_n: f64,
    pub iota_n: f64,
    pub pi_p0: f64,
    pub pi_half: f64,
    pub c1: f64,
    pub a1: f64,
    pub a2: f64,
    pub lyapunov: Option<f64>,
    pub ky_fan: Option<f64>,
}

impl SequentialConstants {
    pub fn new(c: &GrowthConstants, inputs: &SequentialInputs) -> Self {
        let p0 = c.p0;
        let (q, beta, cn) = (c.q_n, c.beta_n, c.c_n);
        let qn = inputs.pi_p0;
        let a = inputs.k_p0.min(q.sqrt() * beta) * qn.sqrt();
        let power = p0 / (2.0 * p0 + 4.0);
        let list = [
            c.k_n * (1.0 + cn),
            q,
            cn * q.sqrt(),
            a * a,
            a * beta,
            qn.sqrt() * beta * q.powf(0.5 - 2.0 / p0),
            qn * beta * beta * q.sqrt(),
            a * q.powf(-2.0 / p0),
            a / q.sqrt(),
            a / q.sqrt() * beta,
            a.powf(p0 / (p0 + 1.0)),
        ];
        let c1 = list.iter().copied().fold(0.0, f64::max).powf(power);
        let a1 = c1 + q.powf((p0 - 4.0) / (2.0 * p0 + 2.0)) * beta.powf(p0 / (p0 + 1.0));
        let iota = inputs.pi_half.sqrt();
        let extra = [a / q, iota * a / q.sqrt() / c.sigma_n, iota * beta * (qn.sqrt() + a), iota * a * a / q.sqrt()];
        let a2 = a1 + extra.iter().copied().fold(0.0, f64::max).powf(power);
        SequentialConstants {
            p0,
            q_n: qn,
            a_n: a,
            iota_n: iota,
            pi_p0: inputs.pi_p0,
            pi_half: inputs.pi_half,
            c1,
            a1,
            a2,
            lyapunov: None,
            ky_fan: None,
        }
    }

    pub fn with_measurements(mut self, lyapunov: f64, ky_fan: f64) -> Self {
        self.lyapunov = Some(lyapunov);
        self.ky_fan = Some(ky_fan);
        self
    }
}

/// `𝔮_n = l^{1/2}/σ + l·σ^{−2(1−2/p0)} + l^{−1/2}`.
pub fn frak_q(l: f64, sigma: f64, p0: f64) -> f64 {
    l.sqrt() / sigma + l * sigma.powf(-2.0 * (1.0 - 2.0 / p0)) + 1.0 / l.sqrt()
}

/// `w_n = l·σ^{−2(1−2/p0)} + l^{1/2}/σ + r·l^{−1/2}` with `r = r_n(p0, ⌊l/2⌋)`.
pub fn w_n(l: f64, sigma: f64, p0: f64, r: f64) -> f64 {
    l * sigma.powf(-2.0 * (1.0 - 2.0 / p0)) + l.sqrt() / sigma + r / l.sqrt()
}

/// Right-hand sides of the two functional CLT rates.
#[derive(Clone, Debug, PartialEq)]
pub struct RateBounds {
    pub n: usize,
    pub sigma: f64,
    pub l: usize,
    pub q_frak: f64,
    pub w: f64,
    pub rhs_q: f64,
    pub rhs_w: f64,
    pub a1: f64,
    pub a2: f64,
}

/// Evaluates both rate bounds with `C_{p0} = 1`; `memory` is `r_n(p0, ⌊l/2⌋)`.
pub fn rate_bounds(c: &GrowthConstants, seq: &SequentialConstants, l: usize, memory: f64) -> Result<RateBounds> {
    let (sigma, p0) = (c.sigma_n, c.p0);
    let cap = sigma * sigma / (18.0 * c.q_n);
    if l == 0 || l as f64 > cap {
        return Err(Error::Precondition(format!("l_n = {l} outside 1..=σ²/(18Q) = {cap:.4}")));
    }
    let lf = l as f64;
    let q_frak = frak_q(lf, sigma, p0);
    let w = w_n(lf, sigma, p0, memory);
    let power = p0 / (2.0 * p0 + 4.0);
    let head = sigma.powf(-(p0 - 2.0) / (2.0 * p0)) * sigma.ln().abs().powf(0.75);
    let rhs_q = C_P0 * seq.a1 * (head + q_frak.powf(power) * q_frak.ln().abs().sqrt());
    let rhs_w = C_P0 * seq.a2 * (head + w.powf(power) * w.ln().abs().sqrt());
    Ok(RateBounds { n: c.n, sigma, l, q_frak, w, rhs_q, rhs_w, a1: seq.a1, a2: seq.a2 })
}

/// Writes CSV `n,sigma,q_n_frak,w_n,rhs_q,rhs_w,A1,A2`.
pub fn write_bounds_csv(rows: &[RateBounds], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["n", "sigma", "q_n_frak", "w_n", "rhs_q", "rhs_w", "A1", "A2"])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            format!("{:.17e}", r.sigma),
            format!("{:.17e}", r.q_frak),
            format!("{:.17e}", r.w),
            format!("{:.17e}", r.rhs_q),
            format!("{:.17e}", r.rhs_w),
            format!("{:.17e}", r.a1),
            format!("{:.17e}", r.a2),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Closed-form coupling bounds next to their Monte Carlo counterparts.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingReport {
    /// `‖sup_t |W_n − 𝒲_n|‖_{p0}` (Monte Carlo) and its bound.
    pub approx_measured: f64,
    pub approx_bound: f64,
    /// `6^{1/p0}·max_k ‖Z_k‖_{p0}·k_n^{1/p0}`-type bound from the measured
    /// block oscillations.
    pub maximal_bound: f64,
    /// Prokhorov bounds for `(W_n, 𝒲_n)` and `(𝒲_n, M_n)` with `q = p0`.
    pub prokhorov_w: f64,
    pub prokhorov_m: f64,
    /// Closed form `d_P(W_n, 𝒲_n)` bound.
    pub cor_bound: f64,
    /// `L_{p0}^{1/(2p0)}` and its bound `σ^{−(p0−2)/(2p0)} Q^{−1/(2p0)} max‖D‖_{p0}`.
    pub lyapunov_root: f64,
    pub lyapunov_bound: f64,
}

pub fn coupling_report(c: &GrowthConstants, decomp: &CoboundaryDecomp, paths: &PathPair) -> CouplingReport {
    let p0 = c.p0;
    let (q, beta, sigma) = (c.q_n, c.beta_n, c.sigma_n);
    let d_w = PathPair::sup_distance(&paths.w, &paths.cal_w);
    let d_m = PathPair::sup_distance(&paths.cal_w, &paths.m);
    let norm = |xs: &[f64]| (xs.iter().map(|v| v.abs().powf(p0)).sum::<f64>() / xs.len() as f64).powf(1.0 / p0);
    let osc_norm = norm(&paths.block_oscillation);
    let max_d = decomp.block_norms.iter().copied().fold(0.0, f64::max);
    CouplingReport {
        approx_measured: norm(&d_w),
        approx_bound: 6f64.powf(1.0 / p0) * q.powf(0.5 - 2.0 / p0) * beta * sigma.powf(-(1.0 - 2.0 / p0)),
        maximal_bound: osc_norm,
        prokhorov_w: coupling_bound(&d_w, p0),
        prokhorov_m: coupling_bound(&d_m, p0),
        cor_bound: 6f64.powf(1.0 / (p0 + 1.0))
            * q.powf((p0 - 4.0) / (2.0 * p0 + 2.0))
            * beta.powf(p0 / (p0 + 1.0))
            * sigma.powf(-(p0 - 2.0) / (p0 + 1.0)),
        lyapunov_root: decomp.lyapunov_sum().powf(1.0 / (2.0 * p0)),
        lyapunov_bound: sigma.powf(-(p0 - 2.0) / (2.0 * p0)) * q.powf(-1.0 / (2.0 * p0)) * max_d,
    }
}

/// Two sides of the maximal inequality `‖S_m‖_p ≤ (2p Σ b_i)^{1/2}`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaximalInequality {
    pub p: f64,
    pub m: usize,
    pub lhs: f64,
    /// Standard error of `lhs` (zero when exact).
    pub lhs_se: f64,
    pub b: Vec<f64>,
    pub rhs: f64,
    /// `‖max_k |S_k|‖_p` and `C_p (Σ b_i)^{1/2}` (Monte Carlo runs only).
    pub max_lhs: Option<f64>,
    pub max_rhs: f64,
    pub exact: bool,
}

impl MaximalInequality {
    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }

    /// Holds up to three standard errors.
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-12) + 3.0 * self.lhs_se
    }
}

/// `(2p Σ b_i)^{1/2}`.
pub fn moment_sum_rhs(b: &[f64], p: f64) -> f64 {
    (2.0 * p * b.iter().sum::<f64>()).sqrt()
}

/// `C_p` of the maximal form: 16 for `p = 2`, otherwise
/// `(1 − 2^{(1−p)/(2p)})^{−2p}·(2p)^{p/2}`.
pub fn maximal_moment_constant(p: f64) -> f64 {
    if p == 2.0 {
        16.0
    } else {
        (1.0 - 2f64.powf((1.0 - p) / (2.0 * p))).powf(-2.0 * p) * (2.0 * p).powf(p / 2.0)
    }
}

/// Exact check on the martingale differences `X_i = D_i`: the conditional
/// terms vanish, so `b_i = ‖D_i‖_p²`. Requires an even integer `p`.
pub fn maximal_inequality_martingale(model: &ArrayModel, decomp: &CoboundaryDecomp, p: f64) -> Result<MaximalInequality> {
    if !(p >= 2.0 && p.fract() == 0.0 && (p as usize).is_multiple_of(2)) {
        return Err(Error::Precondition(format!("exact check needs an even integer p, got {p}")));
    }
    let arr = model.finite()?;
    let chain = arr.chain();
    let marg = arr.marginals();
    let b: Vec<f64> = decomp.terms.par_iter().map(|t| lp_norm(chain, marg, &t.z, p).0.powi(2)).collect();
    let mut total = Additive { start: 0, funcs: Vec::new() };
    for t in &decomp.terms {
        total.add(&t.z, 1.0);
    }
    let lhs = lp_norm(chain, marg, &total, p).0;
    let rhs = moment_sum_rhs(&b, p);
    let max_rhs = maximal_moment_constant(p) * b.iter().sum::<f64>().sqrt();
    Ok(MaximalInequality { p, m: b.len(), lhs, lhs_se: 0.0, b, rhs, max_lhs: None, max_rhs, exact: true })
}

/// Relative size below which conditional block means are dropped.
pub const CONDITIONAL_CUTOFF: f64 = 1e-12;

/// Monte Carlo check on the raw block sums `X_i = Ξ_i` of a window-free
/// chain, filtered by `G_{b_i}`.
///
/// `E[Ξ_k | G_{b_i}]` is a function of `X_{b_i}`; the sum over `k` is cut
/// once the conditional means fall below [`CONDITIONAL_CUTOFF`] times the
/// block sup-norm.
pub fn maximal_inequality_blocks(
    model: &ArrayModel,
    partition: &BlockPartition,
    p: f64,
    replicates: usize,
    seed: u64,
) -> Result<MaximalInequality> {
    let arr = model.finite()?;
    if arr.window() > 0 {
        return Err(Error::Unsupported("raw block check needs a window-free array".into()));
    }
    if !(p >= 2.0) {
        return Err(Error::validation("p", format!("{p} must be at least 2")));
    }
    if replicates < 2 {
        return Err(Error::Precondition("need at least 2 replicates".into()));
    }
    let d = arr.states();
    let chain = arr.chain();
    let blocks: Vec<(usize, usize)> = partition.blocks.iter().map(|b| (b.a, b.b)).collect();
    let h = observables(arr);
    let k = blocks.len();
    let scale = (1..=arr.n()).map(|j| arr.sup_norm(j)).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    // cond[i][l − i − 1](s) = Σ_{i<k'≤l} E[Ξ_k' | X_{b_i} = s]
    let cond: Vec<Vec<Vec<f64>>> = (0..k)
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            // law[s] = law of X_q given X_{b_i} = s
            let mut law: Vec<Vec<f64>> = (0..d).map(|s| (0..d).map(|t| (s == t) as u8 as f64).collect()).collect();
            let mut acc = vec![0.0; d];
            let mut q = blocks[i].1;
            for &(_, bl) in &blocks[i + 1..] {
                let mut block_mean = vec![0.0; d];
                while q < bl {
                    q += 1;
                    let mat = chain.transition(q);
                    for row in law.iter_mut() {
                        let mut next = vec![0.0; d];
                        mat.push_forward(row, &mut next);
                        *row = next;
                    }
                    for s in 0..d {
                        block_mean[s] += law[s].iter().zip(&h[q]).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
                acc.iter_mut().zip(&block_mean).for_each(|(a, b)| *a += b);
                out.push(acc.clone());
                if block_mean.iter().all(|v| v.abs() < CONDITIONAL_CUTOFF * scale) {
                    break;
                }
            }
            out
        })
        .collect();
    let sums: Vec<(Vec<f64>, Vec<Vec<f64>>, f64)> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let path = sample_chain_path(arr, seed, r);
            let xi = arr.observe(&path);
            let xs: Vec<f64> = blocks.iter().map(|&(a, b)| xi[a - 1..b].iter().sum()).collect();
            let terms: Vec<Vec<f64>> = (0..k)
                .map(|i| {
                    let s = path[blocks[i].1];
                    let x = xs[i];
                    std::iter::once(x * x)
                        .chain(cond[i].iter().map(|c| x * (x + c[s])))
                        .map(|v| v.abs().powf(p / 2.0))
                        .collect()
                })
                .collect();
            let mut s = 0.0;
            let mut best: f64 = 0.0;
            for x in &xs {
                s += x;
                best = best.max(s.abs());
            }
            (xs, terms, best)
        })
        .collect();
    let rf = replicates as f64;
    let b: Vec<f64> = (0..k)
        .map(|i| {
            let len = sums[0].1[i].len();
            (0..len)
                .map(|l| (sums.iter().map(|s| s.1[i][l]).sum::<f64>() / rf).powf(2.0 / p))
                .fold(0.0, f64::max)
        })
        .collect();
    let totals: Vec<f64> = sums.iter().map(|s| s.0.iter().sum::<f64>().abs().powf(p)).collect();
    let (mean, se) = crate::numeric::mean_and_se(&totals);
    let lhs = mean.powf(1.0 / p);
    let lhs_se = if mean > 0.0 { se * lhs / (p * mean) } else { 0.0 };
    let max_lhs = (sums.iter().map(|s| s.2.powf(p)).sum::<f64>() / rf).powf(1.0 / p);
    let rhs = moment_sum_rhs(&b, p);
    let max_rhs = maximal_moment_constant(p) * b.iter().sum::<f64>().sqrt();
    Ok(MaximalInequality { p, m: k, lhs, lhs_se, b, rhs, max_lhs: Some(max_lhs), max_rhs, exact: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ky_fan_examples() {
        assert_eq!(ky_fan_estimate(&[0.0; 10]), 0.0);
        // all samples at 0.5: P(Z > ε) = 1 for ε < 0.5, 0 after
        assert!((ky_fan_estimate(&[0.5; 10]) - 0.5).abs() < 1e-15);
        // all samples at 2: P(Z > ε) = 1 ≥ ε up to ε = 1
        assert!((ky_fan_estimate(&[2.0; 10]) - 1.0).abs() < 1e-15);
        let z: Vec<f64> = (1..=10).map(|i| i as f64 / 20.0).collect();
        // ε ∈ [0.3, 0.35): P = 0.4 ≥ ε; ε ∈ [0.35, 0.4): P = 0.3 < ε
        assert!((ky_fan_estimate(&z) - 0.35).abs() < 1e-15);
    }

    #[test]
    fn frak_q_examples() {
        assert!((frak_q(1.0, 1.0, 4.0) - 3.0).abs() < 1e-15);
        let v = frak_q(10.0, 100.0, 4.0);
        assert!((v - (10f64.sqrt() / 100.0 + 0.1 + 10f64.powf(-0.5))).abs() < 1e-15);
        assert!((v - 0.447850).abs() < 1e-6);
    }

    #[test]
    fn moment_inequality_constants() {
        assert_eq!(maximal_moment_constant(2.0), 16.0);
        assert!(maximal_moment_constant(4.0) > 16.0);
        assert!((moment_sum_rhs(&[1.0], 4.0) - 8f64.sqrt()).abs() < 1e-15);
    }
}
