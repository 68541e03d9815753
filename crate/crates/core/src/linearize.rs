//! Growth constants and the variance-linearizing block partition.
//!
//! Cores `M_i` are grown greedily until `Var(S(M_i))` first reaches
//! `A_n = 2·Q_n`; each block is its core followed by an `r_n`-gap, and the last
//! block takes whatever is left of `{1..n}`.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generators::{sample_path, ArrayModel, ModelBody};
use crate::mixing::MixingProfile;
use crate::numeric::{linear_fit, mean_and_se, NeumaierSum};
use crate::oracle::{Estimate, VarianceOracle};

/// Default operational reading of `Q_n = o(σ_n²)`: `Q_n ≤ 0.1·σ_n²`.
pub const LITTLE_O_THRESHOLD: f64 = 0.1;

/// Standard errors added to every threshold when variances are estimated.
pub const GUARD_SE: f64 = 3.0;

/// Relative tolerance of the exact certification checks.
pub const CERT_TOL: f64 = 1e-9;

/// `ε` in `j_n = min{j : φ(j) < ½ − ε}`.
pub const BETA_EPS: f64 = 1.0 / 6.0;

/// Frozen constant `C_ε` of the analytic maximal-moment bound, calibrated
/// once on iid fair signs (`p0 = 4`, `n = 2^10`).
pub const C_EPS: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Validity {
    /// `Q_n ≥ ε0`
    pub qn_floor_ok: bool,
    /// `Q_n ≤ threshold·σ_n²`
    pub qn_little_o_ok: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GrowthConstants {
    pub n: usize,
    pub k_n: f64,
    pub r_n: usize,
    pub c_n: f64,
    pub d_n: f64,
    pub q_n: f64,
    pub eps0: f64,
    pub sigma_n: f64,
    pub beta_n: f64,
    pub p0: f64,
    /// `Σ_{j=1}^{n} ρ_n(j)`
    pub rho_sum: f64,
    pub little_o_threshold: f64,
    pub validity: Validity,
}

impl GrowthConstants {
    /// Target core variance `A_n = 2·Q_n`.
    pub fn a_n(&self) -> f64 {
        2.0 * self.q_n
    }

    /// Re-evaluates the validity flags for another `o(σ_n²)` threshold.
    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.little_o_threshold = threshold;
        self.validity = validity(self.q_n, self.eps0, self.sigma_n, threshold);
        self
    }

    pub fn is_valid(&self) -> bool {
        self.validity.qn_floor_ok && self.validity.qn_little_o_ok
    }

    /// `name,value` pairs for export.
    pub fn fields(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("n", self.n as f64),
            ("K_n", self.k_n),
            ("r_n", self.r_n as f64),
            ("C_n", self.c_n),
            ("D_n", self.d_n),
            ("Q_n", self.q_n),
            ("A_n", self.a_n()),
            ("eps0", self.eps0),
            ("sigma_n", self.sigma_n),
            ("beta_n", self.beta_n),
            ("p0", self.p0),
            ("rho_sum", self.rho_sum),
            ("qn_floor_ok", self.validity.qn_floor_ok as u8 as f64),
            ("qn_little_o_ok", self.validity.qn_little_o_ok as u8 as f64),
        ]
    }
}

fn validity(q: f64, eps0: f64, sigma: f64, threshold: f64) -> Validity {
    Validity { qn_floor_ok: q >= eps0, qn_little_o_ok: q <= threshold * sigma * sigma }
}

/// Minimal `r ∈ {1..n}` with `Σ_{m=1}^{⌊n/r⌋} ρ(r·m) ≤ ¼`.
///
/// `rho[j]` is `ρ(j)` (`rho[0]` is ignored); lags past the end count as 0.
pub fn find_separation(rho: &[f64], n: usize) -> Result<usize> {
    if let Some(j) = (1..rho.len()).find(|&j| !(0.0..=1.0).contains(&rho[j])) {
        return Err(Error::validation(format!("ρ({j})"), format!("{} outside [0, 1]", rho[j])));
    }
    let at = |j: usize| rho.get(j).copied().unwrap_or(0.0);
    for r in 1..=n.max(1) {
        let mut s = NeumaierSum::default();
        for m in 1..=n / r {
            s.add(at(r * m));
        }
        if s.value() <= 0.25 {
            return Ok(r);
        }
    }
    Err(Error::InfeasibleMixing(format!("no separation r ≤ {n} brings Σ ρ(r·m) below 1/4")))
}

/// Growth constants from a `ρ` profile covering lags `1..=profile.n`.
pub fn growth_constants(
    profile: &MixingProfile,
    k_n: f64,
    sigma_n: f64,
    beta_n: f64,
    p0: f64,
    eps0: f64,
) -> Result<GrowthConstants> {
    let n = profile.n;
    let rho: Vec<f64> = (0..=n).map(|j| profile.rho_required(j)).collect::<Result<_>>()?;
    let r_n = find_separation(&rho, n)?;
    let mut s = NeumaierSum::default();
    for &v in &rho[1..] {
        s.add(v);
    }
    let rho_sum = s.value();
    let c_n = 2.0 * k_n * rho_sum;
    let d_n = 1.0 + 2.0 * rho_sum;
    let r = r_n as f64;
    let q_n = 2.0 * k_n * k_n * d_n * r + 4.0 * c_n * k_n * (d_n * r).sqrt();
    Ok(GrowthConstants {
        n,
        k_n,
        r_n,
        c_n,
        d_n,
        q_n,
        eps0,
        sigma_n,
        beta_n,
        p0,
        rho_sum,
        little_o_threshold: LITTLE_O_THRESHOLD,
        validity: validity(q_n, eps0, sigma_n, LITTLE_O_THRESHOLD),
    })
}

/// `‖ξ_j‖_2` for `j = 1..n` (index 0 is `j = 1`).
pub fn element_norms(oracle: &dyn VarianceOracle) -> Vec<f64> {
    (1..=oracle.len()).into_par_iter().map(|j| oracle.range_variance(j, j).value.max(0.0).sqrt()).collect()
}

/// Growth constants with `K_n = max_j ‖ξ_j‖_2` and `σ_n` read off the oracle.
pub fn oracle_growth_constants(
    oracle: &dyn VarianceOracle,
    profile: &MixingProfile,
    p0: f64,
    eps0: f64,
) -> Result<GrowthConstants> {
    let n = oracle.len();
    let k_n = element_norms(oracle).into_iter().fold(0.0, f64::max);
    let sigma_n = oracle.range_variance(1, n).value.max(0.0).sqrt();
    let mut p = profile.clone();
    p.n = n;
    growth_constants(&p, k_n, sigma_n, 1.0, p0, eps0)
}

/// One block `B_j = [a, b]` with core `M_j = [a, core_end]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub a: usize,
    pub b: usize,
    pub core_end: usize,
    pub variance: Estimate,
    pub core_variance: Estimate,
    /// `Var(S(M_j \ {core_end}))`, which the greedy rule keeps below `A_n`.
    pub shrunk_core_variance: Option<Estimate>,
    /// `max_{m ∈ B_j} Var(S_{a..m})`
    pub max_partial: f64,
}

impl Block {
    pub fn len(&self) -> usize {
        self.b + 1 - self.a
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockPartition {
    pub n: usize,
    pub blocks: Vec<Block>,
    pub q_n: f64,
    pub a_n: f64,
    pub r_n: usize,
    pub c_n: f64,
    pub total_variance: Estimate,
    /// `false` when variances are Monte Carlo estimates.
    pub exact: bool,
}

impl BlockPartition {
    pub fn k_n(&self) -> usize {
        self.blocks.len()
    }

    pub fn cores(&self) -> Vec<(usize, usize)> {
        self.blocks.iter().map(|b| (b.a, b.core_end)).collect()
    }

    /// Writes CSV `j, a_j, b_j, core_end, block_variance`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["j", "a_j", "b_j", "core_end", "block_variance"])?;
        for (j, b) in self.blocks.iter().enumerate() {
            w.write_record([
                (j + 1).to_string(),
                b.a.to_string(),
                b.b.to_string(),
                b.core_end.to_string(),
                format!("{:.17e}", b.variance.value),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Options of the greedy construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionOptions {
    /// Construction requires `Var(S_n) ≥ min_variance_factor·A_n`.
    pub min_variance_factor: f64,
    /// Standard errors added to `A_n` for estimated variances.
    pub guard_se: f64,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        PartitionOptions { min_variance_factor: 1.0, guard_se: GUARD_SE }
    }
}

struct Core {
    a: usize,
    end: usize,
    variance: Estimate,
    shrunk: Option<Estimate>,
}

/// Greedy cores from `start`: each grows until its variance first reaches
/// `threshold` (plus the guard band), then `r` indices are skipped.
fn greedy_cores(oracle: &dyn VarianceOracle, threshold: f64, r: usize, guard: f64) -> Vec<Core> {
    let n = oracle.len();
    let mut cores = Vec::new();
    let mut a = 1;
    while a <= n {
        let mut scan = oracle.scan(a);
        let mut prev: Option<Estimate> = None;
        let mut found = None;
        let mut m = a - 1;
        while let Some(v) = scan.next_variance() {
            m += 1;
            if v.value >= threshold + guard * v.se {
                found = Some((m, v));
                break;
            }
            prev = Some(v);
        }
        match found {
            Some((end, variance)) => {
                cores.push(Core { a, end, variance, shrunk: prev });
                a = end + r + 1;
            }
            None => break,
        }
    }
    cores
}

/// `(final variance, max over prefixes)` of `Var(S_{a..m})`, `m ∈ a..=b`.
fn block_scan(oracle: &dyn VarianceOracle, a: usize, b: usize) -> (Estimate, f64) {
    let mut scan = oracle.scan(a);
    let mut last = Estimate::exact(0.0);
    let mut max: f64 = 0.0;
    for _ in a..=b {
        last = scan.next_variance().expect("block inside the row");
        max = max.max(last.value);
    }
    (last, max)
}

fn tol(rhs: f64, se: f64, exact: bool) -> f64 {
    if exact {
        CERT_TOL * rhs.abs().max(1.0)
    } else {
        GUARD_SE * se + CERT_TOL * rhs.abs().max(1.0)
    }
}

/// Greedy block partition; the block sandwich is checked before returning.
pub fn partition_blocks(oracle: &dyn VarianceOracle, constants: &GrowthConstants) -> Result<BlockPartition> {
    partition_blocks_with(oracle, constants, PartitionOptions::default())
}

pub fn partition_blocks_with(
    oracle: &dyn VarianceOracle,
    constants: &GrowthConstants,
    options: PartitionOptions,
) -> Result<BlockPartition> {
    let n = oracle.len();
    let exact = oracle.is_exact();
    let a_n = constants.a_n();
    let q = constants.q_n;
    if !(q > 0.0) {
        return Err(Error::Precondition(format!("Q_n = {q} must be positive")));
    }
    let total = oracle.range_variance(1, n);
    let required = options.min_variance_factor * a_n;
    if total.value < required {
        return Err(Error::DegenerateVariance { variance: total.value, required });
    }
    let guard = if exact { 0.0 } else { options.guard_se };
    let cores = greedy_cores(oracle, a_n, constants.r_n, guard);
    if cores.is_empty() {
        return Err(Error::DegenerateVariance { variance: total.value, required: a_n });
    }
    let k = cores.len();
    let spans: Vec<(usize, usize)> =
        (0..k).map(|i| (cores[i].a, if i + 1 == k { n } else { cores[i].end + constants.r_n })).collect();
    let scans: Vec<(Estimate, f64)> = spans.par_iter().map(|&(a, b)| block_scan(oracle, a, b)).collect();
    let blocks: Vec<Block> = cores
        .into_iter()
        .zip(spans)
        .zip(scans)
        .map(|((c, (a, b)), (variance, max_partial))| Block {
            a,
            b,
            core_end: c.end,
            variance,
            core_variance: c.variance,
            shrunk_core_variance: c.shrunk,
            max_partial,
        })
        .collect();
    let part = BlockPartition { n, blocks, q_n: q, a_n, r_n: constants.r_n, c_n: constants.c_n, total_variance: total, exact };
    for (j, b) in part.blocks.iter().enumerate() {
        let lo = q - b.variance.value;
        let hi = b.max_partial.max(b.variance.value) - 9.0 * q;
        if lo > tol(q, b.variance.se, exact) || hi > tol(9.0 * q, b.variance.se, exact) {
            return Err(Error::invariant(
                "block-sandwich",
                format!(
                    "block {} = [{}, {}] has variance {:.6e} (max partial {:.6e}) outside [Q, 9Q] = [{:.6e}, {:.6e}]",
                    j + 1,
                    b.a,
                    b.b,
                    b.variance.value,
                    b.max_partial,
                    q,
                    9.0 * q
                ),
            ));
        }
    }
    let kq = k as f64 * q;
    if kq - total.value > tol(kq, total.se, exact) || total.value - 18.0 * kq > tol(18.0 * kq, total.se, exact) {
        return Err(Error::invariant(
            "kn-sandwich",
            format!("Var(S_n) = {:.6e} outside [Q k_n, 18 Q k_n] = [{kq:.6e}, {:.6e}]", total.value, 18.0 * kq),
        ));
    }
    Ok(part)
}

/// One certified inequality `lhs ≤ rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub id: String,
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

impl Check {
    pub fn new(id: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        Check { id: id.into(), lhs, rhs, pass: lhs <= rhs + tolerance }
    }

    pub fn slack(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct CertificationReport {
    pub checks: Vec<Check>,
}

impl CertificationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    /// Checks whose id starts with `family`.
    pub fn family(&self, family: &str) -> Vec<&Check> {
        self.checks.iter().filter(|c| c.id.starts_with(family)).collect()
    }

    /// Writes CSV `check_id, lhs, rhs, pass`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["check_id", "lhs", "rhs", "pass"])?;
        for c in &self.checks {
            w.write_record([c.id.clone(), format!("{:.17e}", c.lhs), format!("{:.17e}", c.rhs), c.pass.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Certifies a partition: block and `k_n` sandwiches, greedy minimality,
/// core comparability over every prefix family, the block/core variance
/// ratio, and the covariance bound for every gap interval.
pub fn verify_partition(partition: &BlockPartition, oracle: &dyn VarianceOracle) -> CertificationReport {
    let exact = oracle.is_exact();
    let q = partition.q_n;
    let mut checks = Vec::new();
    let t = |rhs: f64, se: f64| tol(rhs, se, exact);

    for (j, b) in partition.blocks.iter().enumerate() {
        let se = b.variance.se;
        checks.push(Check::new(format!("block_lower[{}]", j + 1), q, b.variance.value, t(q, se)));
        checks.push(Check::new(format!("block_upper[{}]", j + 1), b.variance.value, 9.0 * q, t(9.0 * q, se)));
        checks.push(Check::new(format!("partial_max[{}]", j + 1), b.max_partial, 9.0 * q, t(9.0 * q, se)));
        if let Some(s) = b.shrunk_core_variance {
            checks.push(Check::new(format!("minimality[{}]", j + 1), s.value, partition.a_n, if exact { 0.0 } else { GUARD_SE * s.se }));
        }
    }
    let k = partition.k_n() as f64;
    let total = partition.total_variance;
    checks.push(Check::new("kn_lower", q * k, total.value, t(q * k, total.se)));
    checks.push(Check::new("kn_upper", total.value, 18.0 * q * k, t(18.0 * q * k, total.se)));

    // core comparability over prefix families M^(k)
    let cores = partition.cores();
    let union = oracle.prefix_set_variances(&cores);
    let mut sum = 0.0;
    let mut sum_se2 = 0.0;
    for (i, (b, u)) in partition.blocks.iter().zip(&union).enumerate() {
        sum += b.core_variance.value;
        sum_se2 += b.core_variance.se * b.core_variance.se;
        let se = (sum_se2 + u.se * u.se).sqrt();
        checks.push(Check::new(format!("core_sum_lower[{}]", i + 1), 0.5 * sum, u.value, t(u.value, se)));
        checks.push(Check::new(format!("core_sum_upper[{}]", i + 1), u.value, 1.5 * sum, t(1.5 * sum, se)));
    }

    // block/core ratio for prefixes whose blocks stay inside M_i + gap
    let ends: Vec<(usize, usize)> = partition.blocks.iter().map(|b| (1, b.b)).collect();
    let prefix_blocks: Vec<Estimate> = {
        let mut scan = oracle.scan(1);
        let mut out = Vec::with_capacity(ends.len());
        let mut pos = 0;
        for &(_, b) in &ends {
            let mut v = Estimate::exact(0.0);
            while pos < b {
                v = scan.next_variance().expect("prefix inside the row");
                pos += 1;
            }
            out.push(v);
        }
        out
    };
    let ratio_bound = q / partition.a_n;
    for (i, ((b, vb), vm)) in partition.blocks.iter().zip(&prefix_blocks).zip(&union).enumerate() {
        if b.b > b.core_end + partition.r_n {
            continue;
        }
        let ratio = vb.value / vm.value;
        let se = if exact { 0.0 } else { ratio * ((vb.se / vb.value).powi(2) + (vm.se / vm.value).powi(2)).sqrt() };
        checks.push(Check::new(format!("block_core_ratio[{}]", i + 1), (ratio - 1.0).abs(), ratio_bound, t(ratio_bound, se)));
    }

    // covariance bound for every gap interval D against N_n \ D
    let covs = oracle.total_covariances();
    for (i, b) in partition.blocks.iter().enumerate() {
        let (d0, d1) = (b.core_end + 1, b.b.min(b.core_end + partition.r_n));
        if d0 > d1 {
            continue;
        }
        let var_d = oracle.range_variance(d0, d1);
        let mut cov = NeumaierSum::default();
        let mut se2 = var_d.se * var_d.se;
        for c in &covs[d0 - 1..d1] {
            cov.add(c.value);
            se2 += c.se * c.se;
        }
        let lhs = (cov.value() - var_d.value).abs();
        let rhs = partition.c_n * var_d.value.max(0.0).sqrt();
        checks.push(Check::new(format!("gap_covariance[{}]", i + 1), lhs, rhs, t(rhs, se2.sqrt())));
    }
    CertificationReport { checks }
}

/// Blocks of a sequence (`ξ_j` not depending on the row length).
#[derive(Clone, Debug, PartialEq)]
pub struct SequencePartition {
    pub n_max: usize,
    /// Complete blocks `B_j ⊂ {1..n_max}`.
    pub blocks: Vec<Block>,
    /// Core target `A`.
    pub target: f64,
    pub r: usize,
    /// `min_j ‖Ξ_j‖_2`
    pub a1: f64,
    /// `max_j max_{m ∈ B_j} ‖S_{a_j..m}‖_2`
    pub a2: f64,
    /// `max_j max_{a ∈ B_j} ‖S_{a..b_j}‖_2`
    pub suffix_max: f64,
    /// The same maximum over the first block only.
    pub suffix_max_first: f64,
    /// `min` and `max` of `Var(S_n)/k_n` over `n ∈ [n_max/16, n_max]`.
    pub r1: f64,
    pub r2: f64,
    /// Least-squares slope of `Var(S_{b_k})` against `k`.
    pub slope: f64,
}

impl SequencePartition {
    /// `k_n = max{k : b_k ≤ n}`.
    pub fn k_n(&self, n: usize) -> usize {
        self.blocks.partition_point(|b| b.b <= n)
    }

    /// `b_{k_n}` (0 when no block fits).
    pub fn covered(&self, n: usize) -> usize {
        match self.k_n(n) {
            0 => 0,
            k => self.blocks[k - 1].b,
        }
    }
}

/// Sequence blocks with a fixed core target `A` and gap `r`.
pub fn sequence_partition(oracle: &dyn VarianceOracle, target: f64, r: usize) -> Result<SequencePartition> {
    let n = oracle.len();
    let exact = oracle.is_exact();
    let guard = if exact { 0.0 } else { GUARD_SE };
    let cores = greedy_cores(oracle, target, r, guard);
    let blocks: Vec<Block> = cores
        .into_iter()
        .filter(|c| c.end + r <= n)
        .map(|c| {
            let b = c.end + r;
            let (variance, max_partial) = block_scan(oracle, c.a, b);
            Block {
                a: c.a,
                b,
                core_end: c.end,
                variance,
                core_variance: c.variance,
                shrunk_core_variance: c.shrunk,
                max_partial,
            }
        })
        .collect();
    if blocks.is_empty() {
        return Err(Error::DegenerateVariance { variance: oracle.range_variance(1, n).value, required: target });
    }
    let suffix: Vec<f64> = blocks
        .par_iter()
        .map(|b| (b.a..=b.b).map(|a| oracle.range_variance(a, b.b).value).fold(0.0, f64::max).sqrt())
        .collect();
    let profile: Vec<f64> = {
        let mut scan = oracle.scan(1);
        std::iter::once(0.0).chain(std::iter::from_fn(|| scan.next_variance().map(|e| e.value))).collect()
    };
    let mut part = SequencePartition {
        n_max: n,
        a1: blocks.iter().map(|b| b.variance.value.max(0.0).sqrt()).fold(f64::INFINITY, f64::min),
        a2: blocks.iter().map(|b| b.max_partial.max(0.0).sqrt()).fold(0.0, f64::max),
        suffix_max: suffix.iter().cloned().fold(0.0, f64::max),
        suffix_max_first: suffix[0],
        blocks,
        target,
        r,
        r1: f64::INFINITY,
        r2: 0.0,
        slope: 0.0,
    };
    for m in (n / 16).max(1)..=n {
        let k = part.k_n(m);
        if k > 0 {
            let ratio = profile[m] / k as f64;
            part.r1 = part.r1.min(ratio);
            part.r2 = part.r2.max(ratio);
        }
    }
    let xs: Vec<f64> = (1..=part.blocks.len()).map(|k| k as f64).collect();
    let ys: Vec<f64> = part.blocks.iter().map(|b| profile[b.b]).collect();
    if xs.len() >= 2 {
        part.slope = linear_fit(&xs, &ys).0;
    }
    Ok(part)
}

/// Empirical and analytic maximal-moment constants.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaReport {
    pub p0: f64,
    /// `max_j ‖max_l |S_{a_j−1,l}|‖_{p0} / √Q_n` over the partition's blocks.
    pub empirical: f64,
    pub se: f64,
    /// `C_ε·p0·(1 + j_n·K_∞)`, when some `φ(j) < ½ − ε`.
    pub analytic: Option<f64>,
    pub j_n: Option<usize>,
    pub k_inf: f64,
    pub replicates: usize,
}

/// `max_j ‖ξ_j‖_∞` of a model.
pub fn sup_norm(model: &ArrayModel) -> f64 {
    match &model.body {
        ModelBody::Finite(arr) => (1..=arr.n()).map(|j| arr.sup_norm(j)).fold(0.0, f64::max),
        ModelBody::Expanding(e) => e.sup_norm(),
    }
}

/// Monte Carlo `β̂_n` over the block windows plus the analytic bound.
pub fn estimate_beta(
    model: &ArrayModel,
    partition: &BlockPartition,
    profile: &MixingProfile,
    p0: f64,
    replicates: usize,
    seed: u64,
) -> Result<BetaReport> {
    if !(p0 > 2.0) {
        return Err(Error::validation("p0", format!("{p0} must exceed 2")));
    }
    if replicates < 2 {
        return Err(Error::Precondition("β estimate needs at least 2 replicates".into()));
    }
    let n = partition.n;
    let windows: Vec<(usize, usize)> = partition.blocks.iter().map(|b| (b.a, b.b)).collect();
    let per_rep: Vec<Vec<f64>> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let path = sample_path(model, n, seed, r)?;
            Ok(windows
                .iter()
                .map(|&(a, b)| {
                    let mut s = 0.0;
                    let mut best: f64 = 0.0;
                    for v in &path.values[a - 1..b] {
                        s += v;
                        best = best.max(s.abs());
                    }
                    best.powf(p0)
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let sq = partition.q_n.sqrt();
    let (mut empirical, mut se) = (0.0, 0.0);
    for w in 0..windows.len() {
        let xs: Vec<f64> = per_rep.iter().map(|v| v[w]).collect();
        let (m, s) = mean_and_se(&xs);
        let value = m.max(0.0).powf(1.0 / p0) / sq;
        if value > empirical {
            empirical = value;
            se = if m > 0.0 { s * value / (p0 * m) } else { 0.0 };
        }
    }
    let k_inf = sup_norm(model);
    let j_n = (1..=profile.n).find(|&j| profile.phi(j).is_some_and(|f| f < 0.5 - BETA_EPS));
    let analytic = j_n.map(|j| C_EPS * p0 * (1.0 + j as f64 * k_inf));
    Ok(BetaReport { p0, empirical, se, analytic, j_n, k_inf, replicates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixing::Provenance;

    #[test]
    fn separation_examples() {
        assert_eq!(find_separation(&vec![0.0; 101], 100).unwrap(), 1);
        let geo: Vec<f64> = (0..=200).map(|j| 0.5f64.powi(j)).collect();
        assert_eq!(find_separation(&geo, 200).unwrap(), 3);
        let flat = vec![0.3; 101];
        assert!(matches!(find_separation(&flat, 100), Err(Error::InfeasibleMixing(_))));
        assert!(find_separation(&[1.0, 1.5], 1).is_err());
    }

    #[test]
    fn constants_examples() {
        let iid = MixingProfile::from_rho(vec![0.0; 1001], Provenance::Declared);
        let c = growth_constants(&iid, 1.0, 30.0, 1.0, 4.0, 1.0).unwrap();
        assert_eq!((c.r_n, c.c_n, c.d_n, c.q_n), (1, 0.0, 1.0, 2.0));
        let geo = MixingProfile::from_rho((0..=1000).map(|j| 0.5f64.powi(j)).collect(), Provenance::Declared);
        let c = growth_constants(&geo, 1.0, 20.0, 1.0, 4.0, 1.0).unwrap();
        assert_eq!(c.r_n, 3);
        assert!((c.c_n - 2.0).abs() < 1e-12 && (c.d_n - 3.0).abs() < 1e-12);
        assert!((c.q_n - 42.0).abs() < 1e-12 * 42.0);
        assert!(c.validity.qn_floor_ok && !c.validity.qn_little_o_ok);
        assert!(c.with_threshold(0.5).validity.qn_little_o_ok);
    }
}
