//! Batch experiment harness.
//!
//! An experiment file names a model, a grid of row lengths and the stages to
//! run:
//!
//! ```toml
//! reference = "elliptic"           # or: model = "models/chain.toml"
//! n_grid = [1024, 4096, 16384]
//! p0 = "4"
//! seed = 7
//! replicates = 2000
//! out = "out/elliptic"
//! diagnostics = ["blocks", "decompose", "berry_esseen", "mdp"]
//!
//! [l_rule]
//! kind = "sigma"                   # constant | sigma | memory
//! value = "0.5"
//!
//! [tolerances]
//! certification = "1e-9"
//! ```
//!
//! Every stage computes in memory first; files are written only after the
//! whole grid succeeded, so a failing run leaves no partial CSV behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    self, berry_esseen_rn, cumulant_growth, fdd_check, kolmogorov_to_normal, mdp_curve, moment_gap, rate_fit,
    DiagnosticRow, MdpCurve, RateFit, RateRow, RateSeries,
};
use crate::error::{Error, Result};
use crate::generators::config::{ModelSpec, Num};
use crate::generators::reference::reference_model;
use crate::generators::ArrayModel;
use crate::linearize::{
    self, estimate_beta, oracle_growth_constants, partition_blocks, sequence_partition, verify_partition, BetaReport,
    BlockPartition, CertificationReport, GrowthConstants,
};
use crate::martingale::{
    self, coupling_report, martingale_differences, memory_coefficient, path_pair, quadratic_variation, rate_bounds,
    t_grid, RateBounds, SequentialConstants, SequentialInputs, TimeChanger,
};
use crate::mixing::{self, dobrushin_phi_profile, MixingProfile};
use crate::oracle::{exact_sum_pmf, lp_norm, sum_functional, LatticePmf, VarianceProfile};

/// Stage names accepted in `diagnostics`.
pub const STAGES: [&str; 12] = [
    "blocks",
    "beta",
    "decompose",
    "berry_esseen",
    "cumulants",
    "moment_gap",
    "mdp",
    "quadratic_variation",
    "fdd",
    "rate_bounds",
    "asip",
    "plots",
];

/// Plot ids accepted by [`emit_plot_data`].
pub const PLOT_IDS: [&str; 3] = ["dk_vs_sigma", "mdp_curve", "block_variances"];

#[derive(Parser, Debug)]
#[command(name = "varlin", version, about = "Variance linearization experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Experiment file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = ToleranceProfile::Default)]
    pub tolerance_profile: ToleranceProfile,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Parse the experiment and build every row.
    Validate,
    /// Growth constants.
    Constants,
    /// Constants, partition and certification.
    Blocks,
    /// Everything up to the martingale decomposition.
    Decompose,
    /// Everything plus the diagnostics listed in the config.
    Diagnose,
    /// The stages listed in the config, plus rate fits and plot data.
    Report,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ToleranceProfile {
    Strict,
    Default,
}

/// How `l_n` is chosen for the rate bounds.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LRule {
    /// `constant`, `sigma` (`⌊value·σ_n⌋`) or `memory` (`⌊value·m_n⌋`).
    pub kind: String,
    pub value: Num,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default)]
    pub certification: Option<Num>,
    #[serde(default)]
    pub martingale: Option<Num>,
    #[serde(default)]
    pub telescoping: Option<Num>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Model file, relative to the experiment file.
    #[serde(default)]
    pub model: Option<PathBuf>,
    /// Reference model name.
    #[serde(default)]
    pub reference: Option<String>,
    #[serde(default)]
    pub gamma: Option<Num>,
    /// Mixing profile CSV replacing the Dobrushin bound.
    #[serde(default)]
    pub profile: Option<PathBuf>,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_p0")]
    pub p0: Num,
    #[serde(default = "default_eps0")]
    pub eps0: Num,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub diagnostics: Vec<String>,
    /// Plot ids emitted by `report`; all of them when absent.
    #[serde(default)]
    pub plots: Option<Vec<String>>,
    #[serde(default)]
    pub l_rule: Option<LRule>,
    #[serde(default = "default_mdp_grid")]
    pub mdp_grid: Vec<Num>,
    /// `a_n = σ_n^{mdp_exponent}`.
    #[serde(default = "default_mdp_exponent")]
    pub mdp_exponent: Num,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
}

fn default_p0() -> Num {
    Num::Text("4".into())
}
fn default_eps0() -> Num {
    Num::Text("1".into())
}
fn default_replicates() -> usize {
    2000
}
fn default_grid() -> usize {
    martingale::DEFAULT_GRID
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_mdp_grid() -> Vec<Num> {
    ["0.5", "1.0", "1.5"].iter().map(|s| Num::Text(s.to_string())).collect()
}
fn default_mdp_exponent() -> Num {
    Num::Text("0.2".into())
}

/// Tolerances in force for a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tolerances {
    pub certification: f64,
    pub martingale: f64,
    pub telescoping: f64,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let c: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(c)
    }

    /// Reads and validates an experiment file; relative paths (model, profile,
    /// output directory) are resolved against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read experiment file {}: {e}", path.display())))?;
        let mut c = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut c.model, &mut c.profile].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if c.out.is_relative() {
            c.out = base.join(&c.out);
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.model, &self.reference) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(Error::Config("exactly one of `model` and `reference` is required".into()))
            }
            (Some(p), None) if !p.exists() => {
                return Err(Error::Config(format!("model file {} does not exist", p.display())))
            }
            _ => {}
        }
        if let Some(p) = &self.profile {
            if !p.exists() {
                return Err(Error::Config(format!("profile file {} does not exist", p.display())));
            }
        }
        if self.n_grid.is_empty() || self.n_grid[0] == 0 {
            return Err(Error::Config("n_grid must be non-empty and positive".into()));
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("n_grid must be strictly increasing".into()));
        }
        if self.replicates == 0 || self.grid == 0 {
            return Err(Error::Config("replicates and grid must be at least 1".into()));
        }
        if let Some(s) = self.diagnostics.iter().find(|s| !STAGES.contains(&s.as_str())) {
            return Err(Error::Config(format!("unknown stage '{s}'")));
        }
        if let Some(p) = self.plots.iter().flatten().find(|p| !PLOT_IDS.contains(&p.as_str())) {
            return Err(Error::Config(format!("unknown plot id '{p}' (expected one of {})", PLOT_IDS.join(", "))));
        }
        if let Some(r) = &self.l_rule {
            if !["constant", "sigma", "memory"].contains(&r.kind.as_str()) {
                return Err(Error::Config(format!("unknown l_rule kind '{}'", r.kind)));
            }
            r.value.value()?;
        }
        let p0 = self.p0.value()?;
        if !(p0 > 2.0) {
            return Err(Error::Config(format!("p0 = {p0} must exceed 2")));
        }
        self.eps0.value()?;
        self.mdp_exponent.value()?;
        for x in &self.mdp_grid {
            x.value()?;
        }
        self.tolerances(ToleranceProfile::Default)?;
        Ok(())
    }

    pub fn tolerances(&self, profile: ToleranceProfile) -> Result<Tolerances> {
        let pick = |o: &Option<Num>, d: f64| o.as_ref().map(Num::value).unwrap_or(Ok(d));
        let mut t = Tolerances {
            certification: pick(&self.tolerances.certification, linearize::CERT_TOL)?,
            martingale: pick(&self.tolerances.martingale, martingale::MARTINGALE_TOL)?,
            telescoping: pick(&self.tolerances.telescoping, martingale::MARTINGALE_TOL)?,
        };
        if profile == ToleranceProfile::Strict {
            t.certification /= 100.0;
            t.martingale /= 100.0;
            t.telescoping /= 100.0;
        }
        Ok(t)
    }

    fn model_spec(&self) -> Result<Option<ModelSpec>> {
        self.model.as_ref().map(|p| ModelSpec::load(p)).transpose()
    }

    fn build(&self, spec: &Option<ModelSpec>, n: usize) -> Result<ArrayModel> {
        match (spec, &self.reference) {
            (Some(s), _) => s.build_with_n(n),
            (None, Some(name)) => {
                let gamma = self.gamma.as_ref().map(Num::value).unwrap_or(Ok(0.5))?;
                reference_model(name, n, gamma)
            }
            (None, None) => Err(Error::Config("no model".into())),
        }
    }
}

/// Which stages a run executes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Plan {
    pub blocks: bool,
    pub beta: bool,
    pub decompose: bool,
    pub exact_law: bool,
    pub quadratic_variation: bool,
    pub stages: Vec<String>,
}

impl Plan {
    pub fn for_command(command: Command, config: &ExperimentConfig) -> Plan {
        let mut stages: Vec<String> = match command {
            Command::Validate | Command::Constants => vec![],
            Command::Blocks => vec!["blocks".into()],
            Command::Decompose => vec!["blocks".into(), "decompose".into()],
            Command::Diagnose => {
                let mut s = vec!["blocks".to_string(), "decompose".to_string()];
                s.extend(config.diagnostics.iter().filter(|d| *d != "plots").cloned());
                s
            }
            Command::Report => config.diagnostics.clone(),
        };
        let has = |s: &[String], x: &str| s.iter().any(|v| v == x);
        let qv = has(&stages, "quadratic_variation") || has(&stages, "fdd") || has(&stages, "rate_bounds");
        let decompose = has(&stages, "decompose") || qv;
        let beta = has(&stages, "beta") || decompose;
        if (beta || has(&stages, "asip")) && !has(&stages, "blocks") {
            stages.insert(0, "blocks".into());
        }
        let exact_law = ["berry_esseen", "cumulants", "moment_gap", "mdp"].iter().any(|s| has(&stages, s));
        Plan { blocks: has(&stages, "blocks"), beta, decompose, exact_law, quadratic_variation: qv, stages }
    }

    fn has(&self, s: &str) -> bool {
        self.stages.iter().any(|v| v == s)
    }
}

/// Results for one row length.
#[derive(Clone, Debug)]
pub struct RowResult {
    pub n: usize,
    pub constants: GrowthConstants,
    pub beta: Option<BetaReport>,
    pub partition: Option<BlockPartition>,
    pub certification: Option<CertificationReport>,
    pub rows: Vec<DiagnosticRow>,
    pub bounds: Option<RateBounds>,
    pub mdp: Option<MdpCurve>,
    pub law: Option<(f64, LatticePmf)>,
}

/// Everything a run produced, kept in memory until it is written.
#[derive(Clone, Debug)]
pub struct Bundle {
    pub model_id: String,
    pub rows: Vec<RowResult>,
    pub extra: Vec<DiagnosticRow>,
    pub fits: Vec<RateFit>,
    pub dk_series: Option<RateSeries>,
}

fn profile_for(config: &ExperimentConfig, model: &ArrayModel) -> Result<MixingProfile> {
    match &config.profile {
        Some(p) => {
            let mut prof = MixingProfile::read_csv(p)?;
            if prof.n < model.n() {
                return Err(Error::Precondition(format!(
                    "profile covers lags up to {}, the row needs {}",
                    prof.n,
                    model.n()
                )));
            }
            prof.n = model.n();
            Ok(prof)
        }
        None => dobrushin_phi_profile(model),
    }
}

fn l_for(rule: &Option<LRule>, c: &GrowthConstants, model: &ArrayModel) -> Result<usize> {
    let cap = (c.sigma_n * c.sigma_n / (18.0 * c.q_n)).floor().max(1.0) as usize;
    let Some(rule) = rule else { return Ok(cap) };
    let v = rule.value.value()?;
    let raw = match rule.kind.as_str() {
        "constant" => v,
        "sigma" => v * c.sigma_n,
        _ => v * model.finite()?.memory().unwrap_or(1) as f64,
    };
    Ok((raw.floor().max(1.0) as usize).min(cap))
}

/// Runs one row length through the planned stages.
fn run_row(
    config: &ExperimentConfig,
    plan: &Plan,
    model: &ArrayModel,
    seed: u64,
    tol: &Tolerances,
) -> Result<RowResult> {
    let id = model.id.clone();
    let n = model.n();
    let arr = model.finite()?;
    let p0 = config.p0.value()?;
    let profile = profile_for(config, model)?;
    let mut constants = oracle_growth_constants(arr, &profile, p0, config.eps0.value()?)?;
    let mut out = RowResult {
        n,
        constants: constants.clone(),
        beta: None,
        partition: None,
        certification: None,
        rows: Vec::new(),
        bounds: None,
        mdp: None,
        law: None,
    };
    let row = |s: &str, v: f64| DiagnosticRow::new(&id, n, s, v);
    if plan.blocks {
        let partition = partition_blocks(arr, &constants)?;
        let report = verify_partition(&partition, arr);
        if let Some(bad) = report.checks.iter().find(|c| c.lhs > c.rhs + tol.certification * c.rhs.abs().max(1.0)) {
            return Err(Error::invariant(bad.id.clone(), format!("lhs {} exceeds rhs {}", bad.lhs, bad.rhs)));
        }
        out.partition = Some(partition);
        out.certification = Some(report);
    }
    if plan.beta {
        let partition = out.partition.as_ref().expect("planned");
        let beta = estimate_beta(model, partition, &profile, p0, config.replicates, seed)?;
        constants.beta_n = beta.empirical;
        out.rows.push(row("beta_empirical", beta.empirical));
        out.rows.push(row("beta_se", beta.se));
        if let Some(a) = beta.analytic {
            out.rows.push(row("beta_analytic", a));
        }
        out.beta = Some(beta);
        out.constants = constants.clone();
    }
    if plan.decompose {
        let partition = out.partition.as_ref().expect("planned");
        let decomp = martingale_differences(model, partition, p0)?;
        if decomp.martingale_residual > tol.martingale {
            return Err(Error::invariant(
                "martingale_property",
                format!("residual {} above {}", decomp.martingale_residual, tol.martingale),
            ));
        }
        out.rows.push(row("martingale_residual", decomp.martingale_residual));
        out.rows.push(row("r_norm_2", decomp.r_norm_2));
        out.rows.push(row("expected_qv", decomp.expected_qv()));
        for c in decomp.orthogonality_checks(arr) {
            if !c.pass {
                return Err(Error::invariant(c.id.clone(), format!("lhs {} exceeds rhs {}", c.lhs, c.rhs)));
            }
            out.rows.push(row(&c.id, c.lhs));
        }
        if plan.quadratic_variation {
            let vp = VarianceProfile::compute(model)?;
            let changer = TimeChanger::new(&vp, partition)?;
            let grid = t_grid(config.grid);
            let paths = path_pair(model, &decomp, &changer, &grid, config.replicates, seed)?;
            if paths.telescoping_residual > tol.telescoping {
                return Err(Error::invariant(
                    "telescoping",
                    format!("residual {} above {}", paths.telescoping_residual, tol.telescoping),
                ));
            }
            out.rows.push(row("telescoping_residual", paths.telescoping_residual));
            let k_p0 = (1..=n).map(|j| lp_norm(arr.chain(), arr.marginals(), &sum_functional(arr, &[(j, j)]), p0).0);
            let inputs = SequentialInputs::from_profile(&profile, k_p0.fold(0.0, f64::max), p0)?;
            if plan.has("quadratic_variation") && paths.len() >= 100 {
                let qv = quadratic_variation(model, &decomp, &constants, inputs.pi_p0, &paths)?;
                out.rows.push(row("ky_fan", qv.ky_fan));
                out.rows.push(row("qv1_bound", qv.qv1_bound));
                for c in qv.checks.iter().filter(|c| c.id == "qv_gap") {
                    out.rows.push(row("qv_gap_lhs", c.lhs));
                    out.rows.push(row("qv_gap_rhs", c.rhs));
                }
                let cr = coupling_report(&constants, &decomp, &paths);
                out.rows.push(row("approx_measured", cr.approx_measured));
                out.rows.push(row("approx_bound", cr.approx_bound));
                out.rows.push(row("prokhorov_w", cr.prokhorov_w));
                out.rows.push(row("prokhorov_m", cr.prokhorov_m));
            }
            if plan.has("fdd") {
                let f = fdd_check(&paths, &[0.25, 0.5, 0.75, 1.0])?;
                for p in &f.points {
                    out.rows.push(row(&format!("fdd_dk[t={}]", p.t), p.d_k));
                }
                out.rows.push(row("fdd_dkw_radius", f.points.first().map_or(f64::NAN, |p| p.dkw_radius)));
                out.rows.push(row("fdd_covariance_error", f.covariance_error));
            }
            if plan.has("rate_bounds") {
                let seq = SequentialConstants::new(&constants, &inputs);
                let l = l_for(&config.l_rule, &constants, model)?;
                let mem = memory_coefficient(model, &profile, &constants, p0, l / 2)?;
                out.bounds = Some(rate_bounds(&constants, &seq, l, mem.value)?);
            }
        }
    }
    if plan.exact_law {
        let pmf = exact_sum_pmf(model, 1, n)?;
        let sigma = constants.sigma_n;
        if plan.has("berry_esseen") {
            let d = kolmogorov_to_normal(&pmf, sigma)?;
            out.rows.push(row("d_k", d.d_k));
            out.rows.push(row("be_rn", berry_esseen_rn(&constants, p0)));
        }
        if plan.has("moment_gap") {
            out.rows.push(row("moment_gap_4", moment_gap(&pmf, sigma, 4)?));
        }
        if plan.has("mdp") {
            let grid: Vec<f64> = config.mdp_grid.iter().map(Num::value).collect::<Result<_>>()?;
            let a = sigma.powf(config.mdp_exponent.value()?).max(1.0);
            let curve = mdp_curve(&pmf, sigma, a, &grid)?;
            out.rows.push(row("mdp_sup_deviation", curve.sup_deviation));
            out.mdp = Some(curve);
        }
        out.law = Some((sigma, pmf));
    }
    Ok(out)
}

/// Runs the whole grid for `command`, in memory.
pub fn run_experiment(config: &ExperimentConfig, command: Command, seed: u64, tol: &Tolerances) -> Result<Bundle> {
    let plan = Plan::for_command(command, config);
    let spec = config.model_spec()?;
    let mut rows = Vec::new();
    let mut model_id = String::new();
    for &n in &config.n_grid {
        let model = config.build(&spec, n)?;
        model.validate()?;
        model_id = model.id.clone();
        if command == Command::Validate {
            continue;
        }
        rows.push(run_row(config, &plan, &model, seed, tol)?);
    }
    let mut bundle = Bundle { model_id: model_id.clone(), rows, extra: Vec::new(), fits: Vec::new(), dk_series: None };
    if plan.has("berry_esseen") {
        let series: Vec<RateRow> = bundle
            .rows
            .iter()
            .filter_map(|r| r.rows.iter().find(|d| d.statistic == "d_k").map(|d| (r, d.value)))
            .map(|(r, v)| RateRow { n: r.n, sigma: r.constants.sigma_n, value: v })
            .collect();
        let s = RateSeries::new(model_id.clone(), "d_k", series)?;
        if s.rows.len() >= 4 {
            bundle.fits.push(rate_fit(&s, 0.0)?);
        }
        bundle.dk_series = Some(s);
    }
    if plan.has("cumulants") {
        let laws: Vec<(usize, LatticePmf)> =
            bundle.rows.iter().filter_map(|r| r.law.as_ref().map(|(_, p)| (r.n, p.clone()))).collect();
        for k in [3, 4] {
            let g = cumulant_growth(&laws, k, 1.0, 1.0, diagnostics::DEFAULT_GROWTH_FACTOR)?;
            for r in &g.rows {
                bundle.extra.push(DiagnosticRow::new(&model_id, r.n, format!("cumulant_{k}_normalized"), r.normalized));
            }
            let last = config.n_grid.last().copied().unwrap_or(0);
            bundle.extra.push(DiagnosticRow::new(&model_id, last, format!("cumulant_{k}_ratio"), g.ratio));
        }
    }
    if plan.has("asip") {
        let n_max = *config.n_grid.last().expect("validated");
        let model = config.build(&spec, n_max)?;
        let arr = model.finite()?;
        let c = oracle_growth_constants(arr, &profile_for(config, &model)?, config.p0.value()?, config.eps0.value()?)?;
        let sp = sequence_partition(arr, c.a_n(), c.r_n)?;
        let vp = VarianceProfile::compute(&model)?;
        let v: Vec<f64> = (0..=n_max).map(|k| vp.variance(k)).collect();
        let p0 = config.p0.value()?;
        let res = diagnostics::asip_residual(&model, &sp, &v, &config.n_grid, config.replicates, seed, p0, 0.1)?;
        for r in &res.rows {
            bundle.extra.push(DiagnosticRow::new(&model_id, r.n, "asip_quantile", r.quantile));
            bundle.extra.push(DiagnosticRow::new(&model_id, r.n, "asip_normalized", r.normalized));
        }
    }
    Ok(bundle)
}

/// `(series, x, y, y_err)`.
pub type PlotRow = (String, f64, f64, f64);

/// Long-format `series, x, y, y_err` rows of one plot.
pub fn emit_plot_data(bundle: &Bundle, plot: &str) -> Result<Vec<PlotRow>> {
    match plot {
        "dk_vs_sigma" => {
            let s = bundle
                .dk_series
                .as_ref()
                .ok_or_else(|| Error::MissingData("dk_vs_sigma needs the berry_esseen stage".into()))?;
            Ok(s.rows.iter().map(|r| (format!("{}:d_k", bundle.model_id), r.sigma, r.value, 0.0)).collect())
        }
        "mdp_curve" => {
            let mut out = Vec::new();
            for r in &bundle.rows {
                if let Some(c) = &r.mdp {
                    for p in c.points.iter().filter(|p| !p.dropped) {
                        out.push((format!("n={}", r.n), p.x, p.value, 0.0));
                    }
                    for p in &c.points {
                        out.push((format!("n={}:rate", r.n), p.x, -p.x * p.x / 2.0, 0.0));
                    }
                }
            }
            if out.is_empty() {
                return Err(Error::MissingData("mdp_curve needs the mdp stage".into()));
            }
            Ok(out)
        }
        "block_variances" => {
            let mut out = Vec::new();
            for r in &bundle.rows {
                if let Some(p) = &r.partition {
                    for (k, b) in p.blocks.iter().enumerate() {
                        let x = (k + 1) as f64;
                        out.push((format!("n={}", r.n), x, b.variance.value, b.variance.se));
                        out.push((format!("n={}:q_n", r.n), x, p.q_n, 0.0));
                        out.push((format!("n={}:9q_n", r.n), x, 9.0 * p.q_n, 0.0));
                    }
                }
            }
            if out.is_empty() {
                return Err(Error::MissingData("block_variances needs the blocks stage".into()));
            }
            Ok(out)
        }
        other => Err(Error::Config(format!("unknown plot id '{other}' (expected one of {})", PLOT_IDS.join(", ")))),
    }
}

fn write_plot(rows: &[PlotRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["series", "x", "y", "y_err"])?;
    for (s, x, y, e) in rows {
        w.write_record([s.clone(), x.to_string(), y.to_string(), e.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Frozen calibration constants recorded in every manifest.
pub fn frozen_constants() -> BTreeMap<&'static str, f64> {
    BTreeMap::from([
        ("C_eps", linearize::C_EPS),
        ("beta_eps", linearize::BETA_EPS),
        ("cert_tol", linearize::CERT_TOL),
        ("guard_se", linearize::GUARD_SE),
        ("little_o_threshold", linearize::LITTLE_O_THRESHOLD),
        ("C_gap", martingale::C_GAP),
        ("C_p0", martingale::C_P0),
        ("martingale_tol", martingale::MARTINGALE_TOL),
        ("ortho_tol", martingale::ORTHO_TOL),
        ("conditional_cutoff", martingale::CONDITIONAL_CUTOFF),
        ("zero_cumulant", diagnostics::ZERO_CUMULANT),
        ("min_tail", diagnostics::MIN_TAIL),
        ("asip_quantile", diagnostics::ASIP_QUANTILE),
        ("dkw_alpha", diagnostics::DKW_ALPHA),
        ("exact_lags", mixing::EXACT_LAGS as f64),
    ])
}

#[derive(Serialize)]
struct Manifest<'a> {
    program: &'static str,
    version: &'static str,
    command: String,
    seed: u64,
    tolerance_profile: ToleranceProfile,
    tolerances: Tolerances,
    frozen_constants: BTreeMap<&'static str, f64>,
    config: &'a ExperimentConfig,
    model_file: Option<String>,
    outputs: Vec<String>,
}

/// Writes the bundle; returns the file names written.
pub fn write_bundle(
    bundle: &Bundle,
    config: &ExperimentConfig,
    command: Command,
    seed: u64,
    profile: ToleranceProfile,
    tol: &Tolerances,
    out: &Path,
) -> Result<Vec<String>> {
    let plan = Plan::for_command(command, config);
    let plots: Vec<&str> = if command == Command::Report && plan.has("plots") {
        PLOT_IDS
            .iter()
            .copied()
            .filter(|p| config.plots.as_ref().is_none_or(|ids| ids.iter().any(|i| i == p)))
            .filter(|p| match *p {
                "dk_vs_sigma" => bundle.dk_series.is_some(),
                "mdp_curve" => bundle.rows.iter().any(|r| r.mdp.is_some()),
                _ => bundle.rows.iter().any(|r| r.partition.is_some()),
            })
            .collect()
    } else {
        vec![]
    };
    // everything that can fail is evaluated before the first file is created
    let plot_rows: Vec<(&str, Vec<PlotRow>)> =
        plots.iter().map(|p| emit_plot_data(bundle, p).map(|r| (*p, r))).collect::<Result<_>>()?;
    let model_file = config.model.as_ref().map(fs::read_to_string).transpose()?;

    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let mut constants = Vec::new();
    for r in &bundle.rows {
        for (k, v) in r.constants.fields() {
            constants.push(DiagnosticRow::new(&bundle.model_id, r.n, k, v));
        }
    }
    diagnostics::write_rows_csv(&constants, &out.join("constants.csv"))?;
    written.push("constants.csv".to_string());
    for r in &bundle.rows {
        if let (Some(p), Some(c)) = (&r.partition, &r.certification) {
            let name = format!("blocks_n{}.csv", r.n);
            p.write_csv(&out.join(&name))?;
            written.push(name);
            let name = format!("certification_n{}.csv", r.n);
            c.write_csv(&out.join(&name))?;
            written.push(name);
        }
    }
    let rows: Vec<DiagnosticRow> =
        bundle.rows.iter().flat_map(|r| r.rows.iter().cloned()).chain(bundle.extra.iter().cloned()).collect();
    if !rows.is_empty() {
        diagnostics::write_rows_csv(&rows, &out.join("diagnostics.csv"))?;
        written.push("diagnostics.csv".into());
    }
    let bounds: Vec<RateBounds> = bundle.rows.iter().filter_map(|r| r.bounds.clone()).collect();
    if !bounds.is_empty() {
        martingale::write_bounds_csv(&bounds, &out.join("bounds.csv"))?;
        written.push("bounds.csv".into());
    }
    if !bundle.fits.is_empty() {
        diagnostics::write_rate_fits_csv(&bundle.fits, &out.join("rate_fits.csv"))?;
        written.push("rate_fits.csv".into());
    }
    for (p, rows) in &plot_rows {
        let name = format!("plot_{p}.csv");
        write_plot(rows, &out.join(&name))?;
        written.push(name);
    }
    let manifest = Manifest {
        program: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: format!("{command:?}").to_lowercase(),
        seed,
        tolerance_profile: profile,
        tolerances: *tol,
        frozen_constants: frozen_constants(),
        config,
        model_file,
        outputs: written.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(out.join("manifest.json"), text + "\n")?;
    written.push("manifest.json".into());
    Ok(written)
}

fn execute(cli: &Cli) -> Result<()> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let config = ExperimentConfig::load(path)?;
    let seed = cli.seed.unwrap_or(config.seed);
    let tol = config.tolerances(cli.tolerance_profile)?;
    let out = cli.out.clone().unwrap_or_else(|| config.out.clone());
    let bundle = run_experiment(&config, cli.command, seed, &tol)?;
    if cli.command == Command::Validate {
        println!("{}: {} rows valid", bundle.model_id, config.n_grid.len());
        return Ok(());
    }
    let written = write_bundle(&bundle, &config, cli.command, seed, cli.tolerance_profile, &tol, &out)?;
    println!("wrote {} files to {}", written.len(), out.display());
    Ok(())
}

/// Entry point of the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let work = || execute(&cli);
    let result = match cli.threads {
        Some(t) => match rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build() {
            Ok(pool) => pool.install(work),
            Err(e) => Err(Error::Resource(e.to_string())),
        },
        None => work(),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text).unwrap()
    }

    #[test]
    fn grid_must_increase() {
        let c = config("reference = \"iid_sign\"\nn_grid = [64, 32]\n");
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = config("reference = \"iid_sign\"\nn_grid = [32, 64]\n");
        assert!(c.validate().is_ok());
    }

    #[test]
    fn unknown_stage_and_plot() {
        let c = config("reference = \"iid_sign\"\nn_grid = [32]\ndiagnostics = [\"nope\"]\n");
        assert!(c.validate().is_err());
        let b = Bundle { model_id: "m".into(), rows: vec![], extra: vec![], fits: vec![], dk_series: None };
        assert!(matches!(emit_plot_data(&b, "histogram"), Err(Error::Config(_))));
    }

    #[test]
    fn strict_tightens() {
        let c = config("reference = \"iid_sign\"\nn_grid = [32]\n[tolerances]\ncertification = \"1e-8\"\n");
        let d = c.tolerances(ToleranceProfile::Default).unwrap();
        let s = c.tolerances(ToleranceProfile::Strict).unwrap();
        assert_eq!(d.certification, 1e-8);
        assert!(s.certification < d.certification && s.martingale < d.martingale);
    }

    #[test]
    fn plan_dependencies() {
        let c = config("reference = \"iid_sign\"\nn_grid = [32]\ndiagnostics = [\"rate_bounds\"]\n");
        let p = Plan::for_command(Command::Report, &c);
        assert!(p.blocks && p.beta && p.decompose && p.quadratic_variation && !p.exact_law);
        let c = config("reference = \"iid_sign\"\nn_grid = [32]\n");
        assert_eq!(Plan::for_command(Command::Report, &c), Plan::default());
    }
}
