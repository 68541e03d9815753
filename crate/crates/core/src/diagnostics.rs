//! Quantitative checks of the distributional limit theorems: Kolmogorov
//! distances and their rates, cumulant growth, moment gaps, moderate
//! deviations, the sequence-mode residual and finite-dimensional laws of the
//! rescaled path.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::generators::{sample_path, ArrayModel};
use crate::linearize::{GrowthConstants, SequencePartition};
use crate::martingale::PathPair;
use crate::numeric::{gaussian_moment, linear_fit, normal_cdf, quantile};
use crate::oracle::{moments_and_cumulants, LatticePmf, Side};

/// Cumulants below `ZERO_CUMULANT·μ_2^{k/2}` are indistinguishable from 0.
pub const ZERO_CUMULANT: f64 = 1e-10;
/// Smallest tail probability kept on a moderate deviation curve.
pub const MIN_TAIL: f64 = 1e-280;
/// Default max/min ratio accepted by [`cumulant_growth`].
pub const DEFAULT_GROWTH_FACTOR: f64 = 10.0;
/// Quantile used by [`asip_residual`].
pub const ASIP_QUANTILE: f64 = 0.99;
/// Confidence level of the DKW band in [`fdd_check`].
pub const DKW_ALPHA: f64 = 0.05;

/// `sup_t |P(S/σ ≤ t) − Φ(t)|` with the point where it is attained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KolmogorovDistance {
    pub d_k: f64,
    pub argsup: f64,
    /// The law has a single atom.
    pub degenerate: bool,
}

/// Exact Kolmogorov distance of `S/σ` to the standard normal law.
///
/// Between atoms the distribution function is flat and `Φ` is monotone, so
/// the supremum is attained at one of the one-sided limits of a jump.
pub fn kolmogorov_to_normal(pmf: &LatticePmf, sigma: f64) -> Result<KolmogorovDistance> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Precondition(format!("sigma {sigma} must be positive")));
    }
    let mut best = KolmogorovDistance { d_k: 0.0, argsup: 0.0, degenerate: pmf.atoms().count() <= 1 };
    let mut below = 0.0;
    for (x, w) in pmf.atoms() {
        let t = x / sigma;
        let phi = normal_cdf(t);
        let at = below + w;
        let d = (phi - below).abs().max((at.min(1.0) - phi).abs());
        if d > best.d_k {
            best.d_k = d;
            best.argsup = t;
        }
        below = at;
    }
    Ok(best)
}

/// One measurement of a statistic at row size `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub sigma: f64,
    pub value: f64,
}

/// A statistic measured along an increasing sequence of `σ_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateSeries {
    pub model: String,
    pub statistic: String,
    pub rows: Vec<RateRow>,
}

impl RateSeries {
    pub fn new(model: impl Into<String>, statistic: impl Into<String>, rows: Vec<RateRow>) -> Result<Self> {
        let s = RateSeries { model: model.into(), statistic: statistic.into(), rows };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.rows.windows(2) {
            if !(w[1].sigma > w[0].sigma) {
                return Err(Error::validation(
                    format!("{} rate series", self.statistic),
                    format!("sigma not strictly increasing at n = {}", w[1].n),
                ));
            }
        }
        if let Some(r) = self.rows.iter().find(|r| !(r.sigma > 0.0 && r.value > 0.0)) {
            return Err(Error::validation(
                format!("{} rate series", self.statistic),
                format!("row n = {} needs positive sigma and value", r.n),
            ));
        }
        Ok(())
    }
}

/// Least-squares slope with a 95% interval.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFit {
    pub model: String,
    pub statistic: String,
    pub slope: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Residual rms of the fit.
    pub residual: f64,
    pub intercept: f64,
}

/// Slope of `ln(value / ln^power σ)` against `ln σ`.
pub fn rate_fit(series: &RateSeries, log_correction_power: f64) -> Result<RateFit> {
    series.validate()?;
    if series.rows.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "rate fit of {} needs at least 4 rows, got {}",
            series.statistic,
            series.rows.len()
        )));
    }
    let xs: Vec<f64> = series.rows.iter().map(|r| r.sigma.ln()).collect();
    let mut ys = Vec::with_capacity(xs.len());
    for r in &series.rows {
        let l = r.sigma.ln();
        if log_correction_power != 0.0 && !(l > 0.0) {
            return Err(Error::Precondition(format!("log correction needs sigma > 1, got {}", r.sigma)));
        }
        ys.push(r.value.ln() - log_correction_power * if l > 0.0 { l.ln() } else { 0.0 });
    }
    let (slope, intercept, se, residual) = linear_fit(&xs, &ys);
    Ok(RateFit {
        model: series.model.clone(),
        statistic: series.statistic.clone(),
        slope,
        ci_low: slope - 1.96 * se,
        ci_high: slope + 1.96 * se,
        residual,
        intercept,
    })
}

/// Writes `model, statistic, slope, ci_low, ci_high, residual`.
pub fn write_rate_fits_csv(fits: &[RateFit], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["model", "statistic", "slope", "ci_low", "ci_high", "residual"])?;
    for f in fits {
        w.write_record([
            f.model.clone(),
            f.statistic.clone(),
            f.slope.to_string(),
            f.ci_low.to_string(),
            f.ci_high.to_string(),
            f.residual.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One `(model, n, statistic)` diagnostic value.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiagnosticRow {
    pub model: String,
    pub n: usize,
    pub statistic: String,
    pub value: f64,
}

impl DiagnosticRow {
    pub fn new(model: &str, n: usize, statistic: impl Into<String>, value: f64) -> Self {
        DiagnosticRow { model: model.to_string(), n, statistic: statistic.into(), value }
    }
}

/// Writes `model, n, statistic, value`.
pub fn write_rows_csv(rows: &[DiagnosticRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Cumulant of one law in a growth series.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CumulantRow {
    pub n: usize,
    pub sigma: f64,
    pub cumulant: f64,
    /// `|Γ_k(S/σ)|·σ^{k−2} = |Γ_k(S)|/σ²`.
    pub normalized: f64,
    /// `normalized / (R^k (k!)^{2+η})`, the bound with its constant set to 1.
    pub bound_ratio: f64,
    pub zero: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CumulantGrowth {
    pub k: usize,
    pub rows: Vec<CumulantRow>,
    /// `max/min` of the normalized series over rows not flagged zero.
    pub ratio: f64,
    pub non_increasing: bool,
    pub bounded: bool,
}

/// Normalized `k`-th cumulant along a series of exact laws.
pub fn cumulant_growth(
    laws: &[(usize, LatticePmf)],
    k: usize,
    r_n: f64,
    eta: f64,
    factor: f64,
) -> Result<CumulantGrowth> {
    if !(3..=8).contains(&k) {
        return Err(Error::Precondition(format!("cumulant order {k} outside 3..=8")));
    }
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    let scale = r_n.powi(k as i32) * fact.powf(2.0 + eta);
    let rows = laws
        .iter()
        .map(|(n, pmf)| {
            let m = moments_and_cumulants(pmf, k)?;
            let var = m.variance();
            if !(var > 0.0) {
                return Err(Error::DegenerateVariance { variance: var, required: 0.0 });
            }
            let c = m.cumulants[k];
            let normalized = c.abs() / var;
            Ok(CumulantRow {
                n: *n,
                sigma: var.sqrt(),
                cumulant: c,
                normalized,
                bound_ratio: normalized / scale,
                zero: c.abs() < ZERO_CUMULANT * var.powf(k as f64 / 2.0),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let live: Vec<f64> = rows.iter().filter(|r| !r.zero).map(|r| r.normalized).collect();
    let ratio = if live.is_empty() {
        1.0
    } else {
        live.iter().cloned().fold(0.0, f64::max) / live.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let non_increasing = live.windows(2).all(|w| w[1] <= w[0]);
    Ok(CumulantGrowth { k, rows, ratio, non_increasing, bounded: ratio <= factor || non_increasing })
}

/// `|E S^p − σ^p (p−1)!!| / σ^{p−1}` from the exact law.
pub fn moment_gap(pmf: &LatticePmf, sigma: f64, p: u32) -> Result<f64> {
    if !p.is_multiple_of(2) || !(4..=12).contains(&p) {
        return Err(Error::Precondition(format!("moment gap order {p} must be even in 4..=12")));
    }
    if !(sigma > 0.0) {
        return Err(Error::Precondition(format!("sigma {sigma} must be positive")));
    }
    let m = moments_and_cumulants(pmf, p as usize)?;
    Ok((m.raw(p as usize) - sigma.powi(p as i32) * gaussian_moment(p)).abs() / sigma.powi(p as i32 - 1))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MdpPoint {
    pub x: f64,
    /// `a^{−2} ln P(S ≥ xσa)`; NaN when dropped.
    pub value: f64,
    /// `|value + x²/2|`; NaN when dropped.
    pub deviation: f64,
    /// The tail fell below [`MIN_TAIL`].
    pub dropped: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MdpCurve {
    pub a: f64,
    pub sigma: f64,
    pub points: Vec<MdpPoint>,
    pub sup_deviation: f64,
}

/// Exact moderate deviation curve at speed `a`.
pub fn mdp_curve(pmf: &LatticePmf, sigma: f64, a: f64, x_grid: &[f64]) -> Result<MdpCurve> {
    if !(a >= 1.0) {
        return Err(Error::Precondition(format!("speed {a} must be at least 1")));
    }
    if !(sigma > 0.0) {
        return Err(Error::Precondition(format!("sigma {sigma} must be positive")));
    }
    let a2 = a * a;
    let points: Vec<MdpPoint> = x_grid
        .iter()
        .map(|&x| {
            let tail = pmf.tail(x * sigma * a, Side::Upper);
            if !(tail.probability >= MIN_TAIL) {
                return MdpPoint { x, value: f64::NAN, deviation: f64::NAN, dropped: true };
            }
            let value = tail.ln_probability / a2;
            MdpPoint { x, value, deviation: (value + x * x / 2.0).abs(), dropped: false }
        })
        .collect();
    let sup_deviation = points.iter().filter(|p| !p.dropped).map(|p| p.deviation).fold(0.0, f64::max);
    Ok(MdpCurve { a, sigma, points, sup_deviation })
}

/// `R_n = K^{(p0−2)/(2p0)}·β^{p0}·Q^{p0/2}` of the Berry–Esseen rate.
pub fn berry_esseen_rn(c: &GrowthConstants, p0: f64) -> f64 {
    c.k_n.powf((p0 - 2.0) / (2.0 * p0)) * c.beta_n.powf(p0) * c.q_n.powf(p0 / 2.0)
}

/// `R_n = Q^{1/2}(K_∞ + j_n + 1)·A_n` of the moderate deviation theorem.
pub fn mdp_rn(c: &GrowthConstants, k_inf: f64, j_n: usize) -> f64 {
    c.q_n.sqrt() * (k_inf + j_n as f64 + 1.0) * c.a_n()
}

/// `a·(R³σ)^{−1/(1+2γ)}` with `γ = 1 + 1/η`; the speed window asks this to vanish.
pub fn mdp_speed_ratio(a: f64, r_n: f64, sigma: f64, eta: f64) -> f64 {
    let gamma = 1.0 + 1.0 / eta;
    a * (r_n.powi(3) * sigma).powf(-1.0 / (1.0 + 2.0 * gamma))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsipRow {
    pub n: usize,
    pub k_n: usize,
    pub covered: usize,
    /// Empirical quantile of `|S_n − S_{b_{k_n}}|`.
    pub quantile: f64,
    pub variance: f64,
    /// `quantile / V_n^{1/p0 + ε}`.
    pub normalized: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsipResidual {
    pub p0: f64,
    pub eps: f64,
    pub rows: Vec<AsipRow>,
    pub non_increasing: bool,
}

/// Residual `S_n − Σ_{j≤k_n} Ξ_j` along a sequence model.
///
/// `model` is the row of length `n_max`; since the sequence does not depend
/// on the row, its prefixes are the shorter rows. `variances[m] = Var(S_m)`.
#[allow(clippy::too_many_arguments)]
pub fn asip_residual(
    model: &ArrayModel,
    partition: &SequencePartition,
    variances: &[f64],
    n_grid: &[usize],
    replicates: usize,
    seed: u64,
    p0: f64,
    eps: f64,
) -> Result<AsipResidual> {
    let n_max = *n_grid.last().ok_or_else(|| Error::Precondition("empty n grid".into()))?;
    if n_grid.windows(2).any(|w| w[1] <= w[0]) || n_max > model.n() || n_max >= variances.len() {
        return Err(Error::Precondition(format!("n grid must increase within 1..={}", model.n())));
    }
    if replicates == 0 {
        return Err(Error::Precondition("asip residual needs replicates".into()));
    }
    let residuals: Vec<Vec<f64>> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let path = sample_path(model, n_max, seed, r)?;
            let mut prefix = Vec::with_capacity(n_max + 1);
            prefix.push(0.0);
            let mut s = 0.0;
            for v in &path.values {
                s += v;
                prefix.push(s);
            }
            Ok(n_grid.iter().map(|&n| (prefix[n] - prefix[partition.covered(n)]).abs()).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<AsipRow> = n_grid
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let col: Vec<f64> = residuals.iter().map(|r| r[i]).collect();
            let q = quantile(&col, ASIP_QUANTILE);
            let v = variances[n];
            AsipRow {
                n,
                k_n: partition.k_n(n),
                covered: partition.covered(n),
                quantile: q,
                variance: v,
                normalized: q / v.powf(1.0 / p0 + eps),
            }
        })
        .collect();
    let non_increasing = rows.windows(2).all(|w| w[1].normalized <= w[0].normalized);
    Ok(AsipResidual { p0, eps, rows, non_increasing })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FddPoint {
    pub t: f64,
    /// Empirical `sup |F̂(x) − Φ(x/√t)|` of `W_n(t)`.
    pub d_k: f64,
    pub dkw_radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FddReport {
    pub points: Vec<FddPoint>,
    /// `max_{s,t} |Ĉov(W(s), W(t)) − min(s, t)|` over the selected times.
    pub covariance_error: f64,
}

/// Empirical one-dimensional laws and covariances of `W_n` at the grid
/// times nearest to `times` (times ≤ 0 are skipped).
pub fn fdd_check(paths: &PathPair, times: &[f64]) -> Result<FddReport> {
    let r = paths.w.len();
    if r < 2 {
        return Err(Error::Precondition("fdd check needs at least 2 replicates".into()));
    }
    let idx: Vec<usize> = times
        .iter()
        .filter(|&&t| t > 0.0)
        .map(|&t| {
            (0..paths.t.len())
                .min_by(|&a, &b| (paths.t[a] - t).abs().partial_cmp(&(paths.t[b] - t).abs()).unwrap())
                .unwrap()
        })
        .filter(|&i| paths.t[i] > 0.0)
        .collect();
    let radius = ((2.0 / DKW_ALPHA).ln() / (2.0 * r as f64)).sqrt();
    let column = |i: usize| -> Vec<f64> { paths.w.iter().map(|row| row[i]).collect() };
    let points = idx
        .iter()
        .map(|&i| {
            let t = paths.t[i];
            let mut xs = column(i);
            xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let sd = t.sqrt();
            let mut d: f64 = 0.0;
            for (k, &x) in xs.iter().enumerate() {
                let phi = normal_cdf(x / sd);
                d = d.max((phi - k as f64 / r as f64).abs()).max(((k + 1) as f64 / r as f64 - phi).abs());
            }
            FddPoint { t, d_k: d, dkw_radius: radius }
        })
        .collect();
    let cols: Vec<(f64, Vec<f64>)> = idx
        .iter()
        .map(|&i| {
            let c = column(i);
            let m = c.iter().sum::<f64>() / r as f64;
            (paths.t[i], c.into_iter().map(|v| v - m).collect())
        })
        .collect();
    let mut covariance_error: f64 = 0.0;
    for (a, (s, x)) in cols.iter().enumerate() {
        for (t, y) in &cols[a..] {
            let c = x.iter().zip(y).map(|(u, v)| u * v).sum::<f64>() / (r as f64 - 1.0);
            covariance_error = covariance_error.max((c - s.min(*t)).abs());
        }
    }
    Ok(FddReport { points, covariance_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_and_point_mass() {
        let pmf = LatticePmf::new(-1.0, 2.0, vec![0.5, 0.5]).unwrap();
        let d = kolmogorov_to_normal(&pmf, 1.0).unwrap();
        assert!((d.d_k - (0.5 - normal_cdf(-1.0))).abs() < 1e-15);
        assert!((d.d_k - 0.341344746).abs() < 1e-9);
        let d = kolmogorov_to_normal(&LatticePmf::point_mass(0.0), 1.0).unwrap();
        assert!(d.degenerate);
        assert!((d.d_k - 0.5).abs() < 1e-15);
        assert!(kolmogorov_to_normal(&pmf, 0.0).is_err());
    }

    fn series(f: impl Fn(f64) -> f64) -> RateSeries {
        let rows = (4..10).map(|k| {
            let s = (1u64 << k) as f64;
            RateRow { n: 1 << (2 * k), sigma: s, value: f(s) }
        });
        RateSeries::new("synthetic", "stat", rows.collect()).unwrap()
    }

    #[test]
    fn synthetic_slopes() {
        assert!((rate_fit(&series(|s| 1.0 / s), 0.0).unwrap().slope + 1.0).abs() < 1e-9);
        let f = rate_fit(&series(|s| s.ln().powi(2) / s), 2.0).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-9);
        let mut short = series(|s| 1.0 / s);
        short.rows.truncate(3);
        assert!(matches!(rate_fit(&short, 0.0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn decreasing_sigma_rejected() {
        let rows = vec![RateRow { n: 1, sigma: 2.0, value: 1.0 }, RateRow { n: 2, sigma: 1.0, value: 1.0 }];
        assert!(RateSeries::new("m", "s", rows).is_err());
    }

    #[test]
    fn moment_gap_rejects_odd() {
        let pmf = LatticePmf::new(-1.0, 2.0, vec![0.5, 0.5]).unwrap();
        assert!(matches!(moment_gap(&pmf, 1.0, 5), Err(Error::Precondition(_))));
        assert!(matches!(moment_gap(&pmf, 1.0, 14), Err(Error::Precondition(_))));
        // E ξ⁴ = 1, 3σ⁴ = 3
        assert!((moment_gap(&pmf, 1.0, 4).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn mdp_median_and_underflow() {
        let pmf = LatticePmf::new(-1.0, 2.0, vec![0.5, 0.5]).unwrap();
        let c = mdp_curve(&pmf, 1.0, 2.0, &[0.0, 5.0]).unwrap();
        assert!((c.points[0].value - 0.5f64.ln() / 4.0).abs() < 1e-15);
        assert!(c.points[1].dropped);
        assert!(mdp_curve(&pmf, 1.0, 0.5, &[0.0]).is_err());
    }
}
