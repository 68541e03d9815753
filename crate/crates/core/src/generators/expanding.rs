//! Sequential expanding interval maps `T_j(x) = m_j·x mod 1` with `m_j ≥ 2`.
//!
//! Orbits are computed exactly on the grid `{k/M}` with the Mersenne prime
//! `M = 2^61 − 1`: each `T_j` maps the grid bijectively onto itself, so
//! orbits never collapse onto a periodic cycle the way binary floating point
//! orbits of the doubling map do. `ζ_0` is uniform on the grid and, because
//! Lebesgue measure is invariant for every `T_j`, so is every `ζ_j`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::ArrayModel;
use crate::error::{Error, Result};
use crate::numeric::mean_and_se;
use crate::rng::replicate_rng;

/// Grid modulus `2^61 − 1`.
pub const GRID: u64 = (1 << 61) - 1;

/// Observable `g` evaluated at `ζ_j`, always centered by its Lebesgue mean.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MapObservable {
    /// `a·cos(2πx)`
    Cosine { amplitude: f64 },
    /// `|x − c|^h` with `0 < h ≤ 1`
    Holder { exponent: f64, center: f64 },
    Constant(f64),
}

impl MapObservable {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            MapObservable::Cosine { amplitude } => amplitude * (2.0 * std::f64::consts::PI * x).cos(),
            MapObservable::Holder { exponent, center } => (x - center).abs().powf(exponent),
            MapObservable::Constant(c) => c,
        }
    }

    /// `∫_a^b g(x) dx`.
    fn integral(&self, a: f64, b: f64) -> f64 {
        match *self {
            MapObservable::Cosine { amplitude } => {
                let w = 2.0 * std::f64::consts::PI;
                amplitude * ((w * b).sin() - (w * a).sin()) / w
            }
            MapObservable::Holder { exponent, center } => {
                let prim = |x: f64| {
                    let y = x - center;
                    y.signum() * y.abs().powf(exponent + 1.0) / (exponent + 1.0)
                };
                prim(b) - prim(a)
            }
            MapObservable::Constant(c) => c * (b - a),
        }
    }

    /// Mean over `[0, 1)`.
    pub fn mean(&self) -> f64 {
        self.integral(0.0, 1.0)
    }

    /// Average over the interval `[a, b)`.
    pub fn average(&self, a: f64, b: f64) -> f64 {
        self.integral(a, b) / (b - a)
    }
}

/// One row `ξ_j = g(ζ_j) − ∫g`, `ζ_j = T_{j−1}∘⋯∘T_0(ζ_0)`, `j = 1..n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpandingModel {
    n: usize,
    /// Slopes `m_0, m_1, ...`, cycled.
    slopes: Vec<u64>,
    observable: MapObservable,
    /// `Some(r)` for the approximant `ξ_{j,r}`.
    approximation: Option<usize>,
}

impl ExpandingModel {
    pub fn new(n: usize, slopes: Vec<u64>, observable: MapObservable) -> Result<Self> {
        let model = ExpandingModel { n, slopes, observable, approximation: None };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::validation("model", "n must be at least 1"));
        }
        if self.slopes.is_empty() {
            return Err(Error::validation("maps", "no slopes given"));
        }
        if let Some(i) = self.slopes.iter().position(|&m| !(2..GRID).contains(&m)) {
            return Err(Error::validation(
                format!("map T_{i}"),
                format!("slope {} is not expanding (need an integer m ≥ 2)", self.slopes[i]),
            ));
        }
        if let MapObservable::Holder { exponent, .. } = self.observable {
            if !(exponent > 0.0 && exponent <= 1.0) {
                return Err(Error::validation("observable", format!("Hölder exponent {exponent} outside (0, 1]")));
            }
        }
        if self.approximation == Some(0) {
            return Err(Error::validation("approximation", "window r must be at least 1"));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn observable(&self) -> MapObservable {
        self.observable
    }

    pub fn approximation(&self) -> Option<usize> {
        self.approximation
    }

    pub fn slope(&self, j: usize) -> u64 {
        self.slopes[j % self.slopes.len()]
    }

    /// `‖ξ_j‖_∞` of the centered observable.
    pub fn sup_norm(&self) -> f64 {
        let mean = self.observable.mean();
        match self.observable {
            MapObservable::Cosine { amplitude } => amplitude.abs(),
            MapObservable::Holder { exponent, center } => {
                let top = center.max(1.0 - center).powf(exponent);
                let bottom = if (0.0..=1.0).contains(&center) { 0.0 } else { center.min(1.0 - center).abs().powf(exponent) };
                (top - mean).max(mean - bottom)
            }
            MapObservable::Constant(_) => 0.0,
        }
    }

    /// Exact value of `ξ_j` (or `ξ_{j,r}`) at grid point `u/M`.
    fn value(&self, j: usize, u: u64) -> f64 {
        let g = self.observable;
        let x = u as f64 / GRID as f64;
        let raw = match self.approximation {
            Some(r) if r < self.n => match self.cylinder(j, r, u) {
                Some((a, b)) => g.average(a, b),
                None => g.eval(x),
            },
            _ => g.eval(x),
        };
        raw - g.mean()
    }

    /// Cylinder `[k/L, (k+1)/L)` of depth `r` containing `u/M` under
    /// `T_j, ..., T_{j+r−1}`, or `None` when it is finer than the grid.
    fn cylinder(&self, j: usize, r: usize, u: u64) -> Option<(f64, f64)> {
        let mut len: u128 = 1;
        for i in j..j + r {
            len = len.checked_mul(self.slope(i) as u128)?;
            if len >= GRID as u128 {
                return None;
            }
        }
        let k = (len * u as u128) / GRID as u128;
        let l = len as f64;
        Some((k as f64 / l, (k + 1) as f64 / l))
    }

    fn step(&self, j: usize, u: u64) -> u64 {
        ((self.slope(j) as u128 * u as u128) % GRID as u128) as u64
    }

    /// Draws one row.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut u = rng.random_range(0..GRID);
        let mut out = Vec::with_capacity(self.n);
        // ζ_1 = T_0(ζ_0)
        for j in 1..=self.n {
            u = self.step(j - 1, u);
            out.push(self.value(j, u));
        }
        out
    }

    /// Approximant `ξ_{j,r}` as a model of its own.
    pub fn approximant(&self, r: usize) -> Result<ExpandingModel> {
        let m = ExpandingModel { approximation: Some(r), ..self.clone() };
        m.validate()?;
        Ok(m)
    }
}

/// Monte Carlo estimate of `β_p(r) = sup_j ‖ξ_j − ξ_{j,r}‖_p`.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaEstimate {
    pub p: f64,
    pub r: usize,
    pub value: f64,
    pub se: f64,
    /// Index attaining the supremum.
    pub argmax: usize,
}

/// Builds the depth-`r` cylinder approximant and estimates `β_p(r)`.
///
/// Since every `ζ_j` is uniform, the law of `ξ_j − ξ_{j,r}` depends on `j`
/// only through the slopes `m_j..m_{j+r−1}`; one batch of uniform orbit
/// points is drawn per distinct slope window.
pub fn window_approximation(
    model: &ArrayModel,
    r: usize,
    p: f64,
    samples: usize,
    seed: u64,
) -> Result<(ArrayModel, BetaEstimate)> {
    let exp = model.as_expanding()?;
    if r == 0 {
        return Err(Error::validation("approximation", "window r must be at least 1"));
    }
    if !(p >= 1.0) {
        return Err(Error::validation("approximation", format!("norm index {p} must be at least 1")));
    }
    let approx = exp.approximant(r)?;
    let mut best = BetaEstimate { p, r, value: 0.0, se: 0.0, argmax: 1 };
    let mut seen: Vec<Vec<u64>> = Vec::new();
    for j in 1..=exp.n() {
        let key: Vec<u64> = (j..j + r.min(64)).map(|i| exp.slope(i)).collect();
        if seen.contains(&key) {
            continue;
        }
        seen.push(key);
        let mut rng = replicate_rng(seed, j as u64);
        let diffs: Vec<f64> = (0..samples)
            .map(|_| {
                let u = rng.random_range(0..GRID);
                (exp.value(j, u) - approx.value(j, u)).abs().powf(p)
            })
            .collect();
        let (m, se) = mean_and_se(&diffs);
        let value = m.max(0.0).powf(1.0 / p);
        let se_root = if m > 0.0 { se * value / (p * m) } else { 0.0 };
        if value > best.value || seen.len() == 1 {
            best = BetaEstimate { p, r, value, se: se_root, argmax: j };
        }
        if seen.len() >= 4096 {
            break;
        }
    }
    Ok((ArrayModel::expanding(format!("{}-approx{r}", model.id), approx), best))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_map_is_a_bijection_on_small_samples() {
        let m = ExpandingModel::new(4, vec![2, 3], MapObservable::Cosine { amplitude: 1.0 }).unwrap();
        let a = m.step(0, 12345);
        assert_eq!(a, 24690);
        assert_eq!(m.step(0, GRID - 1), GRID - 2);
    }

    #[test]
    fn cylinder_averages() {
        let g = MapObservable::Holder { exponent: 1.0, center: 0.5 };
        assert!((g.mean() - 0.25).abs() < 1e-15);
        assert!((g.average(0.0, 0.5) - 0.25).abs() < 1e-15);
        let c = MapObservable::Cosine { amplitude: 1.0 };
        assert!(c.mean().abs() < 1e-15);
    }

    #[test]
    fn slope_one_is_rejected() {
        assert!(matches!(
            ExpandingModel::new(4, vec![2, 1], MapObservable::Constant(1.0)),
            Err(Error::Validation { .. })
        ));
    }
}
