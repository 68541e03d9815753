//! Python bindings for `varlin`.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use varlin::diagnostics;
use varlin::generators::config::ModelSpec;
use varlin::generators::reference::reference_model;
use varlin::generators::{sample_chain_path, ArrayModel};
use varlin::linearize::{self, BlockPartition, GrowthConstants};
use varlin::martingale::{self, CoboundaryDecomp};
use varlin::mixing::{self, MixingProfile, Provenance};
use varlin::oracle::{exact_sum_pmf, LatticePmf};
use varlin::VarianceProfile;

create_exception!(varlin_py, VarlinError, PyException, "Error raised by varlin; `args[1]` is the CLI exit code.");

fn py_err(e: varlin::Error) -> PyErr {
    VarlinError::new_err((e.to_string(), e.exit_code()))
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for varlin::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

/// A finite triangular-array row.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: ArrayModel,
}

#[pymethods]
impl PyModel {
    /// Reference model by name: iid_sign, elliptic, slow_variance, local_window, memory.
    #[staticmethod]
    #[pyo3(signature = (name, n, gamma = 0.5))]
    fn reference(name: &str, n: usize, gamma: f64) -> PyResult<Self> {
        Ok(PyModel { inner: reference_model(name, n, gamma).py()? })
    }

    /// Model file (TOML); `n` overrides the row length when given.
    #[staticmethod]
    #[pyo3(signature = (path, n = None))]
    fn from_file(path: PathBuf, n: Option<usize>) -> PyResult<Self> {
        let spec = ModelSpec::load(&path).py()?;
        let inner = match n {
            Some(n) => spec.build_with_n(n),
            None => spec.build(),
        }
        .py()?;
        Ok(PyModel { inner })
    }

    #[getter]
    fn id(&self) -> String {
        self.inner.id.clone()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    /// `[Var(S_0), …, Var(S_n)]`.
    fn variances(&self) -> PyResult<Vec<f64>> {
        Ok(VarianceProfile::compute(&self.inner).py()?.values)
    }

    /// Exact law of `S_n` as `(atoms, weights)`.
    fn sum_pmf(&self) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let pmf = exact_sum_pmf(&self.inner, 1, self.inner.n()).py()?;
        Ok(pmf.atoms().unzip())
    }

    /// `φ` bound from Dobrushin coefficients.
    fn mixing_profile(&self) -> PyResult<Profile> {
        Ok(Profile { inner: mixing::dobrushin_phi_profile(&self.inner).py()? })
    }

    /// One chain path `X_0..X_{n+2m}` and the row values `ξ_1..ξ_n`.
    fn sample(&self, seed: u64, replicate: u64) -> PyResult<(Vec<usize>, Vec<f64>)> {
        let arr = self.inner.finite().py()?;
        let path = sample_chain_path(arr, seed, replicate);
        let xi = arr.observe(&path);
        Ok((path, xi))
    }

    fn __repr__(&self) -> String {
        format!("Model(id={:?}, n={})", self.inner.id, self.inner.n())
    }
}

/// α, ρ and φ mixing coefficients by lag.
#[pyclass(frozen)]
struct Profile {
    inner: MixingProfile,
}

#[pymethods]
impl Profile {
    #[staticmethod]
    fn from_phi(phi: Vec<f64>) -> Self {
        Profile { inner: MixingProfile::from_phi(phi, Provenance::Declared) }
    }

    #[staticmethod]
    fn from_rho(rho: Vec<f64>) -> Self {
        Profile { inner: MixingProfile::from_rho(rho, Provenance::Declared) }
    }

    #[staticmethod]
    fn read_csv(path: PathBuf) -> PyResult<Self> {
        Ok(Profile { inner: MixingProfile::read_csv(&path).py()? })
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write_csv(&path).py()
    }

    #[getter]
    fn alpha(&self) -> Option<Vec<f64>> {
        self.inner.alpha.as_ref().map(|s| s.values.clone())
    }

    #[getter]
    fn rho(&self) -> Option<Vec<f64>> {
        self.inner.rho.as_ref().map(|s| s.values.clone())
    }

    #[getter]
    fn phi(&self) -> Option<Vec<f64>> {
        self.inner.phi.as_ref().map(|s| s.values.clone())
    }

    /// Violated inequalities as `(lag, name, lhs, rhs)`.
    fn violations(&self) -> Vec<(usize, String, f64, f64)> {
        mixing::consistency_check(&self.inner)
            .into_iter()
            .map(|v| (v.lag, v.inequality.to_string(), v.lhs, v.rhs))
            .collect()
    }
}

/// Growth constants of one row.
#[pyclass(frozen)]
struct Constants {
    inner: GrowthConstants,
}

#[pymethods]
impl Constants {
    #[getter]
    fn k_n(&self) -> f64 {
        self.inner.k_n
    }
    #[getter]
    fn r_n(&self) -> usize {
        self.inner.r_n
    }
    #[getter]
    fn c_n(&self) -> f64 {
        self.inner.c_n
    }
    #[getter]
    fn d_n(&self) -> f64 {
        self.inner.d_n
    }
    #[getter]
    fn q_n(&self) -> f64 {
        self.inner.q_n
    }
    #[getter]
    fn a_n(&self) -> f64 {
        self.inner.a_n()
    }
    #[getter]
    fn sigma_n(&self) -> f64 {
        self.inner.sigma_n
    }
    #[getter]
    fn beta_n(&self) -> f64 {
        self.inner.beta_n
    }
    #[getter]
    fn valid(&self) -> bool {
        self.inner.is_valid()
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!("Constants(K={}, r={}, C={}, D={}, Q={}, sigma={})", c.k_n, c.r_n, c.c_n, c.d_n, c.q_n, c.sigma_n)
    }
}

/// Growth constants with `β_n = 1` from the exact oracle.
#[pyfunction]
#[pyo3(signature = (model, profile, p0 = 4.0, eps0 = 1.0))]
fn growth_constants(model: &PyModel, profile: &Profile, p0: f64, eps0: f64) -> PyResult<Constants> {
    let arr = model.inner.finite().py()?;
    Ok(Constants { inner: linearize::oracle_growth_constants(arr, &profile.inner, p0, eps0).py()? })
}

/// Block partition of a row.
#[pyclass(frozen)]
struct Partition {
    inner: BlockPartition,
}

#[pymethods]
impl Partition {
    #[getter]
    fn k_n(&self) -> usize {
        self.inner.k_n()
    }

    /// `(a, b, variance)` per block.
    #[getter]
    fn blocks(&self) -> Vec<(usize, usize, f64)> {
        self.inner.blocks.iter().map(|b| (b.a, b.b, b.variance.value)).collect()
    }

    #[getter]
    fn cores(&self) -> Vec<(usize, usize)> {
        self.inner.cores()
    }

    #[getter]
    fn q_n(&self) -> f64 {
        self.inner.q_n
    }

    #[getter]
    fn a_n(&self) -> f64 {
        self.inner.a_n
    }
}

#[pyfunction]
fn partition_blocks(model: &PyModel, constants: &Constants) -> PyResult<Partition> {
    let arr = model.inner.finite().py()?;
    Ok(Partition { inner: linearize::partition_blocks(arr, &constants.inner).py()? })
}

/// Certification checks as `(id, lhs, rhs, pass)`.
#[pyfunction]
fn certify(model: &PyModel, partition: &Partition) -> PyResult<Vec<(String, f64, f64, bool)>> {
    let arr = model.inner.finite().py()?;
    Ok(linearize::verify_partition(&partition.inner, arr)
        .checks
        .into_iter()
        .map(|c| (c.id, c.lhs, c.rhs, c.pass))
        .collect())
}

/// Martingale-coboundary decomposition along a partition.
#[pyclass(frozen)]
struct Decomposition {
    inner: CoboundaryDecomp,
}

#[pymethods]
impl Decomposition {
    #[getter]
    fn martingale_residual(&self) -> f64 {
        self.inner.martingale_residual
    }

    /// `E⟨M_n⟩_1`.
    #[getter]
    fn expected_qv(&self) -> f64 {
        self.inner.expected_qv()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma
    }

    /// Block martingale differences on one sampled path, and the telescoping residual.
    fn differences(&self, model: &PyModel, seed: u64, replicate: u64) -> PyResult<(Vec<f64>, f64)> {
        let arr = model.inner.finite().py()?;
        let e = self.inner.evaluate(arr, &sample_chain_path(arr, seed, replicate));
        Ok((e.block_d, e.telescoping_residual))
    }
}

#[pyfunction]
#[pyo3(signature = (model, partition, p0 = 4.0))]
fn decompose(model: &PyModel, partition: &Partition, p0: f64) -> PyResult<Decomposition> {
    Ok(Decomposition { inner: martingale::martingale_differences(&model.inner, &partition.inner, p0).py()? })
}

fn law(model: &PyModel) -> PyResult<(LatticePmf, f64)> {
    let sigma = VarianceProfile::compute(&model.inner).py()?.sigma();
    Ok((exact_sum_pmf(&model.inner, 1, model.inner.n()).py()?, sigma))
}

/// Exact Kolmogorov distance of `S_n/σ_n` to N(0, 1).
#[pyfunction]
fn kolmogorov_distance(model: &PyModel) -> PyResult<f64> {
    let (pmf, sigma) = law(model)?;
    Ok(diagnostics::kolmogorov_to_normal(&pmf, sigma).py()?.d_k)
}

/// `|E S^p − σ^p (p−1)!!| / σ^{p−1}`.
#[pyfunction]
#[pyo3(signature = (model, p = 4))]
fn moment_gap(model: &PyModel, p: u32) -> PyResult<f64> {
    let (pmf, sigma) = law(model)?;
    diagnostics::moment_gap(&pmf, sigma, p).py()
}

/// `a^{-2} ln P(S ≥ xσa)` on `xs` (NaN where the tail underflows).
#[pyfunction]
fn mdp_curve(model: &PyModel, a: f64, xs: Vec<f64>) -> PyResult<Vec<f64>> {
    let (pmf, sigma) = law(model)?;
    Ok(diagnostics::mdp_curve(&pmf, sigma, a, &xs).py()?.points.iter().map(|p| p.value).collect())
}

/// Log-log slope of `value` against `σ` with a `log σ` correction; `(slope, ci_low, ci_high)`.
#[pyfunction]
#[pyo3(signature = (sigmas, values, power = 0.0))]
fn rate_fit(sigmas: Vec<f64>, values: Vec<f64>, power: f64) -> PyResult<(f64, f64, f64)> {
    let rows = sigmas
        .iter()
        .zip(&values)
        .enumerate()
        .map(|(i, (&sigma, &value))| diagnostics::RateRow { n: i + 1, sigma, value })
        .collect();
    let f = diagnostics::rate_fit(&diagnostics::RateSeries::new("py", "value", rows).py()?, power).py()?;
    Ok((f.slope, f.ci_low, f.ci_high))
}

#[pyfunction]
fn frak_q(l: f64, sigma: f64, p0: f64) -> f64 {
    martingale::frak_q(l, sigma, p0)
}

#[pyfunction]
fn w_n(l: f64, sigma: f64, p0: f64, r: f64) -> f64 {
    martingale::w_n(l, sigma, p0, r)
}

/// Runs the command line harness with `args` (without the program name); returns the exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("varlin".to_string()).chain(args).collect();
    py.detach(|| varlin::cli::run(argv))
}

#[pymodule]
fn varlin_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("VarlinError", m.py().get_type::<VarlinError>())?;
    m.add_class::<PyModel>()?;
    m.add_class::<Profile>()?;
    m.add_class::<Constants>()?;
    m.add_class::<Partition>()?;
    m.add_class::<Decomposition>()?;
    m.add_function(wrap_pyfunction!(growth_constants, m)?)?;
    m.add_function(wrap_pyfunction!(partition_blocks, m)?)?;
    m.add_function(wrap_pyfunction!(certify, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(kolmogorov_distance, m)?)?;
    m.add_function(wrap_pyfunction!(moment_gap, m)?)?;
    m.add_function(wrap_pyfunction!(mdp_curve, m)?)?;
    m.add_function(wrap_pyfunction!(rate_fit, m)?)?;
    m.add_function(wrap_pyfunction!(frak_q, m)?)?;
    m.add_function(wrap_pyfunction!(w_n, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
