//! Triangular-array models and reproducible path sampling.

pub mod chain;
pub mod config;
pub mod expanding;
pub mod finite;
pub mod reference;
pub mod window;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::rng::replicate_rng;
use chain::Chain;
pub use expanding::{window_approximation, ExpandingModel, MapObservable};
use finite::FiniteArray;
pub use reference::build_slow_variance_model;
pub use window::local_window_array;

/// Model family of an [`ArrayModel`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    IidLattice,
    InhomMarkov,
    LocalWindow,
    SequentialExpanding,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::IidLattice => "iid_lattice",
            ModelKind::InhomMarkov => "inhom_markov",
            ModelKind::LocalWindow => "local_window",
            ModelKind::SequentialExpanding => "sequential_expanding",
        }
    }
}

/// Storage behind a model: an exact finite-state description or an
/// expanding-map family (Monte Carlo only).
#[derive(Clone, Debug)]
pub enum ModelBody {
    Finite(FiniteArray),
    Expanding(ExpandingModel),
}

/// One row of a triangular array `{ξ_{j,n}}`.
#[derive(Clone, Debug)]
pub struct ArrayModel {
    pub id: String,
    pub kind: ModelKind,
    pub body: ModelBody,
}

impl ArrayModel {
    pub fn from_finite(id: impl Into<String>, kind: ModelKind, array: FiniteArray) -> Self {
        ArrayModel { id: id.into(), kind, body: ModelBody::Finite(array) }
    }

    pub fn expanding(id: impl Into<String>, model: ExpandingModel) -> Self {
        ArrayModel { id: id.into(), kind: ModelKind::SequentialExpanding, body: ModelBody::Expanding(model) }
    }

    /// Row length `n`.
    pub fn n(&self) -> usize {
        match &self.body {
            ModelBody::Finite(a) => a.n(),
            ModelBody::Expanding(e) => e.n(),
        }
    }

    /// The exact finite-state description, or an unsupported-model error.
    pub fn finite(&self) -> Result<&FiniteArray> {
        match &self.body {
            ModelBody::Finite(a) => Ok(a),
            ModelBody::Expanding(_) => Err(Error::Unsupported(format!(
                "model '{}' of kind {} has no finite-state description",
                self.id,
                self.kind.name()
            ))),
        }
    }

    pub fn as_expanding(&self) -> Result<&ExpandingModel> {
        match &self.body {
            ModelBody::Expanding(e) => Ok(e),
            ModelBody::Finite(_) => {
                Err(Error::Unsupported(format!("model '{}' is not a sequential expanding system", self.id)))
            }
        }
    }

    /// Re-checks every model invariant.
    pub fn validate(&self) -> Result<()> {
        match &self.body {
            ModelBody::Finite(a) => a.validate(),
            ModelBody::Expanding(e) => e.validate(),
        }
    }
}

/// A sampled row `ξ_1..ξ_n` with the record needed to regenerate it.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplePath {
    pub model_id: String,
    pub seed: u64,
    pub replicate: u64,
    pub values: Vec<f64>,
}

/// Draws `ξ_1..ξ_n` (the first `n` entries of the row) from the model's law.
///
/// The stream is ChaCha8 keyed by `seed` with stream number `replicate`, so
/// replicates are independent and any replicate can be regenerated alone.
pub fn sample_path(model: &ArrayModel, n: usize, seed: u64, replicate: u64) -> Result<SamplePath> {
    if n == 0 || n > model.n() {
        return Err(Error::Precondition(format!("path length {n} outside 1..={}", model.n())));
    }
    let mut rng = replicate_rng(seed, replicate);
    let mut values = match &model.body {
        ModelBody::Finite(a) => a.observe(&sample_states(a.chain(), a.last_position(), &mut rng)),
        ModelBody::Expanding(e) => e.sample(&mut rng),
    };
    values.truncate(n);
    Ok(SamplePath { model_id: model.id.clone(), seed, replicate, values })
}

/// Chain positions `X_0..X_last` of one replicate.
pub fn sample_chain_path(array: &FiniteArray, seed: u64, replicate: u64) -> Vec<usize> {
    let mut rng = replicate_rng(seed, replicate);
    sample_states(array.chain(), array.last_position(), &mut rng)
}

fn draw(cdf: &[f64], u: f64) -> usize {
    cdf.iter().position(|&c| u < c).unwrap_or_else(|| {
        // rounding left the last cumulative value below u; take the last live state
        (1..cdf.len()).rev().find(|&i| cdf[i] > cdf[i - 1]).unwrap_or(0)
    })
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    p.iter()
        .map(|&v| {
            acc += v;
            acc
        })
        .collect()
}

pub(crate) fn sample_states(chain: &Chain, last: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let d = chain.states();
    let cdfs: Vec<Vec<Vec<f64>>> = chain
        .matrices()
        .iter()
        .map(|m| (0..d).map(|s| cumulative(m.row(s))).collect())
        .collect();
    let mut path = Vec::with_capacity(last + 1);
    let mut x = draw(&cumulative(chain.initial()), rng.random::<f64>());
    path.push(x);
    for p in 1..=last {
        let idx = chain.schedule()[p - 1] as usize;
        x = draw(&cdfs[idx][x], rng.random::<f64>());
        path.push(x);
    }
    path
}

/// Writes sampled paths as CSV `replicate, j, xi`.
pub fn write_paths_csv(paths: &[SamplePath], path: &std::path::Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["replicate", "j", "xi"])?;
    for p in paths {
        for (j, v) in p.values.iter().enumerate() {
            w.write_record([p.replicate.to_string(), (j + 1).to_string(), format!("{v:.17e}")])?;
        }
    }
    w.flush()?;
    Ok(())
}
