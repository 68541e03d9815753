//! Model files.
//!
//! ```toml
//! id = "two-state"
//! kind = "inhom_markov"        # iid_lattice | inhom_markov | local_window | sequential_expanding | reference
//! n = 1024
//! step = "1"
//!
//! [chain]
//! initial = ["0.5", "0.5"]
//! matrices = [[["0.9", "0.1"], ["0.1", "0.9"]]]
//! schedule = [0]               # cycled over the transitions
//!
//! [observable]
//! values = ["0", "1"]          # or `table = [[...], ...]`, one row per index, cycled
//! ```
//!
//! Numbers may be written as TOML numbers or as decimal strings; strings are
//! preferred since they round-trip without locale or formatting drift.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::chain::{Chain, Stochastic};
use super::expanding::{ExpandingModel, MapObservable};
use super::reference::{iid_lattice, inhom_markov, reference_model};
use super::window::{additive_window_array, local_window_array};
use super::ArrayModel;
use crate::error::{Error, Result};

/// A number written either as a TOML number or as a decimal string.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum Num {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Num {
    pub fn value(&self) -> Result<f64> {
        match self {
            Num::Int(v) => Ok(*v as f64),
            Num::Float(v) => Ok(*v),
            Num::Text(s) => {
                s.trim().parse::<f64>().map_err(|_| Error::Config(format!("'{s}' is not a decimal number")))
            }
        }
    }
}

fn values(v: &[Num]) -> Result<Vec<f64>> {
    v.iter().map(Num::value).collect()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub initial: Vec<Num>,
    pub matrices: Vec<Vec<Vec<Num>>>,
    #[serde(default)]
    pub schedule: Option<Vec<u32>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    #[serde(default)]
    pub values: Option<Vec<Num>>,
    #[serde(default)]
    pub table: Option<Vec<Vec<Num>>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowSpec {
    pub half_width: usize,
    /// `"sum"` (additive, any width) or `"product"` (enumerated tuples).
    #[serde(default = "default_functional")]
    pub functional: String,
}

fn default_functional() -> String {
    "sum".into()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpandingSpec {
    pub slopes: Vec<u64>,
    /// `"cosine"`, `"holder"` or `"constant"`.
    pub observable: String,
    #[serde(default)]
    pub amplitude: Option<Num>,
    #[serde(default)]
    pub exponent: Option<Num>,
    #[serde(default)]
    pub center: Option<Num>,
    #[serde(default)]
    pub constant: Option<Num>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    pub name: String,
    #[serde(default)]
    pub gamma: Option<Num>,
}

/// Parsed model file.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub id: Option<String>,
    pub kind: String,
    pub n: usize,
    #[serde(default)]
    pub step: Option<Num>,
    #[serde(default)]
    pub chain: Option<ChainSpec>,
    #[serde(default)]
    pub observable: Option<ObservableSpec>,
    #[serde(default)]
    pub window: Option<WindowSpec>,
    #[serde(default)]
    pub expanding: Option<ExpandingSpec>,
    #[serde(default)]
    pub reference: Option<ReferenceSpec>,
    /// Probabilities of an iid lattice law.
    #[serde(default)]
    pub probabilities: Option<Vec<Num>>,
}

impl ModelSpec {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read model file {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Builds the model for row length `n` (overriding the file's `n`).
    pub fn build_with_n(&self, n: usize) -> Result<ArrayModel> {
        let mut spec = self.clone();
        spec.n = n;
        spec.build()
    }

    pub fn build(&self) -> Result<ArrayModel> {
        let n = self.n;
        let id = self.id.clone().unwrap_or_else(|| self.kind.clone());
        let step = match &self.step {
            Some(s) => s.value()?,
            None => 1.0,
        };
        let missing = |what: &str| Error::Config(format!("kind '{}' requires a [{what}] section", self.kind));
        let mut model = match self.kind.as_str() {
            "reference" => {
                let r = self.reference.as_ref().ok_or_else(|| missing("reference"))?;
                let gamma = r.gamma.as_ref().map(Num::value).transpose()?.unwrap_or(0.5);
                reference_model(&r.name, n, gamma)?
            }
            "iid_lattice" => {
                let obs = self.observable.as_ref().and_then(|o| o.values.as_ref()).ok_or_else(|| missing("observable"))?;
                let probs = self
                    .probabilities
                    .as_ref()
                    .ok_or_else(|| Error::Config("iid_lattice requires `probabilities`".into()))?;
                iid_lattice(&id, n, &values(obs)?, &values(probs)?, step)?
            }
            "inhom_markov" | "local_window" => {
                let chain_spec = self.chain.as_ref().ok_or_else(|| missing("chain"))?;
                let obs = self.observable.as_ref().ok_or_else(|| missing("observable"))?;
                let table = observable_table(obs)?;
                if self.kind == "inhom_markov" {
                    let chain = build_chain(chain_spec, n)?;
                    check_width(&table, chain.states())?;
                    inhom_markov(&id, chain, n, step, |j, s| table[(j - 1) % table.len()][s])?
                } else {
                    let w = self.window.as_ref().ok_or_else(|| missing("window"))?;
                    let m = w.half_width;
                    let chain = build_chain(chain_spec, n + 2 * m)?;
                    check_width(&table, chain.states())?;
                    match w.functional.as_str() {
                        "sum" => additive_window_array(&id, chain, n, m, step, |j, _| {
                            Some(table[(j - 1) % table.len()].clone())
                        })?,
                        "product" => {
                            let base = inhom_markov(&id, chain, n + 2 * m, step, |_, _| 0.0)?;
                            local_window_array(&base, m, step, |j, tuple| {
                                tuple.iter().map(|&s| table[(j - 1) % table.len()][s]).product()
                            })?
                        }
                        other => return Err(Error::Config(format!("unknown window functional '{other}'"))),
                    }
                }
            }
            "sequential_expanding" => {
                let e = self.expanding.as_ref().ok_or_else(|| missing("expanding"))?;
                let get = |v: &Option<Num>, default: f64| v.as_ref().map(Num::value).transpose().map(|x| x.unwrap_or(default));
                let observable = match e.observable.as_str() {
                    "cosine" => MapObservable::Cosine { amplitude: get(&e.amplitude, 1.0)? },
                    "holder" => MapObservable::Holder { exponent: get(&e.exponent, 0.5)?, center: get(&e.center, 0.5)? },
                    "constant" => MapObservable::Constant(get(&e.constant, 1.0)?),
                    other => return Err(Error::Config(format!("unknown map observable '{other}'"))),
                };
                ArrayModel::expanding(&id, ExpandingModel::new(n, e.slopes.clone(), observable)?)
            }
            other => return Err(Error::Config(format!("unknown model kind '{other}'"))),
        };
        if let Some(id) = &self.id {
            model.id = id.clone();
        }
        Ok(model)
    }
}

fn observable_table(obs: &ObservableSpec) -> Result<Vec<Vec<f64>>> {
    match (&obs.values, &obs.table) {
        (Some(v), None) => Ok(vec![values(v)?]),
        (None, Some(t)) if !t.is_empty() => t.iter().map(|r| values(r)).collect(),
        _ => Err(Error::Config("observable needs exactly one of `values` or a non-empty `table`".into())),
    }
}

fn check_width(table: &[Vec<f64>], states: usize) -> Result<()> {
    match table.iter().position(|r| r.len() != states) {
        Some(j) => Err(Error::validation(
            format!("observable row {}", j + 1),
            format!("expected {states} values, found {}", table[j].len()),
        )),
        None => Ok(()),
    }
}

fn build_chain(spec: &ChainSpec, steps: usize) -> Result<Chain> {
    let initial = values(&spec.initial)?;
    let mats = spec
        .matrices
        .iter()
        .map(|m| {
            let rows: Vec<Vec<f64>> = m.iter().map(|r| values(r)).collect::<Result<_>>()?;
            Stochastic::new(&rows)
        })
        .collect::<Result<Vec<_>>>()?;
    if mats.is_empty() {
        return Err(Error::Config("chain needs at least one matrix".into()));
    }
    let pattern: Vec<u32> = spec.schedule.clone().unwrap_or_else(|| (0..mats.len() as u32).collect());
    if pattern.is_empty() {
        return Err(Error::Config("empty transition schedule".into()));
    }
    let schedule = (0..steps).map(|p| pattern[p % pattern.len()]).collect();
    Chain::new(initial, mats, schedule)
}

/// Loads and builds a model file.
pub fn load_model(path: &Path) -> Result<ArrayModel> {
    ModelSpec::load(path)?.build()
}
