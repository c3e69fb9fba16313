//! JSON records for discovered or constructed codes and for CLI runs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::adjoint::objective;
use crate::ansatz::{BasisFamily, HamiltonianBasis, TermLabel};
use crate::error::{Error, Result};
use crate::lindblad::LindbladModel;
use crate::objective::LogicalPair;
use crate::optimizer::{pack_state, search_model, unpack_state, SearchResult};

pub const SCHEMA_VERSION: u32 = 1;

/// A code together with the Hamiltonian and rates it was evaluated under.
/// Rates and coefficients are in rad/μs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodeRecord {
    pub schema_version: u32,
    pub source: String,
    pub cutoff: usize,
    pub family: BasisFamily,
    pub labels: Vec<TermLabel>,
    pub alpha: Vec<f64>,
    pub kappa: f64,
    pub kappa_q: f64,
    pub t_final: f64,
    pub nsteps: usize,
    pub psi0: Vec<[f64; 2]>,
    pub psi1: Vec<[f64; 2]>,
    /// Plain F̄(t_final) under the stored model.
    pub fidelity: f64,
    pub seed: Option<u64>,
    #[serde(default)]
    pub fidelity_history: Vec<f64>,
}

fn record_error<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Record(msg.into()))
}

impl CodeRecord {
    pub fn from_search(r: &SearchResult) -> Self {
        CodeRecord {
            schema_version: SCHEMA_VERSION,
            source: "discover".into(),
            cutoff: r.basis.cutoff,
            family: r.basis.family,
            labels: r.basis.labels.clone(),
            alpha: r.alpha.clone(),
            kappa: r.config.kappa(),
            kappa_q: r.config.kappa_q(),
            t_final: r.config.t_final,
            nsteps: r.config.nsteps(),
            psi0: pack_state(&r.pair.psi0),
            psi1: pack_state(&r.pair.psi1),
            fidelity: r.fidelity,
            seed: Some(r.config.seed),
            fidelity_history: r.fidelity_history.clone(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: CodeRecord = serde_json::from_str(text)?;
        r.validate()?;
        Ok(r)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return record_error(format!("schema_version {} is not {SCHEMA_VERSION}", self.schema_version));
        }
        let dim = 2 * (self.cutoff + 1);
        if self.cutoff == 0 || self.cutoff > 200 {
            return record_error("cutoff out of range");
        }
        if self.psi0.len() != dim || self.psi1.len() != dim {
            return record_error(format!("logical states must have {dim} amplitudes"));
        }
        if self.alpha.len() != self.labels.len() {
            return record_error("alpha and labels differ in length");
        }
        let floats = self
            .alpha
            .iter()
            .chain(self.psi0.iter().flatten())
            .chain(self.psi1.iter().flatten())
            .chain([&self.kappa, &self.kappa_q, &self.t_final, &self.fidelity]);
        if floats.into_iter().any(|v| !v.is_finite()) {
            return record_error("non-finite value");
        }
        if self.kappa < 0.0 || self.kappa_q < 0.0 || self.t_final <= 0.0 || self.nsteps == 0 {
            return record_error("need non-negative rates, positive t_final and nsteps");
        }
        if self.nsteps > 10_000_000 {
            return record_error("nsteps above 1e7");
        }
        Ok(())
    }

    pub fn basis(&self) -> Result<HamiltonianBasis> {
        let b = HamiltonianBasis::build(self.family, self.cutoff)?;
        if b.labels != self.labels {
            return record_error("term labels do not match the rebuilt basis");
        }
        Ok(b)
    }

    pub fn pair(&self) -> Result<LogicalPair> {
        LogicalPair::new(unpack_state(&self.psi0), unpack_state(&self.psi1))
    }

    pub fn model(&self) -> Result<LindbladModel> {
        search_model(&self.basis()?, self.alpha.clone(), self.kappa, self.kappa_q)
    }

    /// F̄(t_final) recomputed from the stored model.
    pub fn reevaluate(&self) -> Result<f64> {
        objective(&self.model()?, &self.pair()?, self.t_final, self.nsteps, false)
    }
}

/// Provenance of one CLI invocation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub schema_version: u32,
    pub command: String,
    pub config: BTreeMap<String, serde_json::Value>,
    pub outputs: Vec<String>,
    pub timings: BTreeMap<String, f64>,
    pub seed: Option<u64>,
}

impl RunRecord {
    pub fn new(command: &str) -> Self {
        RunRecord {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            config: BTreeMap::new(),
            outputs: Vec::new(),
            timings: BTreeMap::new(),
            seed: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: RunRecord = serde_json::from_str(text)?;
        if r.schema_version != SCHEMA_VERSION {
            return record_error(format!("schema_version {} is not {SCHEMA_VERSION}", r.schema_version));
        }
        Ok(r)
    }
}
