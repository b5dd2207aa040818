//! State inference, parameter learning and free energy for a fixed structure,
//! plus exact enumeration oracles.

mod chain;
mod engine;
mod exact;
mod params;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genmodel::StructureSpec;
use crate::prob::ProbVector;

pub use engine::{
    expected_counts, fit, infer_states, infer_states_from, infer_states_point,
    point_free_energy, update_parameters, variational_free_energy, FitOutcome,
};
pub use exact::{
    exact_evidence_decomposition, exact_log_evidence, exact_log_evidence_within,
    exact_point_log_evidence,
    exact_state_posterior, EvidenceDecomposition, OracleBounds,
};

/// Observed history: one observation per modality per step, and the action
/// taken between consecutive steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataBatch {
    pub observations: Vec<Vec<usize>>,
    pub actions: Vec<usize>,
}

impl DataBatch {
    pub fn new(observations: Vec<Vec<usize>>, actions: Vec<usize>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::Empty("data batch has no timesteps".into()));
        }
        if actions.len() + 1 != observations.len() {
            return Err(Error::Shape(format!(
                "{} actions for {} timesteps; expected one fewer",
                actions.len(),
                observations.len()
            )));
        }
        Ok(DataBatch {
            observations,
            actions,
        })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// Check indices against a structure's cardinalities.
    pub fn check(&self, spec: &StructureSpec) -> Result<()> {
        if self.observations.is_empty() {
            return Err(Error::Empty("data batch has no timesteps".into()));
        }
        if self.actions.len() + 1 != self.observations.len() {
            return Err(Error::Shape("actions must number one fewer than steps".into()));
        }
        for (t, o) in self.observations.iter().enumerate() {
            if o.len() != spec.modality_count() {
                return Err(Error::Shape(format!(
                    "step {t} has {} observations, structure has {} modalities",
                    o.len(),
                    spec.modality_count()
                )));
            }
            if let Some(m) = (0..o.len()).find(|&m| o[m] >= spec.modality_cards[m]) {
                return Err(Error::Shape(format!(
                    "step {t} observation {} out of range for modality {m}",
                    o[m]
                )));
            }
        }
        if let Some(a) = self.actions.iter().find(|&&a| a >= spec.action_card) {
            return Err(Error::Shape(format!("action {a} out of range")));
        }
        Ok(())
    }

    /// The first `len` steps.
    pub fn prefix(&self, len: usize) -> DataBatch {
        let len = len.clamp(1, self.len());
        DataBatch {
            observations: self.observations[..len].to_vec(),
            actions: self.actions[..len - 1].to_vec(),
        }
    }

    /// Steps `start..end` as a batch of their own.
    pub fn window(&self, start: usize, end: usize) -> Result<DataBatch> {
        if start >= end || end > self.len() {
            return Err(Error::Empty(format!("window {start}..{end} is empty or out of range")));
        }
        DataBatch::new(
            self.observations[start..end].to_vec(),
            self.actions[start..end - 1].to_vec(),
        )
    }

    /// Append one step reached by `action`.
    pub fn push(&mut self, action: usize, observation: Vec<usize>) {
        if !self.observations.is_empty() {
            self.actions.push(action);
        }
        self.observations.push(observation);
    }
}

/// Approximate posterior over hidden-state trajectories: one Markov chain
/// per factor, independent across factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    /// `marginals[t][f]`.
    pub marginals: Vec<Vec<ProbVector>>,
    /// `pairwise[t][f]` is the joint of `(s_f at t, s_f at t+1)`, row-major.
    pub pairwise: Vec<Vec<Vec<f64>>>,
    pub converged: bool,
    pub iterations: usize,
    pub final_free_energy: f64,
}

impl BeliefState {
    /// Beliefs whose pairwise joints are the products of their marginals.
    pub fn from_marginals(marginals: Vec<Vec<ProbVector>>) -> Self {
        let pairwise = marginals
            .windows(2)
            .map(|w| {
                w[0].iter()
                    .zip(&w[1])
                    .map(|(p, q)| {
                        p.as_slice()
                            .iter()
                            .flat_map(|&x| q.as_slice().iter().map(move |&y| x * y))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        BeliefState {
            marginals,
            pairwise,
            converged: true,
            iterations: 0,
            final_free_energy: f64::NAN,
        }
    }

    pub fn steps(&self) -> usize {
        self.marginals.len()
    }

    /// Marginals at the last step.
    pub fn last(&self) -> &[ProbVector] {
        self.marginals.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// `total = complexity_states + complexity_params − accuracy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyReport {
    pub total: f64,
    pub accuracy: f64,
    pub complexity_states: f64,
    pub complexity_params: f64,
}

/// Stopping rule for coordinate-ascent sweeps and VB alternation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceConfig {
    pub tol: f64,
    pub max_iters: usize,
    /// Outer iterations alternating states and parameters in [`fit`].
    pub max_fit_iters: usize,
    pub fit_tol: f64,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            tol: 1e-8,
            max_iters: 256,
            max_fit_iters: 256,
            fit_tol: 1e-6,
        }
    }
}
