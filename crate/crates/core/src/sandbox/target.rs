//! Scripted target agents living inside the world.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genmodel::GenerativeModel;
use crate::planning::{evaluate_policies_point, select_policy, JointBelief, DEFAULT_MAX_POLICIES};

/// How a target chooses its actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetScript {
    /// The same action every step.
    Constant { action: usize },
    /// Expected-free-energy planning with the target's own model.
    Efe { horizon: usize, temperature: f64 },
}

/// A target agent: its own generative model and preferences, a filtered
/// belief over its own states, and the surprise it has met so far.
#[derive(Debug, Clone)]
pub struct TargetAgent {
    pub model: GenerativeModel,
    pub prefs: Vec<Vec<f64>>,
    pub script: TargetScript,
    belief: Option<JointBelief>,
    last_action: usize,
    /// `−ln P(o_t | o_<t, a_<t)` under the target's model, per step.
    pub harms: Vec<f64>,
}

impl TargetAgent {
    pub fn new(model: GenerativeModel, prefs: Vec<Vec<f64>>, script: TargetScript) -> Result<Self> {
        if prefs.len() != model.spec.modality_count()
            || prefs.iter().zip(&model.spec.modality_cards).any(|(c, &k)| c.len() != k)
        {
            return Err(Error::Config("target preferences do not match its modalities".into()));
        }
        match script {
            TargetScript::Constant { action } if action >= model.spec.action_card => {
                return Err(Error::Config(format!("scripted action {action} out of range")));
            }
            TargetScript::Efe { horizon, temperature } if horizon == 0 || !(temperature >= 0.0) => {
                return Err(Error::Config("target planning needs horizon ≥ 1 and temperature ≥ 0".into()));
            }
            _ => {}
        }
        Ok(TargetAgent {
            model,
            prefs,
            script,
            belief: None,
            last_action: 0,
            harms: Vec::new(),
        })
    }

    /// Take in one observation; returns the surprise it carried. An
    /// observation the model rules out costs infinite surprise and leaves
    /// the belief at its prediction.
    pub fn observe(&mut self, observation: &[usize]) -> Result<f64> {
        let predicted = match &self.belief {
            None => JointBelief::initial(&self.model)?,
            Some(b) => b.propagate(&self.model, self.last_action),
        };
        let (belief, harm) = match predicted.condition(&self.model, observation) {
            Ok((b, log_p)) => (b, -log_p),
            Err(Error::ImpossibleObservation { .. }) => (predicted, f64::INFINITY),
            Err(e) => return Err(e),
        };
        self.belief = Some(belief);
        self.harms.push(harm);
        Ok(harm)
    }

    pub fn belief(&self) -> Option<&JointBelief> {
        self.belief.as_ref()
    }
}

/// The target's next action, following its script. Before its first
/// observation an EFE target plans from its initial state distribution.
pub fn scripted_target_step<R: Rng>(target: &mut TargetAgent, rng: &mut R) -> Result<usize> {
    let action = match target.script {
        TargetScript::Constant { action } => action,
        TargetScript::Efe { horizon, temperature } => {
            let start = match &target.belief {
                Some(b) => b.clone(),
                None => JointBelief::initial(&target.model)?,
            };
            let reports = evaluate_policies_point(&target.model, &start, &target.prefs, horizon, DEFAULT_MAX_POLICIES)?;
            reports[select_policy(&reports, temperature, rng)?].0.first()
        }
    };
    target.last_action = action;
    Ok(action)
}
