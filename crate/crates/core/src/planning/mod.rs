//! Expected free energy, action selection and the perception-action loop.

mod agent;
mod efe;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{argmin, sample_index, softmax, TEMPERATURE_FLOOR};

pub use agent::{run_agent, run_agent_observed, AgentConfig, Environment};
pub use efe::{
    enumerate_policies, evaluate_policies, evaluate_policies_point, expected_free_energy,
    expected_free_energy_point, EFEReport, JointBelief, Policy, DEFAULT_MAX_POLICIES, MAX_JOINT_STATES,
};


/// Index into `reports` of the selected policy: a draw from
/// `softmax(−total / temperature)`, or the lowest-index argmin at or below
/// the temperature floor.
pub fn select_policy<R: Rng + ?Sized>(
    reports: &[(Policy, EFEReport)],
    temperature: f64,
    rng: &mut R,
) -> Result<usize> {
    if reports.is_empty() {
        return Err(Error::Empty("no policies to select from".into()));
    }
    let totals: Vec<f64> = reports.iter().map(|(_, r)| r.total).collect();
    if temperature <= TEMPERATURE_FLOOR {
        return Ok(argmin(&totals));
    }
    let logits: Vec<f64> = totals.iter().map(|g| -g).collect();
    let p = softmax(&logits, temperature)?;
    Ok(sample_index(p.as_slice(), rng))
}

/// First action of the policy chosen by [`select_policy`].
pub fn select_action<R: Rng + ?Sized>(
    reports: &[(Policy, EFEReport)],
    temperature: f64,
    rng: &mut R,
) -> Result<usize> {
    let i = select_policy(reports, temperature, rng)?;
    Ok(reports[i].0.first())
}

/// How often a schedule event fires: every `n` steps, or never.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "PeriodRepr", into = "PeriodRepr")]
pub enum Every {
    Steps(usize),
    Never,
}

/// Sentinel for events that must not fire.
pub const NEVER: Every = Every::Never;

impl Every {
    /// Whether the event fires after `step` completed steps (1-based).
    pub fn fires(self, step: usize) -> bool {
        match self {
            Every::Steps(n) => n > 0 && step > 0 && step % n == 0,
            Every::Never => false,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PeriodRepr {
    Steps(u64),
    Word(String),
}

impl TryFrom<PeriodRepr> for Every {
    type Error = String;

    fn try_from(r: PeriodRepr) -> std::result::Result<Self, String> {
        match r {
            PeriodRepr::Steps(0) => Err("period must be positive or \"never\"".into()),
            PeriodRepr::Steps(n) => usize::try_from(n).map(Every::Steps).map_err(|e| e.to_string()),
            PeriodRepr::Word(w) if w == "never" => Ok(Every::Never),
            PeriodRepr::Word(w) => Err(format!("expected a positive integer or \"never\", found \"{w}\"")),
        }
    }
}

impl From<Every> for PeriodRepr {
    fn from(e: Every) -> Self {
        match e {
            Every::Steps(n) => PeriodRepr::Steps(n as u64),
            Every::Never => PeriodRepr::Word("never".into()),
        }
    }
}

/// Timescales of the agent loop. States are inferred on every step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub param_every: Every,
    pub structure_every: Every,
    pub reduce_every: Every,
    pub horizon: usize,
    pub action_temperature: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            param_every: Every::Steps(1),
            structure_every: NEVER,
            reduce_every: NEVER,
            horizon: 1,
            action_temperature: 1.0,
        }
    }
}

impl ScheduleConfig {
    pub fn validate(&self) -> Result<()> {
        if matches!(self.param_every, Every::Steps(0))
            || matches!(self.structure_every, Every::Steps(0))
            || matches!(self.reduce_every, Every::Steps(0))
        {
            return Err(Error::Config("schedule periods must be positive".into()));
        }
        if !(self.param_every <= self.structure_every && self.structure_every <= self.reduce_every) {
            return Err(Error::Config(
                "schedule needs param_every <= structure_every <= reduce_every".into(),
            ));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if !(self.action_temperature > 0.0) || !self.action_temperature.is_finite() {
            return Err(Error::Config("action_temperature must be positive".into()));
        }
        Ok(())
    }
}
