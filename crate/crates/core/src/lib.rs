//! Discrete active inference with Bayesian structure learning.

pub mod empathy;
pub mod error;
pub mod genmodel;
pub mod inference;
pub mod planning;
pub mod prob;
pub mod sandbox;
pub mod structure;
pub mod trace;

pub use error::{Error, Result};
pub use inference::{BeliefState, DataBatch, FreeEnergyReport, InferenceConfig};
pub use genmodel::{GenerativeModel, HyperParams, StructureSpec};
pub use prob::{ConditionalTable, CountTable, DirichletCounts, ProbVector};
pub use structure::{ParticlePosterior, StructureConfig, StructureParticle};
pub use planning::{AgentConfig, EFEReport, Environment, Policy, ScheduleConfig};
pub use trace::{EpisodeTrace, StepRecord, TraceMetadata};
pub use empathy::{HarmBins, HarmEstimate, HarmPreference, OtherAgentHypothesis};
pub use sandbox::{run_scenario, Metrics, Scenario, ScenarioOutcome, WorldConfig};
