//! The perception-action loop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{infer_states_from, update_parameters, variational_free_energy, BeliefState, DataBatch};
use crate::planning::efe::{evaluate_policies_point, JointBelief, DEFAULT_MAX_POLICIES};
use crate::planning::{select_policy, ScheduleConfig};
use crate::structure::{reduce_posterior, search_step, ParticlePosterior, StructureConfig};
use crate::trace::{finite, EpisodeTrace, StepRecord, TraceMetadata};

/// The world as the agent sees it: observations in, actions out.
pub trait Environment {
    fn observation_cards(&self) -> Vec<usize>;
    fn action_card(&self) -> usize;
    /// Start an episode and return the first observation.
    fn reset(&mut self, rng: &mut dyn rand::RngCore) -> Vec<usize>;
    /// Apply `action` and return the next observation.
    fn step(&mut self, action: usize, rng: &mut dyn rand::RngCore) -> Result<Vec<usize>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub schedule: ScheduleConfig,
    /// Preference log-probabilities per modality.
    pub preferences: Vec<Vec<f64>>,
    pub structure: StructureConfig,
    /// Particles below this weight skip perception until rescored.
    pub weight_threshold: f64,
    pub max_policies: usize,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            schedule: ScheduleConfig::default(),
            preferences: Vec::new(),
            structure: StructureConfig::default(),
            weight_threshold: 1e-4,
            max_policies: DEFAULT_MAX_POLICIES,
        }
    }
}

fn check_env(env: &dyn Environment, posterior: &ParticlePosterior, cfg: &AgentConfig) -> Result<()> {
    let cards = env.observation_cards();
    for p in &posterior.particles {
        if p.spec.modality_cards != cards || p.spec.action_card != env.action_card() {
            return Err(Error::Config(format!(
                "structure {} does not match the environment ({cards:?} observations, {} actions)",
                p.spec.describe(),
                env.action_card()
            )));
        }
    }
    if cfg.preferences.len() != cards.len() || cfg.preferences.iter().zip(&cards).any(|(c, &k)| c.len() != k) {
        return Err(Error::Config("preferences do not match the observation modalities".into()));
    }
    cfg.schedule.validate()
}

/// Run `steps` perception-action cycles.
///
/// Each step the agent receives an observation, infers states on every
/// particle carrying weight, learns parameters and structure on their
/// schedules, reweights, then plans with the weight-maximal particle and
/// acts. Particles skipped for low weight get infinite free energy until a
/// structure step rescores them.
pub fn run_agent<R: Rng>(
    env: &mut dyn Environment,
    posterior: ParticlePosterior,
    cfg: &AgentConfig,
    metadata: TraceMetadata,
    rng: &mut R,
    steps: usize,
) -> Result<(EpisodeTrace, ParticlePosterior)> {
    run_agent_observed(env, posterior, cfg, metadata, rng, steps, &mut |_, _| {})
}

/// [`run_agent`] with a callback after every step, given the step's record
/// and the posterior the agent planned with.
pub fn run_agent_observed<R: Rng>(
    env: &mut dyn Environment,
    posterior: ParticlePosterior,
    cfg: &AgentConfig,
    metadata: TraceMetadata,
    rng: &mut R,
    steps: usize,
    observer: &mut dyn FnMut(&StepRecord, &ParticlePosterior),
) -> Result<(EpisodeTrace, ParticlePosterior)> {
    check_env(env, &posterior, cfg)?;
    let mut trace = EpisodeTrace::new(metadata);
    if steps == 0 {
        return Ok((trace, posterior));
    }
    let mut posterior = posterior;
    let mut beliefs: Vec<Option<BeliefState>> = vec![None; posterior.particles.len()];
    let mut history: Option<DataBatch> = None;
    let mut observation = env.reset(rng);
    let infer_cfg = cfg.structure.inference;

    for step in 0..steps {
        match history.as_mut() {
            Some(h) => h.push(trace.records.last().map_or(0, |r| r.action), observation.clone()),
            None => history = Some(DataBatch::new(vec![observation.clone()], vec![])?),
        }
        let data = history.as_ref().expect("history initialized above");
        let done = step + 1;

        for (i, particle) in posterior.particles.iter_mut().enumerate() {
            if posterior.weights[i] < cfg.weight_threshold {
                particle.free_energy = f64::INFINITY;
                beliefs[i] = None;
                continue;
            }
            let b = match infer_states_from(&particle.hyper, data, &infer_cfg, beliefs[i].as_ref()) {
                Ok(b) => b,
                Err(Error::ImpossibleObservation { .. }) => {
                    particle.free_energy = f64::INFINITY;
                    beliefs[i] = None;
                    continue;
                }
                Err(e) => return Err(e),
            };
            particle.free_energy = variational_free_energy(&b, &particle.prior, data)?.total;
            if cfg.schedule.param_every.fires(done) {
                particle.hyper = update_parameters(&particle.prior, &b, data, 1.0)?;
            }
            beliefs[i] = Some(b);
        }
        posterior = posterior.reweight()?;
        posterior.data_seen = data.len();

        if cfg.schedule.structure_every.fires(done) {
            let keys: Vec<_> = posterior.particles.iter().map(|p| p.key()).collect();
            posterior = search_step(&posterior, data, rng, &cfg.structure)?;
            beliefs = posterior
                .particles
                .iter()
                .map(|p| {
                    keys.iter()
                        .position(|k| *k == p.key())
                        .and_then(|j| beliefs.get(j).cloned().flatten())
                })
                .collect();
        }
        if cfg.schedule.reduce_every.fires(done) {
            posterior = reduce_posterior(&posterior, &cfg.structure)?;
        }

        let map = posterior.map_index();
        let particle = &posterior.particles[map];
        let b = match &beliefs[map] {
            Some(b) => b.clone(),
            None => infer_states_from(&particle.hyper, data, &infer_cfg, None)?,
        };
        let model = particle.hyper.expected_model()?;
        let start = JointBelief::from_marginals(b.last())?;
        let reports = evaluate_policies_point(
            &model,
            &start,
            &cfg.preferences,
            cfg.schedule.horizon,
            cfg.max_policies,
        )?;
        let chosen = select_policy(&reports, cfg.schedule.action_temperature, rng)?;
        let action = reports[chosen].0.first();

        trace.records.push(StepRecord {
            step,
            observation: observation.clone(),
            action,
            free_energies: posterior.particles.iter().map(|p| finite(p.free_energy)).collect(),
            weights: posterior.weights.as_slice().to_vec(),
            efe: reports[chosen].1,
            harm: None,
        });
        observer(trace.records.last().expect("pushed above"), &posterior);
        observation = env.step(action, rng)?;
    }
    Ok((trace, posterior))
}
