//! Worlds, scripted targets, the scenario library and the experiment
//! harness.

mod data;
mod target;
mod worlds;

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::empathy::{
    evaluate_first_law_policies, learn_auxiliary_preferences, AuxStep, HarmBins, HarmModel, HarmPreference,
    DEFAULT_HARM_BINS,
};
use crate::error::{Error, Result};
use crate::genmodel::{GenerativeModel, HyperParams, StructureSpec};
use crate::planning::{
    run_agent_observed, select_policy, AgentConfig, EFEReport, Environment, JointBelief, ScheduleConfig,
    DEFAULT_MAX_POLICIES,
};
use crate::prob::ProbVector;
use crate::structure::{ParticlePosterior, StructureConfig, StructureParticle};
use crate::trace::{finite, EpisodeTrace, HarmRecord, StepRecord, TraceMetadata};

pub use data::{deserialize_data, serialize_data, DataFile, DATA_FORMAT};
pub use target::{scripted_target_step, TargetAgent, TargetScript};
pub use worlds::{
    bandit, coupled_chains, tmaze, trap_world, two_chain_spec, two_chains, GridWorld, PomdpWorld, RescueParams,
    RescueWorld, EDGE, FOLLOWED, GRID_ACTIONS, HELP, IGNORED, NO_COMMAND, PIT, SAFE, TMAZE_CENTER, TMAZE_CUE,
    TMAZE_LEFT, TMAZE_RIGHT, TRAP_GAMBLE, TRAP_GO_SAFE, TRAP_HIGH, TRAP_SAFE, TRAP_START, TRAP_TRAP, WAIT,
};

pub const CONFIG_SCHEMA: &str = "inferno-config/1";

/// Which world a scenario runs in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WorldConfig {
    Bandit {
        reward_prob: f64,
    },
    TMaze {
        cue_accuracy: f64,
        reward_prob: f64,
    },
    Trap {
        spread: f64,
        start_utility: f64,
    },
    Grid {
        width: usize,
        height: usize,
        #[serde(default)]
        walls: Vec<[usize; 2]>,
        slip: f64,
        start: [usize; 2],
        goal: [usize; 2],
    },
    StructureRecovery {
        stickiness: f64,
        noise: f64,
    },
    Switching {
        stickiness: f64,
        noise: f64,
        coupling: f64,
        switch_at: usize,
    },
    Rescue {
        #[serde(default)]
        params: RescueParams,
    },
    Obedience {
        #[serde(default)]
        params: RescueParams,
    },
}

impl WorldConfig {
    pub fn is_empathy(&self) -> bool {
        matches!(self, WorldConfig::Rescue { .. } | WorldConfig::Obedience { .. })
    }
}

/// How the acting agent picks actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Controller {
    /// Expected free energy (First-Law expected free energy for an empath).
    #[default]
    Efe,
    /// Uniformly random actions; the baseline.
    Random,
}

/// Where a single-model agent's parameters start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModelPrior {
    /// Counts concentrated around the world's true tables.
    #[default]
    Known,
    /// Flat counts on the true structure.
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentSection {
    pub controller: Controller,
    pub prior: ModelPrior,
    /// Total pseudo-count per column of a known prior.
    pub prior_concentration: f64,
    /// Multiplies the world's preferences; 0 makes them flat.
    pub preference_scale: f64,
    pub weight_threshold: f64,
    pub schedule: ScheduleConfig,
    pub structure: StructureConfig,
}

impl Default for AgentSection {
    fn default() -> Self {
        AgentSection {
            controller: Controller::Efe,
            prior: ModelPrior::Known,
            prior_concentration: 100.0,
            preference_scale: 1.0,
            weight_threshold: 1e-4,
            schedule: ScheduleConfig::default(),
            structure: StructureConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmpathSection {
    pub harm_bins: usize,
    /// Decay rate of the preferred harm distribution (per nat).
    pub harm_decay: f64,
    /// Planning horizon over the target's harm; defaults to the empath's
    /// own horizon.
    pub harm_horizon: Option<usize>,
    /// Obedience: random-policy training episodes, each `steps` long.
    pub training_episodes: usize,
    /// Obedience: auxiliary preference learning rate.
    pub aux_rate: f64,
}

impl Default for EmpathSection {
    fn default() -> Self {
        EmpathSection {
            harm_bins: DEFAULT_HARM_BINS,
            harm_decay: 1.0,
            harm_horizon: None,
            training_episodes: 20,
            aux_rate: 1.0,
        }
    }
}

/// A complete, reproducible experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: String,
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub steps: usize,
    pub world: WorldConfig,
    #[serde(default)]
    pub agent: AgentSection,
    #[serde(default)]
    pub empath: EmpathSection,
}

impl Scenario {
    pub fn new(name: impl Into<String>, seed: u64, steps: usize, world: WorldConfig) -> Self {
        Scenario {
            schema: CONFIG_SCHEMA.into(),
            name: name.into(),
            seed,
            steps,
            world,
            agent: AgentSection::default(),
            empath: EmpathSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Every check that can be made without stepping.
    pub fn validate(&self) -> Result<()> {
        if self.schema != CONFIG_SCHEMA {
            return Err(Error::Config(format!(
                "schema `{}` is not `{CONFIG_SCHEMA}`",
                self.schema
            )));
        }
        self.agent.schedule.validate()?;
        let a = &self.agent;
        if !(a.prior_concentration > 0.0) || !a.preference_scale.is_finite() || !(0.0..1.0).contains(&a.weight_threshold) {
            return Err(Error::Config(
                "prior_concentration must be positive, preference_scale finite, weight_threshold in [0, 1)".into(),
            ));
        }
        if a.structure.particles == 0 {
            return Err(Error::Config("need at least one particle".into()));
        }
        let e = &self.empath;
        if e.harm_bins == 0 || !(e.harm_decay > 0.0) || e.harm_horizon == Some(0) || !(0.0..=1.0).contains(&e.aux_rate) {
            return Err(Error::Config(
                "harm_bins ≥ 1, harm_decay > 0, harm_horizon ≥ 1 and aux_rate in [0, 1] required".into(),
            ));
        }
        match &self.world {
            WorldConfig::Rescue { params } | WorldConfig::Obedience { params } => params.check(),
            WorldConfig::Grid { .. } => self.grid().map(|_| ()),
            _ => self.true_model().map(|_| ()),
        }
    }

    fn grid(&self) -> Result<GridWorld> {
        match &self.world {
            WorldConfig::Grid {
                width,
                height,
                walls,
                slip,
                start,
                goal,
            } => {
                let g = GridWorld::new(
                    *width,
                    *height,
                    walls.iter().map(|w| (w[0], w[1])).collect(),
                    *slip,
                    (start[0], start[1]),
                )?;
                if goal[0] >= *height || goal[1] >= *width {
                    return Err(Error::Config("goal outside the grid".into()));
                }
                Ok(g)
            }
            _ => Err(Error::Config("not a grid world".into())),
        }
    }

    /// The generative process of a single-agent world, with its
    /// preferences, before any switch.
    pub fn true_model(&self) -> Result<GenerativeModel> {
        let m = match &self.world {
            WorldConfig::Bandit { reward_prob } => bandit(*reward_prob),
            WorldConfig::TMaze {
                cue_accuracy,
                reward_prob,
            } => tmaze(*cue_accuracy, *reward_prob),
            WorldConfig::Trap { spread, start_utility } => trap_world(*spread, *start_utility),
            WorldConfig::Grid { goal, width, .. } => {
                let g = self.grid()?;
                let mut m = g.to_model()?;
                m.c[0][goal[0] * width + goal[1]] = 3.0;
                Ok(m)
            }
            WorldConfig::StructureRecovery { stickiness, noise } | WorldConfig::Switching { stickiness, noise, .. } => {
                two_chains(*stickiness, *noise)
            }
            WorldConfig::Rescue { .. } | WorldConfig::Obedience { .. } => {
                Err(Error::Config("empathy worlds have no single-agent model".into()))
            }
        };
        m.map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })
    }
}

/// Summary of one run.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub steps: usize,
    /// Mean realized harm per target.
    pub mean_harm: Vec<f64>,
    /// Fraction of steps on which each preference-bearing modality showed
    /// its most preferred outcome.
    pub preferred_outcome_rate: Option<f64>,
    /// Posterior weight on the world's current true structure, per step.
    pub weight_on_true: Vec<f64>,
    /// Free energy of the weight-maximal particle, per step.
    pub free_energy: Vec<f64>,
    /// Realized harm per step, per target.
    pub harm: Vec<Vec<f64>>,
    /// Learned auxiliary preference log-probabilities.
    pub aux_preferences: Option<Vec<Vec<f64>>>,
}

impl Metrics {
    /// `metric,value` lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        let _ = writeln!(out, "steps,{}", self.steps);
        for (i, h) in self.mean_harm.iter().enumerate() {
            let _ = writeln!(out, "mean_harm_{i},{h}");
        }
        if let Some(r) = self.preferred_outcome_rate {
            let _ = writeln!(out, "preferred_outcome_rate,{r}");
        }
        if let Some(w) = self.weight_on_true.last() {
            let _ = writeln!(out, "final_weight_on_true,{w}");
        }
        if let Some(f) = self.free_energy.last() {
            let _ = writeln!(out, "final_free_energy,{f}");
        }
        if let Some(aux) = &self.aux_preferences {
            for (m, c) in aux.iter().enumerate() {
                for (o, x) in c.iter().enumerate() {
                    let _ = writeln!(out, "aux_preference_{m}_{o},{x}");
                }
            }
        }
        out
    }

    /// One `(file name, csv)` per non-empty curve.
    pub fn plotdata(&self) -> Vec<(String, String)> {
        let mut files = Vec::new();
        let curve = |name: &str, ys: &[f64]| {
            let mut s = format!("step,{name}\n");
            for (t, y) in ys.iter().enumerate() {
                let _ = writeln!(s, "{t},{y}");
            }
            s
        };
        if !self.weight_on_true.is_empty() {
            files.push(("weight_on_true.csv".into(), curve("weight", &self.weight_on_true)));
        }
        if !self.free_energy.is_empty() {
            files.push(("free_energy.csv".into(), curve("free_energy", &self.free_energy)));
        }
        for (i, h) in self.harm.iter().enumerate() {
            if !h.is_empty() {
                files.push((format!("harm_{i}.csv"), curve("harm", h)));
            }
        }
        files
    }
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub trace: EpisodeTrace,
    pub metrics: Metrics,
    /// Final structure posterior of an EFE agent.
    pub posterior: Option<ParticlePosterior>,
}

/// A posterior holding one particle on `spec` with prior and posterior
/// counts `hyper`.
pub fn single_particle(hyper: HyperParams, kappa: f64) -> Result<ParticlePosterior> {
    let spec = hyper.spec.clone();
    ParticlePosterior::new(
        vec![StructureParticle {
            log_structure_prior: spec.log_prior(kappa),
            spec,
            prior: hyper.clone(),
            hyper,
            free_energy: 0.0,
        }],
        0,
    )
}

/// `count` distinct random structures shaped like `truth` (same
/// observation and action sizes), none in the true canonical class, each
/// with flat counts.
pub fn random_particles<R: Rng + ?Sized>(
    truth: &StructureSpec,
    count: usize,
    cfg: &StructureConfig,
    rng: &mut R,
) -> Result<ParticlePosterior> {
    let mut held = vec![truth.canonical_key()];
    let mut particles = Vec::with_capacity(count);
    let mut tries = 0;
    while particles.len() < count {
        tries += 1;
        if tries > 1000 * count.max(1) {
            return Err(Error::Config(format!("could not draw {count} distinct structures")));
        }
        let mut spec = StructureSpec::random_like(truth, &cfg.bounds, rng);
        let key = spec.canonical_key();
        if held.contains(&key) {
            continue;
        }
        held.push(key);
        spec.label = format!("p{}", particles.len());
        let hyper = HyperParams::flat(&spec, cfg.concentration)?;
        particles.push(StructureParticle {
            log_structure_prior: spec.log_prior(cfg.kappa),
            spec,
            prior: hyper.clone(),
            hyper,
            free_energy: 0.0,
        });
    }
    ParticlePosterior::new(particles, 0)
}

fn preference_rate(trace: &EpisodeTrace, prefs: &[Vec<f64>]) -> Option<f64> {
    let targets: Vec<(usize, usize)> = prefs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.iter().any(|&x| x != c[0]))
        .map(|(m, c)| (m, crate::prob::argmax(c)))
        .collect();
    if targets.is_empty() || trace.is_empty() {
        return None;
    }
    let hits: usize = trace
        .records
        .iter()
        .map(|r| targets.iter().filter(|&&(m, o)| r.observation[m] == o).count())
        .sum();
    Some(hits as f64 / (trace.len() * targets.len()) as f64)
}

fn random_run<R: Rng>(env: &mut dyn Environment, metadata: TraceMetadata, rng: &mut R, steps: usize) -> Result<EpisodeTrace> {
    let mut trace = EpisodeTrace::new(metadata);
    if steps == 0 {
        return Ok(trace);
    }
    let mut observation = env.reset(rng);
    for step in 0..steps {
        let action = rng.gen_range(0..env.action_card());
        trace.records.push(StepRecord {
            step,
            observation: observation.clone(),
            action,
            free_energies: Vec::new(),
            weights: Vec::new(),
            efe: EFEReport::zero(),
            harm: None,
        });
        observation = env.step(action, rng)?;
    }
    Ok(trace)
}

fn run_single_agent(s: &Scenario, rng: &mut ChaCha8Rng) -> Result<ScenarioOutcome> {
    let truth = s.true_model()?;
    let prefs: Vec<Vec<f64>> = truth
        .c
        .iter()
        .map(|c| c.iter().map(|x| x * s.agent.preference_scale).collect())
        .collect();
    let mut env: Box<dyn Environment> = match &s.world {
        WorldConfig::Grid { .. } => Box::new(s.grid()?),
        WorldConfig::Switching {
            stickiness,
            noise,
            coupling,
            switch_at,
        } => Box::new(PomdpWorld::with_switch(
            truth.clone(),
            *switch_at,
            coupled_chains(*coupling, *stickiness, *noise)?,
        )?),
        _ => Box::new(PomdpWorld::new(truth.clone())),
    };
    let current_truth = |step: usize| -> Result<StructureSpec> {
        match &s.world {
            WorldConfig::Switching {
                stickiness,
                noise,
                coupling,
                switch_at,
            } if step > *switch_at => Ok(coupled_chains(*coupling, *stickiness, *noise)?.spec),
            _ => Ok(truth.spec.clone()),
        }
    };
    let metadata = TraceMetadata::new(&s.name, s.seed);

    if s.agent.controller == Controller::Random {
        let trace = random_run(env.as_mut(), metadata, rng, s.steps)?;
        let metrics = Metrics {
            steps: trace.len(),
            preferred_outcome_rate: preference_rate(&trace, &prefs),
            ..Metrics::default()
        };
        return Ok(ScenarioOutcome {
            trace,
            metrics,
            posterior: None,
        });
    }

    let structure_world = matches!(
        s.world,
        WorldConfig::StructureRecovery { .. } | WorldConfig::Switching { .. }
    );
    let posterior = if structure_world {
        random_particles(&truth.spec, s.agent.structure.particles, &s.agent.structure, rng)?
    } else {
        let hyper = match s.agent.prior {
            ModelPrior::Known => HyperParams::from_model(&truth, s.agent.prior_concentration, 1e-3)?,
            ModelPrior::Flat => HyperParams::flat(&truth.spec, s.agent.structure.concentration)?,
        };
        single_particle(hyper, s.agent.structure.kappa)?
    };
    let cfg = AgentConfig {
        schedule: s.agent.schedule,
        preferences: prefs.clone(),
        structure: s.agent.structure.clone(),
        weight_threshold: s.agent.weight_threshold,
        max_policies: DEFAULT_MAX_POLICIES,
    };
    let mut weight_on_true = Vec::new();
    let mut free_energy = Vec::new();
    let mut failure = None;
    let (trace, posterior) = run_agent_observed(env.as_mut(), posterior, &cfg, metadata, rng, s.steps, &mut |r, p| {
        match current_truth(r.step) {
            Ok(spec) => weight_on_true.push(p.weight_on(&spec)),
            Err(e) => failure = Some(e),
        }
        free_energy.push(p.map_particle().free_energy);
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let metrics = Metrics {
        steps: trace.len(),
        preferred_outcome_rate: preference_rate(&trace, &prefs),
        weight_on_true,
        free_energy,
        ..Metrics::default()
    };
    Ok(ScenarioOutcome {
        trace,
        metrics,
        posterior: Some(posterior),
    })
}

/// The empath's harm model for the rescue target: for every position,
/// the distribution over harm bins of the target's surprise at the
/// sensation it would have there.
pub fn rescue_harm_model(params: &RescueParams, bins: usize) -> Result<HarmModel> {
    let target = params.target_model()?;
    let predicted: Vec<f64> = (0..2)
        .map(|o| {
            (0..3)
                .map(|s| params.target_expects[s] * target.a[0].column(&[s])[o])
                .sum::<f64>()
        })
        .collect();
    let surprise: Vec<f64> = predicted.iter().map(|p| -p.ln()).collect();
    let top = surprise.iter().cloned().fold(0.0, f64::max);
    let grid = HarmBins::uniform(bins, top.max(f64::MIN_POSITIVE))?;
    let per_state = (0..3)
        .map(|s| {
            let mut dist = vec![0.0; bins];
            for (o, &v) in surprise.iter().enumerate() {
                dist[grid.bin_of(v)] += target.a[0].column(&[s])[o];
            }
            ProbVector::new(dist)
        })
        .collect::<Result<_>>()?;
    HarmModel::new(grid, per_state)
}

/// Expected harm per position under a harm model: bin midpoints weighted
/// by the bin distribution.
fn expected_harm(hm: &HarmModel) -> Vec<f64> {
    let mids = hm.bins.midpoints();
    hm.per_state
        .iter()
        .map(|p| p.as_slice().iter().zip(&mids).map(|(a, b)| a * b).sum())
        .collect()
}

struct EmpathRun {
    trace: EpisodeTrace,
    harms: Vec<f64>,
    aux: Vec<AuxStep>,
}

fn run_empath_episode(
    s: &Scenario,
    params: &RescueParams,
    obedience: bool,
    controller: Controller,
    rng: &mut ChaCha8Rng,
    first_step: usize,
    trace: EpisodeTrace,
) -> Result<EmpathRun> {
    let mut world = RescueWorld::new(params.clone(), obedience)?;
    let mut target = TargetAgent::new(
        params.target_model()?,
        vec![vec![0.0, 0.0]],
        TargetScript::Constant { action: 0 },
    )?;
    let model = params.empath_model()?;
    let hm = rescue_harm_model(params, s.empath.harm_bins)?;
    let pref = HarmPreference::exponential(hm.bins.clone(), s.empath.harm_decay)?;
    let per_state_harm = expected_harm(&hm);
    let horizon = s.empath.harm_horizon.unwrap_or(s.agent.schedule.horizon);

    let mut run = EmpathRun {
        trace,
        harms: Vec::new(),
        aux: Vec::new(),
    };
    if s.steps == 0 {
        return Ok(run);
    }
    let mut observation = world.reset(rng);
    let mut belief: Option<JointBelief> = None;
    let mut last_action = WAIT;
    let mut surprise = 0.0;
    for step in 0..s.steps {
        scripted_target_step(&mut target, rng)?;
        let realized = target.observe(&[world.sensation])?;
        run.harms.push(realized);
        if obedience {
            run.aux.push(AuxStep {
                outcomes: vec![observation[1]],
                harm: realized,
            });
        }

        let predicted = match &belief {
            None => JointBelief::initial(&model)?,
            Some(b) => b.propagate(&model, last_action),
        };
        let (posterior, log_p) = predicted.condition(&model, &observation[..1])?;
        surprise -= log_p;
        let q = posterior.probs();
        let mut bins = vec![0.0; hm.bins.count()];
        for (p, h) in q.iter().zip(&hm.per_state) {
            for (b, x) in bins.iter_mut().zip(h.as_slice()) {
                *b += p * x;
            }
        }
        let point: f64 = q.iter().zip(&per_state_harm).map(|(p, h)| p * h).sum();

        let (action, report) = match controller {
            Controller::Efe => {
                let reports = evaluate_first_law_policies(
                    &model,
                    &posterior,
                    std::slice::from_ref(&hm),
                    std::slice::from_ref(&pref),
                    horizon,
                    DEFAULT_MAX_POLICIES,
                )?;
                let i = select_policy(&reports, s.agent.schedule.action_temperature, rng)?;
                (reports[i].0.first(), reports[i].1)
            }
            Controller::Random => (rng.gen_range(0..2), EFEReport::zero()),
        };
        run.trace.records.push(StepRecord {
            step: first_step + step,
            observation: observation.clone(),
            action,
            free_energies: vec![finite(surprise)],
            weights: vec![1.0],
            efe: EFEReport::zero(),
            harm: Some(HarmRecord {
                bins: vec![bins],
                point_estimates: vec![point],
                realized: vec![realized],
                first_law: report,
            }),
        });
        belief = Some(posterior);
        last_action = action;
        observation = world.step(action, rng)?;
    }
    Ok(run)
}

fn run_empathy(s: &Scenario, rng: &mut ChaCha8Rng) -> Result<ScenarioOutcome> {
    let metadata = TraceMetadata::new(&s.name, s.seed);
    match &s.world {
        WorldConfig::Rescue { params } => {
            let run = run_empath_episode(s, params, false, s.agent.controller, rng, 0, EpisodeTrace::new(metadata))?;
            let metrics = Metrics {
                steps: run.trace.len(),
                mean_harm: mean(&run.harms).into_iter().collect(),
                harm: if run.harms.is_empty() { Vec::new() } else { vec![run.harms] },
                ..Metrics::default()
            };
            Ok(ScenarioOutcome {
                trace: run.trace,
                metrics,
                posterior: None,
            })
        }
        WorldConfig::Obedience { params } => {
            let mut trace = EpisodeTrace::new(metadata);
            let mut harms = Vec::new();
            let mut episodes = Vec::new();
            for e in 0..s.empath.training_episodes {
                let run = run_empath_episode(s, params, true, Controller::Random, rng, e * s.steps, trace)?;
                trace = run.trace;
                harms.extend(run.harms);
                if !run.aux.is_empty() {
                    episodes.push(run.aux);
                }
            }
            let aux = learn_auxiliary_preferences(&[vec![0.0; 3]], &episodes, s.empath.aux_rate)?;
            let metrics = Metrics {
                steps: trace.len(),
                mean_harm: mean(&harms).into_iter().collect(),
                harm: if harms.is_empty() { Vec::new() } else { vec![harms] },
                aux_preferences: (!episodes.is_empty()).then_some(aux),
                ..Metrics::default()
            };
            Ok(ScenarioOutcome {
                trace,
                metrics,
                posterior: None,
            })
        }
        _ => Err(Error::Config("not an empathy world".into())),
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Validate and run `scenario` on one thread of control, seeded by its
/// `seed`.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioOutcome> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    if scenario.world.is_empathy() {
        run_empathy(scenario, &mut rng)
    } else {
        run_single_agent(scenario, &mut rng)
    }
}

#[cfg(test)]
mod tests;
