use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use inferno_core::genmodel::{deserialize_hyperparams, deserialize_model, deserialize_spec, TransitionEdges, MODEL_FORMAT};
use inferno_core::sandbox::{deserialize_data, random_particles, run_scenario, DataFile, Scenario, CONFIG_SCHEMA, DATA_FORMAT};
use inferno_core::structure::{bmr_log_evidence_ratio, bmr_monte_carlo, deserialize_posterior, search_step, serialize_posterior, weights_csv};
use inferno_core::{DirichletCounts, EpisodeTrace, Error, ParticlePosterior, StructureConfig, StructureSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::Common;

/// A failed command: bad input (exit 2) or a failure while running (exit 3).
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) | Failure::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Parse { .. } => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn read(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn with_path<T>(path: &Path, r: inferno_core::Result<T>) -> std::result::Result<T, Failure> {
    r.map_err(|e| match Failure::from(e) {
        Failure::Config(m) => Failure::Config(format!("{}: {m}", path.display())),
        Failure::Runtime(m) => Failure::Runtime(format!("{}: {m}", path.display())),
    })
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn create(dir: &Path) -> std::result::Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
        Ok(Output { dir: dir.to_path_buf() })
    }

    fn write(&self, name: &str, contents: &str) -> Outcome {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Failure::Runtime(format!("{}: {e}", parent.display())))?;
        }
        fs::write(&path, contents).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
    }
}

/// Config for `structure-learn`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LearnConfig {
    schema: String,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_rounds")]
    max_rounds: usize,
    #[serde(default)]
    structure: StructureConfig,
}

fn default_rounds() -> usize {
    50
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            schema: CONFIG_SCHEMA.into(),
            seed: 0,
            max_rounds: default_rounds(),
            structure: StructureConfig::default(),
        }
    }
}

fn parse_learn_config(text: &str) -> std::result::Result<LearnConfig, Failure> {
    let cfg: LearnConfig = toml::from_str(text).map_err(|e| Failure::Config(e.to_string()))?;
    if cfg.schema != CONFIG_SCHEMA {
        return Err(Failure::Config(format!("schema `{}` is not `{CONFIG_SCHEMA}`", cfg.schema)));
    }
    if cfg.structure.particles == 0 {
        return Err(Failure::Config("need at least one particle".into()));
    }
    Ok(cfg)
}

/// One factor per modality, each seen only by its own modality.
fn starting_spec(file: &DataFile) -> StructureSpec {
    let n = file.modality_cards.len();
    let edges = if file.action_card > 1 {
        TransitionEdges::controlled()
    } else {
        TransitionEdges::autonomous()
    };
    StructureSpec {
        label: "start".into(),
        factor_cards: file.modality_cards.iter().map(|&k| k.max(2)).collect(),
        modality_cards: file.modality_cards.clone(),
        likelihood_edges: (0..n).map(|m| vec![m]).collect(),
        transitions: vec![edges; n],
        action_card: file.action_card,
    }
}

pub fn structure_learn(common: &Common, data_path: &Path) -> Outcome {
    let mut cfg = match &common.config {
        Some(p) => parse_learn_config(&read(p)?)?,
        None => LearnConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(n) = common.particles {
        if n == 0 {
            return Err(Failure::Config("--particles must be positive".into()));
        }
        cfg.structure.particles = n;
    }
    cfg.structure.seed = cfg.seed;
    let file = with_path(data_path, deserialize_data(&read(data_path)?))?;
    let mut data = file.data.clone();
    if let Some(t) = common.steps {
        if t == 0 {
            return Err(Failure::Config("--steps must be positive".into()));
        }
        data = data.prefix(t.min(data.len()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = starting_spec(&file);
    let mut specs = vec![start.clone()];
    if cfg.structure.particles > 1 {
        let others = random_particles(&start, cfg.structure.particles - 1, &cfg.structure, &mut rng)?;
        specs.extend(others.particles.into_iter().map(|p| p.spec));
    }
    let mut posterior = ParticlePosterior::from_specs(&specs, &data, &cfg.structure)?;
    let mut map_score = vec![posterior.map_particle().score()];
    let mut map_weight = vec![posterior.weights[posterior.map_index()]];
    for _ in 0..cfg.max_rounds {
        let next = search_step(&posterior, &data, &mut rng, &cfg.structure)?;
        let settled = next.keys() == posterior.keys();
        posterior = next;
        map_score.push(posterior.map_particle().score());
        map_weight.push(posterior.weights[posterior.map_index()]);
        if settled {
            break;
        }
    }

    let out = Output::create(&common.out)?;
    out.write("posterior.txt", &serialize_posterior(&posterior))?;
    out.write("weights.csv", &weights_csv(&posterior))?;
    if common.emit_plotdata {
        out.write("plotdata/map_score.csv", &curve("score", &map_score))?;
        out.write("plotdata/map_weight.csv", &curve("weight", &map_weight))?;
    }
    let map = posterior.map_particle();
    println!(
        "{} observations, {} rounds; MAP {} with weight {}",
        data.len(),
        map_score.len() - 1,
        map.spec.describe(),
        posterior.weights[posterior.map_index()]
    );
    Ok(())
}

fn curve(name: &str, ys: &[f64]) -> String {
    let mut s = format!("round,{name}\n");
    for (i, y) in ys.iter().enumerate() {
        s.push_str(&format!("{i},{y}\n"));
    }
    s
}

pub fn scenario(common: &Common, empathy: bool) -> Outcome {
    let Some(path) = &common.config else {
        return Err(Failure::Config("--config is required".into()));
    };
    let mut s = with_path(path, Scenario::from_toml(&read(path)?))?;
    if s.world.is_empathy() != empathy {
        let want = if empathy { "`empathy` needs a rescue or obedience world" } else { "`agent` needs a single-agent world; use `empathy`" };
        return Err(Failure::Config(want.into()));
    }
    if let Some(seed) = common.seed {
        s.seed = seed;
    }
    if let Some(steps) = common.steps {
        s.steps = steps;
    }
    if let Some(n) = common.particles {
        s.agent.structure.particles = n;
    }
    s.validate()?;
    let outcome = run_scenario(&s)?;

    let out = Output::create(&common.out)?;
    out.write("trace.jsonl", &outcome.trace.to_jsonl()?)?;
    out.write("metrics.csv", &outcome.metrics.to_csv())?;
    if let Some(p) = &outcome.posterior {
        out.write("posterior.txt", &serialize_posterior(p))?;
    }
    if common.emit_plotdata {
        for (name, csv) in outcome.metrics.plotdata() {
            out.write(&format!("plotdata/{name}"), &csv)?;
        }
    }
    println!("{}: {} steps", s.name, outcome.trace.len());
    if let Some(h) = outcome.metrics.mean_harm.first() {
        println!("mean target harm {h}");
    }
    if let Some(r) = outcome.metrics.preferred_outcome_rate {
        println!("preferred outcome rate {r}");
    }
    Ok(())
}

pub fn bmr_demo(common: &Common, cases: usize, samples: usize) -> Outcome {
    if samples < 2 {
        return Err(Failure::Config("--samples must be at least 2".into()));
    }
    let seed = common.seed.unwrap_or(0);
    let mut report = String::from("case,dimension,closed_form_log_ratio,closed_form_ratio,monte_carlo_ratio,standard_error,z\n");
    let mut worst: f64 = 0.0;
    for case in 0..cases {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(case as u64));
        let k = rng.gen_range(2..=5);
        let prior: Vec<f64> = (0..k).map(|_| rng.gen_range(0.5..3.0)).collect();
        let counts: Vec<f64> = (0..k).map(|_| rng.gen_range(0..20) as f64).collect();
        let reduced: Vec<f64> = prior.iter().map(|p| (p - rng.gen_range(0.0..0.5)).max(0.05)).collect();
        let prior = DirichletCounts::new(prior)?;
        let posterior = prior.add(&counts)?;
        let reduced = DirichletCounts::new(reduced)?;
        let log_ratio = bmr_log_evidence_ratio(&posterior, &prior, &reduced)?;
        let mc = bmr_monte_carlo(&posterior, &prior, &reduced, samples, &mut rng)?;
        let z = (mc.mean - log_ratio.exp()) / mc.standard_error;
        worst = worst.max(z.abs());
        report.push_str(&format!(
            "{case},{k},{log_ratio},{},{},{},{z}\n",
            log_ratio.exp(),
            mc.mean,
            mc.standard_error
        ));
    }
    let out = Output::create(&common.out)?;
    out.write("bmr_report.csv", &report)?;
    print!("{report}");
    println!("largest |z| over {cases} cases: {worst}");
    Ok(())
}

/// What a file turned out to be.
fn check_file(path: &Path) -> std::result::Result<&'static str, Failure> {
    let text = read(path)?;
    let first = text.lines().find(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#')).unwrap_or("").trim();
    if first == DATA_FORMAT {
        with_path(path, deserialize_data(&text))?;
        return Ok("data");
    }
    if first == MODEL_FORMAT {
        let kind = text
            .lines()
            .map(str::trim)
            .find_map(|l| l.strip_prefix("object "))
            .unwrap_or("")
            .trim();
        return match kind {
            "spec" => with_path(path, deserialize_spec(&text)).map(|_| "structure"),
            "model" => with_path(path, deserialize_model(&text)).map(|_| "model"),
            "hyperparams" => with_path(path, deserialize_hyperparams(&text)).map(|_| "hyperparameters"),
            "posterior" => with_path(path, deserialize_posterior(&text)).map(|_| "posterior"),
            other => Err(Failure::Config(format!("{}: unknown object `{other}`", path.display()))),
        };
    }
    if path.extension().is_some_and(|e| e == "jsonl") {
        with_path(path, EpisodeTrace::from_jsonl(&text))?;
        return Ok("trace");
    }
    let value: toml::Table = toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    if value.contains_key("world") {
        with_path(path, Scenario::from_toml(&text))?;
        Ok("scenario")
    } else {
        parse_learn_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
        Ok("structure-learn config")
    }
}

pub fn validate(common: &Common, files: &[PathBuf]) -> Outcome {
    let all: Vec<&PathBuf> = common.config.iter().chain(files).collect();
    if all.is_empty() {
        return Err(Failure::Config("nothing to validate; pass files or --config".into()));
    }
    for path in all {
        let kind = check_file(path)?;
        println!("ok {} ({kind})", path.display());
    }
    Ok(())
}
