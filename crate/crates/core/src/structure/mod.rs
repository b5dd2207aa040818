//! Particle posterior over structures, local-move search and model
//! reduction.

mod bmr;
mod snapshot;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genmodel::{HyperParams, StructureBounds, StructureKey, StructureSpec};
use crate::inference::{fit, DataBatch, InferenceConfig};
use crate::prob::{log_sum_exp, ProbVector};

pub use bmr::{
    bmr_hyper_ratio, bmr_log_evidence_ratio, bmr_monte_carlo, bmr_reduce, reduction_candidates,
    BmrOutcome, MonteCarloRatio,
};
pub use snapshot::{deserialize_posterior, serialize_posterior, weights_csv};

/// Knobs for scoring, search and reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StructureConfig {
    pub particles: usize,
    /// Weight `κ` of the complexity prior.
    pub kappa: f64,
    /// Symmetric Dirichlet concentration of every base prior.
    pub concentration: f64,
    pub min_gain: f64,
    pub restart_prob: f64,
    /// Variational restarts per structure; the lowest free energy wins.
    pub fit_restarts: usize,
    /// Spread of the random state responsibilities that seed each restart
    /// after the first (inverse Dirichlet concentration).
    pub jitter: f64,
    pub bounds: StructureBounds,
    pub min_data_for_bmr: usize,
    pub bmr_threshold: f64,
    pub bmr_epsilon: f64,
    pub inference: InferenceConfig,
    /// Mixed into every scoring seed.
    pub seed: u64,
}

impl Default for StructureConfig {
    fn default() -> Self {
        StructureConfig {
            particles: 8,
            kappa: 1.0,
            concentration: 1.0,
            min_gain: 1e-6,
            restart_prob: 0.05,
            fit_restarts: 6,
            jitter: 1.0,
            bounds: StructureBounds::default(),
            min_data_for_bmr: 200,
            bmr_threshold: 0.5,
            bmr_epsilon: 1e-3,
            inference: InferenceConfig::default(),
            seed: 0,
        }
    }
}

/// One candidate structure with its fitted parameter beliefs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureParticle {
    pub spec: StructureSpec,
    pub prior: HyperParams,
    pub hyper: HyperParams,
    pub free_energy: f64,
    pub log_structure_prior: f64,
}

impl StructureParticle {
    /// `free_energy − log_structure_prior`; lower is better.
    pub fn score(&self) -> f64 {
        self.free_energy - self.log_structure_prior
    }

    pub fn key(&self) -> StructureKey {
        self.spec.canonical_key()
    }
}

/// FNV-1a, used to derive stable per-structure seeds.
fn fnv1a(bytes: &[u8], seed: u64) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64 ^ seed;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Fit flat base-prior hyperparameters for `spec` on `data` by variational
/// Bayes with seeded restarts. Any failure, including observations the
/// structure cannot produce, yields a particle with infinite free energy.
pub fn score_structure(spec: &StructureSpec, data: &DataBatch, cfg: &StructureConfig) -> StructureParticle {
    let log_structure_prior = spec.log_prior(cfg.kappa);
    let prior = match HyperParams::flat(spec, cfg.concentration) {
        Ok(p) => p,
        Err(_) => {
            // An invalid spec cannot be fitted; carry the failure as +∞.
            let empty = HyperParams {
                spec: spec.clone(),
                a: vec![],
                b: vec![],
                d: vec![],
                c: vec![],
                e: None,
            };
            return StructureParticle {
                spec: spec.clone(),
                prior: empty.clone(),
                hyper: empty,
                free_energy: f64::INFINITY,
                log_structure_prior,
            };
        }
    };
    let seed = fnv1a(format!("{:?}", spec.canonical_key()).as_bytes(), cfg.seed);
    let mut best: Option<(f64, HyperParams)> = None;
    for r in 0..cfg.fit_restarts.max(1) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
        let jitter = if r == 0 && cfg.fit_restarts > 1 { 0.0 } else { cfg.jitter };
        if let Ok(out) = fit(&prior, data, &cfg.inference, jitter, &mut rng) {
            let f = out.report.total;
            if f.is_finite() && best.as_ref().map_or(true, |(b, _)| f < *b) {
                best = Some((f, out.posterior));
            }
        }
    }
    match best {
        Some((free_energy, hyper)) => StructureParticle {
            spec: spec.clone(),
            prior,
            hyper,
            free_energy,
            log_structure_prior,
        },
        None => StructureParticle {
            spec: spec.clone(),
            hyper: prior.clone(),
            prior,
            free_energy: f64::INFINITY,
            log_structure_prior,
        },
    }
}

/// Weighted set of distinct structures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticlePosterior {
    pub particles: Vec<StructureParticle>,
    pub weights: ProbVector,
    pub data_seen: usize,
}

/// Weights `∝ exp(−F + ln P(m))`; infinite free energy gets weight zero.
/// If every particle is infinite the weights are uniform.
fn weights_of(particles: &[StructureParticle]) -> Result<ProbVector> {
    if particles.is_empty() {
        return Err(Error::Empty("particle posterior has no particles".into()));
    }
    let logits: Vec<f64> = particles.iter().map(|p| -p.score()).collect();
    let lse = log_sum_exp(&logits);
    if !lse.is_finite() {
        return ProbVector::uniform(particles.len());
    }
    let w: Vec<f64> = logits.iter().map(|l| (l - lse).exp()).collect();
    crate::prob::normalize(&w)
}

impl ParticlePosterior {
    /// Build from particles, dropping canonical duplicates (the better
    /// scored copy is kept, at the position of the first occurrence).
    pub fn new(particles: Vec<StructureParticle>, data_seen: usize) -> Result<Self> {
        let mut kept: Vec<StructureParticle> = Vec::with_capacity(particles.len());
        let mut index: BTreeMap<StructureKey, usize> = BTreeMap::new();
        for p in particles {
            let key = p.key();
            match index.get(&key) {
                Some(&i) => {
                    if p.score() < kept[i].score() {
                        kept[i] = p;
                    }
                }
                None => {
                    index.insert(key, kept.len());
                    kept.push(p);
                }
            }
        }
        let weights = weights_of(&kept)?;
        Ok(ParticlePosterior {
            particles: kept,
            weights,
            data_seen,
        })
    }

    /// Score `specs` on `data` and build a posterior from them.
    pub fn from_specs(specs: &[StructureSpec], data: &DataBatch, cfg: &StructureConfig) -> Result<Self> {
        let particles: Vec<StructureParticle> = specs
            .par_iter()
            .map(|s| score_structure(s, data, cfg))
            .collect();
        Self::new(particles, data.len())
    }

    /// Insert a particle unless its canonical class is already present.
    pub fn insert(&mut self, particle: StructureParticle) -> Result<bool> {
        let key = particle.key();
        if self.particles.iter().any(|p| p.key() == key) {
            return Ok(false);
        }
        self.particles.push(particle);
        self.weights = weights_of(&self.particles)?;
        Ok(true)
    }

    /// Recompute weights from the current scores.
    pub fn reweight(&self) -> Result<ParticlePosterior> {
        Ok(ParticlePosterior {
            particles: self.particles.clone(),
            weights: weights_of(&self.particles)?,
            data_seen: self.data_seen,
        })
    }

    /// Index of the weight-maximal particle, lowest index on ties.
    pub fn map_index(&self) -> usize {
        self.weights.argmax()
    }

    pub fn map_particle(&self) -> &StructureParticle {
        &self.particles[self.map_index()]
    }

    /// Total weight on the canonical class of `spec`.
    pub fn weight_on(&self, spec: &StructureSpec) -> f64 {
        let key = spec.canonical_key();
        self.particles
            .iter()
            .zip(self.weights.as_slice())
            .filter(|(p, _)| p.key() == key)
            .map(|(_, w)| w)
            .sum()
    }

    pub fn keys(&self) -> BTreeSet<StructureKey> {
        self.particles.iter().map(StructureParticle::key).collect()
    }
}

/// `reweight` as a free function.
pub fn reweight(p: &ParticlePosterior) -> Result<ParticlePosterior> {
    p.reweight()
}

/// One round of greedy local search.
///
/// Every particle is rescored on `data`, then moved to its best-scoring
/// neighbour when that improves `free_energy − log_structure_prior` by more
/// than `min_gain`. A neighbour whose class is already held by another
/// particle is skipped in favour of the next best improving one. With
/// probability `restart_prob` the worst particle is then replaced by a
/// random structure. Neighbour scores are computed in parallel and joined in
/// enumeration order, so results depend only on `rng` and `cfg`.
pub fn search_step<R: Rng + ?Sized>(
    p: &ParticlePosterior,
    data: &DataBatch,
    rng: &mut R,
    cfg: &StructureConfig,
) -> Result<ParticlePosterior> {
    search_step_cached(p, data, rng, cfg, &mut BTreeMap::new())
}

/// Scores already computed on the same data and config, by class.
type ScoreCache = BTreeMap<StructureKey, StructureParticle>;

fn search_step_cached<R: Rng + ?Sized>(
    p: &ParticlePosterior,
    data: &DataBatch,
    rng: &mut R,
    cfg: &StructureConfig,
    cache: &mut ScoreCache,
) -> Result<ParticlePosterior> {
    if p.particles.is_empty() {
        return Err(Error::Empty("particle posterior has no particles".into()));
    }
    let score_all = |specs: Vec<StructureSpec>, cache: &mut ScoreCache| {
        let keys: Vec<StructureKey> = specs.iter().map(StructureSpec::canonical_key).collect();
        let todo: Vec<(StructureKey, StructureSpec)> = keys
            .iter()
            .zip(&specs)
            .filter(|(k, _)| !cache.contains_key(k))
            .map(|(k, s)| (k.clone(), s.clone()))
            .collect();
        let scored: Vec<(StructureKey, StructureParticle)> = todo
            .into_par_iter()
            .map(|(k, s)| {
                let particle = score_structure(&s, data, cfg);
                (k, particle)
            })
            .collect();
        for (k, s) in scored {
            cache.entry(k).or_insert(s);
        }
        keys.into_iter()
            .map(|k| cache[&k].clone())
            .collect::<Vec<StructureParticle>>()
    };

    let current_specs: Vec<StructureSpec> = p.particles.iter().map(|q| q.spec.clone()).collect();
    let mut particles = score_all(current_specs, cache);
    for (fresh, old) in particles.iter_mut().zip(&p.particles) {
        fresh.spec.label = old.spec.label.clone();
    }

    let mut held: BTreeSet<StructureKey> = particles.iter().map(StructureParticle::key).collect();
    for i in 0..particles.len() {
        let neighbors = particles[i].spec.neighbors(&cfg.bounds);
        if neighbors.is_empty() {
            continue;
        }
        let scored = score_all(neighbors, cache);
        let mut order: Vec<usize> = (0..scored.len()).collect();
        order.sort_by(|&a, &b| {
            scored[a]
                .score()
                .partial_cmp(&scored[b].score())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let current = particles[i].score();
        for j in order {
            let cand = &scored[j];
            if !(cand.score() < current - cfg.min_gain) {
                break;
            }
            let key = cand.key();
            if held.contains(&key) {
                continue;
            }
            held.remove(&particles[i].key());
            held.insert(key);
            particles[i] = cand.clone();
            break;
        }
    }

    if cfg.restart_prob > 0.0 && rng.gen::<f64>() < cfg.restart_prob {
        let worst = (0..particles.len())
            .max_by(|&a, &b| {
                particles[a]
                    .score()
                    .partial_cmp(&particles[b].score())
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(b.cmp(&a))
            })
            .unwrap_or(0);
        let template = particles[worst].spec.clone();
        for _ in 0..16 {
            let spec = StructureSpec::random_like(&template, &cfg.bounds, rng);
            let key = spec.canonical_key();
            if !held.contains(&key) {
                held.remove(&particles[worst].key());
                held.insert(key.clone());
                particles[worst] = cache
                    .entry(key)
                    .or_insert_with(|| score_structure(&spec, data, cfg))
                    .clone();
                break;
            }
        }
    }
    ParticlePosterior::new(particles, data.len())
}

/// Score `initial` on `data` and repeat [`search_step`] until the held
/// classes stop changing or `max_rounds` rounds have run.
///
/// Returns the final posterior and the number of rounds taken. With
/// `restart_prob > 0` a round that only restarts still counts as a change.
/// Scores are shared across rounds, since they depend only on the class,
/// the data and `cfg`.
pub fn learn_structure<R: Rng + ?Sized>(
    initial: &[StructureSpec],
    data: &DataBatch,
    rng: &mut R,
    cfg: &StructureConfig,
    max_rounds: usize,
) -> Result<(ParticlePosterior, usize)> {
    let mut p = ParticlePosterior::from_specs(initial, data, cfg)?;
    let mut cache: ScoreCache = p.particles.iter().map(|q| (q.key(), q.clone())).collect();
    for round in 1..=max_rounds {
        let next = search_step_cached(&p, data, rng, cfg, &mut cache)?;
        let settled = next.keys() == p.keys();
        p = next;
        if settled {
            return Ok((p, round));
        }
    }
    Ok((p, max_rounds))
}

/// Apply model reduction to every particle whose class has seen enough
/// data; free energies drop by the evidence gained.
pub fn reduce_posterior(p: &ParticlePosterior, cfg: &StructureConfig) -> Result<ParticlePosterior> {
    if p.data_seen < cfg.min_data_for_bmr {
        return Ok(p.clone());
    }
    let mut particles = p.particles.clone();
    for q in &mut particles {
        if !q.free_energy.is_finite() {
            continue;
        }
        let cands = reduction_candidates(&q.prior, &q.hyper, cfg.bmr_threshold, cfg.bmr_epsilon)?;
        let out = bmr_reduce(&q.prior, &q.hyper, &cands)?;
        if out.chosen != 0 {
            q.free_energy -= out.gain;
            q.prior = out.prior;
            q.hyper = out.posterior;
        }
    }
    ParticlePosterior::new(particles, p.data_seen)
}
