//! Scenario runners shared by the acceptance suite and the
//! pre-registration run that froze its thresholds.

#![allow(dead_code)]

use inferno_core::empathy::OtherAgentHypothesis;
use inferno_core::genmodel::TransitionEdges;
use inferno_core::inference::infer_states_point;
use inferno_core::prob::sample_index;
use inferno_core::sandbox::{random_particles, two_chain_spec, two_chains, Controller, PomdpWorld, RescueParams};
use inferno_core::structure::learn_structure;
use inferno_core::{
    run_scenario, ConditionalTable, DataBatch, Environment, GenerativeModel, InferenceConfig, ProbVector, Scenario,
    StructureConfig, StructureSpec, WorldConfig,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::oracle;

/// Two sticky chains, each seen through its own noisy channel.
pub fn chain_data(seed: u64, steps: usize) -> DataBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut world = PomdpWorld::new(two_chains(0.9, 0.05).unwrap());
    let mut obs = vec![world.reset(&mut rng)];
    for _ in 1..steps {
        obs.push(world.step(0, &mut rng).unwrap());
    }
    DataBatch::new(obs, vec![0; steps - 1]).unwrap()
}

/// Weight on the true class after learning from `steps` observations,
/// starting from 8 random particles that exclude it.
pub fn recovered_weight(seed: u64, steps: usize) -> f64 {
    let truth = two_chain_spec();
    let data = chain_data(seed, steps);
    let cfg = StructureConfig {
        seed,
        ..StructureConfig::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let start = random_particles(&truth, 8, &cfg, &mut rng).unwrap();
    let specs: Vec<_> = start.particles.iter().map(|p| p.spec.clone()).collect();
    let (posterior, _) = learn_structure(&specs, &data, &mut rng, &cfg, 30).unwrap();
    posterior.weight_on(&truth)
}

/// Mean target harm under the empath and under random actions, same seed.
pub fn rescue_pair(seed: u64) -> (f64, f64) {
    let mut s = Scenario::new(
        "rescue",
        seed,
        50,
        WorldConfig::Rescue {
            params: RescueParams::default(),
        },
    );
    s.agent.schedule.action_temperature = 1e-9;
    let empath = run_scenario(&s).unwrap().metrics.mean_harm[0];
    s.agent.controller = Controller::Random;
    let random = run_scenario(&s).unwrap().metrics.mean_harm[0];
    (empath, random)
}

fn pv(v: &[f64]) -> ProbVector {
    ProbVector::new(v.to_vec()).unwrap()
}

/// A target that walks between two places, mostly where it means to go,
/// and sees where it is through a noisy channel.
fn mover() -> GenerativeModel {
    let spec = StructureSpec {
        label: "mover".into(),
        factor_cards: vec![2],
        modality_cards: vec![2],
        likelihood_edges: vec![vec![0]],
        transitions: vec![TransitionEdges::controlled()],
        action_card: 2,
    };
    let mut cols = Vec::new();
    for _prev in 0..2 {
        for a in 0..2 {
            let mut v = vec![0.1; 2];
            v[a] = 0.9;
            cols.push(pv(&v));
        }
    }
    let b = ConditionalTable::new(2, vec![2, 2], cols).unwrap();
    let a = ConditionalTable::new(2, vec![2], vec![pv(&[0.95, 0.05]), pv(&[0.05, 0.95])]).unwrap();
    GenerativeModel::new(spec, vec![a], vec![b], vec![vec![0.0, 0.0]], vec![pv(&[0.5, 0.5])], None).unwrap()
}

/// Two hypotheses that differ only in which place the target prefers, and
/// `steps` of behaviour generated by the first.
pub fn phenotype_scenario(seed: u64, steps: usize) -> (Vec<OtherAgentHypothesis>, DataBatch) {
    let hyps = vec![
        OtherAgentHypothesis::new("likes-0", mover(), vec![vec![2.0, 0.0]]).unwrap(),
        OtherAgentHypothesis::new("likes-1", mover(), vec![vec![0.0, 2.0]]).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = &hyps[0].model;
    let mut state = sample_index(m.d[0].as_slice(), &mut rng);
    let see = |s: usize, rng: &mut ChaCha8Rng| sample_index(m.a[0].column(&[s]).as_slice(), rng);
    let mut data = DataBatch::new(vec![vec![see(state, &mut rng)]], vec![]).unwrap();
    for _ in 1..steps {
        let belief = infer_states_point(m, &data, &InferenceConfig::default()).unwrap();
        let a = sample_index(hyps[0].action_probabilities(&belief).unwrap().as_slice(), &mut rng);
        state = sample_index(m.b[0].column(&[state, a]).as_slice(), &mut rng);
        let o = see(state, &mut rng);
        data.push(a, vec![o]);
    }
    (hyps, data)
}

/// Posterior over hypotheses from exact filtering and one-step expected
/// free energy, each recomputed from scratch.
pub fn phenotype_oracle(hyps: &[OtherAgentHypothesis], data: &DataBatch) -> Vec<f64> {
    let logliks: Vec<f64> = hyps
        .iter()
        .map(|h| {
            let mut total = 0.0;
            for t in 0..data.actions.len() {
                let prefix = DataBatch::new(data.observations[..=t].to_vec(), data.actions[..t].to_vec()).unwrap();
                let belief = oracle::filter_one_factor(&h.model, &prefix);
                let g: Vec<f64> = (0..h.model.spec.action_card)
                    .map(|a| -oracle::efe(&h.model, &[belief.clone()], &[a], &h.prefs).total())
                    .collect();
                let z = oracle::lse(&g);
                total += (g[data.actions[t]] - z).max(1e-12f64.ln());
            }
            total
        })
        .collect();
    let z = oracle::lse(&logliks);
    logliks.iter().map(|l| (l - z).exp()).collect()
}
