use super::*;
use crate::genmodel::{HyperParams, StructureSpec, TransitionEdges};
use crate::inference::exact_point_log_evidence;
use crate::prob::{ConditionalTable, DirichletCounts};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pv(v: &[f64]) -> ProbVector {
    ProbVector::new(v.to_vec()).unwrap()
}

/// Target moves between two places; it sees where it is.
fn mover(stick: f64) -> GenerativeModel {
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
            let mut v = vec![1.0 - stick; 2];
            v[a] = stick;
            cols.push(pv(&v));
        }
    }
    let b = ConditionalTable::new(2, vec![2, 2], cols).unwrap();
    let a = ConditionalTable::new(2, vec![2], vec![pv(&[0.95, 0.05]), pv(&[0.05, 0.95])]).unwrap();
    GenerativeModel::new(spec, vec![a], vec![b], vec![vec![0.0, 0.0]], vec![pv(&[0.5, 0.5])], None).unwrap()
}

fn hypothesis(label: &str, prefs: Vec<f64>) -> OtherAgentHypothesis {
    OtherAgentHypothesis::new(label, mover(0.9), vec![prefs]).unwrap()
}

/// Simulate a target acting on hypothesis `h`'s model and preferences.
fn simulate(h: &OtherAgentHypothesis, steps: usize, seed: u64) -> DataBatch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = &h.model;
    let mut state = crate::prob::sample_index(m.d[0].as_slice(), &mut rng);
    let obs = |s: usize, rng: &mut ChaCha8Rng| crate::prob::sample_index(m.a[0].column(&[s]).as_slice(), rng);
    let mut data = DataBatch::new(vec![vec![obs(state, &mut rng)]], vec![]).unwrap();
    for _ in 1..steps {
        let b = infer_states_point(m, &data, &InferenceConfig::default()).unwrap();
        let p = h.action_probabilities(&b).unwrap();
        let a = crate::prob::sample_index(p.as_slice(), &mut rng);
        state = crate::prob::sample_index(m.b[0].column(&[state, a]).as_slice(), &mut rng);
        let o = obs(state, &mut rng);
        data.push(a, vec![o]);
    }
    data
}

#[test]
fn phenotyping_basics() {
    let a = hypothesis("likes-0", vec![2.0, 0.0]);
    let data = simulate(&a, 10, 1);
    let one = infer_other(std::slice::from_ref(&a), &data).unwrap();
    assert_eq!(one.probs.as_slice(), &[1.0]);
    assert_eq!(one.traces[0].len(), data.len());
    let same = infer_other(&[a.clone(), a.clone()], &data).unwrap();
    assert!((same.probs[0] - 0.5).abs() < 1e-15);
    assert!(infer_other(&[], &data).is_err());
}

#[test]
fn phenotyping_recovers_generator_and_is_order_free() {
    let a = hypothesis("likes-0", vec![2.0, 0.0]);
    let b = hypothesis("likes-1", vec![0.0, 2.0]);
    let data = simulate(&a, 30, 4);
    let post = infer_other(&[a.clone(), b.clone()], &data).unwrap();
    assert!(post.probs[0] > 0.9, "{:?}", post.probs);
    let swapped = infer_other(&[b, a], &data).unwrap();
    assert!((post.probs[0] - swapped.probs[1]).abs() < 1e-12);
}

#[test]
fn unsupported_action_gets_the_floor() {
    let a = hypothesis("a", vec![1.0, 0.0]);
    let data = DataBatch::new(vec![vec![0], vec![1]], vec![5]).unwrap();
    let post = infer_other(&[a], &data).unwrap();
    assert!((post.log_likelihoods[0] - ACTION_FLOOR.ln()).abs() < 1e-9);
}

fn one_factor(k: usize) -> StructureSpec {
    StructureSpec {
        label: "one".into(),
        factor_cards: vec![k],
        modality_cards: vec![k],
        likelihood_edges: vec![vec![0]],
        transitions: vec![TransitionEdges::autonomous()],
        action_card: 1,
    }
}

#[test]
fn harm_closed_forms() {
    // Uniform model over k outcomes: one observation costs ln k.
    for k in 2..5 {
        let model = GenerativeModel::uniform(&one_factor(k)).unwrap();
        let h = OtherAgentHypothesis::new("u", model, vec![vec![0.0; k]]).unwrap();
        let data = DataBatch::new(vec![vec![0], vec![k - 1]], vec![0]).unwrap();
        let est = estimate_harm(&pv(&[1.0]), &[h], &data, 1, &HarmBins::uniform(8, 4.0).unwrap()).unwrap();
        assert!((est.point_estimate - (k as f64).ln()).abs() < 1e-12);
    }
    // Deterministic, perfectly predicted: no harm.
    let spec = one_factor(2);
    let id = ConditionalTable::new(2, vec![2], vec![pv(&[1.0, 0.0]), pv(&[0.0, 1.0])]).unwrap();
    let model = GenerativeModel::new(spec, vec![id.clone()], vec![id], vec![vec![0.0; 2]], vec![pv(&[1.0, 0.0])], None).unwrap();
    let data = DataBatch::new(vec![vec![0], vec![0], vec![0]], vec![0, 0]).unwrap();
    let h = OtherAgentHypothesis::new("d", model, vec![vec![0.0; 2]]).unwrap();
    let est = estimate_harm(&pv(&[1.0]), &[h.clone()], &data, 3, &HarmBins::uniform(8, 1.0).unwrap()).unwrap();
    assert!(est.point_estimate.abs() < 1e-12);
    assert_eq!(est.distribution.argmax(), 0);
    assert!(estimate_harm(&pv(&[1.0]), &[h.clone()], &data, 0, &HarmBins::uniform(8, 1.0).unwrap()).is_err());
    assert!(estimate_harm(&pv(&[1.0]), &[h], &data, 4, &HarmBins::uniform(8, 1.0).unwrap()).is_err());
}

#[test]
fn harm_mixture_matches_hand_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let spec = one_factor(3);
    let models: Vec<GenerativeModel> = (0..2)
        .map(|_| {
            let mut h = HyperParams::flat(&spec, 1.0).unwrap();
            for c in h.flat_counts_mut() {
                let v: Vec<f64> = (0..c.dimension()).map(|_| rng.gen_range(0.1..3.0)).collect();
                *c = DirichletCounts::new(v).unwrap();
            }
            h.expected_model().unwrap()
        })
        .collect();
    let hyps: Vec<OtherAgentHypothesis> = models
        .iter()
        .map(|m| OtherAgentHypothesis::new("h", m.clone(), vec![vec![0.0; 3]]).unwrap())
        .collect();
    let data = DataBatch::new(vec![vec![0], vec![2], vec![1], vec![1]], vec![0, 0, 0]).unwrap();
    let w = pv(&[0.3, 0.7]);
    let bins = HarmBins::uniform(8, 8.0).unwrap();
    let est = estimate_harm(&w, &hyps, &data, 3, &bins).unwrap();
    let window = data.window(1, 4).unwrap();
    // One factor: the chain posterior is exact, so harm is the exact surprise.
    let hand: f64 = models
        .iter()
        .zip(w.as_slice())
        .map(|(m, p)| -p * exact_point_log_evidence(m, &window).unwrap())
        .sum();
    assert!((est.point_estimate - hand).abs() < 1e-9);
    let total: f64 = est.distribution.as_slice().iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn harm_bounds_surprise(seed in any::<u64>(), steps in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = StructureSpec {
            label: "two".into(),
            factor_cards: vec![2, 2],
            modality_cards: vec![3],
            likelihood_edges: vec![vec![0, 1]],
            transitions: vec![TransitionEdges::autonomous(), TransitionEdges { action_dependent: false, parents: vec![0] }],
            action_card: 1,
        };
        let mut h = HyperParams::flat(&spec, 1.0).unwrap();
        for c in h.flat_counts_mut() {
            let v: Vec<f64> = (0..c.dimension()).map(|_| rng.gen_range(0.1..3.0)).collect();
            *c = DirichletCounts::new(v).unwrap();
        }
        let model = h.expected_model().unwrap();
        let obs = (0..steps).map(|_| vec![rng.gen_range(0..3)]).collect();
        let data = DataBatch::new(obs, vec![0; steps - 1]).unwrap();
        let harm = harm_of(&model, &data, &InferenceConfig::default()).unwrap();
        let exact = exact_point_log_evidence(&model, &data).unwrap();
        prop_assert!(harm >= -exact - 1e-9);
    }
}

/// Empath's view: where the target is (safe, edge, pit), two actions
/// (wait, pull back), a noisy sighting of the target.
fn rescue_model(noise: f64) -> GenerativeModel {
    let spec = StructureSpec {
        label: "rescue".into(),
        factor_cards: vec![3],
        modality_cards: vec![3],
        likelihood_edges: vec![vec![0]],
        transitions: vec![TransitionEdges::controlled()],
        action_card: 2,
    };
    let wait = [[0.7, 0.3, 0.0], [0.0, 0.5, 0.5], [0.0, 0.0, 1.0]];
    let pull = [[1.0, 0.0, 0.0], [0.9, 0.1, 0.0], [0.2, 0.6, 0.2]];
    let mut cols = Vec::new();
    for s in 0..3 {
        cols.push(pv(&wait[s]));
        cols.push(pv(&pull[s]));
    }
    let b = ConditionalTable::new(3, vec![3, 2], cols).unwrap();
    let a_cols = (0..3)
        .map(|s| {
            let mut v = vec![noise / 2.0; 3];
            v[s] = 1.0 - noise;
            pv(&v)
        })
        .collect();
    let a = ConditionalTable::new(3, vec![3], a_cols).unwrap();
    GenerativeModel::new(spec, vec![a], vec![b], vec![vec![0.0; 3]], vec![pv(&[1.0, 0.0, 0.0])], None).unwrap()
}

fn rescue_harm() -> (HarmModel, HarmPreference) {
    let bins = HarmBins::uniform(4, 4.0).unwrap();
    let hm = HarmModel::from_values(bins.clone(), &[0.1, 1.2, 3.5]).unwrap();
    (hm, HarmPreference::exponential(bins, 1.5).unwrap())
}

/// Outcome-level brute force for a horizon-1 First-Law evaluation.
fn oracle_first_law(model: &GenerativeModel, start: &[f64], action: usize, hm: &HarmModel, pref: &HarmPreference) -> f64 {
    let ns = start.len();
    let nb = hm.bins.count();
    let no = model.spec.modality_cards[0];
    let mut joint = vec![vec![0.0; no]; nb];
    for s0 in 0..ns {
        for s1 in 0..ns {
            let p = start[s0] * model.b[0].prob(s1, &[s0, action]);
            for b in 0..nb {
                for o in 0..no {
                    joint[b][o] += p * hm.per_state[s1][b] * model.a[0].prob(o, &[s1]);
                }
            }
        }
    }
    let mut g = 0.0;
    for b in 0..nb {
        let qb: f64 = joint[b].iter().sum();
        if qb > 0.0 {
            g += qb * (qb.ln() - pref.log_probs[b]);
            for &x in &joint[b] {
                if x > 0.0 {
                    g -= x * (x / qb).ln();
                }
            }
        }
    }
    g
}

#[test]
fn first_law_matches_enumeration() {
    let (hm, pref) = rescue_harm();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let model = rescue_model(rng.gen_range(0.0..0.5));
        let raw: Vec<f64> = (0..3).map(|_| rng.gen_range(0.01..1.0)).collect();
        let start = crate::prob::normalize(&raw).unwrap();
        let joint = JointBelief::from_marginals(std::slice::from_ref(&start)).unwrap();
        for a in 0..2 {
            let r = first_law_efe(&model, &joint, &Policy::new(vec![a], 2).unwrap(), &hm, &pref).unwrap();
            let oracle = oracle_first_law(&model, start.as_slice(), a, &hm, &pref);
            assert!((r.total - oracle).abs() < 1e-9, "{} vs {oracle}", r.total);
        }
    }
    // From the edge, pulling back is preferred.
    let model = rescue_model(0.1);
    let edge = JointBelief::from_marginals(&[pv(&[0.0, 1.0, 0.0])]).unwrap();
    let reports = evaluate_first_law_policies(&model, &edge, &[hm.clone()], &[pref.clone()], 1, 16).unwrap();
    assert!(reports[1].1.total < reports[0].1.total);
}

#[test]
fn first_law_limits() {
    let bins = HarmBins::uniform(3, 3.0).unwrap();
    let model = rescue_model(0.0);
    let start = JointBelief::from_marginals(&[pv(&[0.2, 0.5, 0.3])]).unwrap();
    // All states harmless, preference on the lowest bin.
    let hm = HarmModel::from_values(bins.clone(), &[0.0, 0.0, 0.0]).unwrap();
    let pref = HarmPreference {
        bins: bins.clone(),
        log_probs: log_softmax(&[0.0, -800.0, -800.0]),
        decay_rate: 800.0,
    };
    let r = first_law_efe(&model, &start, &Policy::new(vec![0, 1], 2).unwrap(), &hm, &pref).unwrap();
    assert!(r.risk.abs() < 1e-12);
    // Sightings are exact, and each state has its own bin: no ambiguity.
    let hm = HarmModel::from_values(bins.clone(), &[0.5, 1.5, 2.5]).unwrap();
    let r = first_law_efe(&model, &start, &Policy::new(vec![1], 2).unwrap(), &hm, &pref).unwrap();
    assert!(r.ambiguity.abs() < 1e-12);
    assert!(HarmModel::new(bins, vec![pv(&[1.0, 0.0])]).is_err());
}

fn prediction(dist: &[f64], ambiguity: f64) -> HarmPrediction {
    HarmPrediction {
        distribution: pv(dist),
        ambiguity,
        info_gain: 0.0,
    }
}

#[test]
fn multi_target_rules() {
    let bins = HarmBins::uniform(3, 3.0).unwrap();
    let pref = HarmPreference::exponential(bins.clone(), 1.0).unwrap();
    let p1 = prediction(&[0.2, 0.3, 0.5], 0.1);
    let p2 = prediction(&[0.6, 0.3, 0.1], 0.4);
    let one = multi_target_first_law(&[p1.clone()], &[pref.clone()]).unwrap();
    let model = rescue_model(0.2);
    let hm = HarmModel::from_values(bins.clone(), &[0.2, 1.1, 2.9]).unwrap();
    let start = JointBelief::from_marginals(&[pv(&[0.3, 0.3, 0.4])]).unwrap();
    let policy = Policy::new(vec![0], 2).unwrap();
    let single = first_law_efe(&model, &start, &policy, &hm, &pref).unwrap();
    let preds = predict_harm(&model, &start, &policy, &hm).unwrap();
    let via_multi = multi_target_first_law(&preds, &[pref.clone()]).unwrap();
    assert!((single.risk - via_multi.risk).abs() < 1e-15);

    let two = multi_target_first_law(&[p1.clone(), p1.clone()], &[pref.clone(), pref.clone()]).unwrap();
    assert!((two.risk - 2.0 * one.risk).abs() < 1e-12);
    let het = multi_target_first_law(&[p1.clone(), p2.clone()], &[pref.clone(), pref.clone()]).unwrap();
    let p = pref.probs();
    let direct = kl_slices(p1.distribution.as_slice(), p.as_slice()) + kl_slices(p2.distribution.as_slice(), p.as_slice());
    assert!((het.risk - direct).abs() < 1e-12);
    assert!((het.ambiguity - 0.5).abs() < 1e-12);

    let other = HarmPreference::exponential(HarmBins::uniform(3, 4.0).unwrap(), 1.0).unwrap();
    assert!(multi_target_first_law(&[p1.clone(), p2], &[pref, other]).is_err());
    assert!(multi_target_first_law(&[], &[]).is_err());
}

proptest! {
    #[test]
    fn risk_vanishes_exactly_at_preference(raw in proptest::collection::vec(0.01f64..1.0, 4), decay in 0.1f64..3.0) {
        let bins = HarmBins::uniform(4, 2.0).unwrap();
        let pref = HarmPreference::exponential(bins, decay).unwrap();
        let at = multi_target_first_law(&[HarmPrediction { distribution: pref.probs(), ambiguity: 0.0, info_gain: 0.0 }], &[pref.clone()]).unwrap();
        prop_assert!(at.risk.abs() < 1e-12);
        let q = crate::prob::normalize(&raw).unwrap();
        let off = multi_target_first_law(&[HarmPrediction { distribution: q.clone(), ambiguity: 0.0, info_gain: 0.0 }], &[pref.clone()]).unwrap();
        let gap: f64 = q.as_slice().iter().zip(pref.probs().as_slice()).map(|(a, b)| (a - b).abs()).sum();
        if gap > 1e-6 {
            prop_assert!(off.risk > 0.0);
        }
    }
}

fn steps(pairs: &[(usize, f64)]) -> Vec<AuxStep> {
    pairs.iter().map(|&(o, harm)| AuxStep { outcomes: vec![o], harm }).collect()
}

#[test]
fn auxiliary_preference_rules() {
    let flat = vec![vec![0.0, 0.0, 0.0]];
    let ep = steps(&[(0, 0.1), (1, 2.0), (2, 3.0), (0, 0.2), (1, 2.5)]);
    assert_eq!(learn_auxiliary_preferences(&flat, &[ep.clone()], 0.0).unwrap(), flat);
    assert_eq!(learn_auxiliary_preferences(&flat, &[], 0.5).unwrap(), flat);
    let c = learn_auxiliary_preferences(&flat, &[ep], 1.0).unwrap();
    assert!(c[0][0] > c[0][1] && c[0][0] > c[0][2]);
    let total: f64 = c[0].iter().map(|x| x.exp()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(learn_auxiliary_preferences(&flat, &[steps(&[(3, 1.0)])], 1.0).is_err());

    // Balanced design: every outcome meets low and high harm equally often.
    let balanced = steps(&[(0, 0.0), (0, 1.0), (1, 0.0), (1, 1.0)]);
    let c = learn_auxiliary_preferences(&vec![vec![0.0, 0.0]], &[balanced], 1.0).unwrap();
    assert!((c[0][0] - c[0][1]).abs() < 1e-9);
}

#[test]
fn uncorrelated_outcomes_stay_flat_on_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let n = 1000;
    let diffs: Vec<f64> = (0..n)
        .map(|_| {
            let ep: Vec<AuxStep> = (0..40)
                .map(|_| AuxStep {
                    outcomes: vec![rng.gen_range(0..2)],
                    harm: rng.gen_range(0.0..3.0),
                })
                .collect();
            let c = learn_auxiliary_preferences(&[vec![0.0, 0.0]], &[ep], 1.0).unwrap();
            c[0][0] - c[0][1]
        })
        .collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    assert!(mean.abs() < 3.0 * (var / n as f64).sqrt(), "{mean}");
}
