//! Brute-force references for the acceptance suite. Everything here
//! enumerates joint state trajectories or outcome sequences directly and
//! shares no numerical code with the engine beyond reading its tables.

#![allow(dead_code)]

use inferno_core::genmodel::TransitionEdges;
use inferno_core::{DataBatch, GenerativeModel, HyperParams, StructureSpec};
use rand::Rng;
use statrs::function::gamma::ln_gamma;

/// Mixed-radix index, first digit most significant.
pub fn mixed_index(dims: &[usize], values: &[usize]) -> usize {
    dims.iter().zip(values).fold(0, |acc, (&d, &v)| acc * d + v)
}

fn mixed_values(dims: &[usize], mut i: usize) -> Vec<usize> {
    let mut v = vec![0; dims.len()];
    for k in (0..dims.len()).rev() {
        v[k] = i % dims[k];
        i /= dims[k];
    }
    v
}

pub fn lse(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Every sequence of `steps` joint states.
fn trajectories(cards: &[usize], steps: usize) -> Vec<Vec<Vec<usize>>> {
    let joint: usize = cards.iter().product();
    let dims = vec![joint; steps];
    let total: usize = dims.iter().product();
    (0..total)
        .map(|i| mixed_values(&dims, i).into_iter().map(|j| mixed_values(cards, j)).collect())
        .collect()
}

/// Column of likelihood table `m` for joint state `s`.
fn a_column(spec: &StructureSpec, m: usize, s: &[usize]) -> usize {
    let dims: Vec<usize> = spec.likelihood_edges[m].iter().map(|&f| spec.factor_cards[f]).collect();
    let vals: Vec<usize> = spec.likelihood_edges[m].iter().map(|&f| s[f]).collect();
    mixed_index(&dims, &vals)
}

/// Column of transition table `f` given the previous joint state.
fn b_column(spec: &StructureSpec, f: usize, prev: &[usize], action: usize) -> usize {
    let t = &spec.transitions[f];
    let mut dims = vec![spec.factor_cards[f]];
    let mut vals = vec![prev[f]];
    if t.action_dependent {
        dims.push(spec.action_card);
        vals.push(action);
    }
    for &p in &t.parents {
        dims.push(spec.factor_cards[p]);
        vals.push(prev[p]);
    }
    mixed_index(&dims, &vals)
}

/// `(ln P(s), ln P(o | s))` of one trajectory under a point model.
fn point_terms(model: &GenerativeModel, traj: &[Vec<usize>], data: &DataBatch) -> (f64, f64) {
    let spec = &model.spec;
    let mut prior = 0.0;
    let mut lik = 0.0;
    for (t, s) in traj.iter().enumerate() {
        for f in 0..spec.factor_cards.len() {
            prior += if t == 0 {
                model.d[f][s[f]].ln()
            } else {
                let col = b_column(spec, f, &traj[t - 1], data.actions[t - 1]);
                model.b[f].columns()[col][s[f]].ln()
            };
        }
        for m in 0..spec.modality_cards.len() {
            lik += model.a[m].columns()[a_column(spec, m, s)][data.observations[t][m]].ln();
        }
    }
    (prior, lik)
}

pub fn point_log_evidence(model: &GenerativeModel, data: &DataBatch) -> f64 {
    let terms: Vec<f64> = trajectories(&model.spec.factor_cards, data.len())
        .iter()
        .map(|tr| {
            let (p, l) = point_terms(model, tr, data);
            p + l
        })
        .collect();
    lse(&terms)
}

/// Accuracy `E_post[ln P(o|s)]` and complexity `KL[P(s|o) ‖ P(s)]` of the
/// exact trajectory posterior.
pub fn accuracy_complexity(model: &GenerativeModel, data: &DataBatch) -> (f64, f64) {
    let terms: Vec<(f64, f64)> = trajectories(&model.spec.factor_cards, data.len())
        .iter()
        .map(|tr| point_terms(model, tr, data))
        .collect();
    let ev = lse(&terms.iter().map(|(p, l)| p + l).collect::<Vec<_>>());
    let mut accuracy = 0.0;
    let mut complexity = 0.0;
    for (p, l) in terms {
        let post = p + l - ev;
        let w = post.exp();
        if w > 0.0 {
            accuracy += w * l;
            complexity += w * (post - p);
        }
    }
    (accuracy, complexity)
}

fn log_beta(alpha: &[f64]) -> f64 {
    alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>() - ln_gamma(alpha.iter().sum())
}

/// `ln B(α + n) − ln B(α)` summed over the columns of a count table.
fn table_term(alpha: &[Vec<f64>], counts: &[Vec<f64>]) -> f64 {
    alpha
        .iter()
        .zip(counts)
        .filter(|(_, n)| n.iter().any(|&x| x > 0.0))
        .map(|(a, n)| {
            let post: Vec<f64> = a.iter().zip(n).map(|(x, y)| x + y).collect();
            log_beta(&post) - log_beta(a)
        })
        .sum()
}

/// `ln P(o | h)` with every Dirichlet integrated out, summing the
/// Dirichlet-multinomial marginal of each trajectory's counts.
pub fn dirichlet_log_evidence(h: &HyperParams, data: &DataBatch) -> f64 {
    let spec = &h.spec;
    let cols = |t: &inferno_core::CountTable| -> Vec<Vec<f64>> {
        t.columns().iter().map(|c| c.as_slice().to_vec()).collect()
    };
    let a: Vec<Vec<Vec<f64>>> = h.a.iter().map(cols).collect();
    let b: Vec<Vec<Vec<f64>>> = h.b.iter().map(cols).collect();
    let d: Vec<Vec<f64>> = h.d.iter().map(|c| c.as_slice().to_vec()).collect();
    let zero = |t: &Vec<Vec<f64>>| -> Vec<Vec<f64>> { t.iter().map(|c| vec![0.0; c.len()]).collect() };
    let terms: Vec<f64> = trajectories(&spec.factor_cards, data.len())
        .iter()
        .map(|tr| {
            let mut na: Vec<Vec<Vec<f64>>> = a.iter().map(zero).collect();
            let mut nb: Vec<Vec<Vec<f64>>> = b.iter().map(zero).collect();
            let mut nd: Vec<Vec<f64>> = d.iter().map(|c| vec![0.0; c.len()]).collect();
            for (t, s) in tr.iter().enumerate() {
                for f in 0..spec.factor_cards.len() {
                    if t == 0 {
                        nd[f][s[f]] += 1.0;
                    } else {
                        let col = b_column(spec, f, &tr[t - 1], data.actions[t - 1]);
                        nb[f][col][s[f]] += 1.0;
                    }
                }
                for m in 0..spec.modality_cards.len() {
                    na[m][a_column(spec, m, s)][data.observations[t][m]] += 1.0;
                }
            }
            let mut total = table_term(&d, &nd);
            for (x, n) in a.iter().zip(&na) {
                total += table_term(x, n);
            }
            for (x, n) in b.iter().zip(&nb) {
                total += table_term(x, n);
            }
            total
        })
        .collect();
    lse(&terms)
}

/// Sequential urn probability of drawing `sequence` from `Dir(alpha)`.
pub fn urn_log_evidence(alpha: &[f64], sequence: &[usize]) -> f64 {
    let mut a = alpha.to_vec();
    let mut total: f64 = a.iter().sum();
    let mut out = 0.0;
    for &x in sequence {
        out += (a[x] / total).ln();
        a[x] += 1.0;
        total += 1.0;
    }
    out
}

/// Per-policy expected free energy terms.
#[derive(Debug, Clone, Copy, Default)]
pub struct EfeTerms {
    pub risk: f64,
    pub ambiguity: f64,
    pub expected_utility: f64,
    pub info_gain: f64,
}

impl EfeTerms {
    pub fn total(&self) -> f64 {
        self.risk + self.ambiguity
    }
}

fn log_softmax(c: &[f64]) -> Vec<f64> {
    let z = lse(c);
    c.iter().map(|x| x - z).collect()
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

/// Expected free energy of `actions` from a product of factor marginals,
/// by summing predicted state probabilities over every path and predicted
/// outcomes over every state.
pub fn efe(model: &GenerativeModel, start: &[Vec<f64>], actions: &[usize], prefs: &[Vec<f64>]) -> EfeTerms {
    let spec = &model.spec;
    let cards = &spec.factor_cards;
    let joint: usize = cards.iter().product();
    let mut q: Vec<f64> = (0..joint)
        .map(|j| {
            let s = mixed_values(cards, j);
            s.iter().enumerate().map(|(f, &x)| start[f][x]).product()
        })
        .collect();
    let mut out = EfeTerms::default();
    for &a in actions {
        let mut next = vec![0.0; joint];
        for (i, &p) in q.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let prev = mixed_values(cards, i);
            for (j, slot) in next.iter_mut().enumerate() {
                let s = mixed_values(cards, j);
                let mut pr = p;
                for f in 0..cards.len() {
                    pr *= model.b[f].columns()[b_column(spec, f, &prev, a)][s[f]];
                }
                *slot += pr;
            }
        }
        q = next;
        for (m, c) in prefs.iter().enumerate() {
            let lp = log_softmax(c);
            let k = spec.modality_cards[m];
            let mut qo = vec![0.0; k];
            let mut ambiguity = 0.0;
            let mut columns = Vec::new();
            for (j, &p) in q.iter().enumerate() {
                let s = mixed_values(cards, j);
                let col = model.a[m].columns()[a_column(spec, m, &s)].as_slice().to_vec();
                for o in 0..k {
                    qo[o] += p * col[o];
                }
                ambiguity += p * entropy(&col);
                columns.push((p, col));
            }
            let mut risk = 0.0;
            let mut eu = 0.0;
            for o in 0..k {
                if qo[o] > 0.0 {
                    risk += qo[o] * (qo[o].ln() - lp[o]);
                    eu += qo[o] * lp[o];
                }
            }
            let mut ig = 0.0;
            for (p, col) in &columns {
                for o in 0..k {
                    if *p > 0.0 && col[o] > 0.0 {
                        ig += p * col[o] * (col[o] / qo[o]).ln();
                    }
                }
            }
            out.risk += risk;
            out.ambiguity += ambiguity;
            out.expected_utility += eu;
            out.info_gain += ig;
        }
    }
    out
}

/// Every action sequence of length `horizon`, lexicographic.
pub fn policies(action_card: usize, horizon: usize) -> Vec<Vec<usize>> {
    let dims = vec![action_card; horizon];
    let n: usize = dims.iter().product();
    (0..n).map(|i| mixed_values(&dims, i)).collect()
}

/// Exact filtered marginals of a single-factor point model after `data`.
pub fn filter_one_factor(model: &GenerativeModel, data: &DataBatch) -> Vec<f64> {
    let k = model.spec.factor_cards[0];
    let mut q: Vec<f64> = model.d[0].as_slice().to_vec();
    for t in 0..data.len() {
        if t > 0 {
            let a = data.actions[t - 1];
            let mut next = vec![0.0; k];
            for (s, &p) in q.iter().enumerate() {
                let col = &model.b[0].columns()[b_column(&model.spec, 0, &[s], a)];
                for (x, slot) in next.iter_mut().enumerate() {
                    *slot += p * col[x];
                }
            }
            q = next;
        }
        for (s, p) in q.iter_mut().enumerate() {
            for m in 0..model.spec.modality_cards.len() {
                *p *= model.a[m].columns()[a_column(&model.spec, m, &[s])][data.observations[t][m]];
            }
        }
        let z: f64 = q.iter().sum();
        q.iter_mut().for_each(|p| *p /= z);
    }
    q
}

/// A random structure with one or two factors and at most `max_card`
/// states each.
pub fn random_spec<R: Rng>(factors: usize, max_card: usize, rng: &mut R) -> StructureSpec {
    let factor_cards: Vec<usize> = (0..factors).map(|_| rng.gen_range(2..=max_card)).collect();
    let modalities = rng.gen_range(1..=2);
    let modality_cards = (0..modalities).map(|_| rng.gen_range(2..=3)).collect();
    let likelihood_edges = (0..modalities)
        .map(|_| {
            let mut e: Vec<usize> = (0..factors).filter(|_| rng.gen_bool(0.5)).collect();
            if e.is_empty() {
                e.push(rng.gen_range(0..factors));
            }
            e
        })
        .collect();
    let action_card = rng.gen_range(1..=2);
    let transitions = (0..factors)
        .map(|f| TransitionEdges {
            action_dependent: action_card > 1 && rng.gen_bool(0.5),
            parents: (0..factors).filter(|&p| p != f && rng.gen_bool(0.3)).collect(),
        })
        .collect();
    StructureSpec {
        label: "random".into(),
        factor_cards,
        modality_cards,
        likelihood_edges,
        transitions,
        action_card,
    }
}

/// Flat hyperparameters with every count redrawn from `[0.2, 3)`.
pub fn random_hyper<R: Rng>(spec: &StructureSpec, rng: &mut R) -> HyperParams {
    let mut h = HyperParams::flat(spec, 1.0).unwrap();
    for c in h.flat_counts_mut() {
        let v = (0..c.dimension()).map(|_| rng.gen_range(0.2..3.0)).collect();
        *c = inferno_core::DirichletCounts::new(v).unwrap();
    }
    h
}

pub fn random_data<R: Rng>(spec: &StructureSpec, steps: usize, rng: &mut R) -> DataBatch {
    let obs = (0..steps)
        .map(|_| spec.modality_cards.iter().map(|&k| rng.gen_range(0..k)).collect())
        .collect();
    let actions = (1..steps).map(|_| rng.gen_range(0..spec.action_card)).collect();
    DataBatch::new(obs, actions).unwrap()
}

pub fn random_simplex<R: Rng>(k: usize, rng: &mut R) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| -rng.gen_range(f64::EPSILON..1.0).ln()).collect();
    let z: f64 = v.iter().sum();
    v.into_iter().map(|x| x / z).collect()
}
