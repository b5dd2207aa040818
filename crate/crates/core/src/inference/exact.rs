//! Exact enumeration oracles.
//!
//! These are the ground truth the variational machinery is checked against:
//! a sequential Dirichlet-categorical predictive summed over every joint
//! state trajectory, and forward-backward over the joint factor space for
//! point-valued models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genmodel::{transition_parent_values, GenerativeModel, HyperParams, StructureSpec};
use crate::inference::chain::{chain_entropy, forward_backward, normalized};
use crate::inference::params::wlog;
use crate::inference::{BeliefState, DataBatch};
use crate::prob::{config_index, config_values, ProbVector};

/// Size limits for the exact oracles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleBounds {
    /// Maximum number of joint state trajectories summed by
    /// [`exact_log_evidence`].
    pub trajectories: f64,
    /// Maximum size of the joint state space for forward-backward.
    pub joint_states: usize,
}

impl Default for OracleBounds {
    fn default() -> Self {
        OracleBounds {
            trajectories: 1e6,
            joint_states: 4096,
        }
    }
}

struct Joint {
    states: Vec<Vec<usize>>,
}

impl Joint {
    fn new(spec: &StructureSpec, bound: usize) -> Result<Self> {
        let n = spec
            .factor_cards
            .iter()
            .map(|&k| k as f64)
            .product::<f64>();
        if n > bound as f64 {
            return Err(Error::OracleTooLarge {
                required: n,
                bound: bound as f64,
            });
        }
        let n = n as usize;
        Ok(Joint {
            states: (0..n).map(|j| config_values(&spec.factor_cards, j)).collect(),
        })
    }
}

/// Mutable Dirichlet counts with running column totals.
struct Urn {
    a: Vec<Vec<Vec<f64>>>,
    b: Vec<Vec<Vec<f64>>>,
    d: Vec<Vec<f64>>,
    a_tot: Vec<Vec<f64>>,
    b_tot: Vec<Vec<f64>>,
    d_tot: Vec<f64>,
}

impl Urn {
    fn new(h: &HyperParams) -> Self {
        let cols = |t: &crate::prob::CountTable| -> Vec<Vec<f64>> {
            t.columns().iter().map(|c| c.as_slice().to_vec()).collect()
        };
        let a: Vec<_> = h.a.iter().map(cols).collect();
        let b: Vec<_> = h.b.iter().map(cols).collect();
        let d: Vec<Vec<f64>> = h.d.iter().map(|c| c.as_slice().to_vec()).collect();
        let tot = |t: &Vec<Vec<f64>>| t.iter().map(|c| c.iter().sum()).collect::<Vec<f64>>();
        Urn {
            a_tot: a.iter().map(tot).collect(),
            b_tot: b.iter().map(tot).collect(),
            d_tot: d.iter().map(|c| c.iter().sum()).collect(),
            a,
            b,
            d,
        }
    }
}

/// Which column and child each table uses at one step of a trajectory.
#[derive(Clone, Copy)]
enum Draw {
    A(usize, usize, usize),
    B(usize, usize, usize),
    D(usize, usize),
}

fn draw(urn: &mut Urn, d: Draw, delta: f64) -> f64 {
    let (count, total) = match d {
        Draw::A(m, c, x) => (&mut urn.a[m][c][x], &mut urn.a_tot[m][c]),
        Draw::B(f, c, x) => (&mut urn.b[f][c][x], &mut urn.b_tot[f][c]),
        Draw::D(f, x) => (&mut urn.d[f][x], &mut urn.d_tot[f]),
    };
    let p = *count / *total;
    *count += delta;
    *total += delta;
    p
}

/// `ln P(d | h)` with parameters integrated out exactly, using the default
/// [`OracleBounds`].
pub fn exact_log_evidence(h: &HyperParams, data: &DataBatch) -> Result<f64> {
    exact_log_evidence_within(h, data, &OracleBounds::default())
}

/// `ln P(d | h)` by summing the sequential Pólya-urn predictive probability
/// of every joint state trajectory.
pub fn exact_log_evidence_within(h: &HyperParams, data: &DataBatch, bounds: &OracleBounds) -> Result<f64> {
    let spec = &h.spec;
    h.check()?;
    data.check(spec)?;
    let per_step: f64 = spec.factor_cards.iter().map(|&k| k as f64).product();
    let required = per_step.powi(data.len() as i32);
    if required > bounds.trajectories {
        return Err(Error::OracleTooLarge {
            required,
            bound: bounds.trajectories,
        });
    }
    let joint = Joint::new(spec, usize::MAX)?;
    let a_dims: Vec<Vec<usize>> = (0..spec.modality_count())
        .map(|m| spec.likelihood_parent_dims(m))
        .collect();
    let b_dims: Vec<Vec<usize>> = (0..spec.factor_count())
        .map(|f| spec.transition_parent_dims(f))
        .collect();
    let mut urn = Urn::new(h);
    let mut acc = LogAccumulator::default();
    let mut draws = Vec::with_capacity(spec.factor_count() + spec.modality_count());

    struct Ctx<'a> {
        spec: &'a StructureSpec,
        data: &'a DataBatch,
        joint: &'a Joint,
        a_dims: &'a [Vec<usize>],
        b_dims: &'a [Vec<usize>],
    }

    fn step_draws(ctx: &Ctx<'_>, t: usize, prev: Option<usize>, s: usize, out: &mut Vec<Draw>) {
        out.clear();
        let state = &ctx.joint.states[s];
        for f in 0..ctx.spec.factor_count() {
            match prev {
                None => out.push(Draw::D(f, state[f])),
                Some(p) => {
                    let pv = transition_parent_values(
                        ctx.spec,
                        f,
                        &ctx.joint.states[p],
                        ctx.data.actions[t - 1],
                    );
                    out.push(Draw::B(f, config_index(&ctx.b_dims[f], &pv), state[f]));
                }
            }
        }
        for m in 0..ctx.spec.modality_count() {
            let pv: Vec<usize> = ctx.spec.likelihood_edges[m].iter().map(|&f| state[f]).collect();
            out.push(Draw::A(m, config_index(&ctx.a_dims[m], &pv), ctx.data.observations[t][m]));
        }
    }

    fn recurse(
        ctx: &Ctx<'_>,
        urn: &mut Urn,
        draws: &mut Vec<Draw>,
        t: usize,
        prev: Option<usize>,
        logp: f64,
        acc: &mut LogAccumulator,
    ) {
        if t == ctx.data.len() {
            acc.add(logp);
            return;
        }
        for s in 0..ctx.joint.states.len() {
            step_draws(ctx, t, prev, s, draws);
            let mine = draws.clone();
            let mut lp = logp;
            for &d in &mine {
                lp += draw(urn, d, 1.0).ln();
            }
            recurse(ctx, urn, draws, t + 1, Some(s), lp, acc);
            for &d in mine.iter().rev() {
                draw(urn, d, -1.0);
            }
        }
    }

    let ctx = Ctx {
        spec,
        data,
        joint: &joint,
        a_dims: &a_dims,
        b_dims: &b_dims,
    };
    recurse(&ctx, &mut urn, &mut draws, 0, None, 0.0, &mut acc);
    Ok(acc.value())
}

/// Streaming `ln Σ exp(xᵢ)`.
#[derive(Default)]
struct LogAccumulator {
    max: Option<f64>,
    sum: f64,
}

impl LogAccumulator {
    fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        match self.max {
            None => {
                self.max = Some(x);
                self.sum = 1.0;
            }
            Some(m) if x <= m => self.sum += (x - m).exp(),
            Some(m) => {
                self.sum = self.sum * (m - x).exp() + 1.0;
                self.max = Some(x);
            }
        }
    }

    fn value(&self) -> f64 {
        match self.max {
            None => f64::NEG_INFINITY,
            Some(m) => m + self.sum.ln(),
        }
    }
}

/// Joint-space log potentials of a point model: `unary[t][s]` (emission,
/// plus the initial distribution at `t = 0`) and `pair[t][s * n + s']`.
struct JointPotentials {
    joint: Joint,
    emission: Vec<Vec<f64>>,
    initial: Vec<f64>,
    pair: Vec<Vec<f64>>,
}

fn joint_potentials(model: &GenerativeModel, data: &DataBatch, bounds: &OracleBounds) -> Result<JointPotentials> {
    let spec = &model.spec;
    data.check(spec)?;
    let joint = Joint::new(spec, bounds.joint_states)?;
    let n = joint.states.len();
    let emission: Vec<Vec<f64>> = data
        .observations
        .iter()
        .map(|obs| {
            joint
                .states
                .iter()
                .map(|s| {
                    (0..spec.modality_count())
                        .map(|m| model.likelihood_column(m, s)[obs[m]].ln())
                        .sum()
                })
                .collect()
        })
        .collect();
    let initial: Vec<f64> = joint
        .states
        .iter()
        .map(|s| (0..spec.factor_count()).map(|f| model.d[f][s[f]].ln()).sum())
        .collect();
    let mut by_action: Vec<Option<Vec<f64>>> = vec![None; spec.action_card];
    let mut pair = Vec::with_capacity(data.actions.len());
    for &a in &data.actions {
        if by_action[a].is_none() {
            let mut m = vec![0.0; n * n];
            for (i, prev) in joint.states.iter().enumerate() {
                let cols: Vec<&ProbVector> = (0..spec.factor_count())
                    .map(|f| model.transition_column(f, prev, a))
                    .collect();
                for (j, next) in joint.states.iter().enumerate() {
                    m[i * n + j] = cols.iter().zip(next).map(|(c, &x)| c[x].ln()).sum();
                }
            }
            by_action[a] = Some(m);
        }
        pair.push(by_action[a].clone().unwrap_or_default());
    }
    Ok(JointPotentials {
        joint,
        emission,
        initial,
        pair,
    })
}

fn joint_unary(p: &JointPotentials) -> Vec<Vec<f64>> {
    let mut u = p.emission.clone();
    for (x, i) in u[0].iter_mut().zip(&p.initial) {
        *x += i;
    }
    u
}

/// `ln P(d | θ)` for a point model by the forward algorithm over the joint
/// state space.
pub fn exact_point_log_evidence(model: &GenerativeModel, data: &DataBatch) -> Result<f64> {
    let p = joint_potentials(model, data, &OracleBounds::default())?;
    match forward_backward(&joint_unary(&p), &p.pair) {
        Ok(post) => Ok(post.log_partition),
        Err(Error::ImpossibleObservation { .. }) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// Smoothed marginals `P(s_t | o_{1:T}, a)` per factor, with per-factor
/// adjacent pairwise marginals, by forward-backward over the joint space.
pub fn exact_state_posterior(model: &GenerativeModel, data: &DataBatch) -> Result<BeliefState> {
    let spec = &model.spec;
    let p = joint_potentials(model, data, &OracleBounds::default())?;
    let post = forward_backward(&joint_unary(&p), &p.pair)?;
    let marginals = post
        .marginals
        .iter()
        .map(|g| {
            (0..spec.factor_count())
                .map(|f| {
                    let mut v = vec![0.0; spec.factor_cards[f]];
                    for (s, &w) in p.joint.states.iter().zip(g) {
                        v[s[f]] += w;
                    }
                    ProbVector::from_raw_unchecked(normalized(v))
                })
                .collect()
        })
        .collect();
    let n = p.joint.states.len();
    let pairwise = post
        .pairwise
        .iter()
        .map(|xi| {
            (0..spec.factor_count())
                .map(|f| {
                    let k = spec.factor_cards[f];
                    let mut v = vec![0.0; k * k];
                    for i in 0..n {
                        for j in 0..n {
                            let w = xi[i * n + j];
                            if w > 0.0 {
                                v[p.joint.states[i][f] * k + p.joint.states[j][f]] += w;
                            }
                        }
                    }
                    normalized(v)
                })
                .collect()
        })
        .collect();
    Ok(BeliefState {
        marginals,
        pairwise,
        converged: true,
        iterations: 0,
        final_free_energy: -post.log_partition,
    })
}

/// Accuracy and complexity of the exact posterior of a point model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceDecomposition {
    pub log_evidence: f64,
    /// `E_post[ln P(o | s)]`.
    pub accuracy: f64,
    /// `KL[P(s | o) ‖ P(s)]`.
    pub complexity: f64,
}

/// Split the exact log evidence into accuracy and complexity, each computed
/// from the joint posterior independently of the evidence itself.
pub fn exact_evidence_decomposition(model: &GenerativeModel, data: &DataBatch) -> Result<EvidenceDecomposition> {
    let p = joint_potentials(model, data, &OracleBounds::default())?;
    let post = forward_backward(&joint_unary(&p), &p.pair)?;
    let mut accuracy = 0.0;
    for (g, e) in post.marginals.iter().zip(&p.emission) {
        accuracy += g.iter().zip(e).map(|(&w, &l)| wlog(w, l)).sum::<f64>();
    }
    let mut cross = post.marginals[0]
        .iter()
        .zip(&p.initial)
        .map(|(&w, &l)| wlog(w, l))
        .sum::<f64>();
    for (xi, pair) in post.pairwise.iter().zip(&p.pair) {
        cross += xi.iter().zip(pair).map(|(&w, &l)| wlog(w, l)).sum::<f64>();
    }
    let m: Vec<&[f64]> = post.marginals.iter().map(Vec::as_slice).collect();
    let x: Vec<&[f64]> = post.pairwise.iter().map(Vec::as_slice).collect();
    let complexity = -chain_entropy(&m, &x) - cross;
    Ok(EvidenceDecomposition {
        log_evidence: post.log_partition,
        accuracy,
        complexity,
    })
}
