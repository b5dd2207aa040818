//! Expected free energy of action sequences.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genmodel::{GenerativeModel, HyperParams};
use crate::inference::BeliefState;
use crate::prob::{config_count, config_values, entropy_slice, log_softmax, ProbVector};

/// Default cap on `action_card^horizon`.
pub const DEFAULT_MAX_POLICIES: usize = 4096;

/// Largest joint state space the planner will roll forward.
pub const MAX_JOINT_STATES: usize = 4096;

/// A fixed sequence of actions, one per future step.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Policy {
    pub actions: Vec<usize>,
}

impl Policy {
    pub fn new(actions: Vec<usize>, action_card: usize) -> Result<Self> {
        if actions.is_empty() {
            return Err(Error::Domain("policy horizon must be at least 1".into()));
        }
        if let Some(a) = actions.iter().find(|&&a| a >= action_card) {
            return Err(Error::Domain(format!("action {a} out of range for {action_card} actions")));
        }
        Ok(Policy { actions })
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn first(&self) -> usize {
        self.actions[0]
    }
}

/// Expected free energy of one policy, summed over its horizon.
///
/// `total = risk + ambiguity`, and with risk measured against the
/// normalized preferences it also equals `−expected_utility − info_gain`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EFEReport {
    pub risk: f64,
    pub ambiguity: f64,
    pub expected_utility: f64,
    pub info_gain: f64,
    pub total: f64,
}

impl EFEReport {
    pub(crate) fn zero() -> Self {
        EFEReport {
            risk: 0.0,
            ambiguity: 0.0,
            expected_utility: 0.0,
            info_gain: 0.0,
            total: 0.0,
        }
    }

    pub(crate) fn add(&mut self, other: &EFEReport) {
        self.risk += other.risk;
        self.ambiguity += other.ambiguity;
        self.expected_utility += other.expected_utility;
        self.info_gain += other.info_gain;
        self.total += other.total;
    }
}

/// Distribution over joint states of a model, first factor most
/// significant.
#[derive(Debug, Clone, PartialEq)]
pub struct JointBelief {
    pub(crate) cards: Vec<usize>,
    pub(crate) probs: Vec<f64>,
}

impl JointBelief {
    /// Product of per-factor marginals.
    pub fn from_marginals(marginals: &[ProbVector]) -> Result<Self> {
        let cards: Vec<usize> = marginals.iter().map(ProbVector::dimension).collect();
        let n = config_count(&cards);
        if n > MAX_JOINT_STATES {
            return Err(Error::PlannerTooLarge {
                required: n as f64,
                bound: MAX_JOINT_STATES,
            });
        }
        let probs = (0..n)
            .map(|j| {
                config_values(&cards, j)
                    .iter()
                    .zip(marginals)
                    .map(|(&v, p)| p[v])
                    .product()
            })
            .collect();
        Ok(JointBelief { cards, probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// The model's initial state distribution.
    pub fn initial(model: &GenerativeModel) -> Result<Self> {
        Self::from_marginals(&model.d)
    }

    /// Per-factor marginals.
    pub fn marginals(&self) -> Vec<ProbVector> {
        let mut out: Vec<Vec<f64>> = self.cards.iter().map(|&k| vec![0.0; k]).collect();
        for (j, &p) in self.probs.iter().enumerate() {
            for (f, v) in config_values(&self.cards, j).into_iter().enumerate() {
                out[f][v] += p;
            }
        }
        out.into_iter().map(ProbVector::from_raw_unchecked).collect()
    }

    /// Bayes update on one observation per modality. Returns the posterior
    /// and `ln P(observation)` under this belief.
    pub fn condition(&self, model: &GenerativeModel, observation: &[usize]) -> Result<(JointBelief, f64)> {
        if observation.len() != model.spec.modality_cards.len()
            || observation.iter().zip(&model.spec.modality_cards).any(|(&o, &k)| o >= k)
        {
            return Err(Error::Shape("observation does not match the modalities".into()));
        }
        let mut post: Vec<f64> = self
            .probs
            .iter()
            .enumerate()
            .map(|(j, &p)| {
                if p == 0.0 {
                    return 0.0;
                }
                let state = config_values(&self.cards, j);
                observation
                    .iter()
                    .enumerate()
                    .map(|(m, &o)| model.likelihood_column(m, &state)[o])
                    .product::<f64>()
                    * p
            })
            .collect();
        let evidence: f64 = post.iter().sum();
        if !(evidence > 0.0) {
            return Err(Error::ImpossibleObservation { step: 0 });
        }
        post.iter_mut().for_each(|x| *x /= evidence);
        Ok((
            JointBelief {
                cards: self.cards.clone(),
                probs: post,
            },
            evidence.ln(),
        ))
    }

    /// One step of the transition model under `action`.
    pub fn propagate(&self, model: &GenerativeModel, action: usize) -> JointBelief {
        let n = self.probs.len();
        let mut next = vec![0.0; n];
        for (j, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let prev = config_values(&self.cards, j);
            let cols: Vec<&[f64]> = (0..self.cards.len())
                .map(|f| model.transition_column(f, &prev, action).as_slice())
                .collect();
            for (k, slot) in next.iter_mut().enumerate() {
                let vals = config_values(&self.cards, k);
                let t: f64 = vals.iter().zip(&cols).map(|(&v, c)| c[v]).product();
                *slot += p * t;
            }
        }
        JointBelief {
            cards: self.cards.clone(),
            probs: next,
        }
    }
}

/// Risk, ambiguity and their duals for a single predicted state
/// distribution, summed over modalities.
pub(crate) fn step_terms(model: &GenerativeModel, q: &JointBelief, log_prefs: &[Vec<f64>]) -> EFEReport {
    let mut out = EFEReport::zero();
    for (m, lp) in log_prefs.iter().enumerate() {
        let mut qo = vec![0.0; lp.len()];
        let mut ambiguity = 0.0;
        for (j, &p) in q.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let s = config_values(&q.cards, j);
            let col = model.likelihood_column(m, &s).as_slice();
            for (o, &x) in col.iter().enumerate() {
                qo[o] += p * x;
            }
            ambiguity += p * entropy_slice(col);
        }
        let h_o = entropy_slice(&qo);
        let eu: f64 = qo.iter().zip(lp).filter(|(&x, _)| x > 0.0).map(|(x, l)| x * l).sum();
        let risk = -h_o - eu;
        out.add(&EFEReport {
            risk,
            ambiguity,
            expected_utility: eu,
            info_gain: (h_o - ambiguity).max(0.0),
            total: risk + ambiguity,
        });
    }
    out
}

fn check_prefs(model: &GenerativeModel, prefs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if prefs.len() != model.spec.modality_count()
        || prefs.iter().zip(&model.spec.modality_cards).any(|(c, &k)| c.len() != k)
    {
        return Err(Error::Shape("preference tables do not match modalities".into()));
    }
    if prefs.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("preferences must be finite".into()));
    }
    Ok(prefs.iter().map(|c| log_softmax(c)).collect())
}

fn efe_from(model: &GenerativeModel, start: &JointBelief, actions: &[usize], log_prefs: &[Vec<f64>]) -> EFEReport {
    let mut q = start.clone();
    let mut total = EFEReport::zero();
    for &a in actions {
        q = q.propagate(model, a);
        total.add(&step_terms(model, &q, log_prefs));
    }
    total
}

/// Expected free energy of `policy` under a point-valued model, starting
/// from the joint state belief `start`.
pub fn expected_free_energy_point(
    model: &GenerativeModel,
    start: &JointBelief,
    policy: &Policy,
    prefs: &[Vec<f64>],
) -> Result<EFEReport> {
    if policy.actions.is_empty() {
        return Err(Error::Domain("policy horizon must be at least 1".into()));
    }
    if let Some(a) = policy.actions.iter().find(|&&a| a >= model.spec.action_card) {
        return Err(Error::Domain(format!("action {a} out of range")));
    }
    let log_prefs = check_prefs(model, prefs)?;
    Ok(efe_from(model, start, &policy.actions, &log_prefs))
}

/// Expected free energy of `policy` under the expected model of `h`, from
/// the last step of `belief`.
pub fn expected_free_energy(
    h: &HyperParams,
    belief: &BeliefState,
    policy: &Policy,
    prefs: &[Vec<f64>],
) -> Result<EFEReport> {
    let model = h.expected_model()?;
    let start = JointBelief::from_marginals(belief.last())?;
    expected_free_energy_point(&model, &start, policy, prefs)
}

/// Every action sequence of length `horizon`, lexicographic.
pub fn enumerate_policies(action_card: usize, horizon: usize, max_policies: usize) -> Result<Vec<Policy>> {
    if horizon == 0 {
        return Err(Error::Domain("policy horizon must be at least 1".into()));
    }
    let required = (action_card as f64).powi(horizon as i32);
    if required > max_policies as f64 {
        return Err(Error::PlannerTooLarge {
            required,
            bound: max_policies,
        });
    }
    let dims = vec![action_card; horizon];
    Ok((0..config_count(&dims))
        .map(|i| Policy {
            actions: config_values(&dims, i),
        })
        .collect())
}

/// Reports for every policy, in lexicographic policy order.
pub fn evaluate_policies_point(
    model: &GenerativeModel,
    start: &JointBelief,
    prefs: &[Vec<f64>],
    horizon: usize,
    max_policies: usize,
) -> Result<Vec<(Policy, EFEReport)>> {
    let policies = enumerate_policies(model.spec.action_card, horizon, max_policies)?;
    let log_prefs = check_prefs(model, prefs)?;
    Ok(policies
        .into_par_iter()
        .map(|p| {
            let r = efe_from(model, start, &p.actions, &log_prefs);
            (p, r)
        })
        .collect())
}

/// [`evaluate_policies_point`] under the expected model of `h`, capped at
/// [`DEFAULT_MAX_POLICIES`].
pub fn evaluate_policies(
    h: &HyperParams,
    belief: &BeliefState,
    prefs: &[Vec<f64>],
    horizon: usize,
) -> Result<Vec<(Policy, EFEReport)>> {
    let model = h.expected_model()?;
    let start = JointBelief::from_marginals(belief.last())?;
    evaluate_policies_point(&model, &start, prefs, horizon, DEFAULT_MAX_POLICIES)
}
