//! Inference about another agent and planning on its harm.
//!
//! Harm is a target's surprise under its own model, bounded by the free
//! energy of its beliefs. The empath holds a finite set of hypotheses about
//! the target, scores them by how well expected-free-energy action selection
//! explains what the target did, and plans to keep the predicted harm close
//! to an exponentially decaying preference.

mod harm;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genmodel::GenerativeModel;
use crate::inference::{infer_states_point, point_free_energy, BeliefState, DataBatch, InferenceConfig};
use crate::planning::{enumerate_policies, evaluate_policies_point, EFEReport, JointBelief, Policy};
use crate::prob::{config_values, entropy_slice, kl_slices, log_softmax, log_sum_exp, softmax, ProbVector};

pub use harm::{HarmBins, HarmEstimate, HarmPreference, DEFAULT_HARM_BINS};

/// Probability given to an action a hypothesis cannot produce.
pub const ACTION_FLOOR: f64 = 1e-12;

/// One candidate account of the target: its model, its preferences and how
/// sharply it minimizes expected free energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OtherAgentHypothesis {
    pub label: String,
    pub model: GenerativeModel,
    pub prefs: Vec<Vec<f64>>,
    pub assumed_temperature: f64,
    pub horizon: usize,
}

impl OtherAgentHypothesis {
    pub fn new(label: impl Into<String>, model: GenerativeModel, prefs: Vec<Vec<f64>>) -> Result<Self> {
        let h = OtherAgentHypothesis {
            label: label.into(),
            model,
            prefs,
            assumed_temperature: 1.0,
            horizon: 1,
        };
        h.check()?;
        Ok(h)
    }

    pub fn check(&self) -> Result<()> {
        let spec = &self.model.spec;
        if self.prefs.len() != spec.modality_count()
            || self.prefs.iter().zip(&spec.modality_cards).any(|(c, &k)| c.len() != k)
        {
            return Err(Error::Shape(format!("preferences of `{}` do not match its model", self.label)));
        }
        if !(self.assumed_temperature > 0.0) || self.horizon == 0 {
            return Err(Error::Domain(format!(
                "`{}` needs a positive temperature and horizon",
                self.label
            )));
        }
        Ok(())
    }

    /// `P(action)` under softmax(−G / temperature) over policies, summed
    /// over policies sharing a first action.
    pub fn action_probabilities(&self, belief: &BeliefState) -> Result<ProbVector> {
        let start = JointBelief::from_marginals(belief.last())?;
        let reports = evaluate_policies_point(
            &self.model,
            &start,
            &self.prefs,
            self.horizon,
            crate::planning::DEFAULT_MAX_POLICIES,
        )?;
        let logits: Vec<f64> = reports.iter().map(|(_, r)| -r.total).collect();
        let p = softmax(&logits, self.assumed_temperature)?;
        let mut out = vec![0.0; self.model.spec.action_card];
        for ((policy, _), &w) in reports.iter().zip(p.as_slice()) {
            out[policy.first()] += w;
        }
        crate::prob::normalize(&out)
    }
}

/// Posterior over hypotheses plus the replayed perception of each.
#[derive(Debug, Clone, PartialEq)]
pub struct PhenotypePosterior {
    pub probs: ProbVector,
    pub log_likelihoods: Vec<f64>,
    /// `traces[i][t]`: hypothesis `i`'s beliefs after the first `t + 1`
    /// observations; empty when the data are impossible under it.
    pub traces: Vec<Vec<BeliefState>>,
}

fn replay(h: &OtherAgentHypothesis, observed: &DataBatch, cfg: &InferenceConfig) -> Result<(f64, Vec<BeliefState>)> {
    let spec = &h.model.spec;
    // Unsupported actions are scored at the floor; perception replays them as
    // action 0 so the remaining steps can still be explained.
    let actions: Vec<usize> = observed
        .actions
        .iter()
        .map(|&a| if a < spec.action_card { a } else { 0 })
        .collect();
    let data = DataBatch::new(observed.observations.clone(), actions)?;
    data.check(spec)?;
    let mut loglik = 0.0;
    let mut trace = Vec::with_capacity(data.len());
    for t in 0..data.len() {
        let belief = match infer_states_point(&h.model, &data.prefix(t + 1), cfg) {
            Ok(b) => b,
            Err(Error::ImpossibleObservation { .. }) => return Ok((f64::NEG_INFINITY, Vec::new())),
            Err(e) => return Err(e),
        };
        if t < observed.actions.len() {
            let a = observed.actions[t];
            let p = if a < spec.action_card {
                h.action_probabilities(&belief)?[a]
            } else {
                0.0
            };
            loglik += p.max(ACTION_FLOOR).ln();
        }
        trace.push(belief);
    }
    Ok((loglik, trace))
}

/// Computational phenotyping: posterior over `hypotheses` given the
/// target's observations and actions, from a uniform prior.
pub fn infer_other(hypotheses: &[OtherAgentHypothesis], observed: &DataBatch) -> Result<PhenotypePosterior> {
    infer_other_with(hypotheses, observed, &InferenceConfig::default())
}

pub fn infer_other_with(
    hypotheses: &[OtherAgentHypothesis],
    observed: &DataBatch,
    cfg: &InferenceConfig,
) -> Result<PhenotypePosterior> {
    if hypotheses.is_empty() {
        return Err(Error::Empty("no hypotheses about the target".into()));
    }
    for h in hypotheses {
        h.check()?;
    }
    let replays: Vec<(f64, Vec<BeliefState>)> = hypotheses
        .par_iter()
        .map(|h| replay(h, observed, cfg))
        .collect::<Result<_>>()?;
    let log_likelihoods: Vec<f64> = replays.iter().map(|(l, _)| *l).collect();
    let probs = if log_sum_exp(&log_likelihoods).is_finite() {
        let lp = log_softmax(&log_likelihoods);
        crate::prob::normalize(&lp.iter().map(|l| l.exp()).collect::<Vec<_>>())?
    } else {
        ProbVector::uniform(hypotheses.len())?
    };
    Ok(PhenotypePosterior {
        probs,
        log_likelihoods,
        traces: replays.into_iter().map(|(_, t)| t).collect(),
    })
}

/// Free energy of the target's beliefs over `data` under `model`: the
/// computable bound on its surprise.
pub fn harm_of(model: &GenerativeModel, data: &DataBatch, cfg: &InferenceConfig) -> Result<f64> {
    match infer_states_point(model, data, cfg) {
        Ok(b) => Ok(point_free_energy(&b, model, data)?.total),
        Err(Error::ImpossibleObservation { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Harm over the last `window` steps of `observed`, mixed over hypotheses
/// with weights `posterior`.
pub fn estimate_harm(
    posterior: &ProbVector,
    hypotheses: &[OtherAgentHypothesis],
    observed: &DataBatch,
    window: usize,
    bins: &HarmBins,
) -> Result<HarmEstimate> {
    if window == 0 || window > observed.len() {
        return Err(Error::Empty(format!(
            "harm window {window} outside 1..={}",
            observed.len()
        )));
    }
    if posterior.dimension() != hypotheses.len() {
        return Err(Error::Shape("posterior and hypothesis counts differ".into()));
    }
    let data = observed.window(observed.len() - window, observed.len())?;
    let harms: Vec<f64> = hypotheses
        .iter()
        .map(|h| harm_of(&h.model, &data, &InferenceConfig::default()))
        .collect::<Result<_>>()?;
    let mut point = 0.0;
    let mut top = bins.upper();
    for (&w, &x) in posterior.as_slice().iter().zip(&harms) {
        if w > 0.0 {
            point += w * x;
            top = top.max(x);
        }
    }
    let bins = bins.covering(top);
    let mut dist = vec![0.0; bins.count()];
    for (&w, &x) in posterior.as_slice().iter().zip(&harms) {
        if w > 0.0 {
            dist[bins.bin_of(x)] += w;
        }
    }
    Ok(HarmEstimate {
        distribution: crate::prob::normalize(&dist)?,
        bins,
        point_estimate: point,
    })
}

/// Distribution over harm bins for every joint state of an empath's model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmModel {
    pub bins: HarmBins,
    pub per_state: Vec<ProbVector>,
}

impl HarmModel {
    pub fn new(bins: HarmBins, per_state: Vec<ProbVector>) -> Result<Self> {
        if per_state.iter().any(|p| p.dimension() != bins.count()) {
            return Err(Error::Shape("harm distributions do not match the bin grid".into()));
        }
        Ok(HarmModel { bins, per_state })
    }

    /// Each joint state deterministically in the bin of its harm value.
    pub fn from_values(bins: HarmBins, harms: &[f64]) -> Result<Self> {
        let per_state = harms.iter().map(|&x| bins.one_hot(x)).collect();
        Self::new(bins, per_state)
    }
}

/// Predicted harm at one future step and the observation channel's
/// uncertainty about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmPrediction {
    pub distribution: ProbVector,
    /// `Σ_m E_bin H[o_m | bin]`.
    pub ambiguity: f64,
    /// `Σ_m I(o_m; bin)`.
    pub info_gain: f64,
}

fn predict_step(model: &GenerativeModel, q: &JointBelief, hm: &HarmModel) -> Result<HarmPrediction> {
    let probs = q.probs();
    if hm.per_state.len() != probs.len() {
        return Err(Error::Shape(format!(
            "harm model covers {} states, the model has {}",
            hm.per_state.len(),
            probs.len()
        )));
    }
    let nb = hm.bins.count();
    let mut q_h = vec![0.0; nb];
    for (p, h) in probs.iter().zip(&hm.per_state) {
        for (b, &x) in h.as_slice().iter().enumerate() {
            q_h[b] += p * x;
        }
    }
    let cards = &model.spec.factor_cards;
    let mut ambiguity = 0.0;
    let mut info_gain = 0.0;
    for (m, &k) in model.spec.modality_cards.iter().enumerate() {
        // Joint of harm bin and outcome.
        let mut joint = vec![vec![0.0; k]; nb];
        for (j, (&p, h)) in probs.iter().zip(&hm.per_state).enumerate() {
            if p == 0.0 {
                continue;
            }
            let col = model.likelihood_column(m, &config_values(cards, j));
            for (b, &hb) in h.as_slice().iter().enumerate() {
                for (o, &x) in col.as_slice().iter().enumerate() {
                    joint[b][o] += p * hb * x;
                }
            }
        }
        let mut q_o = vec![0.0; k];
        let mut conditional = 0.0;
        for (b, row) in joint.iter().enumerate() {
            for (o, &x) in row.iter().enumerate() {
                q_o[o] += x;
            }
            if q_h[b] > 0.0 {
                let cond: Vec<f64> = row.iter().map(|x| x / q_h[b]).collect();
                conditional += q_h[b] * entropy_slice(&cond);
            }
        }
        ambiguity += conditional;
        info_gain += (entropy_slice(&q_o) - conditional).max(0.0);
    }
    Ok(HarmPrediction {
        distribution: crate::prob::normalize(&q_h)?,
        ambiguity,
        info_gain,
    })
}

/// Harm predictions for every step of `policy`.
pub fn predict_harm(
    model: &GenerativeModel,
    start: &JointBelief,
    policy: &Policy,
    harm_model: &HarmModel,
) -> Result<Vec<HarmPrediction>> {
    let mut q = start.clone();
    policy
        .actions
        .iter()
        .map(|&a| {
            q = q.propagate(model, a);
            predict_step(model, &q, harm_model)
        })
        .collect()
}

/// First-Law terms for one step over several targets with factorized
/// preferences: risk is the sum of per-target KL divergences from the
/// preferred harm distribution, ambiguity the sum of per-target
/// ambiguities.
///
/// `expected_utility` is the expected log preference over harm bins and
/// `info_gain` the mutual information between harm bins and outcomes.
pub fn multi_target_first_law(predictions: &[HarmPrediction], prefs: &[HarmPreference]) -> Result<EFEReport> {
    if predictions.is_empty() || predictions.len() != prefs.len() {
        return Err(Error::Shape("need one preference per target and at least one target".into()));
    }
    let grid = &prefs[0].bins;
    if prefs.iter().any(|p| p.bins != *grid) {
        return Err(Error::Shape("targets use different harm bin grids".into()));
    }
    let mut out = EFEReport {
        risk: 0.0,
        ambiguity: 0.0,
        expected_utility: 0.0,
        info_gain: 0.0,
        total: 0.0,
    };
    for (pred, pref) in predictions.iter().zip(prefs) {
        if pred.distribution.dimension() != pref.log_probs.len() {
            return Err(Error::Shape("harm prediction does not match its bin grid".into()));
        }
        let q = pred.distribution.as_slice();
        let p: Vec<f64> = pref.log_probs.iter().map(|l| l.exp()).collect();
        out.risk += kl_slices(q, &p);
        out.ambiguity += pred.ambiguity;
        out.expected_utility += q
            .iter()
            .zip(&pref.log_probs)
            .filter(|(&x, _)| x > 0.0)
            .map(|(x, l)| x * l)
            .sum::<f64>();
        out.info_gain += pred.info_gain;
    }
    out.total = out.risk + out.ambiguity;
    Ok(out)
}

/// First-Law expected free energy of `policy` over several targets.
pub fn first_law_efe_multi(
    model: &GenerativeModel,
    start: &JointBelief,
    policy: &Policy,
    harm_models: &[HarmModel],
    prefs: &[HarmPreference],
) -> Result<EFEReport> {
    if harm_models.len() != prefs.len() {
        return Err(Error::Shape("need one preference per harm model".into()));
    }
    for (hm, p) in harm_models.iter().zip(prefs) {
        if hm.bins != p.bins {
            return Err(Error::Shape("harm model and preference use different bins".into()));
        }
    }
    let per_target: Vec<Vec<HarmPrediction>> = harm_models
        .iter()
        .map(|hm| predict_harm(model, start, policy, hm))
        .collect::<Result<_>>()?;
    let mut total = EFEReport {
        risk: 0.0,
        ambiguity: 0.0,
        expected_utility: 0.0,
        info_gain: 0.0,
        total: 0.0,
    };
    for tau in 0..policy.horizon() {
        let preds: Vec<HarmPrediction> = per_target.iter().map(|p| p[tau].clone()).collect();
        let r = multi_target_first_law(&preds, prefs)?;
        total.risk += r.risk;
        total.ambiguity += r.ambiguity;
        total.expected_utility += r.expected_utility;
        total.info_gain += r.info_gain;
        total.total += r.total;
    }
    Ok(total)
}

/// First-Law expected free energy of `policy` for one target.
pub fn first_law_efe(
    model: &GenerativeModel,
    start: &JointBelief,
    policy: &Policy,
    harm_model: &HarmModel,
    pref: &HarmPreference,
) -> Result<EFEReport> {
    first_law_efe_multi(
        model,
        start,
        policy,
        std::slice::from_ref(harm_model),
        std::slice::from_ref(pref),
    )
}

/// First-Law reports for every policy of length `horizon`, lexicographic.
pub fn evaluate_first_law_policies(
    model: &GenerativeModel,
    start: &JointBelief,
    harm_models: &[HarmModel],
    prefs: &[HarmPreference],
    horizon: usize,
    max_policies: usize,
) -> Result<Vec<(Policy, EFEReport)>> {
    let policies = enumerate_policies(model.spec.action_card, horizon, max_policies)?;
    policies
        .into_par_iter()
        .map(|p| {
            let r = first_law_efe_multi(model, start, &p, harm_models, prefs)?;
            Ok((p, r))
        })
        .collect()
}

/// One step of an episode used for auxiliary preference learning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxStep {
    /// One outcome per auxiliary modality.
    pub outcomes: Vec<usize>,
    /// Harm the target was under at this step (nats).
    pub harm: f64,
}

/// Update auxiliary preference log-probabilities from how often each
/// outcome accompanied below-average target harm.
///
/// For outcome `o` seen `n(o)` times, `k(o)` of them with harm strictly
/// below the mean over all steps, the log-preference moves by
/// `rate · ln((k(o) + ½) / (n(o) + 1))` and each table is renormalized.
/// Outcomes never seen move by `rate · ln ½`, the same as an outcome with no
/// association either way.
pub fn learn_auxiliary_preferences(aux: &[Vec<f64>], episodes: &[Vec<AuxStep>], rate: f64) -> Result<Vec<Vec<f64>>> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Domain(format!("learning rate {rate} outside [0, 1]")));
    }
    let steps: Vec<&AuxStep> = episodes.iter().flatten().collect();
    if rate == 0.0 || steps.is_empty() {
        return Ok(aux.to_vec());
    }
    if steps.iter().any(|s| s.outcomes.len() != aux.len()) {
        return Err(Error::Shape("auxiliary outcomes do not match the preference tables".into()));
    }
    if steps.iter().any(|s| s.harm.is_nan()) {
        return Err(Error::Numeric("harm values must not be NaN".into()));
    }
    // Harm often takes a handful of discrete values, which puts the median
    // on a tie; the mean separates them.
    let mean = steps.iter().map(|s| s.harm).sum::<f64>() / steps.len() as f64;
    aux.iter()
        .enumerate()
        .map(|(m, c)| {
            let mut seen = vec![0.0f64; c.len()];
            let mut low = vec![0.0f64; c.len()];
            for s in &steps {
                let o = s.outcomes[m];
                if o >= c.len() {
                    return Err(Error::Shape(format!("auxiliary outcome {o} out of range")));
                }
                seen[o] += 1.0;
                if s.harm < mean {
                    low[o] += 1.0;
                }
            }
            let logits: Vec<f64> = c
                .iter()
                .zip(seen.iter().zip(&low))
                .map(|(x, (n, k))| x + rate * ((k + 0.5) / (n + 1.0)).ln())
                .collect();
            Ok(log_softmax(&logits))
        })
        .collect()
}

#[cfg(test)]
mod tests;
