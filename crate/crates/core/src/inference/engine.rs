//! Structured mean-field state inference, Dirichlet learning and the
//! variational free energy.
//!
//! Each factor's trajectory is an exact Markov chain; factors are
//! independent of each other. A sweep updates factors in ascending index
//! order, each by forward-backward on its chain given the others, so every
//! update is an exact coordinate step and the free energy cannot increase.

use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};
use crate::genmodel::{GenerativeModel, HyperParams, StructureSpec};
use crate::inference::chain::{chain_entropy, forward_backward};
use crate::inference::params::{
    check_beliefs, expected_counts_tables, expected_log_joint, factor_potentials, Layout, Tables,
};
use crate::inference::{BeliefState, DataBatch, FreeEnergyReport, InferenceConfig};
use crate::prob::{dirichlet_kl, DirichletCounts, ProbVector};

fn uniform_beliefs(spec: &StructureSpec, steps: usize) -> BeliefState {
    let row: Vec<ProbVector> = spec
        .factor_cards
        .iter()
        .map(|&k| ProbVector::from_raw_unchecked(vec![1.0 / k as f64; k]))
        .collect();
    BeliefState::from_marginals(vec![row; steps])
}

/// Reuse `init` where its shape fits; extra steps start uniform.
fn initial_beliefs(spec: &StructureSpec, steps: usize, init: Option<&BeliefState>) -> BeliefState {
    let Some(init) = init else { return uniform_beliefs(spec, steps) };
    let fits = |row: &Vec<ProbVector>| {
        row.len() == spec.factor_count()
            && row.iter().zip(&spec.factor_cards).all(|(p, &k)| p.dimension() == k)
    };
    if !init.marginals.iter().all(fits) {
        return uniform_beliefs(spec, steps);
    }
    if init.marginals.len() == steps {
        return init.clone();
    }
    let mut b = uniform_beliefs(spec, steps);
    let n = init.marginals.len().min(steps);
    b.marginals[..n].clone_from_slice(&init.marginals[..n]);
    let np = init.pairwise.len().min(n.saturating_sub(1));
    b.pairwise[..np].clone_from_slice(&init.pairwise[..np]);
    // Re-derive independent pairwise joints at the seam.
    for t in np..steps.saturating_sub(1) {
        for f in 0..spec.factor_count() {
            let p = b.marginals[t][f].as_slice();
            let q = b.marginals[t + 1][f].as_slice();
            b.pairwise[t][f] = p.iter().flat_map(|&x| q.iter().map(move |&y| x * y)).collect();
        }
    }
    b
}

fn entropy_of(spec: &StructureSpec, beliefs: &BeliefState) -> f64 {
    (0..spec.factor_count())
        .map(|f| {
            let m: Vec<&[f64]> = beliefs.marginals.iter().map(|r| r[f].as_slice()).collect();
            let p: Vec<&[f64]> = beliefs.pairwise.iter().map(|r| r[f].as_slice()).collect();
            chain_entropy(&m, &p)
        })
        .sum()
}

/// `(accuracy, complexity_states)` of `beliefs` under log parameters.
fn state_terms(
    spec: &StructureSpec,
    layout: &Layout,
    lp: &Tables,
    beliefs: &BeliefState,
    data: &DataBatch,
) -> (f64, f64) {
    let (accuracy, prior) = expected_log_joint(spec, layout, lp, beliefs, data);
    (accuracy, -entropy_of(spec, beliefs) - prior)
}

fn sweep(
    spec: &StructureSpec,
    layout: &Layout,
    lp: &Tables,
    data: &DataBatch,
    cfg: &InferenceConfig,
    mut beliefs: BeliefState,
    mut on_sweep: impl FnMut(f64),
) -> Result<BeliefState> {
    let steps = data.len();
    beliefs.converged = false;
    for iter in 1..=cfg.max_iters.max(1) {
        let mut change: f64 = 0.0;
        for f in 0..spec.factor_count() {
            let (unary, pair) = factor_potentials(spec, layout, lp, &beliefs, data, f);
            let post = forward_backward(&unary, &pair)?;
            for t in 0..steps {
                let old = beliefs.marginals[t][f].as_slice();
                for (a, b) in old.iter().zip(&post.marginals[t]) {
                    change = change.max((a - b).abs());
                }
            }
            for (t, m) in post.marginals.into_iter().enumerate() {
                beliefs.marginals[t][f] = ProbVector::from_raw_unchecked(m);
            }
            for (t, p) in post.pairwise.into_iter().enumerate() {
                beliefs.pairwise[t][f] = p;
            }
        }
        let (acc, cs) = state_terms(spec, layout, lp, &beliefs, data);
        beliefs.final_free_energy = cs - acc;
        beliefs.iterations = iter;
        on_sweep(beliefs.final_free_energy);
        if change < cfg.tol {
            beliefs.converged = true;
            break;
        }
    }
    Ok(beliefs)
}

/// Beliefs under Dirichlet parameter beliefs `h`, coupling through expected
/// log parameters.
pub fn infer_states(h: &HyperParams, data: &DataBatch, cfg: &InferenceConfig) -> Result<BeliefState> {
    infer_states_from(h, data, cfg, None)
}

/// As [`infer_states`], warm-started from `init` where its shape fits.
pub fn infer_states_from(
    h: &HyperParams,
    data: &DataBatch,
    cfg: &InferenceConfig,
    init: Option<&BeliefState>,
) -> Result<BeliefState> {
    data.check(&h.spec)?;
    let layout = Layout::new(&h.spec);
    let lp = Tables::expected_log_of(h);
    let b0 = initial_beliefs(&h.spec, data.len(), init);
    sweep(&h.spec, &layout, &lp, data, cfg, b0, |_| {})
}

/// Beliefs under a point-valued model.
pub fn infer_states_point(
    model: &GenerativeModel,
    data: &DataBatch,
    cfg: &InferenceConfig,
) -> Result<BeliefState> {
    data.check(&model.spec)?;
    let layout = Layout::new(&model.spec);
    let lp = Tables::log_of_model(model);
    let b0 = uniform_beliefs(&model.spec, data.len());
    sweep(&model.spec, &layout, &lp, data, cfg, b0, |_| {})
}

/// Free energy after every sweep, for descent checks.
#[cfg(test)]
pub(crate) fn sweep_trace(h: &HyperParams, data: &DataBatch, cfg: &InferenceConfig) -> Result<Vec<f64>> {
    let layout = Layout::new(&h.spec);
    let lp = Tables::expected_log_of(h);
    let mut trace = Vec::new();
    let b0 = uniform_beliefs(&h.spec, data.len());
    let (acc, cs) = state_terms(&h.spec, &layout, &lp, &b0, data);
    trace.push(cs - acc);
    sweep(&h.spec, &layout, &lp, data, cfg, b0, |f| trace.push(f))?;
    Ok(trace)
}

/// Expected sufficient statistics, in [`HyperParams::flat_counts`] order.
pub fn expected_counts(spec: &StructureSpec, beliefs: &BeliefState, data: &DataBatch) -> Result<Vec<Vec<f64>>> {
    data.check(spec)?;
    check_beliefs(spec, beliefs, data)?;
    Ok(expected_counts_tables(spec, &Layout::new(spec), beliefs, data).into_flat())
}

fn add_counts(h: &HyperParams, counts: &[Vec<f64>], rate: f64) -> Result<HyperParams> {
    let mut out = h.clone();
    for (c, inc) in out.flat_counts_mut().into_iter().zip(counts) {
        let scaled: Vec<f64> = inc.iter().map(|x| rate * x).collect();
        *c = c.add(&scaled)?;
    }
    Ok(out)
}

/// `h` plus `rate` times the expected sufficient statistics.
pub fn update_parameters(
    h: &HyperParams,
    beliefs: &BeliefState,
    data: &DataBatch,
    rate: f64,
) -> Result<HyperParams> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::Domain(format!("learning rate {rate} outside [0, 1]")));
    }
    let counts = expected_counts(&h.spec, beliefs, data)?;
    add_counts(h, &counts, rate)
}

/// Free energy of `Q(s) Q(θ)` where `Q(s)` is `beliefs` and
/// `Q(θ) = prior + expected counts`, relative to the prior `h`.
pub fn variational_free_energy(
    beliefs: &BeliefState,
    h: &HyperParams,
    data: &DataBatch,
) -> Result<FreeEnergyReport> {
    let spec = &h.spec;
    data.check(spec)?;
    check_beliefs(spec, beliefs, data)?;
    let layout = Layout::new(spec);
    let counts = expected_counts_tables(spec, &layout, beliefs, data).into_flat();
    let q = add_counts(h, &counts, 1.0)?;
    let lp = Tables::expected_log_of(&q);
    let (accuracy, complexity_states) = state_terms(spec, &layout, &lp, beliefs, data);
    let mut complexity_params = 0.0;
    for (qc, pc) in q.flat_counts().into_iter().zip(h.flat_counts()) {
        complexity_params += dirichlet_kl(
            &DirichletCounts::new(qc.to_vec())?,
            &DirichletCounts::new(pc.to_vec())?,
        )?;
    }
    Ok(FreeEnergyReport {
        total: complexity_states + complexity_params - accuracy,
        accuracy,
        complexity_states,
        complexity_params,
    })
}

/// Free energy of `beliefs` under a point-valued model.
pub fn point_free_energy(
    beliefs: &BeliefState,
    model: &GenerativeModel,
    data: &DataBatch,
) -> Result<FreeEnergyReport> {
    let spec = &model.spec;
    data.check(spec)?;
    check_beliefs(spec, beliefs, data)?;
    let layout = Layout::new(spec);
    let lp = Tables::log_of_model(model);
    let (accuracy, complexity_states) = state_terms(spec, &layout, &lp, beliefs, data);
    Ok(FreeEnergyReport {
        total: complexity_states - accuracy,
        accuracy,
        complexity_states,
        complexity_params: 0.0,
    })
}

/// Result of alternating state inference and parameter updates.
#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub posterior: HyperParams,
    pub beliefs: BeliefState,
    pub report: FreeEnergyReport,
    pub iterations: usize,
}

/// Variational Bayes from prior `h0`: alternate [`infer_states`] under the
/// current `Q(θ)` with `Q(θ) = h0 + expected counts`.
///
/// With `jitter > 0` the first `Q(θ)` is `h0` plus the expected counts of
/// random state responsibilities, each step's drawn from a symmetric
/// Dirichlet with concentration `1 / jitter`, which breaks the symmetry
/// between interchangeable states.
pub fn fit<R: Rng + ?Sized>(
    h0: &HyperParams,
    data: &DataBatch,
    cfg: &InferenceConfig,
    jitter: f64,
    rng: &mut R,
) -> Result<FitOutcome> {
    data.check(&h0.spec)?;
    let layout = Layout::new(&h0.spec);
    let mut q = h0.clone();
    if jitter > 0.0 {
        let gamma = Gamma::new(1.0 / jitter, 1.0).map_err(|e| Error::Domain(format!("jitter {jitter}: {e}")))?;
        let mut marginals = Vec::with_capacity(data.len());
        for _ in 0..data.len() {
            let mut step = Vec::with_capacity(h0.spec.factor_count());
            for &k in &h0.spec.factor_cards {
                let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng).max(f64::MIN_POSITIVE)).collect();
                step.push(crate::prob::normalize(&draws)?);
            }
            marginals.push(step);
        }
        let random = BeliefState::from_marginals(marginals);
        let counts = expected_counts_tables(&h0.spec, &layout, &random, data).into_flat();
        q = add_counts(h0, &counts, 1.0)?;
    }
    // One sweep per parameter update is still coordinate descent on F.
    let single = InferenceConfig { max_iters: 1, ..cfg.clone() };
    let mut beliefs: Option<BeliefState> = None;
    let mut best: Option<FitOutcome> = None;
    let mut previous = f64::INFINITY;
    for iter in 1..=cfg.max_fit_iters.max(1) {
        let lp = Tables::expected_log_of(&q);
        let last = beliefs.as_ref().or(best.as_ref().map(|o| &o.beliefs));
        let b0 = initial_beliefs(&h0.spec, data.len(), last);
        let b = sweep(&h0.spec, &layout, &lp, data, &single, b0, |_| {})?;
        let counts = expected_counts_tables(&h0.spec, &layout, &b, data).into_flat();
        q = add_counts(h0, &counts, 1.0)?;
        let report = variational_free_energy(&b, h0, data)?;
        let done = (previous - report.total).abs() < cfg.fit_tol;
        previous = report.total;
        // The latest beliefs live in `best` when they improved, else in `beliefs`.
        if best.as_ref().map_or(true, |o| report.total <= o.report.total) {
            best = Some(FitOutcome {
                posterior: q.clone(),
                beliefs: b,
                report,
                iterations: iter,
            });
            beliefs = None;
        } else {
            beliefs = Some(b);
        }
        if done {
            break;
        }
    }
    best.ok_or_else(|| Error::Empty("no fit iterations".into()))
}
