//! Bayesian model reduction for Dirichlet-categorical parameters.
//!
//! Rescores the evidence under an alternative prior from one fitted
//! posterior: for a column with prior `p`, posterior `q = p + n` and reduced
//! prior `r`,
//!
//! `ln P_r(d) − ln P_p(d) = ln B(r + n) − ln B(r) − ln B(q) + ln B(p)`.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genmodel::HyperParams;
use crate::prob::{log_beta_slice, DirichletCounts};

/// Slack for count arithmetic when recovering data counts `q − p`.
const COUNT_SLACK: f64 = 1e-9;

fn column_ratio(posterior: &[f64], prior: &[f64], reduced: &[f64]) -> Result<f64> {
    if posterior.len() != prior.len() || prior.len() != reduced.len() {
        return Err(Error::Shape("BMR columns differ in dimension".into()));
    }
    let mut reduced_post = Vec::with_capacity(prior.len());
    for i in 0..prior.len() {
        let n = posterior[i] - prior[i];
        if n < -COUNT_SLACK {
            return Err(Error::Inconsistent(format!(
                "posterior count {} below prior count {} in category {i}",
                posterior[i], prior[i]
            )));
        }
        let r = reduced[i] + n.max(0.0);
        if !(r > 0.0) || !(reduced[i] > 0.0) {
            return Err(Error::Domain(format!(
                "reduced posterior count {r} in category {i} is not positive"
            )));
        }
        reduced_post.push(r);
    }
    Ok(log_beta_slice(&reduced_post) - log_beta_slice(reduced) - log_beta_slice(posterior)
        + log_beta_slice(prior))
}

/// `ln[P_reduced(d) / P_prior(d)]` for one Dirichlet column.
pub fn bmr_log_evidence_ratio(
    posterior: &DirichletCounts,
    prior: &DirichletCounts,
    reduced_prior: &DirichletCounts,
) -> Result<f64> {
    column_ratio(posterior.as_slice(), prior.as_slice(), reduced_prior.as_slice())
}

/// Sum of column ratios over every table of a hyperparameter set.
pub fn bmr_hyper_ratio(posterior: &HyperParams, prior: &HyperParams, reduced: &HyperParams) -> Result<f64> {
    let q = posterior.flat_counts();
    let p = prior.flat_counts();
    let r = reduced.flat_counts();
    if q.len() != p.len() || p.len() != r.len() {
        return Err(Error::Shape("BMR hyperparameters differ in shape".into()));
    }
    let mut total = 0.0;
    for i in 0..q.len() {
        total += column_ratio(q[i], p[i], r[i])?;
    }
    Ok(total)
}

/// Monte-Carlo estimate of `E_{Dir(θ; q)}[Dir(θ; r) / Dir(θ; p)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloRatio {
    /// Estimated evidence ratio (linear scale).
    pub mean: f64,
    pub standard_error: f64,
    pub samples: usize,
}

/// Sample `θ ~ Dir(posterior)` and average the prior density ratio.
pub fn bmr_monte_carlo<R: Rng + ?Sized>(
    posterior: &DirichletCounts,
    prior: &DirichletCounts,
    reduced_prior: &DirichletCounts,
    samples: usize,
    rng: &mut R,
) -> Result<MonteCarloRatio> {
    let k = posterior.dimension();
    if prior.dimension() != k || reduced_prior.dimension() != k {
        return Err(Error::Shape("BMR columns differ in dimension".into()));
    }
    if samples < 2 {
        return Err(Error::Domain("Monte-Carlo estimate needs at least two samples".into()));
    }
    let gammas = posterior
        .as_slice()
        .iter()
        .map(|&a| Gamma::new(a, 1.0).map_err(|e| Error::Domain(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    // ln Dir(θ; r) − ln Dir(θ; p) = Σ (rᵢ − pᵢ) ln θᵢ − ln B(r) + ln B(p)
    let offset = log_beta_slice(prior.as_slice()) - log_beta_slice(reduced_prior.as_slice());
    let delta: Vec<f64> = reduced_prior
        .as_slice()
        .iter()
        .zip(prior.as_slice())
        .map(|(r, p)| r - p)
        .collect();
    let mut mean = 0.0;
    let mut m2 = 0.0;
    let mut g = vec![0.0; k];
    for n in 1..=samples {
        for (x, dist) in g.iter_mut().zip(&gammas) {
            *x = dist.sample(rng);
        }
        let ln_total = g.iter().sum::<f64>().ln();
        let log_w = offset
            + delta
                .iter()
                .zip(&g)
                .map(|(d, &x)| if *d == 0.0 { 0.0 } else { d * (x.ln() - ln_total) })
                .sum::<f64>();
        let w = log_w.exp();
        // Welford update
        let diff = w - mean;
        mean += diff / n as f64;
        m2 += diff * (w - mean);
    }
    let var = m2 / (samples - 1) as f64;
    Ok(MonteCarloRatio {
        mean,
        standard_error: (var / samples as f64).sqrt(),
        samples,
    })
}

/// Reduced priors worth testing: for every column holding at least one
/// category with data count below `threshold`, a copy of `prior` with those
/// categories shrunk to `epsilon`; then one candidate shrinking all of them
/// at once. Columns without data are skipped since their ratio is zero.
pub fn reduction_candidates(
    prior: &HyperParams,
    posterior: &HyperParams,
    threshold: f64,
    epsilon: f64,
) -> Result<Vec<HyperParams>> {
    let data = posterior.count_difference(prior)?;
    let mut out = Vec::new();
    let mut combined = prior.clone();
    let mut any = false;
    let mut columns = Vec::new();
    for (i, n) in data.iter().enumerate() {
        let total: f64 = n.iter().sum();
        if total < threshold {
            continue;
        }
        let low: Vec<usize> = (0..n.len()).filter(|&j| n[j] < threshold).collect();
        if !low.is_empty() {
            columns.push((i, low));
        }
    }
    for (i, low) in &columns {
        let mut cand = prior.clone();
        for h in [&mut cand, &mut combined] {
            let mut cols = h.flat_counts_mut();
            let mut v = cols[*i].as_slice().to_vec();
            for &j in low {
                v[j] = v[j].min(epsilon);
            }
            *cols[*i] = DirichletCounts::new(v)?;
        }
        any = true;
        out.push(cand);
    }
    if any && columns.len() > 1 {
        out.push(combined);
    }
    Ok(out)
}

/// Result of [`bmr_reduce`].
#[derive(Debug, Clone)]
pub struct BmrOutcome {
    pub prior: HyperParams,
    pub posterior: HyperParams,
    /// Log evidence gain of the chosen prior over the current one.
    pub gain: f64,
    /// Index of the chosen candidate; `0` is the identity.
    pub chosen: usize,
}

/// Pick the evidence-maximizing prior among the identity and `candidates`;
/// ties within 1e-12 go to the lowest index. The posterior is rebuilt as
/// the chosen prior plus the unchanged data counts.
pub fn bmr_reduce(prior: &HyperParams, posterior: &HyperParams, candidates: &[HyperParams]) -> Result<BmrOutcome> {
    let data = posterior.count_difference(prior)?;
    let mut best = (0usize, 0.0f64);
    for (i, c) in candidates.iter().enumerate() {
        let gain = bmr_hyper_ratio(posterior, prior, c)?;
        if gain > best.1 + 1e-12 {
            best = (i + 1, gain);
        }
    }
    if best.0 == 0 {
        return Ok(BmrOutcome {
            prior: prior.clone(),
            posterior: posterior.clone(),
            gain: 0.0,
            chosen: 0,
        });
    }
    let chosen = candidates[best.0 - 1].clone();
    let mut post = chosen.clone();
    for (col, n) in post.flat_counts_mut().into_iter().zip(&data) {
        let v: Vec<f64> = n.iter().map(|x| x.max(0.0)).collect();
        *col = col.add(&v)?;
    }
    Ok(BmrOutcome {
        prior: chosen,
        posterior: post,
        gain: best.1,
        chosen: best.0,
    })
}
