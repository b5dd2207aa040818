//! Exact inference on a single discrete chain with log potentials.

use crate::error::{Error, Result};
use crate::prob::{entropy_slice, log_sum_exp};

pub(crate) struct ChainPosterior {
    pub marginals: Vec<Vec<f64>>,
    /// `pairwise[t]` couples steps `t` and `t + 1`, row-major `k × k`.
    pub pairwise: Vec<Vec<f64>>,
    pub log_partition: f64,
}

/// `unary[t][j]` and `pair[t][i * k + j]` for the transition into step
/// `t + 1`. Fails with the first step whose forward messages vanish.
pub(crate) fn forward_backward(unary: &[Vec<f64>], pair: &[Vec<f64>]) -> Result<ChainPosterior> {
    let steps = unary.len();
    let k = unary[0].len();
    // Flat `steps × k` message tables.
    let mut alpha = vec![0.0; steps * k];
    alpha[..k].copy_from_slice(&unary[0]);
    if log_sum_exp(&alpha[..k]) == f64::NEG_INFINITY {
        return Err(Error::ImpossibleObservation { step: 0 });
    }
    let mut scratch = vec![0.0; k];
    for t in 1..steps {
        let (done, rest) = alpha.split_at_mut(t * k);
        let prev = &done[(t - 1) * k..];
        let cur = &mut rest[..k];
        for j in 0..k {
            for i in 0..k {
                scratch[i] = prev[i] + pair[t - 1][i * k + j];
            }
            cur[j] = unary[t][j] + log_sum_exp(&scratch);
        }
        if log_sum_exp(cur) == f64::NEG_INFINITY {
            return Err(Error::ImpossibleObservation { step: t });
        }
    }
    let mut beta = vec![0.0; steps * k];
    for t in (0..steps.saturating_sub(1)).rev() {
        let (cur, next) = beta.split_at_mut((t + 1) * k);
        let cur = &mut cur[t * k..];
        for i in 0..k {
            for j in 0..k {
                scratch[j] = pair[t][i * k + j] + unary[t + 1][j] + next[j];
            }
            cur[i] = log_sum_exp(&scratch);
        }
    }
    let at = |m: &[f64], t: usize, i: usize| m[t * k + i];
    let log_partition = log_sum_exp(&alpha[(steps - 1) * k..]);
    let marginals = (0..steps)
        .map(|t| {
            normalized(
                (0..k)
                    .map(|i| exp_or_zero(at(&alpha, t, i) + at(&beta, t, i) - log_partition))
                    .collect(),
            )
        })
        .collect();
    let pairwise = (0..steps.saturating_sub(1))
        .map(|t| {
            let mut p = vec![0.0; k * k];
            for i in 0..k {
                for j in 0..k {
                    p[i * k + j] = exp_or_zero(
                        at(&alpha, t, i) + pair[t][i * k + j] + unary[t + 1][j] + at(&beta, t + 1, j)
                            - log_partition,
                    );
                }
            }
            normalized(p)
        })
        .collect();
    Ok(ChainPosterior {
        marginals,
        pairwise,
        log_partition,
    })
}

fn exp_or_zero(x: f64) -> f64 {
    if x == f64::NEG_INFINITY || x.is_nan() {
        0.0
    } else {
        x.exp()
    }
}

pub(crate) fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        for x in &mut v {
            *x /= s;
        }
    }
    v
}

/// Entropy of a Markov chain from its marginals and adjacent pairwise joints.
pub(crate) fn chain_entropy(marginals: &[&[f64]], pairwise: &[&[f64]]) -> f64 {
    if pairwise.is_empty() {
        return entropy_slice(marginals[0]);
    }
    let pairs: f64 = pairwise.iter().map(|p| entropy_slice(p)).sum();
    let interior: f64 = marginals[1..marginals.len() - 1]
        .iter()
        .map(|m| entropy_slice(m))
        .sum();
    pairs - interior
}
