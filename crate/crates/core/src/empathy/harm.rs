//! Harm bins, preferences over harm and harm estimates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{log_softmax, ProbVector};

/// Contiguous ascending intervals `[edges[k], edges[k + 1])` in nats. Values
/// below the first edge fall in the first bin, values at or above the last
/// edge in the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmBins {
    edges: Vec<f64>,
}

/// Number of bins used when none is configured.
pub const DEFAULT_HARM_BINS: usize = 8;

impl HarmBins {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::Domain("harm bins need at least two edges".into()));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("harm bin edges must be finite and strictly ascending".into()));
        }
        Ok(HarmBins { edges })
    }

    /// `count` equal-width bins over `[0, upper]`.
    pub fn uniform(count: usize, upper: f64) -> Result<Self> {
        if count == 0 || !(upper > 0.0) {
            return Err(Error::Domain("need at least one bin and a positive upper edge".into()));
        }
        Self::new((0..=count).map(|k| upper * k as f64 / count as f64).collect())
    }

    /// Eight bins over `[0, ln(max_card · horizon)]`.
    pub fn for_episode(max_card: usize, horizon: usize) -> Result<Self> {
        let k = (max_card * horizon.max(1)) as f64;
        Self::uniform(DEFAULT_HARM_BINS, k.ln().max(f64::MIN_POSITIVE))
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn count(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn lower(&self) -> f64 {
        self.edges[0]
    }

    pub fn upper(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn bin_of(&self, harm: f64) -> usize {
        let n = self.count();
        self.edges[1..n].iter().take_while(|&&e| harm >= e).count()
    }

    /// The same grid with the top edge raised to cover `harm`.
    pub fn covering(&self, harm: f64) -> HarmBins {
        let mut edges = self.edges.clone();
        let last = edges.len() - 1;
        if harm > edges[last] {
            edges[last] = harm;
        }
        HarmBins { edges }
    }

    /// One-hot distribution on the bin of `harm`.
    pub fn one_hot(&self, harm: f64) -> ProbVector {
        ProbVector::one_hot(self.count(), self.bin_of(harm)).expect("bin index in range")
    }
}

/// Preferred distribution over harm bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmPreference {
    pub bins: HarmBins,
    pub log_probs: Vec<f64>,
    pub decay_rate: f64,
}

impl HarmPreference {
    /// `P(bin) ∝ exp(−decay_rate · midpoint)`.
    pub fn exponential(bins: HarmBins, decay_rate: f64) -> Result<Self> {
        if !(decay_rate > 0.0) || !decay_rate.is_finite() {
            return Err(Error::Domain("harm decay rate must be positive".into()));
        }
        let logits: Vec<f64> = bins.midpoints().iter().map(|m| -decay_rate * m).collect();
        Ok(HarmPreference {
            log_probs: log_softmax(&logits),
            bins,
            decay_rate,
        })
    }

    pub fn probs(&self) -> ProbVector {
        crate::prob::normalize(&self.log_probs.iter().map(|l| l.exp()).collect::<Vec<_>>())
            .expect("preference log-probabilities are finite")
    }
}

/// Mixture over hypotheses of the harm a target is under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmEstimate {
    pub bins: HarmBins,
    pub distribution: ProbVector,
    /// Posterior-mean harm (nats).
    pub point_estimate: f64,
}
