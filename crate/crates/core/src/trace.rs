//! Episode traces, written as JSON lines (`inferno-trace/1`).
//!
//! The first line is a header `{"format":"inferno-trace/1","scenario":..,
//! "seed":..}`; each further line is one [`StepRecord`]. Non-finite floats
//! are written as `null`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planning::EFEReport;

pub const TRACE_FORMAT: &str = "inferno-trace/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceMetadata {
    pub format: String,
    pub scenario: String,
    pub seed: u64,
}

impl TraceMetadata {
    pub fn new(scenario: impl Into<String>, seed: u64) -> Self {
        TraceMetadata {
            format: TRACE_FORMAT.into(),
            scenario: scenario.into(),
            seed,
        }
    }
}

/// Harm bookkeeping for one step of an empathy run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarmRecord {
    /// Per target, the predicted distribution over harm bins.
    pub bins: Vec<Vec<f64>>,
    /// Per target, the posterior-mean harm estimate (nats).
    pub point_estimates: Vec<f64>,
    /// Per target, the harm realized by the target's own model, when known.
    pub realized: Vec<f64>,
    /// First-Law components of the selected policy.
    pub first_law: EFEReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepRecord {
    pub step: usize,
    pub observation: Vec<usize>,
    pub action: usize,
    pub free_energies: Vec<Option<f64>>,
    pub weights: Vec<f64>,
    pub efe: EFEReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harm: Option<HarmRecord>,
}

/// Optional float that is `None` when not finite, for JSON output.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub metadata: TraceMetadata,
    pub records: Vec<StepRecord>,
}

impl EpisodeTrace {
    pub fn new(metadata: TraceMetadata) -> Self {
        EpisodeTrace {
            metadata,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        let line = serde_json::to_string(&self.metadata).map_err(|e| Error::Numeric(e.to_string()))?;
        out.push_str(&line);
        out.push('\n');
        for r in &self.records {
            let line = serde_json::to_string(r).map_err(|e| Error::Numeric(e.to_string()))?;
            out.push_str(&line);
            out.push('\n');
        }
        Ok(out)
    }

    /// Parse and validate a trace: header version, schema of every record,
    /// strictly increasing step indices.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let Some((_, head)) = lines.next() else {
            return Err(Error::parse(1, "format", "empty trace"));
        };
        let metadata: TraceMetadata =
            serde_json::from_str(head).map_err(|e| Error::parse(1, "format", e.to_string()))?;
        if metadata.format != TRACE_FORMAT {
            return Err(Error::parse(
                1,
                "format",
                format!("expected `{TRACE_FORMAT}`, found `{}`", metadata.format),
            ));
        }
        let mut records: Vec<StepRecord> = Vec::new();
        for (i, line) in lines {
            let r: StepRecord =
                serde_json::from_str(line).map_err(|e| Error::parse(i + 1, "record", e.to_string()))?;
            if records.last().is_some_and(|p| p.step >= r.step) {
                return Err(Error::parse(i + 1, "step", "step indices must increase"));
            }
            records.push(r);
        }
        Ok(EpisodeTrace { metadata, records })
    }
}
