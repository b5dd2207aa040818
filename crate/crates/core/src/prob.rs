//! Categorical and Dirichlet kernels.
//!
//! Everything downstream works with natural logarithms. Linear-space
//! probabilities only appear in [`ProbVector`] and at API edges; sums of
//! exponentials always go through max-subtraction.
//!
//! Conventions used throughout the crate:
//! - `0 · ln 0 = 0`, so zero-probability entries never poison a sum.
//! - A probability vector sums to one within [`SIMPLEX_TOL`]; construction
//!   renormalizes.
//! - A temperature at or below [`TEMPERATURE_FLOOR`] turns a softmax into a
//!   one-hot vector at the lowest-index maximum.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::error::{Error, Result};

/// Tolerance on `|Σp − 1|` for a valid probability vector.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Temperatures at or below this value select the argmax deterministically.
pub const TEMPERATURE_FLOOR: f64 = 1e-9;

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    /// Build from entries that already sum to one (within [`SIMPLEX_TOL`]).
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        check_nonnegative(&entries)?;
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {sum}, expected 1"
            )));
        }
        Ok(ProbVector(renormalized(entries, sum)))
    }

    pub fn uniform(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidDistribution("dimension must be ≥ 1".into()));
        }
        Ok(ProbVector(vec![1.0 / dimension as f64; dimension]))
    }

    pub fn one_hot(dimension: usize, index: usize) -> Result<Self> {
        if index >= dimension {
            return Err(Error::Shape(format!(
                "index {index} out of range for dimension {dimension}"
            )));
        }
        let mut v = vec![0.0; dimension];
        v[index] = 1.0;
        Ok(ProbVector(v))
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub(crate) fn from_raw_unchecked(entries: Vec<f64>) -> Self {
        ProbVector(entries)
    }
}

impl std::ops::Index<usize> for ProbVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        ProbVector::new(v)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(p: ProbVector) -> Vec<f64> {
        p.0
    }
}

/// Strictly positive pseudo-counts of a Dirichlet distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DirichletCounts(Vec<f64>);

impl DirichletCounts {
    pub fn new(counts: Vec<f64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Domain("Dirichlet needs at least one category".into()));
        }
        if let Some(c) = counts.iter().find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::Domain(format!("Dirichlet count {c} is not positive")));
        }
        Ok(DirichletCounts(counts))
    }

    pub fn symmetric(dimension: usize, concentration: f64) -> Result<Self> {
        Self::new(vec![concentration; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Dirichlet mean `c / Σc`.
    pub fn mean(&self) -> ProbVector {
        let total = self.total();
        ProbVector::from_raw_unchecked(self.0.iter().map(|c| c / total).collect())
    }

    /// Add nonnegative increments, e.g. expected sufficient statistics.
    pub fn add(&self, increments: &[f64]) -> Result<Self> {
        if increments.len() != self.0.len() {
            return Err(Error::Shape(format!(
                "increment has {} entries, counts have {}",
                increments.len(),
                self.0.len()
            )));
        }
        Self::new(self.0.iter().zip(increments).map(|(c, d)| c + d).collect())
    }
}

impl std::ops::Index<usize> for DirichletCounts {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for DirichletCounts {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        DirichletCounts::new(v)
    }
}

impl From<DirichletCounts> for Vec<f64> {
    fn from(c: DirichletCounts) -> Vec<f64> {
        c.0
    }
}

/// Number of joint configurations of a list of variable dimensions.
pub fn config_count(dims: &[usize]) -> usize {
    dims.iter().product()
}

/// Mixed-radix index of `values` over `dims`, first entry most significant.
pub fn config_index(dims: &[usize], values: &[usize]) -> usize {
    debug_assert_eq!(dims.len(), values.len());
    dims.iter()
        .zip(values)
        .fold(0, |acc, (&d, &v)| acc * d + v)
}

/// Inverse of [`config_index`].
pub fn config_values(dims: &[usize], mut index: usize) -> Vec<usize> {
    let mut values = vec![0; dims.len()];
    for (slot, &d) in values.iter_mut().zip(dims).rev() {
        *slot = index % d;
        index /= d;
    }
    values
}

/// A conditional probability table `P(child | parents)`, one column per
/// joint parent configuration (mixed radix, first parent most significant).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalTable {
    child_dimension: usize,
    parent_dimensions: Vec<usize>,
    columns: Vec<ProbVector>,
}

impl ConditionalTable {
    pub fn new(
        child_dimension: usize,
        parent_dimensions: Vec<usize>,
        columns: Vec<ProbVector>,
    ) -> Result<Self> {
        if child_dimension == 0 || parent_dimensions.iter().any(|&d| d == 0) {
            return Err(Error::Shape("table dimensions must be positive".into()));
        }
        let expected = config_count(&parent_dimensions);
        if columns.len() != expected {
            return Err(Error::Shape(format!(
                "table has {} columns, parents need {expected}",
                columns.len()
            )));
        }
        if let Some(c) = columns.iter().find(|c| c.dimension() != child_dimension) {
            return Err(Error::Shape(format!(
                "column of dimension {} in a table with child dimension {child_dimension}",
                c.dimension()
            )));
        }
        Ok(ConditionalTable {
            child_dimension,
            parent_dimensions,
            columns,
        })
    }

    /// Every column uniform.
    pub fn uniform(child_dimension: usize, parent_dimensions: Vec<usize>) -> Result<Self> {
        let n = config_count(&parent_dimensions);
        let column = ProbVector::uniform(child_dimension)?;
        Self::new(child_dimension, parent_dimensions, vec![column; n])
    }

    pub fn child_dimension(&self) -> usize {
        self.child_dimension
    }

    pub fn parent_dimensions(&self) -> &[usize] {
        &self.parent_dimensions
    }

    pub fn columns(&self) -> &[ProbVector] {
        &self.columns
    }

    pub fn column(&self, parents: &[usize]) -> &ProbVector {
        &self.columns[config_index(&self.parent_dimensions, parents)]
    }

    pub fn prob(&self, child: usize, parents: &[usize]) -> f64 {
        self.column(parents)[child]
    }
}

/// Dirichlet counts for every column of a conditional table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountTable {
    child_dimension: usize,
    parent_dimensions: Vec<usize>,
    columns: Vec<DirichletCounts>,
}

impl CountTable {
    pub fn new(
        child_dimension: usize,
        parent_dimensions: Vec<usize>,
        columns: Vec<DirichletCounts>,
    ) -> Result<Self> {
        let expected = config_count(&parent_dimensions);
        if child_dimension == 0 || parent_dimensions.iter().any(|&d| d == 0) {
            return Err(Error::Shape("table dimensions must be positive".into()));
        }
        if columns.len() != expected {
            return Err(Error::Shape(format!(
                "count table has {} columns, parents need {expected}",
                columns.len()
            )));
        }
        if columns.iter().any(|c| c.dimension() != child_dimension) {
            return Err(Error::Shape("count column dimension mismatch".into()));
        }
        Ok(CountTable {
            child_dimension,
            parent_dimensions,
            columns,
        })
    }

    pub fn symmetric(
        child_dimension: usize,
        parent_dimensions: Vec<usize>,
        concentration: f64,
    ) -> Result<Self> {
        let column = DirichletCounts::symmetric(child_dimension, concentration)?;
        let n = config_count(&parent_dimensions);
        Self::new(child_dimension, parent_dimensions, vec![column; n])
    }

    /// Counts proportional to a conditional table, `concentration · P + floor`.
    pub fn from_table(table: &ConditionalTable, concentration: f64, floor: f64) -> Result<Self> {
        let columns = table
            .columns()
            .iter()
            .map(|c| {
                DirichletCounts::new(
                    c.as_slice()
                        .iter()
                        .map(|p| concentration * p + floor)
                        .collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            table.child_dimension(),
            table.parent_dimensions().to_vec(),
            columns,
        )
    }

    pub fn child_dimension(&self) -> usize {
        self.child_dimension
    }

    pub fn parent_dimensions(&self) -> &[usize] {
        &self.parent_dimensions
    }

    pub fn columns(&self) -> &[DirichletCounts] {
        &self.columns
    }

    pub fn columns_mut(&mut self) -> &mut [DirichletCounts] {
        &mut self.columns
    }

    pub fn mean(&self) -> ConditionalTable {
        ConditionalTable {
            child_dimension: self.child_dimension,
            parent_dimensions: self.parent_dimensions.clone(),
            columns: self.columns.iter().map(DirichletCounts::mean).collect(),
        }
    }
}

fn check_nonnegative(entries: &[f64]) -> Result<()> {
    if entries.is_empty() {
        return Err(Error::InvalidDistribution("empty vector".into()));
    }
    if let Some(x) = entries.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::InvalidDistribution(format!(
            "entry {x} is negative or non-finite"
        )));
    }
    Ok(())
}

fn renormalized(entries: Vec<f64>, sum: f64) -> Vec<f64> {
    if (sum - 1.0).abs() <= SIMPLEX_TOL {
        entries
    } else {
        entries.into_iter().map(|x| x / sum).collect()
    }
}

/// Scale a nonnegative vector onto the simplex.
///
/// Inputs already within [`SIMPLEX_TOL`] of the simplex are returned as-is,
/// which makes the operation exactly idempotent.
pub fn normalize(raw: &[f64]) -> Result<ProbVector> {
    check_nonnegative(raw)?;
    let sum: f64 = raw.iter().sum();
    if sum <= 0.0 {
        return Err(Error::InvalidDistribution("all entries are zero".into()));
    }
    Ok(ProbVector(renormalized(raw.to_vec(), sum)))
}

/// `KL[p ‖ q]` in nats; `+∞` when `p` puts mass where `q` has none.
pub fn kl_divergence(p: &ProbVector, q: &ProbVector) -> Result<f64> {
    if p.dimension() != q.dimension() {
        return Err(Error::Shape(format!(
            "KL between dimensions {} and {}",
            p.dimension(),
            q.dimension()
        )));
    }
    Ok(kl_slices(p.as_slice(), q.as_slice()))
}

pub(crate) fn kl_slices(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return f64::INFINITY;
        }
        total += pi * (pi.ln() - qi.ln());
    }
    total.max(0.0)
}

/// Shannon entropy in nats.
pub fn entropy(p: &ProbVector) -> f64 {
    entropy_slice(p.as_slice())
}

pub(crate) fn entropy_slice(p: &[f64]) -> f64 {
    -p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| x * x.ln())
        .sum::<f64>()
        .min(0.0)
}

/// Boltzmann–Gibbs distribution `∝ exp(logit / temperature)`.
pub fn softmax(logits: &[f64], temperature: f64) -> Result<ProbVector> {
    if logits.is_empty() {
        return Err(Error::InvalidDistribution("softmax of no logits".into()));
    }
    if let Some(x) = logits.iter().find(|x| !x.is_finite()) {
        return Err(Error::Numeric(format!("logit {x}")));
    }
    if !(temperature >= 0.0) {
        return Err(Error::Domain(format!("temperature {temperature}")));
    }
    if temperature <= TEMPERATURE_FLOOR {
        return ProbVector::one_hot(logits.len(), argmax(logits));
    }
    let scaled: Vec<f64> = logits.iter().map(|l| l / temperature).collect();
    let lse = log_sum_exp(&scaled);
    let p: Vec<f64> = scaled.iter().map(|z| (z - lse).exp()).collect();
    let sum: f64 = p.iter().sum();
    Ok(ProbVector(renormalized(p, sum)))
}

/// `ln softmax(logits)` at temperature one.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(logits);
    logits.iter().map(|l| l - lse).collect()
}

/// `ln Σ exp(xᵢ)` with max-subtraction. `-∞` for an empty or all `-∞` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Index of the smallest entry, lowest index on ties.
pub fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

/// `ln B(c) = Σ lnΓ(cᵢ) − lnΓ(Σcᵢ)`.
pub fn log_multivariate_beta(c: &DirichletCounts) -> f64 {
    log_beta_slice(c.as_slice())
}

pub(crate) fn log_beta_slice(c: &[f64]) -> f64 {
    c.iter().map(|&x| ln_gamma(x)).sum::<f64>() - ln_gamma(c.iter().sum())
}

/// `E[ln θᵢ] = ψ(cᵢ) − ψ(Σc)` under `Dir(c)`.
pub fn dirichlet_expected_log(c: &DirichletCounts) -> Vec<f64> {
    expected_log_slice(c.as_slice())
}

pub(crate) fn expected_log_slice(c: &[f64]) -> Vec<f64> {
    let total = digamma(c.iter().sum());
    c.iter().map(|&x| digamma(x) - total).collect()
}

/// `KL[Dir(q) ‖ Dir(p)]`.
pub fn dirichlet_kl(q: &DirichletCounts, p: &DirichletCounts) -> Result<f64> {
    if q.dimension() != p.dimension() {
        return Err(Error::Shape("Dirichlet KL dimension mismatch".into()));
    }
    let q0 = q.total();
    let psi0 = digamma(q0);
    let cross: f64 = q
        .as_slice()
        .iter()
        .zip(p.as_slice())
        .map(|(&qi, &pi)| (qi - pi) * (digamma(qi) - psi0))
        .sum();
    Ok((log_multivariate_beta(p) - log_multivariate_beta(q) + cross).max(0.0))
}

/// Sample an index from a probability vector with one uniform draw.
pub fn sample_index<R: rand::Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &x) in p.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    // Rounding can leave `acc` a hair below one; fall back to the last
    // index carrying mass.
    p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1)
}
