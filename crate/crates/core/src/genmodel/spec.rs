//! Causal network of a factorial discrete POMDP.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Incoming edges of one hidden factor's transition table.
///
/// The factor's own previous state is always a parent; `parents` lists the
/// *other* factors whose previous state also conditions the transition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TransitionEdges {
    pub action_dependent: bool,
    pub parents: Vec<usize>,
}

impl TransitionEdges {
    pub fn autonomous() -> Self {
        TransitionEdges {
            action_dependent: false,
            parents: Vec::new(),
        }
    }

    pub fn controlled() -> Self {
        TransitionEdges {
            action_dependent: true,
            parents: Vec::new(),
        }
    }
}

/// Structure `m`: which hidden factors exist, how large they are, and which
/// edges connect them to observations, to each other and to action.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StructureSpec {
    pub label: String,
    pub factor_cards: Vec<usize>,
    pub modality_cards: Vec<usize>,
    /// Per modality, the ordered list of parent factors.
    pub likelihood_edges: Vec<Vec<usize>>,
    /// Per factor.
    pub transitions: Vec<TransitionEdges>,
    pub action_card: usize,
}

/// One violated structural invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    NoFactors,
    NoModalities,
    ZeroActionCard,
    ZeroFactorCard { factor: usize },
    ZeroModalityCard { modality: usize },
    EdgeListLength { expected: usize, found: usize },
    TransitionListLength { expected: usize, found: usize },
    ModalityWithoutParent { modality: usize },
    DanglingEdge { modality: usize, factor: usize },
    DuplicateEdge { modality: usize, factor: usize },
    DanglingTransitionParent { factor: usize, parent: usize },
    DuplicateTransitionParent { factor: usize, parent: usize },
    SelfTransitionParent { factor: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            NoFactors => write!(f, "structure has no hidden factors"),
            NoModalities => write!(f, "structure has no observation modalities"),
            ZeroActionCard => write!(f, "action cardinality is zero"),
            ZeroFactorCard { factor } => write!(f, "factor {factor} has cardinality zero"),
            ZeroModalityCard { modality } => {
                write!(f, "modality {modality} has cardinality zero")
            }
            EdgeListLength { expected, found } => write!(
                f,
                "{found} likelihood edge lists for {expected} modalities"
            ),
            TransitionListLength { expected, found } => {
                write!(f, "{found} transition entries for {expected} factors")
            }
            ModalityWithoutParent { modality } => {
                write!(f, "modality {modality} has no parent factor")
            }
            DanglingEdge { modality, factor } => write!(
                f,
                "modality {modality} references missing factor {factor}"
            ),
            DuplicateEdge { modality, factor } => {
                write!(f, "modality {modality} lists factor {factor} twice")
            }
            DanglingTransitionParent { factor, parent } => write!(
                f,
                "factor {factor} transition references missing factor {parent}"
            ),
            DuplicateTransitionParent { factor, parent } => write!(
                f,
                "factor {factor} transition lists parent {parent} twice"
            ),
            SelfTransitionParent { factor } => write!(
                f,
                "factor {factor} lists itself as an extra transition parent"
            ),
        }
    }
}

/// Result of [`StructureSpec::validate`]; empty iff the spec is valid.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidityReport {
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidStructure(
                self.violations.iter().map(|v| v.to_string()).collect(),
            ))
        }
    }
}

/// Size limits for neighbourhood moves and random restarts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StructureBounds {
    pub max_factors: usize,
    pub min_card: usize,
    pub max_card: usize,
}

impl Default for StructureBounds {
    fn default() -> Self {
        StructureBounds {
            max_factors: 3,
            min_card: 2,
            max_card: 4,
        }
    }
}

type CanonicalEncoding = (Vec<usize>, Vec<Vec<usize>>, Vec<(bool, Vec<usize>)>);

impl StructureSpec {
    pub fn factor_count(&self) -> usize {
        self.factor_cards.len()
    }

    pub fn modality_count(&self) -> usize {
        self.modality_cards.len()
    }

    /// List every violated invariant.
    pub fn validate(&self) -> ValidityReport {
        use Violation::*;
        let mut v = Vec::new();
        let nf = self.factor_cards.len();
        let nm = self.modality_cards.len();
        if nf == 0 {
            v.push(NoFactors);
        }
        if nm == 0 {
            v.push(NoModalities);
        }
        if self.action_card == 0 {
            v.push(ZeroActionCard);
        }
        for (factor, &c) in self.factor_cards.iter().enumerate() {
            if c == 0 {
                v.push(ZeroFactorCard { factor });
            }
        }
        for (modality, &c) in self.modality_cards.iter().enumerate() {
            if c == 0 {
                v.push(ZeroModalityCard { modality });
            }
        }
        if self.likelihood_edges.len() != nm {
            v.push(EdgeListLength {
                expected: nm,
                found: self.likelihood_edges.len(),
            });
        }
        if self.transitions.len() != nf {
            v.push(TransitionListLength {
                expected: nf,
                found: self.transitions.len(),
            });
        }
        for (modality, edges) in self.likelihood_edges.iter().enumerate() {
            if edges.is_empty() {
                v.push(ModalityWithoutParent { modality });
            }
            let mut seen = BTreeSet::new();
            for &factor in edges {
                if factor >= nf {
                    v.push(DanglingEdge { modality, factor });
                } else if !seen.insert(factor) {
                    v.push(DuplicateEdge { modality, factor });
                }
            }
        }
        for (factor, t) in self.transitions.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for &parent in &t.parents {
                if parent == factor {
                    v.push(SelfTransitionParent { factor });
                } else if parent >= nf {
                    v.push(DanglingTransitionParent { factor, parent });
                } else if !seen.insert(parent) {
                    v.push(DuplicateTransitionParent { factor, parent });
                }
            }
        }
        ValidityReport { violations: v }
    }

    pub fn ensure_valid(&self) -> Result<()> {
        self.validate().into_result()
    }

    /// Dimensions of the parents of likelihood table `modality`.
    pub fn likelihood_parent_dims(&self, modality: usize) -> Vec<usize> {
        self.likelihood_edges[modality]
            .iter()
            .map(|&f| self.factor_cards[f])
            .collect()
    }

    /// Dimensions of the parents of transition table `factor`:
    /// previous own state, then the action if controlled, then extra parents.
    pub fn transition_parent_dims(&self, factor: usize) -> Vec<usize> {
        let t = &self.transitions[factor];
        let mut dims = vec![self.factor_cards[factor]];
        if t.action_dependent {
            dims.push(self.action_card);
        }
        dims.extend(t.parents.iter().map(|&p| self.factor_cards[p]));
        dims
    }

    /// Modalities that observe `factor`.
    pub fn attachments(&self, factor: usize) -> Vec<usize> {
        self.likelihood_edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.contains(&factor))
            .map(|(m, _)| m)
            .collect()
    }

    /// Number of edges: likelihood edges, extra transition parents and
    /// action-dependence flags.
    pub fn edge_count(&self) -> usize {
        self.likelihood_edges.iter().map(Vec::len).sum::<usize>()
            + self
                .transitions
                .iter()
                .map(|t| t.parents.len() + usize::from(t.action_dependent))
                .sum::<usize>()
    }

    /// Description length surrogate: `#factors + #edges + Σ(card − 2)`.
    pub fn complexity(&self) -> f64 {
        self.factor_cards.len() as f64
            + self.edge_count() as f64
            + self
                .factor_cards
                .iter()
                .map(|&c| c as f64 - 2.0)
                .sum::<f64>()
    }

    /// Unnormalized `ln P(m) = −κ · complexity(m)`.
    pub fn log_prior(&self, kappa: f64) -> f64 {
        -kappa * self.complexity()
    }

    fn relabel(&self, order: &[usize]) -> StructureSpec {
        // order[new] = old
        let mut new_of_old = vec![0; order.len()];
        for (new, &old) in order.iter().enumerate() {
            new_of_old[old] = new;
        }
        let map_sorted = |xs: &[usize]| {
            let mut v: Vec<usize> = xs.iter().map(|&x| new_of_old[x]).collect();
            v.sort_unstable();
            v
        };
        StructureSpec {
            label: self.label.clone(),
            factor_cards: order.iter().map(|&o| self.factor_cards[o]).collect(),
            modality_cards: self.modality_cards.clone(),
            likelihood_edges: self.likelihood_edges.iter().map(|e| map_sorted(e)).collect(),
            transitions: order
                .iter()
                .map(|&o| TransitionEdges {
                    action_dependent: self.transitions[o].action_dependent,
                    parents: map_sorted(&self.transitions[o].parents),
                })
                .collect(),
            action_card: self.action_card,
        }
    }

    fn encoding(&self) -> CanonicalEncoding {
        (
            self.factor_cards.clone(),
            self.likelihood_edges.clone(),
            self.transitions
                .iter()
                .map(|t| (t.action_dependent, t.parents.clone()))
                .collect(),
        )
    }

    /// Permutation-invariant representative of the spec.
    ///
    /// Factors are sorted by (cardinality, sorted modality attachments,
    /// action dependence, in/out transition degree); factors that tie on that
    /// key are ordered by exhaustive search for the smallest encoding. The
    /// label is carried over unchanged.
    pub fn canonical_form(&self) -> StructureSpec {
        let nf = self.factor_cards.len();
        let used_as_parent = |f: usize| {
            self.transitions
                .iter()
                .filter(|t| t.parents.contains(&f))
                .count()
        };
        let key = |f: usize| {
            (
                self.factor_cards[f],
                self.attachments(f),
                self.transitions[f].action_dependent,
                self.transitions[f].parents.len(),
                used_as_parent(f),
            )
        };
        let mut order: Vec<usize> = (0..nf).collect();
        order.sort_by_key(|&f| key(f));

        let mut groups: Vec<(usize, usize)> = Vec::new();
        let mut start = 0;
        for i in 1..=nf {
            if i == nf || key(order[i]) != key(order[start]) {
                groups.push((start, i));
                start = i;
            }
        }

        let mut best: Option<(CanonicalEncoding, StructureSpec)> = None;
        let mut current = order.clone();
        permute_groups(&mut current, &groups, 0, &mut |candidate| {
            let spec = self.relabel(candidate);
            let enc = spec.encoding();
            if best.as_ref().map_or(true, |(b, _)| enc < *b) {
                best = Some((enc, spec));
            }
        });
        best.map(|(_, s)| s).unwrap_or_else(|| self.clone())
    }

    /// Identity of the canonical class, ignoring the label.
    pub fn canonical_key(&self) -> StructureKey {
        let c = self.canonical_form();
        StructureKey {
            factor_cards: c.factor_cards,
            modality_cards: c.modality_cards,
            likelihood_edges: c.likelihood_edges,
            transitions: c.transitions,
            action_card: c.action_card,
        }
    }

    /// Short structural description, e.g. `f[2a,2]|o0<0|o1<1`.
    pub fn describe(&self) -> String {
        let factors: Vec<String> = self
            .factor_cards
            .iter()
            .zip(&self.transitions)
            .map(|(c, t)| {
                let mut s = c.to_string();
                if t.action_dependent {
                    s.push('a');
                }
                if !t.parents.is_empty() {
                    s.push('^');
                    s.push_str(&join(&t.parents, "+"));
                }
                s
            })
            .collect();
        let mut out = format!("f[{}]", factors.join(","));
        for (m, e) in self.likelihood_edges.iter().enumerate() {
            out.push_str(&format!("|o{m}<{}", join(e, "+")));
        }
        out
    }

    /// All valid specs one local move away, in canonical form, without
    /// duplicates and without the spec's own class.
    ///
    /// Moves: add a factor (cardinality 2, unobserved), remove a factor with
    /// no likelihood edges, increment or decrement one cardinality, add or
    /// remove one likelihood edge, toggle one action-dependence flag (only
    /// when there is more than one action).
    pub fn neighbors(&self, bounds: &StructureBounds) -> Vec<StructureSpec> {
        let mut out = Vec::new();
        let nf = self.factor_count();
        if nf < bounds.max_factors {
            let mut s = self.clone();
            s.factor_cards.push(2);
            s.transitions.push(TransitionEdges::autonomous());
            out.push(s);
        }
        for f in 0..nf {
            if nf > 1 && self.attachments(f).is_empty() {
                out.push(self.without_factor(f));
            }
            let card = self.factor_cards[f];
            if card < bounds.max_card {
                let mut s = self.clone();
                s.factor_cards[f] += 1;
                out.push(s);
            }
            if card > bounds.min_card.max(1) {
                let mut s = self.clone();
                s.factor_cards[f] -= 1;
                out.push(s);
            }
            if self.action_card > 1 {
                let mut s = self.clone();
                s.transitions[f].action_dependent ^= true;
                out.push(s);
            }
        }
        for (m, edges) in self.likelihood_edges.iter().enumerate() {
            for f in 0..nf {
                if !edges.contains(&f) {
                    let mut s = self.clone();
                    s.likelihood_edges[m].push(f);
                    out.push(s);
                } else if edges.len() > 1 {
                    let mut s = self.clone();
                    s.likelihood_edges[m].retain(|&x| x != f);
                    out.push(s);
                }
            }
        }

        let own = self.canonical_key();
        let mut seen = BTreeSet::new();
        let mut result = Vec::new();
        for s in out {
            if !s.validate().is_valid() {
                continue;
            }
            let mut c = s.canonical_form();
            let key = c.canonical_key();
            if key == own || !seen.insert(key) {
                continue;
            }
            c.label = c.describe();
            result.push(c);
        }
        result
    }

    /// Drop factor `f`, removing every edge that touches it.
    pub fn without_factor(&self, f: usize) -> StructureSpec {
        let shift = |x: usize| if x > f { x - 1 } else { x };
        let mut s = self.clone();
        s.factor_cards.remove(f);
        s.transitions.remove(f);
        for t in &mut s.transitions {
            t.parents.retain(|&p| p != f);
            for p in &mut t.parents {
                *p = shift(*p);
            }
        }
        for e in &mut s.likelihood_edges {
            e.retain(|&x| x != f);
            for x in e.iter_mut() {
                *x = shift(*x);
            }
        }
        s
    }

    /// Random valid structure over the same modalities and actions.
    pub fn random_like<R: Rng + ?Sized>(
        template: &StructureSpec,
        bounds: &StructureBounds,
        rng: &mut R,
    ) -> StructureSpec {
        let nf = rng.gen_range(1..=bounds.max_factors.max(1));
        let lo = bounds.min_card.max(1);
        let hi = bounds.max_card.max(lo);
        let factor_cards: Vec<usize> = (0..nf).map(|_| rng.gen_range(lo..=hi)).collect();
        let likelihood_edges = template
            .modality_cards
            .iter()
            .map(|_| {
                let mut e: Vec<usize> = (0..nf).filter(|_| rng.gen_bool(0.5)).collect();
                if e.is_empty() {
                    e.push(rng.gen_range(0..nf));
                }
                e
            })
            .collect();
        let transitions = (0..nf)
            .map(|_| TransitionEdges {
                action_dependent: template.action_card > 1 && rng.gen_bool(0.5),
                parents: Vec::new(),
            })
            .collect();
        let mut s = StructureSpec {
            label: String::new(),
            factor_cards,
            modality_cards: template.modality_cards.clone(),
            likelihood_edges,
            transitions,
            action_card: template.action_card,
        }
        .canonical_form();
        s.label = s.describe();
        s
    }
}

fn permute_groups(
    order: &mut Vec<usize>,
    groups: &[(usize, usize)],
    g: usize,
    visit: &mut dyn FnMut(&[usize]),
) {
    if g == groups.len() {
        visit(order);
        return;
    }
    let (lo, hi) = groups[g];
    permute_range(order, lo, hi, lo, groups, g, visit);
}

fn permute_range(
    order: &mut Vec<usize>,
    lo: usize,
    hi: usize,
    k: usize,
    groups: &[(usize, usize)],
    g: usize,
    visit: &mut dyn FnMut(&[usize]),
) {
    if hi - lo <= 1 || k + 1 >= hi {
        permute_groups(order, groups, g + 1, visit);
        return;
    }
    for i in k..hi {
        order.swap(k, i);
        permute_range(order, lo, hi, k + 1, groups, g, visit);
        order.swap(k, i);
    }
}

fn join(xs: &[usize], sep: &str) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

/// Label-free identity of a canonical structure class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StructureKey {
    pub factor_cards: Vec<usize>,
    pub modality_cards: Vec<usize>,
    pub likelihood_edges: Vec<Vec<usize>>,
    pub transitions: Vec<TransitionEdges>,
    pub action_card: usize,
}
