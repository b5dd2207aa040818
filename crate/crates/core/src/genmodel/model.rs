//! Concrete generative models and their Dirichlet hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genmodel::spec::{StructureSpec, TransitionEdges};
use crate::prob::{
    config_count, config_index, config_values, ConditionalTable, CountTable, DirichletCounts,
    ProbVector,
};

/// Point-valued parameters of a factorial discrete POMDP.
///
/// `a[m]` is `P(o_m | parents)` with parents `spec.likelihood_edges[m]`;
/// `b[f]` is `P(s_f' | s_f [, action] [, extra parents])`; `c[m]` holds
/// preference log-probabilities; `d[f]` the initial state distribution and
/// `e` an optional policy prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerativeModel {
    pub spec: StructureSpec,
    pub a: Vec<ConditionalTable>,
    pub b: Vec<ConditionalTable>,
    pub c: Vec<Vec<f64>>,
    pub d: Vec<ProbVector>,
    pub e: Option<ProbVector>,
}

/// Dirichlet hyperparameters mirroring every column of a [`GenerativeModel`].
///
/// Preferences `c` and the policy prior `e` are configuration, not learned
/// counts; they ride along so [`HyperParams::expected_model`] is total.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub spec: StructureSpec,
    pub a: Vec<CountTable>,
    pub b: Vec<CountTable>,
    pub d: Vec<DirichletCounts>,
    pub c: Vec<Vec<f64>>,
    pub e: Option<ProbVector>,
}

fn check_table_shape(
    what: &str,
    index: usize,
    child: usize,
    parents: &[usize],
    expected_child: usize,
    expected_parents: &[usize],
) -> Result<()> {
    if child != expected_child || parents != expected_parents {
        return Err(Error::Shape(format!(
            "{what}[{index}] has shape {child}×{parents:?}, spec needs {expected_child}×{expected_parents:?}"
        )));
    }
    Ok(())
}

fn check_preferences(spec: &StructureSpec, c: &[Vec<f64>]) -> Result<()> {
    if c.len() != spec.modality_count() {
        return Err(Error::Shape(format!(
            "{} preference vectors for {} modalities",
            c.len(),
            spec.modality_count()
        )));
    }
    for (m, cm) in c.iter().enumerate() {
        if cm.len() != spec.modality_cards[m] {
            return Err(Error::Shape(format!(
                "preference vector {m} has length {}, modality has {}",
                cm.len(),
                spec.modality_cards[m]
            )));
        }
        if cm.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric(format!(
                "preference vector {m} has a non-finite entry"
            )));
        }
    }
    Ok(())
}

impl GenerativeModel {
    /// Build a model, checking every table against the spec.
    pub fn new(
        spec: StructureSpec,
        a: Vec<ConditionalTable>,
        b: Vec<ConditionalTable>,
        c: Vec<Vec<f64>>,
        d: Vec<ProbVector>,
        e: Option<ProbVector>,
    ) -> Result<Self> {
        spec.ensure_valid()?;
        if a.len() != spec.modality_count() || b.len() != spec.factor_count() {
            return Err(Error::Shape("table count does not match spec".into()));
        }
        for (m, t) in a.iter().enumerate() {
            check_table_shape(
                "A",
                m,
                t.child_dimension(),
                t.parent_dimensions(),
                spec.modality_cards[m],
                &spec.likelihood_parent_dims(m),
            )?;
        }
        for (f, t) in b.iter().enumerate() {
            check_table_shape(
                "B",
                f,
                t.child_dimension(),
                t.parent_dimensions(),
                spec.factor_cards[f],
                &spec.transition_parent_dims(f),
            )?;
        }
        if d.len() != spec.factor_count()
            || d.iter().zip(&spec.factor_cards).any(|(v, &k)| v.dimension() != k)
        {
            return Err(Error::Shape("initial distributions do not match spec".into()));
        }
        check_preferences(&spec, &c)?;
        Ok(GenerativeModel { spec, a, b, c, d, e })
    }

    /// Uniform tables and flat preferences.
    pub fn uniform(spec: &StructureSpec) -> Result<Self> {
        HyperParams::flat(spec, 1.0)?.expected_model()
    }

    /// Replace the preference table.
    pub fn with_preferences(mut self, c: Vec<Vec<f64>>) -> Result<Self> {
        check_preferences(&self.spec, &c)?;
        self.c = c;
        Ok(self)
    }

    /// `P(s_f' | s_f, action, extra parents)` for full parent values.
    pub fn transition_column(
        &self,
        factor: usize,
        prev: &[usize],
        action: usize,
    ) -> &ProbVector {
        let values = transition_parent_values(&self.spec, factor, prev, action);
        self.b[factor].column(&values)
    }

    /// `P(o_m | s)` for a full joint state.
    pub fn likelihood_column(&self, modality: usize, state: &[usize]) -> &ProbVector {
        let values: Vec<usize> = self.spec.likelihood_edges[modality]
            .iter()
            .map(|&f| state[f])
            .collect();
        self.a[modality].column(&values)
    }
}

/// Parent values of `B[factor]` given the previous joint state and action.
pub fn transition_parent_values(
    spec: &StructureSpec,
    factor: usize,
    prev: &[usize],
    action: usize,
) -> Vec<usize> {
    let t = &spec.transitions[factor];
    let mut v = Vec::with_capacity(2 + t.parents.len());
    v.push(prev[factor]);
    if t.action_dependent {
        v.push(action);
    }
    v.extend(t.parents.iter().map(|&p| prev[p]));
    v
}

impl HyperParams {
    /// Symmetric Dirichlet counts at `concentration` everywhere, flat
    /// preferences and no policy prior.
    pub fn flat(spec: &StructureSpec, concentration: f64) -> Result<Self> {
        spec.ensure_valid()?;
        if !(concentration > 0.0 && concentration.is_finite()) {
            return Err(Error::Domain(format!(
                "concentration must be positive, got {concentration}"
            )));
        }
        let a = (0..spec.modality_count())
            .map(|m| {
                CountTable::symmetric(
                    spec.modality_cards[m],
                    spec.likelihood_parent_dims(m),
                    concentration,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let b = (0..spec.factor_count())
            .map(|f| {
                CountTable::symmetric(
                    spec.factor_cards[f],
                    spec.transition_parent_dims(f),
                    concentration,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let d = spec
            .factor_cards
            .iter()
            .map(|&k| DirichletCounts::symmetric(k, concentration))
            .collect::<Result<Vec<_>>>()?;
        let c = spec.modality_cards.iter().map(|&k| vec![0.0; k]).collect();
        Ok(HyperParams {
            spec: spec.clone(),
            a,
            b,
            d,
            c,
            e: None,
        })
    }

    /// Counts `concentration · P + floor` around a point model.
    pub fn from_model(model: &GenerativeModel, concentration: f64, floor: f64) -> Result<Self> {
        let a = model
            .a
            .iter()
            .map(|t| CountTable::from_table(t, concentration, floor))
            .collect::<Result<Vec<_>>>()?;
        let b = model
            .b
            .iter()
            .map(|t| CountTable::from_table(t, concentration, floor))
            .collect::<Result<Vec<_>>>()?;
        let d = model
            .d
            .iter()
            .map(|p| {
                DirichletCounts::new(
                    p.as_slice()
                        .iter()
                        .map(|x| concentration * x + floor)
                        .collect(),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(HyperParams {
            spec: model.spec.clone(),
            a,
            b,
            d,
            c: model.c.clone(),
            e: model.e.clone(),
        })
    }

    /// Check all table shapes against the spec.
    pub fn check(&self) -> Result<()> {
        let spec = &self.spec;
        spec.ensure_valid()?;
        if self.a.len() != spec.modality_count()
            || self.b.len() != spec.factor_count()
            || self.d.len() != spec.factor_count()
        {
            return Err(Error::Shape("hyperparameter table count does not match spec".into()));
        }
        for (m, t) in self.a.iter().enumerate() {
            check_table_shape(
                "a",
                m,
                t.child_dimension(),
                t.parent_dimensions(),
                spec.modality_cards[m],
                &spec.likelihood_parent_dims(m),
            )?;
        }
        for (f, t) in self.b.iter().enumerate() {
            check_table_shape(
                "b",
                f,
                t.child_dimension(),
                t.parent_dimensions(),
                spec.factor_cards[f],
                &spec.transition_parent_dims(f),
            )?;
        }
        if self.d.iter().zip(&spec.factor_cards).any(|(v, &k)| v.dimension() != k) {
            return Err(Error::Shape("initial counts do not match spec".into()));
        }
        check_preferences(spec, &self.c)
    }

    /// Dirichlet means of every column, with `c` and `e` copied through.
    pub fn expected_model(&self) -> Result<GenerativeModel> {
        GenerativeModel::new(
            self.spec.clone(),
            self.a.iter().map(CountTable::mean).collect(),
            self.b.iter().map(CountTable::mean).collect(),
            self.c.clone(),
            self.d.iter().map(DirichletCounts::mean).collect(),
            self.e.clone(),
        )
    }

    pub fn with_preferences(mut self, c: Vec<Vec<f64>>) -> Result<Self> {
        check_preferences(&self.spec, &c)?;
        self.c = c;
        Ok(self)
    }

    /// Elementwise `self − prior` over every count column.
    pub fn count_difference(&self, prior: &HyperParams) -> Result<Vec<Vec<f64>>> {
        let mine = self.flat_counts();
        let theirs = prior.flat_counts();
        if mine.len() != theirs.len() {
            return Err(Error::Shape("hyperparameter shapes differ".into()));
        }
        mine.iter()
            .zip(&theirs)
            .map(|(x, y)| {
                if x.len() != y.len() {
                    return Err(Error::Shape("hyperparameter column shapes differ".into()));
                }
                Ok(x.iter().zip(y.iter()).map(|(a, b)| a - b).collect())
            })
            .collect()
    }

    /// Every Dirichlet column in the order `a`, `b`, `d`.
    pub fn flat_counts(&self) -> Vec<&[f64]> {
        self.a
            .iter()
            .chain(&self.b)
            .flat_map(|t| t.columns().iter().map(DirichletCounts::as_slice))
            .chain(self.d.iter().map(DirichletCounts::as_slice))
            .collect()
    }

    /// Mutable view of every Dirichlet column in the order of [`Self::flat_counts`].
    pub fn flat_counts_mut(&mut self) -> Vec<&mut DirichletCounts> {
        let HyperParams { a, b, d, .. } = self;
        a.iter_mut()
            .chain(b.iter_mut())
            .flat_map(|t| t.columns_mut().iter_mut())
            .chain(d.iter_mut())
            .collect()
    }

    /// Drop factor `f`. Dependent tables that listed `f` as a parent have
    /// their counts summed over the removed parent's values.
    pub fn without_factor(&self, f: usize) -> Result<HyperParams> {
        let spec = self.spec.without_factor(f);
        let mut a = Vec::with_capacity(self.a.len());
        for (m, t) in self.a.iter().enumerate() {
            let edges = &self.spec.likelihood_edges[m];
            a.push(match edges.iter().position(|&x| x == f) {
                Some(pos) => marginalize_parent(t, pos)?,
                None => t.clone(),
            });
        }
        let mut b = Vec::with_capacity(self.b.len() - 1);
        for (g, t) in self.b.iter().enumerate() {
            if g == f {
                continue;
            }
            let tr = &self.spec.transitions[g];
            let offset = 1 + usize::from(tr.action_dependent);
            b.push(match tr.parents.iter().position(|&p| p == f) {
                Some(pos) => marginalize_parent(t, offset + pos)?,
                None => t.clone(),
            });
        }
        let mut d = self.d.clone();
        d.remove(f);
        let out = HyperParams {
            spec,
            a,
            b,
            d,
            c: self.c.clone(),
            e: self.e.clone(),
        };
        out.check()?;
        Ok(out)
    }

    /// Append an unobserved, autonomous factor with flat counts.
    pub fn with_added_factor(&self, card: usize, concentration: f64) -> Result<HyperParams> {
        let mut spec = self.spec.clone();
        spec.factor_cards.push(card);
        spec.transitions.push(TransitionEdges::autonomous());
        let mut out = self.clone();
        out.b.push(CountTable::symmetric(
            card,
            spec.transition_parent_dims(spec.factor_count() - 1),
            concentration,
        )?);
        out.d.push(DirichletCounts::symmetric(card, concentration)?);
        out.spec = spec;
        out.check()?;
        Ok(out)
    }
}

/// Sum the columns of `t` over the values of parent `position`.
fn marginalize_parent(t: &CountTable, position: usize) -> Result<CountTable> {
    let dims = t.parent_dimensions();
    let mut reduced_dims = dims.to_vec();
    reduced_dims.remove(position);
    let k = t.child_dimension();
    let mut sums = vec![vec![0.0; k]; config_count(&reduced_dims)];
    for (i, col) in t.columns().iter().enumerate() {
        let mut values = config_values(dims, i);
        values.remove(position);
        let j = config_index(&reduced_dims, &values);
        for (s, c) in sums[j].iter_mut().zip(col.as_slice()) {
            *s += c;
        }
    }
    CountTable::new(
        k,
        reduced_dims,
        sums.into_iter()
            .map(DirichletCounts::new)
            .collect::<Result<Vec<_>>>()?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec2() -> StructureSpec {
        StructureSpec {
            label: "s".into(),
            factor_cards: vec![2, 3],
            modality_cards: vec![2, 3],
            likelihood_edges: vec![vec![0], vec![0, 1]],
            transitions: vec![
                TransitionEdges::controlled(),
                TransitionEdges { action_dependent: false, parents: vec![0] },
            ],
            action_card: 2,
        }
    }

    #[test]
    fn flat_counts_are_concentration() {
        let h = HyperParams::flat(&spec2(), 0.5).unwrap();
        assert!(h.flat_counts().iter().all(|c| c.iter().all(|&x| x == 0.5)));
        let h = HyperParams::flat(&spec2(), 1.0).unwrap();
        assert_eq!(h.a[0].columns()[0].as_slice(), &[1.0, 1.0]);
        assert!(HyperParams::flat(&spec2(), 0.0).is_err());
    }

    #[test]
    fn flat_expected_model_is_uniform() {
        let m = HyperParams::flat(&spec2(), 1.0).unwrap().expected_model().unwrap();
        for t in m.a.iter().chain(&m.b) {
            for c in t.columns() {
                let k = c.dimension() as f64;
                assert!(c.as_slice().iter().all(|&p| (p - 1.0 / k).abs() < 1e-15));
            }
        }
        assert_eq!(m.b[1].parent_dimensions(), &[3, 2]);
        assert_eq!(m.b[0].parent_dimensions(), &[2, 2]);
        assert_eq!(m.a[1].parent_dimensions(), &[2, 3]);
    }

    #[test]
    fn expected_model_column_is_dirichlet_mean() {
        let mut h = HyperParams::flat(&spec2(), 1.0).unwrap();
        h.a[0].columns_mut()[1] = DirichletCounts::new(vec![9.0, 1.0]).unwrap();
        let m = h.expected_model().unwrap();
        assert_eq!(m.a[0].columns()[1].as_slice(), &[0.9, 0.1]);
    }

    #[test]
    fn model_construction_checks_shapes() {
        let m = GenerativeModel::uniform(&spec2()).unwrap();
        let mut a = m.a.clone();
        a.swap(0, 1);
        assert!(GenerativeModel::new(m.spec.clone(), a, m.b.clone(), m.c.clone(), m.d.clone(), None)
            .is_err());
        let bad_c = vec![vec![0.0, f64::INFINITY], vec![0.0; 3]];
        assert!(m.clone().with_preferences(bad_c).is_err());
    }

    #[test]
    fn remove_factor_marginalizes_counts() {
        let mut h = HyperParams::flat(&spec2(), 1.0).unwrap();
        // factor 0 drives factor 1's transition; give its columns distinct counts
        for (i, c) in h.b[1].columns_mut().iter_mut().enumerate() {
            *c = DirichletCounts::new(vec![1.0 + i as f64, 1.0, 2.0]).unwrap();
        }
        let mut spec = h.spec.clone();
        spec.likelihood_edges = vec![vec![1], vec![1]];
        let mut h2 = HyperParams::flat(&spec, 1.0).unwrap();
        h2.b = h.b.clone();
        let r = h2.without_factor(0).unwrap();
        assert_eq!(r.spec.factor_cards, vec![3]);
        assert_eq!(r.b[0].parent_dimensions(), &[3]);
        // column for prev = 0 sums configs (0,0) and (0,1): indices 0 and 1
        assert_eq!(r.b[0].columns()[0].as_slice(), &[3.0, 2.0, 4.0]);
        assert_eq!(r.b[0].columns()[2].as_slice(), &[11.0, 2.0, 4.0]);
    }

    #[test]
    fn added_factor_is_flat() {
        let h = HyperParams::flat(&spec2(), 1.0).unwrap();
        let g = h.with_added_factor(2, 0.25).unwrap();
        assert_eq!(g.spec.factor_count(), 3);
        assert_eq!(g.d[2].as_slice(), &[0.25, 0.25]);
        assert!(g.b[2].columns().iter().all(|c| c.as_slice() == [0.25, 0.25]));
    }
}
