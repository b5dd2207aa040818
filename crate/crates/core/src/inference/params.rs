//! Log-parameter tables and the expectations shared by inference, learning
//! and free-energy evaluation.

use crate::error::{Error, Result};
use crate::genmodel::{GenerativeModel, HyperParams, StructureSpec};
use crate::inference::{BeliefState, DataBatch};
use crate::prob::{config_count, config_values, expected_log_slice, DirichletCounts};

/// Per-table, per-column values laid out like a model: `a[m][column][o]`,
/// `b[f][column][s']`, `d[f][s]`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Tables {
    pub a: Vec<Vec<Vec<f64>>>,
    pub b: Vec<Vec<Vec<f64>>>,
    pub d: Vec<Vec<f64>>,
}

impl Tables {
    pub fn zeros(spec: &StructureSpec) -> Self {
        Tables {
            a: (0..spec.modality_count())
                .map(|m| {
                    vec![
                        vec![0.0; spec.modality_cards[m]];
                        config_count(&spec.likelihood_parent_dims(m))
                    ]
                })
                .collect(),
            b: (0..spec.factor_count())
                .map(|f| {
                    vec![
                        vec![0.0; spec.factor_cards[f]];
                        config_count(&spec.transition_parent_dims(f))
                    ]
                })
                .collect(),
            d: spec.factor_cards.iter().map(|&k| vec![0.0; k]).collect(),
        }
    }

    /// `ln` of a point model; zero probabilities become `-∞`.
    pub fn log_of_model(model: &GenerativeModel) -> Self {
        let ln = |xs: &[f64]| xs.iter().map(|x| x.ln()).collect::<Vec<_>>();
        Tables {
            a: model
                .a
                .iter()
                .map(|t| t.columns().iter().map(|c| ln(c.as_slice())).collect())
                .collect(),
            b: model
                .b
                .iter()
                .map(|t| t.columns().iter().map(|c| ln(c.as_slice())).collect())
                .collect(),
            d: model.d.iter().map(|p| ln(p.as_slice())).collect(),
        }
    }

    /// Expected log parameters `ψ(c) − ψ(Σc)` under the Dirichlet beliefs.
    pub fn expected_log_of(h: &HyperParams) -> Self {
        let el = |c: &DirichletCounts| expected_log_slice(c.as_slice());
        Tables {
            a: h.a.iter().map(|t| t.columns().iter().map(el).collect()).collect(),
            b: h.b.iter().map(|t| t.columns().iter().map(el).collect()).collect(),
            d: h.d.iter().map(el).collect(),
        }
    }

    /// All columns in `HyperParams::flat_counts` order.
    pub fn into_flat(self) -> Vec<Vec<f64>> {
        self.a
            .into_iter()
            .chain(self.b)
            .flatten()
            .chain(self.d)
            .collect()
    }
}

/// Parent configurations of every table, enumerated once per structure.
pub(crate) struct Layout {
    pub a_configs: Vec<Vec<Vec<usize>>>,
    pub b_configs: Vec<Vec<Vec<usize>>>,
    /// Index of the first extra parent in a transition configuration.
    pub b_offset: Vec<usize>,
}

impl Layout {
    pub fn new(spec: &StructureSpec) -> Self {
        let enumerate = |dims: Vec<usize>| {
            (0..config_count(&dims))
                .map(|i| config_values(&dims, i))
                .collect::<Vec<_>>()
        };
        Layout {
            a_configs: (0..spec.modality_count())
                .map(|m| enumerate(spec.likelihood_parent_dims(m)))
                .collect(),
            b_configs: (0..spec.factor_count())
                .map(|f| enumerate(spec.transition_parent_dims(f)))
                .collect(),
            b_offset: spec
                .transitions
                .iter()
                .map(|t| 1 + usize::from(t.action_dependent))
                .collect(),
        }
    }
}

/// `w · l` with `0 · (−∞) = 0`.
#[inline]
pub(crate) fn wlog(w: f64, l: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w * l
    }
}

pub(crate) fn check_beliefs(spec: &StructureSpec, beliefs: &BeliefState, data: &DataBatch) -> Result<()> {
    let steps = data.len();
    if beliefs.marginals.len() != steps || beliefs.pairwise.len() + 1 != steps {
        return Err(Error::Shape(format!(
            "beliefs cover {} steps, data has {steps}",
            beliefs.marginals.len()
        )));
    }
    for (t, row) in beliefs.marginals.iter().enumerate() {
        if row.len() != spec.factor_count()
            || row.iter().zip(&spec.factor_cards).any(|(p, &k)| p.dimension() != k)
        {
            return Err(Error::Shape(format!("beliefs at step {t} do not match the structure")));
        }
    }
    for row in &beliefs.pairwise {
        if row.len() != spec.factor_count()
            || row.iter().zip(&spec.factor_cards).any(|(p, &k)| p.len() != k * k)
        {
            return Err(Error::Shape("pairwise beliefs do not match the structure".into()));
        }
    }
    Ok(())
}

/// Product of belief marginals over the given (factor, value) pairs,
/// skipping `skip`.
#[inline]
fn weight(marg: &[crate::prob::ProbVector], factors: &[usize], values: &[usize], skip: Option<usize>) -> f64 {
    let mut w = 1.0;
    for (j, (&f, &v)) in factors.iter().zip(values).enumerate() {
        if Some(j) != skip {
            w *= marg[f][v];
        }
    }
    w
}

/// `(accuracy, prior energy)`: `E_Q[Σ ln P(o | s)]` and
/// `E_Q[ln P(s_1) + Σ ln P(s_t | s_{t−1}, a)]`.
pub(crate) fn expected_log_joint(
    spec: &StructureSpec,
    layout: &Layout,
    lp: &Tables,
    beliefs: &BeliefState,
    data: &DataBatch,
) -> (f64, f64) {
    let mut accuracy = 0.0;
    for (t, obs) in data.observations.iter().enumerate() {
        let marg = &beliefs.marginals[t];
        for m in 0..spec.modality_count() {
            let edges = &spec.likelihood_edges[m];
            for (i, values) in layout.a_configs[m].iter().enumerate() {
                let w = weight(marg, edges, values, None);
                accuracy += wlog(w, lp.a[m][i][obs[m]]);
            }
        }
    }
    let mut prior = 0.0;
    for f in 0..spec.factor_count() {
        for (s, &l) in lp.d[f].iter().enumerate() {
            prior += wlog(beliefs.marginals[0][f][s], l);
        }
    }
    for t in 1..data.len() {
        let action = data.actions[t - 1];
        let marg = &beliefs.marginals[t - 1];
        for f in 0..spec.factor_count() {
            let tr = &spec.transitions[f];
            let k = spec.factor_cards[f];
            let off = layout.b_offset[f];
            let pair = &beliefs.pairwise[t - 1][f];
            for (i, values) in layout.b_configs[f].iter().enumerate() {
                if tr.action_dependent && values[1] != action {
                    continue;
                }
                let w = weight(marg, &tr.parents, &values[off..], None);
                if w == 0.0 {
                    continue;
                }
                let prev = values[0];
                for x in 0..k {
                    prior += wlog(w * pair[prev * k + x], lp.b[f][i][x]);
                }
            }
        }
    }
    (accuracy, prior)
}

/// Expected sufficient statistics of the data under the beliefs.
pub(crate) fn expected_counts_tables(
    spec: &StructureSpec,
    layout: &Layout,
    beliefs: &BeliefState,
    data: &DataBatch,
) -> Tables {
    let mut c = Tables::zeros(spec);
    for (t, obs) in data.observations.iter().enumerate() {
        let marg = &beliefs.marginals[t];
        for m in 0..spec.modality_count() {
            let edges = &spec.likelihood_edges[m];
            for (i, values) in layout.a_configs[m].iter().enumerate() {
                c.a[m][i][obs[m]] += weight(marg, edges, values, None);
            }
        }
    }
    for f in 0..spec.factor_count() {
        for (s, x) in c.d[f].iter_mut().enumerate() {
            *x += beliefs.marginals[0][f][s];
        }
    }
    for t in 1..data.len() {
        let action = data.actions[t - 1];
        let marg = &beliefs.marginals[t - 1];
        for f in 0..spec.factor_count() {
            let tr = &spec.transitions[f];
            let k = spec.factor_cards[f];
            let off = layout.b_offset[f];
            let pair = &beliefs.pairwise[t - 1][f];
            for (i, values) in layout.b_configs[f].iter().enumerate() {
                if tr.action_dependent && values[1] != action {
                    continue;
                }
                let w = weight(marg, &tr.parents, &values[off..], None);
                if w == 0.0 {
                    continue;
                }
                let prev = values[0];
                for x in 0..k {
                    c.b[f][i][x] += w * pair[prev * k + x];
                }
            }
        }
    }
    c
}

/// Log potentials of factor `f`'s chain given every other factor's beliefs:
/// `(unary[t][s], pair[t][s_t * k + s_{t+1}])`.
pub(crate) fn factor_potentials(
    spec: &StructureSpec,
    layout: &Layout,
    lp: &Tables,
    beliefs: &BeliefState,
    data: &DataBatch,
    f: usize,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let steps = data.len();
    let k = spec.factor_cards[f];
    let mut unary = vec![vec![0.0; k]; steps];
    unary[0].copy_from_slice(&lp.d[f]);

    for (m, edges) in spec.likelihood_edges.iter().enumerate() {
        let Some(pos) = edges.iter().position(|&g| g == f) else {
            continue;
        };
        for (t, obs) in data.observations.iter().enumerate() {
            let marg = &beliefs.marginals[t];
            for (i, values) in layout.a_configs[m].iter().enumerate() {
                let w = weight(marg, edges, values, Some(pos));
                unary[t][values[pos]] += wlog(w, lp.a[m][i][obs[m]]);
            }
        }
    }

    let mut pair = vec![vec![0.0; k * k]; steps.saturating_sub(1)];
    let tr = &spec.transitions[f];
    let off = layout.b_offset[f];
    for t in 1..steps {
        let action = data.actions[t - 1];
        let marg = &beliefs.marginals[t - 1];
        for (i, values) in layout.b_configs[f].iter().enumerate() {
            if tr.action_dependent && values[1] != action {
                continue;
            }
            let w = weight(marg, &tr.parents, &values[off..], None);
            let prev = values[0];
            for x in 0..k {
                pair[t - 1][prev * k + x] += wlog(w, lp.b[f][i][x]);
            }
        }
    }

    // Factor f as an extra parent of other factors' transitions.
    for g in 0..spec.factor_count() {
        let tg = &spec.transitions[g];
        let Some(pos) = tg.parents.iter().position(|&p| p == f) else {
            continue;
        };
        let kg = spec.factor_cards[g];
        let off = layout.b_offset[g];
        for t in 1..steps {
            let action = data.actions[t - 1];
            let marg = &beliefs.marginals[t - 1];
            let pair_g = &beliefs.pairwise[t - 1][g];
            for (i, values) in layout.b_configs[g].iter().enumerate() {
                if tg.action_dependent && values[1] != action {
                    continue;
                }
                let w = weight(marg, &tg.parents, &values[off..], Some(pos));
                if w == 0.0 {
                    continue;
                }
                let prev = values[0];
                let mut e = 0.0;
                for x in 0..kg {
                    e += wlog(pair_g[prev * kg + x], lp.b[g][i][x]);
                }
                unary[t - 1][values[off + pos]] += wlog(w, e);
            }
        }
    }
    (unary, pair)
}
