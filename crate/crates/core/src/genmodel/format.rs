//! The `inferno-model/1` text format.
//!
//! Line oriented. Each line is a keyword followed by whitespace-separated
//! fields; floats use 17 significant digits so every `f64` round-trips.
//! Tables are written row-major, one line per parent configuration.
//!
//! ```text
//! inferno-model/1
//! object model
//! label minimal
//! action_card 1
//! factor_cards 2
//! modality_cards 2
//! likelihood 0 0
//! transition 0 fixed
//! A 0 0 5.0000000000000000e-1 5.0000000000000000e-1
//! ...
//! end
//! ```
//!
//! `object` is one of `spec`, `model`, `hyperparams`. Models carry `A`,
//! `B`, `C`, `D`, `E` lines; hyperparameters carry `a`, `b`, `d` count lines
//! plus `C` and `E`. `E none` marks an absent policy prior.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::genmodel::model::{GenerativeModel, HyperParams};
use crate::genmodel::spec::{StructureSpec, TransitionEdges};
use crate::prob::{config_count, ConditionalTable, CountTable, DirichletCounts, ProbVector};

pub const MODEL_FORMAT: &str = "inferno-model/1";

pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn join_f64(xs: &[f64]) -> String {
    xs.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(" ")
}

fn join_usize(xs: &[usize]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn push_line(out: &mut String, key: &str, rest: &str) {
    if rest.is_empty() {
        let _ = writeln!(out, "{key}");
    } else {
        let _ = writeln!(out, "{key} {rest}");
    }
}

pub(crate) fn write_spec_body(out: &mut String, spec: &StructureSpec) {
    push_line(out, "label", &spec.label);
    push_line(out, "action_card", &spec.action_card.to_string());
    push_line(out, "factor_cards", &join_usize(&spec.factor_cards));
    push_line(out, "modality_cards", &join_usize(&spec.modality_cards));
    for (m, e) in spec.likelihood_edges.iter().enumerate() {
        push_line(out, "likelihood", &format!("{m} {}", join_usize(e)).trim_end().to_string());
    }
    for (f, t) in spec.transitions.iter().enumerate() {
        let kind = if t.action_dependent { "controlled" } else { "fixed" };
        push_line(
            out,
            "transition",
            format!("{f} {kind} {}", join_usize(&t.parents)).trim_end(),
        );
    }
}

fn write_prefs(out: &mut String, c: &[Vec<f64>], e: &Option<ProbVector>) {
    for (m, cm) in c.iter().enumerate() {
        push_line(out, "C", &format!("{m} {}", join_f64(cm)));
    }
    match e {
        Some(p) => push_line(out, "E", &join_f64(p.as_slice())),
        None => push_line(out, "E", "none"),
    }
}

pub(crate) fn write_hyper_body(out: &mut String, h: &HyperParams) {
    write_spec_body(out, &h.spec);
    for (key, tables) in [("a", &h.a), ("b", &h.b)] {
        for (i, t) in tables.iter().enumerate() {
            for (j, col) in t.columns().iter().enumerate() {
                push_line(out, key, &format!("{i} {j} {}", join_f64(col.as_slice())));
            }
        }
    }
    for (f, c) in h.d.iter().enumerate() {
        push_line(out, "d", &format!("{f} {}", join_f64(c.as_slice())));
    }
    write_prefs(out, &h.c, &h.e);
}

fn header(kind: &str) -> String {
    format!("{MODEL_FORMAT}\nobject {kind}\n")
}

pub fn serialize_spec(spec: &StructureSpec) -> String {
    let mut out = header("spec");
    write_spec_body(&mut out, spec);
    out.push_str("end\n");
    out
}

pub fn serialize_model(model: &GenerativeModel) -> String {
    let mut out = header("model");
    write_spec_body(&mut out, &model.spec);
    for (key, tables) in [("A", &model.a), ("B", &model.b)] {
        for (i, t) in tables.iter().enumerate() {
            for (j, col) in t.columns().iter().enumerate() {
                push_line(&mut out, key, &format!("{i} {j} {}", join_f64(col.as_slice())));
            }
        }
    }
    for (f, p) in model.d.iter().enumerate() {
        push_line(&mut out, "D", &format!("{f} {}", join_f64(p.as_slice())));
    }
    write_prefs(&mut out, &model.c, &model.e);
    out.push_str("end\n");
    out
}

pub fn serialize_hyperparams(h: &HyperParams) -> String {
    let mut out = header("hyperparams");
    write_hyper_body(&mut out, h);
    out.push_str("end\n");
    out
}

/// Sequential line reader with 1-based line numbers for diagnostics.
pub(crate) struct Reader<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end()))
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
            .collect();
        Reader { lines, pos: 0 }
    }

    pub(crate) fn line_no(&self) -> usize {
        self.lines
            .get(self.pos)
            .map(|(n, _)| *n)
            .unwrap_or_else(|| self.lines.last().map_or(1, |(n, _)| n + 1))
    }

    pub(crate) fn peek_key(&self) -> Option<&'a str> {
        self.lines
            .get(self.pos)
            .and_then(|(_, l)| l.split_whitespace().next())
    }

    /// Consume a line that must start with `key`; returns the remainder.
    pub(crate) fn expect(&mut self, key: &str) -> Result<(usize, &'a str)> {
        let Some(&(n, line)) = self.lines.get(self.pos) else {
            return Err(Error::parse(self.line_no(), key, "unexpected end of file"));
        };
        let trimmed = line.trim_start();
        let (k, rest) = match trimmed.find(char::is_whitespace) {
            Some(i) => (&trimmed[..i], trimmed[i..].trim_start()),
            None => (trimmed, ""),
        };
        if k != key {
            return Err(Error::parse(n, key, format!("expected `{key}`, found `{k}`")));
        }
        self.pos += 1;
        Ok((n, rest))
    }

    pub(crate) fn expect_exact(&mut self, key: &str) -> Result<()> {
        let (n, rest) = self.expect(key)?;
        if !rest.is_empty() {
            return Err(Error::parse(n, key, "unexpected trailing fields"));
        }
        Ok(())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos < self.lines.len() {
            return Err(Error::parse(self.line_no(), "end", "content after end of object"));
        }
        Ok(())
    }
}

pub(crate) fn parse_usizes(n: usize, field: &str, s: &str) -> Result<Vec<usize>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|e| Error::parse(n, field, format!("`{t}`: {e}")))
        })
        .collect()
}

pub(crate) fn parse_f64s(n: usize, field: &str, s: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::parse(n, field, format!("`{t}`: {e}")))
        })
        .collect()
}

fn parse_one(n: usize, field: &str, s: &str) -> Result<usize> {
    let v = parse_usizes(n, field, s)?;
    match v.as_slice() {
        [x] => Ok(*x),
        _ => Err(Error::parse(n, field, "expected exactly one integer")),
    }
}

fn expect_index(n: usize, field: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::parse(n, field, format!("expected index {want}, found {got}")));
    }
    Ok(())
}

pub(crate) fn read_header(r: &mut Reader<'_>, kind: &str) -> Result<()> {
    let (n, rest) = r.expect(MODEL_FORMAT).map_err(|_| {
        Error::parse(1, "version", format!("missing `{MODEL_FORMAT}` header"))
    })?;
    if !rest.is_empty() {
        return Err(Error::parse(n, "version", "unexpected trailing fields"));
    }
    let (n, k) = r.expect("object")?;
    if k != kind {
        return Err(Error::parse(n, "object", format!("expected `{kind}`, found `{k}`")));
    }
    Ok(())
}

pub(crate) fn read_spec_body(r: &mut Reader<'_>) -> Result<StructureSpec> {
    let (_, label) = r.expect("label")?;
    let label = label.to_string();
    let (n, s) = r.expect("action_card")?;
    let action_card = parse_one(n, "action_card", s)?;
    let (n, s) = r.expect("factor_cards")?;
    let factor_cards = parse_usizes(n, "factor_cards", s)?;
    let (n, s) = r.expect("modality_cards")?;
    let modality_cards = parse_usizes(n, "modality_cards", s)?;
    let mut likelihood_edges = Vec::with_capacity(modality_cards.len());
    for m in 0..modality_cards.len() {
        let (n, s) = r.expect("likelihood")?;
        let v = parse_usizes(n, "likelihood", s)?;
        let Some((&idx, parents)) = v.split_first() else {
            return Err(Error::parse(n, "likelihood", "missing modality index"));
        };
        expect_index(n, "likelihood", idx, m)?;
        likelihood_edges.push(parents.to_vec());
    }
    let mut transitions = Vec::with_capacity(factor_cards.len());
    for f in 0..factor_cards.len() {
        let (n, s) = r.expect("transition")?;
        let mut toks = s.split_whitespace();
        let idx = toks
            .next()
            .ok_or_else(|| Error::parse(n, "transition", "missing factor index"))?;
        let idx = parse_one(n, "transition", idx)?;
        expect_index(n, "transition", idx, f)?;
        let action_dependent = match toks.next() {
            Some("controlled") => true,
            Some("fixed") => false,
            other => {
                return Err(Error::parse(
                    n,
                    "transition",
                    format!("expected `controlled` or `fixed`, found {other:?}"),
                ))
            }
        };
        let parents = parse_usizes(n, "transition", &toks.collect::<Vec<_>>().join(" "))?;
        transitions.push(TransitionEdges {
            action_dependent,
            parents,
        });
    }
    let spec = StructureSpec {
        label,
        factor_cards,
        modality_cards,
        likelihood_edges,
        transitions,
        action_card,
    };
    spec.validate().into_result().map_err(|e| Error::parse(r.line_no(), "spec", e.to_string()))?;
    Ok(spec)
}

fn read_columns(
    r: &mut Reader<'_>,
    key: &str,
    table: usize,
    n_cols: usize,
    dim: usize,
) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut out = Vec::with_capacity(n_cols);
    for j in 0..n_cols {
        let (n, s) = r.expect(key)?;
        let v = parse_f64s(n, key, s)?;
        if v.len() != dim + 2 {
            return Err(Error::parse(
                n,
                key,
                format!("expected {} values, found {}", dim, v.len().saturating_sub(2)),
            ));
        }
        expect_index(n, key, v[0] as usize, table)?;
        expect_index(n, key, v[1] as usize, j)?;
        out.push((n, v[2..].to_vec()));
    }
    Ok(out)
}

fn read_prob_table(
    r: &mut Reader<'_>,
    key: &str,
    table: usize,
    child: usize,
    parents: Vec<usize>,
) -> Result<ConditionalTable> {
    let cols = read_columns(r, key, table, config_count(&parents), child)?
        .into_iter()
        .map(|(n, v)| ProbVector::new(v).map_err(|e| Error::parse(n, key, e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    ConditionalTable::new(child, parents, cols).map_err(|e| Error::parse(r.line_no(), key, e.to_string()))
}

fn read_count_table(
    r: &mut Reader<'_>,
    key: &str,
    table: usize,
    child: usize,
    parents: Vec<usize>,
) -> Result<CountTable> {
    let cols = read_columns(r, key, table, config_count(&parents), child)?
        .into_iter()
        .map(|(n, v)| DirichletCounts::new(v).map_err(|e| Error::parse(n, key, e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    CountTable::new(child, parents, cols).map_err(|e| Error::parse(r.line_no(), key, e.to_string()))
}

fn read_indexed_vector(r: &mut Reader<'_>, key: &str, index: usize, dim: usize) -> Result<(usize, Vec<f64>)> {
    let (n, s) = r.expect(key)?;
    let v = parse_f64s(n, key, s)?;
    if v.len() != dim + 1 {
        return Err(Error::parse(n, key, format!("expected {dim} values")));
    }
    expect_index(n, key, v[0] as usize, index)?;
    Ok((n, v[1..].to_vec()))
}

fn read_prefs(r: &mut Reader<'_>, spec: &StructureSpec) -> Result<(Vec<Vec<f64>>, Option<ProbVector>)> {
    let mut c = Vec::with_capacity(spec.modality_count());
    for (m, &k) in spec.modality_cards.iter().enumerate() {
        let (n, v) = read_indexed_vector(r, "C", m, k)?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::parse(n, "C", "preferences must be finite"));
        }
        c.push(v);
    }
    let (n, s) = r.expect("E")?;
    let e = if s == "none" {
        None
    } else {
        Some(ProbVector::new(parse_f64s(n, "E", s)?).map_err(|e| Error::parse(n, "E", e.to_string()))?)
    };
    Ok((c, e))
}

pub(crate) fn read_hyper_body(r: &mut Reader<'_>) -> Result<HyperParams> {
    let spec = read_spec_body(r)?;
    let a = (0..spec.modality_count())
        .map(|m| read_count_table(r, "a", m, spec.modality_cards[m], spec.likelihood_parent_dims(m)))
        .collect::<Result<Vec<_>>>()?;
    let b = (0..spec.factor_count())
        .map(|f| read_count_table(r, "b", f, spec.factor_cards[f], spec.transition_parent_dims(f)))
        .collect::<Result<Vec<_>>>()?;
    let d = (0..spec.factor_count())
        .map(|f| {
            let (n, v) = read_indexed_vector(r, "d", f, spec.factor_cards[f])?;
            DirichletCounts::new(v).map_err(|e| Error::parse(n, "d", e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (c, e) = read_prefs(r, &spec)?;
    Ok(HyperParams { spec, a, b, d, c, e })
}

pub fn deserialize_spec(text: &str) -> Result<StructureSpec> {
    let mut r = Reader::new(text);
    read_header(&mut r, "spec")?;
    let spec = read_spec_body(&mut r)?;
    r.expect_exact("end")?;
    r.finish()?;
    Ok(spec)
}

pub fn deserialize_model(text: &str) -> Result<GenerativeModel> {
    let mut r = Reader::new(text);
    read_header(&mut r, "model")?;
    let spec = read_spec_body(&mut r)?;
    let a = (0..spec.modality_count())
        .map(|m| read_prob_table(&mut r, "A", m, spec.modality_cards[m], spec.likelihood_parent_dims(m)))
        .collect::<Result<Vec<_>>>()?;
    let b = (0..spec.factor_count())
        .map(|f| read_prob_table(&mut r, "B", f, spec.factor_cards[f], spec.transition_parent_dims(f)))
        .collect::<Result<Vec<_>>>()?;
    let d = (0..spec.factor_count())
        .map(|f| {
            let (n, v) = read_indexed_vector(&mut r, "D", f, spec.factor_cards[f])?;
            ProbVector::new(v).map_err(|e| Error::parse(n, "D", e.to_string()))
        })
        .collect::<Result<Vec<_>>>()?;
    let (c, e) = read_prefs(&mut r, &spec)?;
    r.expect_exact("end")?;
    r.finish()?;
    GenerativeModel::new(spec, a, b, c, d, e)
}

pub fn deserialize_hyperparams(text: &str) -> Result<HyperParams> {
    let mut r = Reader::new(text);
    read_header(&mut r, "hyperparams")?;
    let h = read_hyper_body(&mut r)?;
    r.expect_exact("end")?;
    r.finish()?;
    h.check()?;
    Ok(h)
}
