//! The `inferno-data/1` text format for observation-action histories.
//!
//! ```text
//! inferno-data/1
//! modality_cards 2 2
//! action_card 1
//! o 0 1
//! a 0
//! o 1 1
//! end
//! ```
//!
//! Observation lines (`o`, one index per modality) alternate with action
//! lines (`a`), starting and ending with an observation. Blank lines and
//! lines starting with `#` are ignored.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::genmodel::format::{parse_usizes, Reader};
use crate::inference::DataBatch;

pub const DATA_FORMAT: &str = "inferno-data/1";

/// A history together with the sizes it was recorded against.
#[derive(Debug, Clone, PartialEq)]
pub struct DataFile {
    pub modality_cards: Vec<usize>,
    pub action_card: usize,
    pub data: DataBatch,
}

impl DataFile {
    pub fn new(modality_cards: Vec<usize>, action_card: usize, data: DataBatch) -> Result<Self> {
        if modality_cards.is_empty() || modality_cards.contains(&0) || action_card == 0 {
            return Err(Error::Shape("cardinalities must be positive".into()));
        }
        for o in &data.observations {
            if o.len() != modality_cards.len() || o.iter().zip(&modality_cards).any(|(&x, &k)| x >= k) {
                return Err(Error::Shape(format!("observation {o:?} does not fit {modality_cards:?}")));
            }
        }
        if let Some(a) = data.actions.iter().find(|&&a| a >= action_card) {
            return Err(Error::Shape(format!("action {a} out of range")));
        }
        Ok(DataFile {
            modality_cards,
            action_card,
            data,
        })
    }
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn serialize_data(file: &DataFile) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{DATA_FORMAT}");
    let _ = writeln!(out, "modality_cards {}", join(&file.modality_cards));
    let _ = writeln!(out, "action_card {}", file.action_card);
    for (t, o) in file.data.observations.iter().enumerate() {
        if t > 0 {
            let _ = writeln!(out, "a {}", file.data.actions[t - 1]);
        }
        let _ = writeln!(out, "o {}", join(o));
    }
    out.push_str("end\n");
    out
}

pub fn deserialize_data(text: &str) -> Result<DataFile> {
    let mut r = Reader::new(text);
    let (n, rest) = r
        .expect(DATA_FORMAT)
        .map_err(|_| Error::parse(1, "version", format!("missing `{DATA_FORMAT}` header")))?;
    if !rest.is_empty() {
        return Err(Error::parse(n, "version", "unexpected trailing fields"));
    }
    let (n, rest) = r.expect("modality_cards")?;
    let cards = parse_usizes(n, "modality_cards", rest)?;
    let (n, rest) = r.expect("action_card")?;
    let action_card = match parse_usizes(n, "action_card", rest)?.as_slice() {
        [x] => *x,
        _ => return Err(Error::parse(n, "action_card", "expected exactly one integer")),
    };
    let mut observations = Vec::new();
    let mut actions = Vec::new();
    loop {
        let (n, rest) = r.expect("o")?;
        let o = parse_usizes(n, "o", rest)?;
        if o.len() != cards.len() {
            return Err(Error::parse(n, "o", format!("expected {} indices", cards.len())));
        }
        observations.push(o);
        if r.peek_key() != Some("a") {
            break;
        }
        let (n, rest) = r.expect("a")?;
        match parse_usizes(n, "a", rest)?.as_slice() {
            [a] => actions.push(*a),
            _ => return Err(Error::parse(n, "a", "expected exactly one integer")),
        }
    }
    r.expect_exact("end")?;
    r.finish()?;
    let line = r.line_no();
    DataFile::new(cards, action_card, DataBatch::new(observations, actions)?)
        .map_err(|e| Error::parse(line, "data", e.to_string()))
}
