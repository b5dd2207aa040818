//! Posterior snapshots in the `inferno-model/1` format, and a weights table.
//!
//! ```text
//! inferno-model/1
//! object posterior
//! data_seen 120
//! particle 0 <free energy> <log structure prior>
//! prior
//! <hyperparameter body>
//! posterior
//! <hyperparameter body>
//! ...
//! end
//! ```
//!
//! Weights are not stored; they follow from the scores on load.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::genmodel::format::{
    fmt_f64, parse_f64s, parse_usizes, read_header, read_hyper_body, write_hyper_body, Reader, MODEL_FORMAT,
};
use crate::structure::{ParticlePosterior, StructureParticle};

pub fn serialize_posterior(p: &ParticlePosterior) -> String {
    let mut out = format!("{MODEL_FORMAT}\nobject posterior\ndata_seen {}\n", p.data_seen);
    for (i, q) in p.particles.iter().enumerate() {
        let _ = writeln!(
            out,
            "particle {i} {} {}",
            fmt_f64(q.free_energy),
            fmt_f64(q.log_structure_prior)
        );
        out.push_str("prior\n");
        write_hyper_body(&mut out, &q.prior);
        out.push_str("posterior\n");
        write_hyper_body(&mut out, &q.hyper);
    }
    out.push_str("end\n");
    out
}

pub fn deserialize_posterior(text: &str) -> Result<ParticlePosterior> {
    let mut r = Reader::new(text);
    read_header(&mut r, "posterior")?;
    let (n, s) = r.expect("data_seen")?;
    let data_seen = match parse_usizes(n, "data_seen", s)?.as_slice() {
        [x] => *x,
        _ => return Err(Error::parse(n, "data_seen", "expected exactly one integer")),
    };
    let mut particles = Vec::new();
    while r.peek_key() == Some("particle") {
        let (n, s) = r.expect("particle")?;
        let mut fields = s.split_whitespace();
        let index = fields.next().unwrap_or("");
        if index.parse::<usize>().ok() != Some(particles.len()) {
            return Err(Error::parse(
                n,
                "particle",
                format!("expected index {}, found `{index}`", particles.len()),
            ));
        }
        let rest: Vec<&str> = fields.collect();
        let scores = parse_f64s(n, "particle", &rest.join(" "))?;
        let [free_energy, log_structure_prior] = scores.as_slice() else {
            return Err(Error::parse(n, "particle", "expected free energy and log prior"));
        };
        r.expect_exact("prior")?;
        let prior = read_hyper_body(&mut r)?;
        r.expect_exact("posterior")?;
        let hyper = read_hyper_body(&mut r)?;
        if prior.spec != hyper.spec {
            return Err(Error::parse(n, "particle", "prior and posterior structures differ"));
        }
        particles.push(StructureParticle {
            spec: hyper.spec.clone(),
            prior,
            hyper,
            free_energy: *free_energy,
            log_structure_prior: *log_structure_prior,
        });
    }
    r.expect_exact("end")?;
    r.finish()?;
    ParticlePosterior::new(particles, data_seen)
}

/// `label,free_energy,log_prior,weight` with one row per particle.
pub fn weights_csv(p: &ParticlePosterior) -> String {
    let mut out = String::from("label,free_energy,log_prior,weight\n");
    for (q, w) in p.particles.iter().zip(p.weights.as_slice()) {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            q.spec.describe(),
            q.free_energy,
            q.log_structure_prior,
            w
        );
    }
    out
}
