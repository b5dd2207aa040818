//! Derives the frozen thresholds of the acceptance suite on seeds disjoint
//! from the ones it tests. Run with
//! `cargo run --release -p inferno-cli --example preregister`.

#[path = "../tests/experiments/mod.rs"]
mod experiments;
#[path = "../tests/oracle/mod.rs"]
mod oracle;

use experiments::{phenotype_oracle, phenotype_scenario, recovered_weight, rescue_pair};

const SEEDS: std::ops::Range<u64> = 1000..1020;

fn main() {
    // Structure recovery: smallest step count on the grid at which every
    // pre-registration seed puts 0.9 on the true class.
    let grid = [50usize, 75, 100, 125, 150];
    let mut structure_steps = None;
    for &n in &grid {
        let weights: Vec<f64> = (1000..1003).map(|s| recovered_weight(s, n)).collect();
        println!("structure n={n}: {weights:.3?}");
        if weights.iter().all(|&w| w >= 0.9) {
            structure_steps = Some(n);
            break;
        }
    }
    println!("STRUCTURE_STEPS = {structure_steps:?}");

    // Phenotyping: smallest step count at which the oracle posterior on the
    // generating hypothesis exceeds 0.9 for every seed.
    let mut phenotype_steps = None;
    for n in (5..=100).step_by(5) {
        let worst = SEEDS
            .map(|s| {
                let (hyps, data) = phenotype_scenario(s, n);
                phenotype_oracle(&hyps, &data)[0]
            })
            .fold(1.0f64, f64::min);
        println!("phenotype n={n}: min posterior {worst:.4}");
        if worst > 0.9 {
            phenotype_steps = Some(n);
            break;
        }
    }
    println!("PHENOTYPE_STEPS = {phenotype_steps:?}");

    // Rescue: half the mean paired margin.
    let margins: Vec<f64> = SEEDS
        .map(|s| {
            let (empath, random) = rescue_pair(s);
            random - empath
        })
        .collect();
    let mean = margins.iter().sum::<f64>() / margins.len() as f64;
    let wins = margins.iter().filter(|&&m| m > 0.0).count();
    println!("rescue: {wins}/20 wins, mean margin {mean:.4}");
    println!("RESCUE_MARGIN = {:.3}", (mean / 2.0 * 1000.0).floor() / 1000.0);
}
