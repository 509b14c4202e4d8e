//! Runs the synthetic ablation for a range of seeds and prints recall@50
//! per variant.
//!
//! `cargo run --release -p wdrec-core --example ablation -- 0 5`

use std::time::Instant;

use wdrec_core::experiment::desk_ablation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let (first, count) = (args.first().copied().unwrap_or(0), args.get(1).copied().unwrap_or(1));
    for seed in first..first + count {
        let start = Instant::now();
        let reports = desk_ablation(seed)?;
        let line: Vec<String> = reports
            .iter()
            .map(|r| {
                format!(
                    "{} r@50={:.4} p@5={:.4}",
                    r.meta.model,
                    r.get("recall@50").unwrap_or(f64::NAN),
                    r.get("precision@5").unwrap_or(f64::NAN)
                )
            })
            .collect();
        println!("seed {seed} ({:.1}s): {}", start.elapsed().as_secs_f64(), line.join(" | "));
    }
    Ok(())
}
