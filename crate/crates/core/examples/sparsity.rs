//! Evaluates the full model on three equally sized slices of decreasing
//! sparsity cut from a synthetic corpus, and prints recall@10 per slice.
//!
//! `cargo run --release -p wdrec-core --example sparsity -- 0 5`

use std::time::Instant;

use wdrec_core::experiment::desk_sparsity_study;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse()).collect::<Result<_, _>>()?;
    let (first, count) = (args.first().copied().unwrap_or(0), args.get(1).copied().unwrap_or(1));
    for seed in first..first + count {
        let start = Instant::now();
        let results = desk_sparsity_study(seed)?;
        let line: Vec<String> = results
            .iter()
            .map(|r| format!("{:.4}: r@10={:.4}", r.achieved, r.report.get("recall@10").unwrap_or(f64::NAN)))
            .collect();
        println!("seed {seed} ({:.1}s): {}", start.elapsed().as_secs_f64(), line.join(" | "));
    }
    Ok(())
}
