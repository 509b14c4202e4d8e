//! Acceptance runner: one PASS/FAIL line per criterion, non-zero exit if
//! any fails. `cargo test --release -p wdrec-cli --test acceptance`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::*;
use wdrec_core::experiment::{desk_ablation, desk_sparsity_study};
use wdrec_core::graph::{train_transr, TransRConfig};
use wdrec_core::ingest::sparsity;
use wdrec_core::mf::{bpr_pair_loss, train_bpr, train_eals, EalsConfig};
use wdrec_core::nmor::bce_loss;

const SEEDS: u64 = 5;

type GradientCheck = (&'static str, fn(u64) -> f64);
type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn sparsity_cross_check() -> Outcome {
    let pct = 100.0 * sparsity(8024, 381_784, 3_272_086);
    let rounded = (pct * 100.0).round() / 100.0;
    outcome(
        rounded == 99.89 && (pct - 99.90).abs() <= 0.02,
        format!("sparsity {pct:.4}% (reported 99.90%)"),
    )
}

fn loss_anchors() -> Outcome {
    let ln2 = std::f64::consts::LN_2;
    let (a, b) = (bpr_pair_loss(0.7, 0.7), bce_loss(0.0, true));
    outcome(
        (a - ln2).abs() <= 1e-9 && (b - ln2).abs() <= 1e-9,
        format!("bpr {a:.12}, bce {b:.12}"),
    )
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let checks: [GradientCheck; 4] = [
        ("bpr", bpr_gradient_error),
        ("sgns", sgns_gradient_error),
        ("transr", transr_gradient_error),
        ("nmor", nmor_gradient_error),
    ];
    let mut worst = BTreeMap::new();
    for (name, check) in checks {
        let w = (0..3).map(check).fold(0.0, f64::max);
        worst.insert(name, w);
    }
    let elapsed = start.elapsed();
    let pass = worst.values().all(|&w| w < GRAD_TOLERANCE) && within(elapsed, 10.0);
    let listed: Vec<String> = worst.iter().map(|(n, w)| format!("{n} {w:.1e}")).collect();
    outcome(pass, format!("worst relative errors {} in {:.2}s", listed.join(", "), elapsed.as_secs_f64()))
}

fn gate_simplex() -> Outcome {
    match gate_simplex_check(10_000, 1) {
        Ok(w) => outcome(true, format!("10000 draws, worst sum error {w:.1e}")),
        Err(e) => outcome(false, e),
    }
}

fn convexity() -> Outcome {
    match convexity_check(1_000, 2) {
        Ok(w) => outcome(true, format!("1000 draws, worst error {w:.1e}")),
        Err(e) => outcome(false, e),
    }
}

fn metric_oracle() -> Outcome {
    match metric_oracle_check(500, 3) {
        Ok(()) => outcome(true, "500 instances"),
        Err(e) => outcome(false, e),
    }
}

fn synthetic_recovery() -> Outcome {
    let start = Instant::now();
    let (train, test) = block_diagonal(40, 60, 4, 3, 11);
    let bpr = match train_bpr(&train, &recovery_bpr(8)) {
        Ok(f) => f,
        Err(e) => return outcome(false, e.to_string()),
    };
    let auc = exhaustive_auc(&train, &test, &bpr.editors, &bpr.items);
    let eals_cfg = EalsConfig {
        dim: 8,
        epochs: 15,
        seed: 5,
        ..EalsConfig::default()
    };
    let eals = match train_eals(&train, &eals_cfg) {
        Ok(f) => f,
        Err(e) => return outcome(false, e.to_string()),
    };
    let monotone = eals.loss_log.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let elapsed = start.elapsed();
    outcome(
        auc >= 0.9 && monotone && within(elapsed, 60.0),
        format!("bpr auc {auc:.4}, eals monotone {monotone}, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn transr_sanity() -> Outcome {
    let store = two_cluster_graph(20);
    let mut lines = Vec::new();
    let mut separated = 0;
    for s in 0..SEEDS {
        let cfg = TransRConfig {
            dim: 8,
            seed: s,
            ..TransRConfig::default()
        };
        let (model, _) = match train_transr(&store, &cfg) {
            Ok(m) => m,
            Err(e) => return outcome(false, e.to_string()),
        };
        let (w, c) = cluster_distances(&model, 20);
        separated += (w < c) as usize;
        lines.push(format!("{w:.3}<{c:.3}"));
    }
    outcome(
        separated == SEEDS as usize,
        format!("{separated}/{SEEDS} seeds separate (within<cross: {})", lines.join(", ")),
    )
}

fn directional_ablation() -> Outcome {
    let start = Instant::now();
    let (mut over_cf, mut over_unweighted) = (0, 0);
    let mut lines = Vec::new();
    for s in 0..SEEDS {
        let reports = match desk_ablation(s) {
            Ok(r) => r,
            Err(e) => return outcome(false, e.to_string()),
        };
        let r50 = |name: &str| {
            reports
                .iter()
                .find(|r| r.meta.model == name)
                .and_then(|r| r.get("recall@50"))
                .unwrap_or(f64::NAN)
        };
        let (cf, full, unweighted) = (r50("cf"), r50("full"), r50("unweighted"));
        over_cf += (full > cf) as usize;
        over_unweighted += (full >= unweighted) as usize;
        lines.push(format!("cf {cf:.3} full {full:.3} unweighted {unweighted:.3}"));
    }
    let elapsed = start.elapsed();
    outcome(
        over_cf >= 4 && over_unweighted >= 4 && within(elapsed, 900.0),
        format!(
            "full>cf {over_cf}/5, full>=unweighted {over_unweighted}/5, {:.0}s [{}]",
            elapsed.as_secs_f64(),
            lines.join("; ")
        ),
    )
}

fn sparsity_trend() -> Outcome {
    let mut monotone = 0;
    let mut lines = Vec::new();
    for s in 0..SEEDS {
        let slices = match desk_sparsity_study(s) {
            Ok(r) => r,
            Err(e) => return outcome(false, e.to_string()),
        };
        let recall: Vec<f64> = slices.iter().map(|r| r.report.get("recall@10").unwrap_or(f64::NAN)).collect();
        monotone += recall.windows(2).all(|w| w[1] >= w[0]) as usize;
        lines.push(recall.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(" → "));
    }
    outcome(monotone >= 4, format!("non-decreasing in {monotone}/5 seeds [{}]", lines.join("; ")))
}

fn wdrec(args: &[&str], dir: &Path) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_wdrec"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("wdrec {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)))
    }
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).into_iter().flatten().flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).unwrap_or_default();
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), bytes);
            }
        }
    }
    out
}

/// Runs synth, ingest and every train command twice in separate directories
/// and compares all artifacts byte for byte.
fn determinism() -> Outcome {
    let run = || -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        wdrec(&["synth", "--out", ".", "--editors", "150", "--items", "300", "--dim", "8"], dir.path())?;
        wdrec(&["--config", "config.toml", "ingest"], dir.path())?;
        for c in ["bpr", "gmf", "eals", "content", "transr", "nmor"] {
            wdrec(&["--config", "config.toml", "train", c], dir.path())?;
        }
        Ok(files(&dir.path().join("run")))
    };
    match (run(), run()) {
        (Ok(a), Ok(b)) => {
            let differing: Vec<String> = a
                .keys()
                .chain(b.keys())
                .filter(|k| a.get(*k) != b.get(*k))
                .map(|k| k.display().to_string())
                .collect();
            outcome(
                differing.is_empty() && !a.is_empty(),
                if differing.is_empty() {
                    format!("{} artifacts identical across two runs", a.len())
                } else {
                    format!("differing: {}", differing.join(", "))
                },
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, e),
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("sparsity cross-check", sparsity_cross_check),
        ("loss anchors", loss_anchors),
        ("gradient suite", gradient_suite),
        ("gate simplex", gate_simplex),
        ("convexity degeneracy", convexity),
        ("metric oracle equivalence", metric_oracle),
        ("synthetic recovery", synthetic_recovery),
        ("transr two-cluster sanity", transr_sanity),
        ("directional ablation", directional_ablation),
        ("sparsity trend", sparsity_trend),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        failed += !o.pass as usize;
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
