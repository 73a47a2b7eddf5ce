//! Runs every acceptance criterion at its stated size and tolerance, one
//! PASS/FAIL line per criterion on stdout.

use std::io::Write;

use kinlab::config::ExperimentConfig;
use kinlab::verify::{Suite, run_criteria};

#[test]
fn acceptance() {
    let cfg = ExperimentConfig::default();
    let ids: Vec<u32> = (1..=12).collect();
    let manifest = run_criteria(&ids, &cfg, Suite::Full);
    // written past the harness capture so the lines show on passing runs too
    let mut out = std::io::stdout().lock();
    for r in &manifest.reports {
        let _ = writeln!(out, "acceptance {}", r.line());
    }
    let _ = out.flush();
    let failed: Vec<u32> = manifest.reports.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
