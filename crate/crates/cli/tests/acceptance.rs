//! The acceptance criteria at their stated tolerances. Prints one PASS/FAIL
//! line per criterion and exits non-zero if any fails.

use std::process::{Command, ExitCode};

use hyperop_cli::config::DEFAULT_SEED;
use hyperop_cli::verify::{run_criterion, CRITERIA};

/// `verify-all` twice with the same seed (and different thread counts) must
/// write byte-identical JSON.
fn determinism() -> (bool, String) {
    let mut files = Vec::new();
    for threads in ["1", "2"] {
        let dir = tempfile::tempdir().expect("temp dir");
        let out = Command::new(env!("CARGO_BIN_EXE_hyperop"))
            .args(["verify-all", "--seed", "7", "--threads", threads, "--out", dir.path().to_str().unwrap()])
            .output()
            .expect("binary runs");
        if !out.status.success() {
            return (false, format!("verify-all exited with {:?}", out.status.code()));
        }
        files.push(std::fs::read(dir.path().join("verify-all.json")).expect("artifact written"));
    }
    let identical = files[0] == files[1];
    (identical, format!("two runs with seed 7: {} bytes, identical = {identical}", files[0].len()))
}

fn main() -> ExitCode {
    let mut failed = 0;
    for id in CRITERIA {
        let report = run_criterion(id, DEFAULT_SEED);
        println!("{}", report.line());
        failed += usize::from(!report.passed);
    }
    let (ok, detail) = determinism();
    println!("{} [13] verify-all determinism: {detail}", if ok { "PASS" } else { "FAIL" });
    failed += usize::from(!ok);
    println!("acceptance: {} of {} criteria passed", CRITERIA.len() + 1 - failed, CRITERIA.len() + 1);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
