//! Acceptance criteria 1-9, run without the libtest harness so every
//! PASS/FAIL line is printed. Exits nonzero when any criterion fails.

use std::process::ExitCode;

use fermiflow::selftest::{run_criterion, CRITERIA};

const SEED: u64 = 0;

fn main() -> ExitCode {
    // `cargo test -- <filter>` passes the filter through; criterion numbers select
    let wanted: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for id in CRITERIA.into_iter().filter(|id| wanted.is_empty() || wanted.contains(id)) {
        match run_criterion(id, SEED) {
            Ok(r) => {
                println!("{}", r.line());
                failed += !r.passed as usize;
            }
            Err(e) => {
                println!("[FAIL] criterion {id}: error: {e}");
                failed += 1;
            }
        }
    }
    println!("acceptance: {failed} criteria failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
