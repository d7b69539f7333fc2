//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//! Runs without the libtest harness so the lines always reach the output.

use std::process::ExitCode;
use std::time::Instant;

fn main() -> ExitCode {
    let start = Instant::now();
    let results = igeoflow::verify::run_criteria();
    println!();
    println!("acceptance criteria");
    for r in &results {
        println!("{}", r.line());
    }
    let failed: Vec<u32> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    println!(
        "acceptance: {} passed, {} failed ({:.1}s)",
        results.len() - failed.len(),
        failed.len(),
        start.elapsed().as_secs_f64()
    );
    assert_eq!(results.len(), 11, "expected eleven criteria");
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
