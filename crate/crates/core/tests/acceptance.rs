use std::process::ExitCode;

use mole2d::oracle::suites::{all, SuiteOptions};

fn main() -> ExitCode {
    let results = all(&SuiteOptions::default());
    for r in &results {
        println!("{r}");
    }
    let failed: Vec<u8> = results
        .iter()
        .filter(|r| r.gating && !r.passed && !r.skipped)
        .map(|r| r.id)
        .collect();
    if failed.is_empty() {
        println!("acceptance: all gating criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {failed:?}");
        ExitCode::FAILURE
    }
}
