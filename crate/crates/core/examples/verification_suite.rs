//! Runs a named verification suite and writes its JSON report and CSV evidence.

use mkg4d::runner::{suite, SuiteName};

fn main() -> mkg4d::Result<()> {
    let name: SuiteName = std::env::args().nth(1).unwrap_or_else(|| "scaling".into()).parse()?;
    let report = suite(name);
    for check in &report.checks {
        println!("{}", check.line());
    }
    let dir = std::env::temp_dir().join("mkg4d-example-suites");
    report.write(&dir)?;
    println!("{name}: passed {} in {:.1} s, report in {}", report.passed, report.seconds, dir.display());
    Ok(())
}
