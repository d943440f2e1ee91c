//! The acceptance gate: every criterion runs at its pinned tolerance and
//! prints one pass/fail line. Run with `--nocapture` to see the lines on
//! success:
//!
//! ```text
//! cargo test -p ttra-cli --test acceptance -- --nocapture
//! ```

use ttra_cli::acceptance::run_all;

#[test]
fn acceptance_criteria() {
    let outcomes = run_all();
    let mut failures = Vec::new();
    for outcome in &outcomes {
        println!("{outcome}");
        if !outcome.passed {
            failures.push(format!("criterion {} ({})", outcome.id, outcome.name));
        }
    }
    assert!(
        failures.is_empty(),
        "failed acceptance criteria: {}\n{}",
        failures.join(", "),
        outcomes
            .iter()
            .map(|o| o.to_string())
            .collect::<Vec<_>>()
            .join("\n")
    );
}
