//! Scores two candidate forecasts against a baseline and prints the table.

use epifuse::eval::{evaluate_region, write_table, EvalInput};

fn main() -> epifuse::Result<()> {
    let truth = vec![31.0, 28.0, 35.0, 40.0, 37.0, 33.0, 30.0];
    let baseline = EvalInput { mean: vec![25.0, 26.0, 27.0, 28.0, 29.0, 30.0, 31.0], variance: vec![40.0; 7], truth: truth.clone() };
    let twitter = EvalInput { mean: vec![30.0, 31.0, 33.0, 36.0, 37.0, 35.0, 32.0], variance: vec![30.0; 7], truth: truth.clone() };
    let tests = EvalInput { mean: vec![22.0, 24.0, 25.0, 25.0, 26.0, 27.0, 27.0], variance: vec![15.0; 7], truth };
    let row = evaluate_region(
        "Example",
        &baseline,
        &[("twitter".into(), twitter), ("tests".into(), tests)],
    )?;
    write_table(&[row], std::io::stdout())
}
