//! Reads a schedule in the JSON wire format and evaluates its decoherence
//! functional and sum-rule violation.

use decohist::histories::{decoherence_functional, sum_rule_violation};
use decohist::io::{FunctionalReport, ScheduleFile};

const SCHEDULE: &str = r#"{
  "dim": 2,
  "initial_state": {"dim": 2, "re": [[0.5, 0.5], [0.5, 0.5]], "im": [[0, 0], [0, 0]]},
  "events": [
    {"t": 0.0, "kind": "projective", "family": [
      {"dim": 2, "re": [[1, 0], [0, 0]], "im": [[0, 0], [0, 0]]},
      {"dim": 2, "re": [[0, 0], [0, 1]], "im": [[0, 0], [0, 0]]}]},
    {"t": 1.0, "kind": "projective", "family": [
      {"dim": 2, "re": [[1, 0], [0, 0]], "im": [[0, 0], [0, 0]]},
      {"dim": 2, "re": [[0, 0], [0, 1]], "im": [[0, 0], [0, 0]]}]}
  ],
  "propagator": {"unitaries": [
    {"dim": 2, "re": [[0.7071067811865476, 0.7071067811865476], [0.7071067811865476, -0.7071067811865476]],
     "im": [[0, 0], [0, 0]]}]}
}"#;

fn main() -> decohist::Result<()> {
    let file: ScheduleFile = serde_json::from_str(SCHEDULE)?;
    let input = file.into_input()?;
    let d = decoherence_functional(&input.schedule, &input.initial)?;
    let report = FunctionalReport::new(&d, 1e-6);
    println!("{}", serde_json::to_string_pretty(&report)?);
    for outcome in 0..2 {
        let v = sum_rule_violation(&input.schedule, &input.initial, outcome)?;
        println!("sum-rule violation for final outcome {outcome}: {v:.3}");
    }
    Ok(())
}
