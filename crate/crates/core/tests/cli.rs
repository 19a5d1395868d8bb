use decohist::cli::{execute, run, Cli, EXIT_ASSERTION, EXIT_INVALID};
use serde_json::Value;

fn json(args: &[&str]) -> Value {
    let mut argv = vec!["decohist"];
    argv.extend_from_slice(args);
    let cli = Cli::try_parse_from_args(&argv).unwrap();
    serde_json::from_str(&execute(&cli).unwrap().json).unwrap()
}

#[test]
fn oscillator_phase_example() {
    let v = json(&["--seed", "7", "oscillator-phase", "--N", "8", "--steps", "3"]);
    assert_eq!(v["seed"], 7);
    assert_eq!(v["command"], "oscillator-phase");
    assert!(v["result"]["functional"]["max_off_diagonal"].as_f64().unwrap() <= 1e-10);
    assert_eq!(v["result"]["support_on_successor_chains"], true);
}

#[test]
fn cosmo_unit_horizon_row() {
    let v = json(&["cosmo", "--lambda0", "3", "--lambda1", "3", "--C", "1"]);
    let log_p = v["result"]["log_p_reinflate"].as_f64().unwrap();
    assert!((log_p + 7.0 * std::f64::consts::PI).abs() < 1e-12);
}

#[test]
fn tolerances_are_echoed_and_overridable() {
    let v = json(&["--tolerance", "epsilon=1e-3", "mixed-coherence", "--N", "4"]);
    assert_eq!(v["tolerances"]["epsilon"], 1e-3);
    assert_eq!(v["result"]["all_ratios_unity"], true);
}

#[test]
fn exit_codes() {
    assert_eq!(run(["decohist", "no-such-command"]), EXIT_INVALID);
    assert_eq!(run(["decohist", "--tolerance", "bogus=1", "mixed-coherence"]), EXIT_INVALID);
    assert_eq!(run(["decohist", "functional", "--schedule", "/nonexistent/schedule.json"]), EXIT_INVALID);
    assert_eq!(run(["decohist", "cosmo", "--lambda0", "1", "--lambda1", "3"]), EXIT_INVALID);
    assert_eq!(run(["decohist", "--help"]), 0);
    assert_ne!(EXIT_ASSERTION, EXIT_INVALID);
}

#[test]
fn malformed_schedule_names_the_file() {
    let dir = std::env::temp_dir().join(format!("decohist-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("bad.json");
    std::fs::write(&path, r#"{"dim": 2, "surprise": true}"#).unwrap();
    let argv = ["decohist", "functional", "--schedule", path.to_str().unwrap()];
    let err = execute(&Cli::try_parse_from_args(&argv).unwrap()).unwrap_err();
    assert!(err.to_string().contains("bad.json"), "{err}");
    assert_eq!(run(argv), EXIT_INVALID);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn csv_rows_for_random_histories() {
    let argv = ["decohist", "random-histories", "--dim", "8", "--rank", "4", "--samples", "3"];
    let a = execute(&Cli::try_parse_from_args(&argv).unwrap()).unwrap();
    let csv = a.csv.unwrap();
    assert!(csv.starts_with("sample,pair,p,p_prime,ratio"));
    assert!(csv.lines().count() > 1);
}
