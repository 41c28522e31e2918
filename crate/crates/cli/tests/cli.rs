use std::path::{Path, PathBuf};
use std::process::Command;

use nash_cli::config::{ParamsConfig, ScheduleConfig, ScheduleKindConfig};
use nash_cli::parse_config;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn nash(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_nash")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8(out.stdout).unwrap(), String::from_utf8(out.stderr).unwrap())
}

fn solve(cfg: &Path, extra: &[&str], dir: &Path) -> (i32, String, String) {
    let trace = dir.join("trace.csv");
    let summary = dir.join("summary.txt");
    let mut args = vec!["solve", "--config", cfg.to_str().unwrap()];
    args.extend_from_slice(&["--trace", trace.to_str().unwrap(), "--summary", summary.to_str().unwrap()]);
    args.extend_from_slice(extra);
    let (code, _, err) = nash(&args);
    let trace = std::fs::read_to_string(trace).unwrap_or_default();
    let summary = std::fs::read_to_string(summary).unwrap_or_default();
    assert!(code == 0 || code == 2 || code == 3 || code == 4, "exit {code}: {err}");
    (code, trace, summary)
}

fn final_x(summary: &str) -> Vec<f64> {
    summary
        .lines()
        .filter(|l| l.starts_with("x["))
        .flat_map(|l| l.split_once(": ").unwrap().1.split(' ').map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>())
        .collect()
}

#[test]
fn consensus_converges_synchronously() {
    let dir = tempfile::tempdir().unwrap();
    let (code, trace, summary) = solve(&config("consensus.json"), &[], dir.path());
    assert_eq!(code, 0);
    let x = final_x(&summary);
    assert!((x[0] - 2.0).abs() <= 1e-5 && (x[1] - 1.0).abs() <= 1e-5, "{x:?}");
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("n,pi,theta,step_norm,kkt_residual,activated_players,activated_couplings"));
    assert!(lines.next().unwrap().starts_with("0,"));
    assert!(!trace.contains('\r'));
}

#[test]
fn random_schedule_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["--schedule", "random", "--seed", "7", "--max-lag", "5", "--window", "4"];
    let (code_a, trace_a, summary_a) = solve(&config("consensus.json"), &args, a.path());
    let (code_b, trace_b, _) = solve(&config("consensus.json"), &args, b.path());
    assert_eq!((code_a, code_b), (0, 0));
    assert_eq!(trace_a.as_bytes(), trace_b.as_bytes());
    let x = final_x(&summary_a);
    assert!((x[0] - 2.0).abs() <= 1e-4 && (x[1] - 1.0).abs() <= 1e-4, "{x:?}");
    assert!(trace_a.lines().skip(1).any(|l| l.split(',').nth(5) != Some("0;1")));
}

#[test]
fn summary_echoes_schedule_settings() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, summary) = solve(&config("consensus_async.json"), &[], dir.path());
    assert_eq!(code, 0);
    let echoed = summary.split_once("config:\n").unwrap().1;
    let parsed = parse_config(echoed).unwrap();
    assert_eq!(
        parsed.schedule,
        ScheduleConfig { kind: ScheduleKindConfig::Random, seed: 42, max_lag: 3, window: 2, activation_prob: 0.5, block_size: 1 }
    );
    assert_eq!(parsed.params, ParamsConfig { ..ParamsConfig::default() });
}

#[test]
fn max_iters_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let (code, trace, summary) = solve(&config("consensus.json"), &["--max-iters", "3"], dir.path());
    assert_eq!(code, 2);
    assert_eq!(trace.lines().count(), 4);
    assert!(summary.starts_with("status: max_iters\n"));
}

#[test]
fn epsilon_violation_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("consensus.json")).unwrap();
    // 1/ε = 2 does not exceed χ + η = 2.1
    let text = text.trim_end().trim_end_matches('}').to_string() + ", \"params\": { \"epsilon\": 0.5 } }";
    let path = dir.path().join("bad.json");
    std::fs::write(&path, text).unwrap();
    let (code, trace, summary) = solve(&path, &[], dir.path());
    assert_eq!(code, 3);
    assert!(trace.is_empty());
    assert!(summary.starts_with("status: refused\n"), "{summary}");
}

#[test]
fn uncovering_schedule_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    // two players, one per tick, but the window demands both in every tick
    let (code, _, summary) = solve(&config("consensus.json"), &["--schedule", "cyclic", "--window", "0"], dir.path());
    assert_eq!(code, 3);
    assert!(summary.contains("not activated"), "{summary}");
}

#[test]
fn overflowing_steps_abort() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("consensus.json")).unwrap();
    let text = text.replace("\"lower\": [2.0], \"upper\": [3.0]", "\"lower\": [1e300], \"upper\": [1e300]");
    let path = dir.path().join("huge.json");
    std::fs::write(&path, text).unwrap();
    let (code, _, summary) = solve(&path, &[], dir.path());
    assert_eq!(code, 4, "{summary}");
    assert!(summary.starts_with("status: aborted"));
}

#[test]
fn malformed_config_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{\n  \"problem\": { \"family\": \"matrix_game\",\n    \"chi\": 1.0e }\n}").unwrap();
    let (code, _, err) = nash(&["solve", "--config", path.to_str().unwrap()]);
    assert_eq!(code, 1);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn shipped_configs_converge() {
    for name in ["matching_pennies.json", "shared_constraint.json", "lasso.json", "consensus_async.json"] {
        let dir = tempfile::tempdir().unwrap();
        let (code, _, summary) = solve(&config(name), &[], dir.path());
        assert_eq!(code, 0, "{name}: {summary}");
    }
    let dir = tempfile::tempdir().unwrap();
    let (_, _, summary) = solve(&config("shared_constraint.json"), &[], dir.path());
    let x = final_x(&summary);
    assert!((x[0] - 2.0).abs() <= 1e-5 && (x[1] - 3.0).abs() <= 1e-5, "{x:?}");
}
