use std::path::Path;
use std::process::{Command, Output};

use rod_sqp_cli::{parse_run_spec, Mode, HISTORY_HEADER, SOLUTION_HEADER};

fn rod_sqp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rod-sqp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn lines(p: &Path) -> Vec<String> {
    std::fs::read_to_string(p)
        .unwrap()
        .lines()
        .map(String::from)
        .collect()
}

#[test]
fn loaded_run_writes_both_files() {
    let dir = tempfile::tempdir().unwrap();
    let history = dir.path().join("history.csv");
    let solution = dir.path().join("solution.csv");
    let out = rod_sqp(&[
        "--nodes",
        "120",
        "--force",
        "0,0,1000",
        "--history",
        path_arg(&history),
        "--solution",
        path_arg(&solution),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("converged in "), "{stdout}");
    assert!(stdout.contains(", f=") && stdout.contains(", feas="));

    let h = lines(&history);
    assert_eq!(h[0], HISTORY_HEADER);
    let accepted = h[1..].iter().filter(|l| l.ends_with(",1")).count();
    let k: usize = stdout.split_whitespace().nth(2).unwrap().parse().unwrap();
    assert_eq!(accepted, k);
    for (i, row) in h[1..].iter().enumerate() {
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields.len(), 13);
        assert_eq!(fields[0], i.to_string());
        for f in &fields[1..12] {
            f.parse::<f64>().unwrap();
        }
    }

    let s = lines(&solution);
    assert_eq!(s[0], SOLUTION_HEADER);
    assert_eq!(s.len(), 1 + 121);
    let last: Vec<f64> = s[121].split(',').map(|f| f.parse().unwrap()).collect();
    assert_eq!(last[0], 1.0);
    let v = (last[4] * last[4] + last[5] * last[5] + last[6] * last[6]).sqrt();
    assert!((v - 1.0).abs() < 1e-12);
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let run = |tag: &str| {
        let h = dir.path().join(format!("h{tag}.csv"));
        let s = dir.path().join(format!("s{tag}.csv"));
        let out = rod_sqp(&[
            "--nodes",
            "60",
            "--force",
            "0,0,500",
            "--model-retraction",
            "projection",
            "--history",
            path_arg(&h),
            "--solution",
            path_arg(&s),
        ]);
        assert_eq!(out.status.code(), Some(0));
        (
            std::fs::read(h).unwrap(),
            std::fs::read(s).unwrap(),
            out.stdout,
        )
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn zero_budget_exits_two_with_header_only_history() {
    let dir = tempfile::tempdir().unwrap();
    let history = dir.path().join("history.csv");
    let out = rod_sqp(&[
        "--nodes",
        "40",
        "--max-iter",
        "0",
        "--history",
        path_arg(&history),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(lines(&history), vec![HISTORY_HEADER.to_string()]);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(rod_sqp(&["--force", "0,0"]).status.code(), Some(1));
    assert_eq!(rod_sqp(&["--no-such-flag"]).status.code(), Some(1));
    assert_eq!(rod_sqp(&["--mode", "global"]).status.code(), Some(1));
    assert_eq!(rod_sqp(&["--nodes", "1"]).status.code(), Some(1));
    assert_eq!(
        rod_sqp(&["--config", "/nonexistent/rod.json"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn help_and_version_exit_zero() {
    let help = rod_sqp(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    let text = String::from_utf8(help.stdout).unwrap();
    for flag in [
        "--nodes",
        "--sigma",
        "--force",
        "--radius",
        "--pitch-a",
        "--model-retraction",
        "--update-retraction",
        "--mode",
        "--max-iter",
        "--tol-dx",
        "--tol-feas",
        "--theta-aim",
        "--theta-acc",
        "--rho-ellbow",
        "--eta-lo",
        "--eta-hat",
        "--omega-c-init",
        "--omega-f-init",
        "--hybrid-model",
        "--history",
        "--solution",
        "--config",
    ] {
        assert!(text.contains(flag), "missing {flag}");
    }
    assert_eq!(rod_sqp(&["--version"]).status.code(), Some(0));
}

#[test]
fn local_mode_runs() {
    let out = rod_sqp(&["--nodes", "60", "--mode", "local"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("rod.json");
    std::fs::write(
        &config,
        r#"{"nodes": 80, "force": [0, 0, 1000], "model_retraction": "projection",
            "theta_aim": 0.4, "hybrid_model": 1, "mode": "local"}"#,
    )
    .unwrap();
    let spec = parse_run_spec([
        "rod-sqp",
        "--config",
        path_arg(&config),
        "--nodes",
        "100",
        "--mode",
        "composite",
    ])
    .unwrap();
    assert_eq!(spec.nodes, 100);
    assert_eq!(spec.force[2], 1000.0);
    assert_eq!(spec.model_retraction.to_string(), "projection");
    assert_eq!(spec.solver.theta_aim, 0.4);
    assert!(spec.solver.hybrid_model);
    assert_eq!(spec.mode, Mode::Composite);
}

#[test]
fn malformed_config_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for (name, body) in [
        ("syntax.json", "{nodes: 3"),
        ("unknown.json", r#"{"node_count": 3}"#),
        ("arity.json", r#"{"force": "0,0"}"#),
        ("tag.json", r#"{"update_retraction": "cayley"}"#),
    ] {
        let path = dir.path().join(name);
        std::fs::write(&path, body).unwrap();
        assert!(
            parse_run_spec(["rod-sqp", "--config", path_arg(&path)]).is_err(),
            "{name} accepted"
        );
        assert_eq!(
            rod_sqp(&["--config", path_arg(&path)]).status.code(),
            Some(1),
            "{name}"
        );
    }
}
