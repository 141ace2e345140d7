use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_comp-outage"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn outage_hand_values() {
    let o = run(&[
        "outage",
        "--serving",
        "1",
        "--interf",
        "0.5",
        "--gamma",
        "1",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("p_out 0.3333333333\n"));

    let o = run(&[
        "outage",
        "--serving",
        "1,2",
        "--interf",
        "0.5",
        "--gamma",
        "1",
        "--json",
    ]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["p_out"].as_f64().unwrap() - 1.0 / 15.0).abs() < 1e-12);
    assert_eq!(v["fell_back_to_oracle"], false);
}

#[test]
fn outage_with_monte_carlo_check() {
    let o = run(&[
        "outage",
        "--serving",
        "1,2",
        "--interf",
        "0.5",
        "--gamma",
        "1",
        "--validate",
        "--mc-samples",
        "200000",
    ]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("monte_carlo"));
}

#[test]
fn input_errors_exit_with_one() {
    for args in [
        &["outage", "--serving", "1,-2", "--gamma", "1"][..],
        &["outage", "--serving", "1", "--gamma", "-1"],
        &[
            "outage",
            "--serving",
            "1,1",
            "--interf",
            "0.5",
            "--gamma",
            "1",
            "--no-perturb",
        ],
        &["no-such-command"],
        &["fig2", "--n-max", "0"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn duplicates_are_perturbed_by_default() {
    let o = run(&[
        "outage",
        "--serving",
        "1,1",
        "--interf",
        "0.5",
        "--gamma",
        "1",
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("perturbed=true"));
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let o = run(&["validate", "--out", report.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    assert_eq!(v["passed"], true);

    let o = run(&["validate", "--inject-degenerate", "--no-perturb"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["validate", "--inject-degenerate"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn deploy_emit_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("deployment.json");
    let f = file.to_str().unwrap();
    assert!(run(&[
        "deploy",
        "emit",
        "--density",
        "20",
        "--seed",
        "3",
        "--out",
        f
    ])
    .status
    .success());
    let o = run(&["deploy", "show", "--input", f]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("180 stations"));

    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for (out, extra) in [
        (&out_a, &["--seed", "3"][..]),
        (&out_b, &["--seed", "3", "--deployment", f]),
    ] {
        let mut args = vec![
            "fig2",
            "--density",
            "20",
            "--n-users",
            "20",
            "--out",
            out.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        assert!(run(&args).status.success());
    }
    let read = |d: &Path| std::fs::read(d.join("fig2_users.csv")).unwrap();
    assert_eq!(read(&out_a), read(&out_b));
}

#[test]
fn fig_outputs_and_run_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&[
        "fig1",
        "--mc-samples",
        "20000",
        "--n-max",
        "3",
        "--out",
        out,
    ]);
    assert!(o.status.success());
    let o = run(&[
        "fig2",
        "--n-users",
        "10",
        "--criterion",
        "goodput",
        "--out",
        out,
    ]);
    assert!(o.status.success());
    for f in [
        "fig1.csv",
        "fig1_summary.json",
        "fig1_run.json",
        "fig2.csv",
        "fig2_users.csv",
        "fig2_summary.json",
        "fig2_run.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let fig1 = std::fs::read_to_string(dir.path().join("fig1.csv")).unwrap();
    let header = fig1.lines().next().unwrap();
    assert_eq!(
        header,
        "rate,analytic_cdf_N1,analytic_cdf_N2,analytic_cdf_N3,empirical_cdf_N1,empirical_cdf_N2,empirical_cdf_N3,fallback_N1,fallback_N2,fallback_N3"
    );
    assert_eq!(fig1.lines().count(), 65);
    let run_record: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("fig2_run.json")).unwrap()).unwrap();
    assert_eq!(run_record["config"]["seed"], 2010);
    assert_eq!(run_record["config"]["experiment"]["n_users"], 10);
    let hist = std::fs::read_to_string(dir.path().join("fig2.csv")).unwrap();
    assert_eq!(hist.lines().next().unwrap(), "criterion,n_star,fraction");
    assert_eq!(hist.lines().count(), 1 + 8);
}

#[test]
fn config_file_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "seed = 5\n[experiment]\nn_users = 4\nn_max = 2\ncriterion = \"goodput\"\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = run(&[
        "fig2",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let users = std::fs::read_to_string(out.join("fig2_users.csv")).unwrap();
    assert_eq!(users.lines().count(), 1 + 4);

    std::fs::write(&cfg, "[experiment]\nno_such_key = 1\n").unwrap();
    let o = run(&[
        "fig2",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
}
