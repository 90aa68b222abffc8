use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

const TINY: &str = "
Agent Environment
  Vars:
    n : 0..2;
  end Vars
  Actions = {tick};
  Protocol:
    Other : {tick};
  end Protocol
  Evolution:
    n = n + 1 if n < 2 and R.Action = go;
  end Evolution
end Agent

Agent R
  Vars:
    on : boolean;
  end Vars
  Actions = {go, stay};
  Protocol:
    on = true : {go};
    Other : {stay};
  end Protocol
  Evolution:
    on = false if Action = stay;
  end Evolution
end Agent

Evaluation
  full if Environment.n = 2;
end Evaluation

InitStates
  Environment.n = 0 and R.on = true;
end InitStates

Formulae
  EF full;
  AG !full;
end Formulae
";

fn swarmkit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swarmkit")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas").join(name);
    let text = std::fs::read_to_string(path).unwrap();
    jsonschema::validator_for(&serde_json::from_str(&text).unwrap()).unwrap()
}

/// Parses every stdout line as JSON and validates it against `schema_name`.
fn json_lines(text: &[u8], schema_name: &str) -> Vec<Value> {
    let v = schema(schema_name);
    std::str::from_utf8(text)
        .unwrap()
        .lines()
        .map(|l| {
            let value: Value = serde_json::from_str(l).unwrap_or_else(|e| panic!("{e}: {l}"));
            if let Err(e) = v.validate(&value) {
                panic!("{schema_name}: {e}\n{l}");
            }
            value
        })
        .collect()
}

#[test]
fn sim_with_no_ticks_is_an_empty_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = swarmkit(&["sim", "scenario=flocking_voter", "--max-ticks", "0"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let lines = json_lines(&out.stdout, "trace.schema.json");
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0]["record"], "header");
    assert_eq!(lines[1]["reason"], "max_ticks");
    assert_eq!(lines[1]["ticks"], 0);
}

#[test]
fn identical_invocations_write_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "scenario = \"flocking_vstig\"\nagents = 4\nmax_ticks = 300\n").unwrap();
    for name in ["a.jsonl", "b.jsonl"] {
        let out = swarmkit(&["sim", "--config", "run.toml", "--seed", "42", "--output", name], dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(dir.path().join("a.jsonl")).unwrap();
    let b = std::fs::read(dir.path().join("b.jsonl")).unwrap();
    assert_eq!(a, b);
    let lines = json_lines(&a, "trace.schema.json");
    assert_eq!(lines.len(), 302);
    assert_eq!(lines[0]["seed"], 42);
}

#[test]
fn check_holds_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        swarmkit(&["check", "scenario=flocking_ispl", "width=4", "height=4", "--formula", "AF consensus"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = &json_lines(&out.stdout, "verdict.schema.json")[0];
    assert_eq!(v["verdict"], "holds");
    assert!(v["witness"].is_null());
}

#[test]
fn check_fails_writes_witness() {
    let dir = tempfile::tempdir().unwrap();
    let out = swarmkit(
        &[
            "check",
            "scenario=flocking_ispl",
            "agents=3",
            "width=3",
            "height=3",
            "--formula",
            "AF consensus",
            "--workers",
            "2",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let v = &json_lines(&out.stdout, "verdict.schema.json")[0];
    assert_eq!(v["verdict"], "fails");
    assert!(v["witness"]["lasso"].is_object() || v["witness"]["deadlock"] == true);
    assert_eq!(v["witness_file"], "witness.txt");
    let text = std::fs::read_to_string(dir.path().join("witness.txt")).unwrap();
    assert!(text.starts_with("AF consensus: fails"));
    assert!(text.contains("[0] "));
}

#[test]
fn double_credit_holds_with_witness_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "check",
        "scenario=foraging_broadcast",
        "width=3",
        "height=3",
        "items=[[2,2]]",
        "--formula",
        "EF double_credit",
    ];
    let out = swarmkit(&args, dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v = &json_lines(&out.stdout, "verdict.schema.json")[0];
    assert_eq!(v["verdict"], "holds");
    assert!(v["witness"]["labels"].as_array().unwrap().len() >= 4);
    assert!(v["witness_file"].is_null());
    assert!(!dir.path().join("witness.txt").exists());

    let mut with_file = args.to_vec();
    with_file.extend(["--output", "w.txt"]);
    let out = swarmkit(&with_file, dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json_lines(&out.stdout, "verdict.schema.json")[0]["witness_file"], "w.txt");
    assert!(std::fs::read_to_string(dir.path().join("w.txt")).unwrap().contains("pick up"));
}

#[test]
fn budget_exhaustion_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = swarmkit(&["check", "scenario=flocking_ispl", "--budget", "50", "--formula", "AG true"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json_lines(&out.stdout, "verdict.schema.json")[0]["verdict"], "resource_limit");
    let out = swarmkit(&["stats", "scenario=flocking_ispl", "--budget", "50"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(json_lines(&out.stdout, "stats.schema.json")[0]["partial"], true);
}

#[test]
fn usage_and_config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["sim", "colour=red"][..],
        &["sim", "not-an-override"],
        &["sim", "width=0"],
        &["sim", "--config", "missing.toml"],
        &["check", "scenario=flocking_voter"],
        &["check", "scenario=flocking_voter", "--formula", "XX consensus"],
        &["check", "scenario=flocking_voter", "--formula", "AG nonsense"],
        &["estimate", "scenario=flocking_voter", "--formula", "(consensus"],
        &["sim", "--seed", "minus-one"],
        &["frobnicate"],
    ] {
        let out = swarmkit(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn spec_path_is_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let sub = dir.path().join("models");
    std::fs::create_dir(&sub).unwrap();
    std::fs::write(sub.join("tiny.ispl"), TINY).unwrap();
    std::fs::write(sub.join("run.toml"), "scenario = \"ispl\"\nspec = \"tiny.ispl\"\n").unwrap();
    let out = swarmkit(&["check", "--config", "models/run.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = json_lines(&out.stdout, "verdict.schema.json");
    let verdicts: Vec<_> =
        lines.iter().map(|v| (v["formula"].as_str().unwrap(), v["verdict"].as_str().unwrap())).collect();
    assert_eq!(verdicts, [("EF full", "holds"), ("AG !full", "fails")]);
    let out = swarmkit(&["parse", "--config", "models/run.toml"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let report = &json_lines(&out.stdout, "parse.schema.json")[0];
    assert_eq!(report["ast"]["agents"][1]["name"], "R");
}

#[test]
fn parse_reports_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("good.ispl"), TINY).unwrap();
    std::fs::write(dir.path().join("bad.ispl"), TINY.replace("end Vars", "end Varz")).unwrap();
    let out = swarmkit(&["parse", "good.ispl"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let good = &json_lines(&out.stdout, "parse.schema.json")[0];
    assert_eq!(good["ok"], true);
    assert_eq!(good["diagnostics"].as_array().unwrap().len(), 0);
    let out = swarmkit(&["parse", "bad.ispl"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let bad = &json_lines(&out.stdout, "parse.schema.json")[0];
    assert_eq!(bad["ok"], false);
    assert!(bad["diagnostics"][0].as_str().unwrap().contains("syntax error"));
    for scenario in ["flocking_ispl", "foraging_ispl"] {
        let out =
            swarmkit(&["parse", &format!("scenario={scenario}"), "width=3", "height=3", "items=[[2,2]]"], dir.path());
        assert_eq!(out.status.code(), Some(0), "{scenario}");
        assert_eq!(json_lines(&out.stdout, "parse.schema.json")[0]["ok"], true);
    }
}

#[test]
fn estimate_and_stats_follow_their_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let out =
        swarmkit(&["estimate", "scenario=flocking_voter", "agents=3", "--formula", "true", "--runs", "5"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let e = &json_lines(&out.stdout, "estimate.schema.json")[0];
    assert_eq!((e["fraction"].as_f64(), e["runs"].as_u64()), (Some(1.0), Some(5)));
    let out = swarmkit(&["stats", "scenario=flocking_ispl", "agents=1", "width=2", "height=2"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let s = &json_lines(&out.stdout, "stats.schema.json")[0];
    assert_eq!(s["states"], 64);
    assert_eq!(s["partial"], false);
}

#[test]
fn step_applies_chosen_transitions() {
    let dir = tempfile::tempdir().unwrap();
    let mut child = Command::new(env!("CARGO_BIN_EXE_swarmkit"))
        .args(["step", "scenario=flocking_voter", "agents=2", "--output", "t.jsonl"])
        .current_dir(dir.path())
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(b"1\n7\n0\nq\n").unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("  0: agent0: broadcast"));
    assert!(text.contains("expected an index"));
    let trace = std::fs::read(dir.path().join("t.jsonl")).unwrap();
    let lines = json_lines(&trace, "trace.schema.json");
    let actors: Vec<_> = lines[1..3].iter().map(|e| e["actor"].as_str().unwrap()).collect();
    assert_eq!(actors, ["agent1", "agent0"]);
    assert_eq!(lines[3]["ticks"], 2);
}
