use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn run(args: &[&str], stdin: &str, env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_trace-gauge"));
    cmd.args(args)
        .env_remove("TRACE_GAUGE_SEED")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    for (k, v) in env {
        cmd.env(k, v);
    }
    let mut child = cmd.spawn().expect("spawn trace-gauge");
    let mut pipe = child.stdin.take().unwrap();
    let input = stdin.to_owned();
    // Feed stdin from another thread so a full stdout pipe cannot deadlock.
    let feeder = std::thread::spawn(move || {
        let _ = pipe.write_all(input.as_bytes());
    });
    let out = child.wait_with_output().unwrap();
    feeder.join().unwrap();
    out
}

fn json_lines(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn generations(n: usize) -> String {
    (0..n)
        .map(|i| {
            let text = match i % 4 {
                0 => format!("<think>step {i}</think>\\boxed{{{i}}}"),
                1 => format!("<think></think>{i}"),
                2 => format!("the answer is {i}"),
                _ => format!("<think>still going {i}"),
            };
            serde_json::json!({"id": i, "generation": text, "gold": (i % 8).to_string()}).to_string() + "\n"
        })
        .collect()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"], "", &[]).status.code(), Some(0));
    assert_eq!(run(&["--version"], "", &[]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["bogus"],
        vec!["parse", "--profile", "nope"],
        vec!["stats", "--level", "1.5"],
        vec!["stats", "--resamples", "10"],
        vec!["report", "--delta-rp", "0"],
        vec!["parse", "--jobs", "0"],
    ] {
        let out = run(&args, "", &[]);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn seed_env_must_be_numeric() {
    let out = run(&["stats"], "", &[("TRACE_GAUGE_SEED", "abc")]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn parse_statuses_and_error_records() {
    let input = generations(4) + "{\"id\": 9}\n";
    let out = run(&["parse"], &input, &[]);
    assert_eq!(out.status.code(), Some(1));
    let lines = json_lines(&out);
    let statuses: Vec<_> = lines[..4].iter().map(|v| v["status"].as_str().unwrap()).collect();
    assert_eq!(statuses, ["valid", "empty", "missing", "truncated"]);
    assert_eq!(lines[4]["line"], 5);
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 record(s) failed"));
}

#[test]
fn jobs_do_not_change_output() {
    let input = generations(10_000);
    for sub in ["parse", "score"] {
        let one = run(&[sub, "--jobs", "1"], &input, &[]);
        let many = run(&[sub, "--jobs", "4"], &input, &[]);
        assert_eq!(one.status.code(), Some(0));
        assert_eq!(one.stdout, many.stdout, "{sub}");
    }
}

#[test]
fn out_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let input_path = dir.path().join("in.jsonl");
    let out_path = dir.path().join("out.jsonl");
    std::fs::write(&input_path, generations(50)).unwrap();
    let to_file = run(
        &["score", "--in", input_path.to_str().unwrap(), "--out", out_path.to_str().unwrap()],
        "",
        &[],
    );
    assert_eq!(to_file.status.code(), Some(0));
    let to_stdout = run(&["score"], &generations(50), &[]);
    assert_eq!(std::fs::read(&out_path).unwrap(), to_stdout.stdout);
}

#[test]
fn score_then_stats_is_deterministic() {
    let scored = run(&["score"], &generations(400), &[]);
    let scored = String::from_utf8(scored.stdout).unwrap();
    let a = run(&["stats"], &scored, &[]);
    let b = run(&["stats", "--seed", "42"], &scored, &[]);
    let c = run(&["stats"], &scored, &[("TRACE_GAUGE_SEED", "42")]);
    let d = run(&["stats", "--seed", "7"], &scored, &[]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stdout, c.stdout);
    assert_ne!(a.stdout, d.stdout);
    let doc: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(doc["n"], 400);
    assert_eq!(doc["counts"]["valid"], 100);
    assert!(doc["ci"]["pass1"]["low"].is_number());
}

#[test]
fn stats_on_parsed_records_reports_structure_only() {
    let parsed = run(&["parse"], &generations(40), &[]);
    let out = run(&["stats"], &String::from_utf8(parsed.stdout).unwrap(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["rates"]["vr"], 0.25);
    assert!(doc.get("pass1").is_none());
}

#[test]
fn render_and_mask() {
    let conv = r#"{"messages":[{"role":"user","content":"q"},{"role":"assistant","content":"a"}]}"#;
    let out = run(&["render", "--profile", "field-think-empty-default"], conv, &[]);
    assert_eq!(out.status.code(), Some(0));
    let doc = &json_lines(&out)[0];
    assert_eq!(doc["text"], "<user>\nq\n</user>\n<assistant>\n<think>\n</think>\na\n</assistant>\n");

    let with_spans = r#"{"messages":[{"role":"user","content":"q"},{"role":"assistant","content":"a"}],"token_spans":[[0,17],[17,29],[29,37],[37,46],[46,47],[47,61]]}"#;
    let out = run(&["mask", "--mask", "prompt,think"], with_spans, &[]);
    assert_eq!(out.status.code(), Some(0));
    let doc = &json_lines(&out)[0];
    assert_eq!(doc["strategy"], "response-only");
    assert_eq!(doc["token_labels"], serde_json::json!([1, 1, 1, 1, 0, 0]));
}

#[test]
fn report_json_and_csv() {
    let mut input = String::new();
    for step in [0u64, 100] {
        for i in 0..40 {
            let valid = step == 0 || i % 2 == 0;
            let text = if valid { format!("<think>r</think>{}", i % 5) } else { format!("{}", i % 5) };
            input += &serde_json::json!({
                "id": i.to_string(), "task": "gsm8k", "step": step,
                "generation": text, "gold": (i % 5).to_string()
            })
            .to_string();
            input.push('\n');
        }
    }
    let json = run(&["report"], &input, &[]);
    assert_eq!(json.status.code(), Some(0), "{}", String::from_utf8_lossy(&json.stderr));
    let doc: Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(doc["findings"][0]["kind"], "collapse-signature");

    let csv = run(&["report", "--format", "csv"], &input, &[]);
    let text = String::from_utf8(csv.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("task,step,pass1,rpass1,vr,er,mr,tr"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn check_answers() {
    let out = run(
        &["check-answers"],
        "{\"pred\":\"\\\\boxed{1,000}\",\"gold\":\"1000\"}\n{\"pred\":\"(b)\",\"gold\":\"C\"}\n",
        &[],
    );
    let lines = json_lines(&out);
    assert_eq!(lines[0]["equivalent"], true);
    assert_eq!(lines[0]["pred_canonical"], "1000");
    assert_eq!(lines[1]["equivalent"], false);
}
