//! End-to-end tests of the `gui-agent` binary.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gui-agent"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

#[test]
fn run_eval_scripted_writes_report_and_transcripts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "run-eval",
            "--tasks",
            "click-test,choose-list",
            "--episodes-per-task",
            "4",
            "--out",
            "out",
        ],
    );
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    assert!(text.contains("click-test"));
    assert!(text.contains("1.000"));
    assert!(text.lines().any(|l| l.starts_with("average")));

    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("out/report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report["aggregate"]["sr"], "1.000");
    assert_eq!(report["families"].as_array().unwrap().len(), 2);
    assert!(tmp.path().join("out/episodes/choose-list-3.jsonl").exists());
}

#[test]
fn config_file_drives_run_and_flags_override() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(
        tmp.path().join("eval.json"),
        serde_json::json!({
            "tasks": ["click-test"],
            "episodes_per_task": 2,
            "backend": "scripted",
            "out": "from-config"
        })
        .to_string(),
    )
    .unwrap();
    let out = run_in(tmp.path(), &["run-eval", "--config", "eval.json"]);
    assert!(out.status.success(), "{out:?}");
    assert!(tmp.path().join("from-config/report.json").exists());

    // the flag wins over the file value
    let out = run_in(
        tmp.path(),
        &["run-eval", "--config", "eval.json", "--out", "from-flag"],
    );
    assert!(out.status.success());
    assert!(tmp.path().join("from-flag/report.json").exists());
}

#[test]
fn usage_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &["run-eval", "--backend", "nonsense"]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let out = run_in(tmp.path(), &["no-such-subcommand"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run_in(tmp.path(), &["run-eval", "--backend", "replay"]);
    assert_eq!(out.status.code(), Some(1), "replay without cassette is a usage error");
}

#[test]
fn infrastructure_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    // unknown family
    let out = run_in(tmp.path(), &["run-eval", "--tasks", "no-such-task", "--episodes-per-task", "1"]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    // replay backend with a missing cassette file
    let out = run_in(
        tmp.path(),
        &["replay", "--cassette", "missing.json", "--tasks", "click-test", "--episodes-per-task", "1"],
    );
    assert_eq!(out.status.code(), Some(2), "{out:?}");
}

#[test]
fn demo_pipeline_round_trips_through_cli() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &["record-demos", "--tasks", "choose-list", "--per-family", "1", "--out", "demos"],
    );
    assert!(out.status.success(), "{out:?}");
    assert!(tmp.path().join("demos/manifest.json").exists());
    assert!(tmp.path().join("demos/choose-list-3000.json").exists());

    std::fs::write(
        tmp.path().join("script.json"),
        serde_json::json!(["R2", "R3", "R4"]).to_string(),
    )
    .unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "augment-demos",
            "--demos",
            "demos",
            "--backend",
            "scripted",
            "--script-file",
            "script.json",
            "--out",
            "demos-aug",
        ],
    );
    assert!(out.status.success(), "{out:?}");
    let demo = std::fs::read_to_string(tmp.path().join("demos-aug/choose-list-3000.json")).unwrap();
    assert!(demo.contains("R2") && demo.contains("R4"));

    // an eval can consume the augmented demos
    let out = run_in(
        tmp.path(),
        &[
            "run-eval",
            "--tasks",
            "choose-list",
            "--episodes-per-task",
            "2",
            "--demos",
            "demos-aug",
            "--out",
            "out",
        ],
    );
    assert!(out.status.success(), "{out:?}");
    // ... and its prompts embed the demonstration
    let transcript =
        std::fs::read_to_string(tmp.path().join("out/episodes/choose-list-0.jsonl")).unwrap();
    assert!(transcript.contains("Expert Demonstrations"));
    assert!(transcript.contains("R2"));
}

#[test]
fn ablation_flags_shape_episode_prompts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &["record-demos", "--tasks", "click-test", "--per-family", "1", "--out", "demos"],
    );
    assert!(out.status.success(), "{out:?}");

    let transcript = |dir: &str| {
        std::fs::read_to_string(tmp.path().join(dir).join("episodes/click-test-0.jsonl")).unwrap()
    };
    let base = &[
        "run-eval",
        "--tasks",
        "click-test",
        "--seeds",
        "0",
        "--demos",
        "demos",
    ][..];

    let out = run_in(tmp.path(), &[base, &["--out", "full"]].concat());
    assert!(out.status.success(), "{out:?}");
    let full = transcript("full");
    assert!(full.contains("Expert Demonstrations"));
    assert!(full.contains("First, explain in detail"));

    let out = run_in(
        tmp.path(),
        &[base, &["--no-demos", "--no-cot", "--out", "bare"]].concat(),
    );
    assert!(out.status.success(), "{out:?}");
    let bare = transcript("bare");
    assert!(!bare.contains("Expert Demonstrations"));
    assert!(!bare.contains("First, explain in detail"));
    assert!(bare.contains("Each action must be in the form"));

    let out = run_in(
        tmp.path(),
        &[base, &["--action-only-demos", "--out", "noreason"]].concat(),
    );
    assert!(out.status.success(), "{out:?}");
    let noreason = transcript("noreason");
    assert!(noreason.contains("Expert Demonstrations"));
    assert!(!noreason.contains("reason:"));
}

#[test]
fn show_prompt_renders_sections() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(tmp.path(), &["show-prompt", "--task", "choose-list", "--seed", "3000"]);
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    assert!(text.contains("### Task Description ###"));
    assert!(text.contains("### Action History ###"));
    assert!(text.contains("action_1: {name: start}"));
    assert!(text.contains("bottm_edge_y"));

    // later rounds carry executed actions in the history
    let out = run_in(
        tmp.path(),
        &["show-prompt", "--task", "choose-list", "--seed", "3000", "--round", "2"],
    );
    let text = stdout(&out);
    assert!(text.contains("action_2: {name: click_element"));
}

#[test]
fn build_dataset_triples_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(
        tmp.path(),
        &[
            "build-dataset",
            "--tasks",
            "login-user",
            "--per-task",
            "2",
            "--out",
            "ds",
        ],
    );
    assert!(out.status.success(), "{out:?}");
    assert!(stdout(&out).contains("wrote 6 screens"), "{}", stdout(&out));
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("ds/manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest.as_array().unwrap().len(), 6);
    assert!(tmp.path().join("ds/pairs/targets.jsonl").exists());
}

#[test]
fn record_and_replay_cassette_round_trip() {
    // Record against a local stub endpoint, then replay offline and compare.
    use std::io::{Read, Write};
    let tmp = tempfile::tempdir().unwrap();
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || {
        // Answer every request with the same un-parseable prose. Episodes
        // then time out (data, not an infrastructure error).
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { return };
            let mut buf = Vec::new();
            let mut byte = [0u8; 1];
            while !buf.ends_with(b"\r\n\r\n") {
                if stream.read(&mut byte).unwrap_or(0) == 0 {
                    break;
                }
                buf.push(byte[0]);
            }
            let header = String::from_utf8_lossy(&buf).to_lowercase();
            let len: usize = header
                .lines()
                .find_map(|l| l.strip_prefix("content-length:"))
                .and_then(|v| v.trim().parse().ok())
                .unwrap_or(0);
            let mut body = vec![0u8; len];
            let _ = stream.read_exact(&mut body);
            let reply_body = serde_json::json!({
                "choices": [{"message": {"content": "thinking, no actions yet"}}]
            })
            .to_string();
            let reply = format!(
                "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                reply_body.len(),
                reply_body
            );
            let _ = stream.write_all(reply.as_bytes());
        }
    });

    let out = run_in(
        tmp.path(),
        &[
            "run-eval",
            "--tasks",
            "click-test",
            "--seeds",
            "0",
            "--backend",
            "record",
            "--endpoint",
            &format!("http://{addr}"),
            "--max-rounds",
            "2",
            "--cassette",
            "cassette.json",
            "--out",
            "rec",
        ],
    );
    assert!(out.status.success(), "{out:?}");
    assert!(tmp.path().join("cassette.json").exists());
    assert!(stdout(&out).contains("0.000"), "episodes time out: {}", stdout(&out));

    let out = run_in(
        tmp.path(),
        &[
            "replay",
            "--cassette",
            "cassette.json",
            "--tasks",
            "click-test",
            "--seeds",
            "0",
            "--max-rounds",
            "2",
            "--out",
            "rep",
        ],
    );
    assert!(out.status.success(), "{out:?}");
    assert_eq!(
        std::fs::read(tmp.path().join("rec/episodes/click-test-0.jsonl")).unwrap(),
        std::fs::read(tmp.path().join("rep/episodes/click-test-0.jsonl")).unwrap(),
        "replayed transcript must match the recording run"
    );
}
