use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn teleassist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_teleassist"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = teleassist(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn generate_fit_evaluate_export() {
    let dir = tempfile::tempdir().unwrap();
    let train = dir.path().join("train");
    let test = dir.path().join("test");
    ok(&["gen-synthetic", "door", "--seed", "1", "-o", p(&train)]);
    ok(&["gen-synthetic", "door", "--seed", "2", "--demos", "4", "-o", p(&test)]);
    let promp = dir.path().join("reach.promp.json");
    ok(&["fit", p(&train.join("reach_handle.demos.json")), "-o", p(&promp)]);

    let json = dir.path().join("rms.json");
    let text = ok(&[
        "eval-rms",
        p(&promp),
        "--tests",
        p(&test.join("reach_handle.demos.json")),
        "--json",
        p(&json),
    ]);
    assert!(text.contains("RMS error over 4 tests"), "{text}");
    assert!(text
        .lines()
        .any(|l| l.starts_with("right_hand_position") && l.contains(" cm ")));
    assert!(text
        .lines()
        .any(|l| l.starts_with("right_hand_orientation") && l.contains(" rad ")));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(report["test_count"], 4);

    let csv = ok(&["envelope", p(&promp), "--samples", "11"]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 12);
    assert!(lines[0].starts_with("t,phase,right_hand_position_0_mean"));
}

#[test]
fn recognizes_a_punch_family() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["gen-synthetic", "punch", "--seed", "2", "-o", p(dir.path())]);
    let mut promps = Vec::new();
    for family in ["jab", "hook", "uppercut"] {
        let out = dir.path().join(format!("{family}.promp.json"));
        ok(&[
            "fit",
            p(&dir.path().join(format!("{family}.demos.json"))),
            "-o",
            p(&out),
        ]);
        promps.push(out);
    }
    let tests = dir.path().join("tests");
    ok(&["gen-synthetic", "punch", "--seed", "9", "--demos", "2", "-o", p(&tests)]);
    let mut args = vec!["recognize"];
    args.extend(promps.iter().map(|x| p(x)));
    let input = tests.join("uppercut.demos.json");
    args.extend(["--input", p(&input), "--window", "0.33"]);
    let result: serde_json::Value = serde_json::from_str(&ok(&args)).unwrap();
    assert_eq!(result["task_label"], "uppercut");
    assert_eq!(result["scores"].as_array().unwrap().len(), 3);
}

#[test]
fn templates_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let door = dir.path().join("door.at.json");
    ok(&["template", "door-handle", "-o", p(&door)]);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&door).unwrap()).unwrap();
    assert_eq!(doc["object_class"], "door");
    let none = dir.path().join("none.at.json");
    ok(&["template", "none", "--class", "punch_target", "-o", p(&none)]);
    assert!(!teleassist(&["template", "none", "-o", p(&none)]).status.success());

    let missing = teleassist(&["fit", "/nonexistent/demos.json", "-o", p(&dir.path().join("x.json"))]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent/demos.json"));
}

#[test]
fn serve_records_and_replay_verifies() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../..");
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("run.jsonl");
    let mut child = Command::new(env!("CARGO_BIN_EXE_teleassist"))
        .args([
            "serve",
            "--config",
            p(&root.join("config/default.toml")),
            "--port",
            "0",
            "--record",
            p(&log),
            "--inject-object",
            "class=door",
            "pose=1.0,0.0,0.9",
        ])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap())
        .read_line(&mut line)
        .unwrap();
    let addr = line
        .trim()
        .strip_prefix("listening on http://")
        .expect("address line")
        .to_string();

    for body in [
        r#"{"type":"activate"}"#,
        r#"{"type":"respond","verdict":"accept"}"#,
        r#"{"type":"abort"}"#,
    ] {
        let mut s = TcpStream::connect(&addr).unwrap();
        write!(
            s,
            "POST /command HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
        let mut resp = String::new();
        s.read_to_string(&mut resp).unwrap();
        assert!(resp.starts_with("HTTP/1.1 200"), "{resp}");
    }
    child.kill().unwrap();
    child.wait().unwrap();

    let out = ok(&["replay", p(&log)]);
    assert!(out.starts_with("identical: 4 commands"), "{out}");

    // a tampered log no longer matches
    let text = std::fs::read_to_string(&log)
        .unwrap()
        .replace("\"ok\":true", "\"ok\":false");
    std::fs::write(&log, text).unwrap();
    assert!(!teleassist(&["replay", p(&log)]).status.success());
}
