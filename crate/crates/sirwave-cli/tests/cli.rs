//! Command-line behaviour: artifacts, exit codes and failure records.

use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn sirwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sirwave")).args(args).output().unwrap()
}

fn run_in(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "-c", config.to_str().unwrap(), "-o", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    sirwave(&args)
}

fn demo_text() -> String {
    std::fs::read_to_string(configs().join("demo.conf")).unwrap()
}

fn with_line(dir: &Path, replace: (&str, &str)) -> PathBuf {
    let text = demo_text();
    assert!(text.contains(replace.0));
    let path = dir.join("edited.conf");
    std::fs::write(&path, text.replace(replace.0, replace.1)).unwrap();
    path
}

fn failure(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("failure.json")).unwrap()).unwrap()
}

#[test]
fn roots_writes_the_table() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in("roots", &configs().join("demo.conf"), tmp.path(), &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("roots.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "label,q,r,lambda,eta,residual");
    assert_eq!(lines.len(), 7);
    let eta2: f64 = lines[2].split(',').nth(4).unwrap().parse().unwrap();
    assert!((eta2 - 5.320068244087192).abs() < 1e-9);
}

#[test]
fn zero_delay_kernels_match_the_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in("greens", &configs().join("demo.conf"), tmp.path(), &["--r", "0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(tmp.path().join("greens.csv")).unwrap();
    let mut rows = 0;
    for l in csv.lines().skip(1) {
        let f: Vec<&str> = l.split(',').collect();
        let (g, cf): (f64, f64) = (f[2].parse().unwrap(), f[3].parse().unwrap());
        assert!((g - cf).abs() < 1e-6, "{l}");
        rows += 1;
    }
    assert!(rows > 3 * 1000);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join("kernels.json")).unwrap()).unwrap();
    assert_eq!(doc["schema_version"], "1");
}

#[test]
fn threshold_failures_exit_with_two_and_say_why() {
    let tmp = tempfile::tempdir().unwrap();
    let low = with_line(tmp.path(), ("beta = 0.6", "beta = 0.2"));
    let out = tmp.path().join("low");
    let o = run_in("run", &low, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    let f = failure(&out);
    assert_eq!(f["schema_version"], "1");
    assert_eq!(f["reason"], "reproduction number below threshold");
    assert_eq!(f["exit_code"], 2);

    let slow = with_line(tmp.path(), ("c = 4.091454509095756", "c = 1.3638181696985854"));
    let out = tmp.path().join("slow");
    let o = run_in("profiles", &slow, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(failure(&out)["reason"], "wave speed below critical");
    assert!(String::from_utf8_lossy(&o.stderr).contains("wave speed below critical"));
}

#[test]
fn bad_config_is_a_configuration_error() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = with_line(tmp.path(), ("dxi = 0.2", "dxi = 0.2\nspeed = 3"));
    let o = run_in("roots", &bad, tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let f = failure(tmp.path());
    assert_eq!(f["kind"], "Config");
    assert!(f["message"].as_str().unwrap().contains("speed"));
}

#[test]
fn infeasible_root_continuation_is_numerical() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in("roots", &configs().join("reference.conf"), tmp.path(), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(failure(tmp.path())["kind"], "ContinuationFailed");
}

#[test]
fn sequential_flag_gives_identical_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let demo = configs().join("demo.conf");
    let (a, b) = (tmp.path().join("par"), tmp.path().join("seq"));
    for sub in ["roots", "greens"] {
        assert!(run_in(sub, &demo, &a, &[]).status.success());
        assert!(run_in(sub, &demo, &b, &["--sequential"]).status.success());
    }
    for file in ["roots.csv", "greens.csv", "kernels.json"] {
        let x = std::fs::read(a.join(file)).unwrap();
        let y = std::fs::read(b.join(file)).unwrap();
        assert!(x == y, "{file} differs");
    }
}

#[test]
fn help_lists_exit_codes_and_columns() {
    let o = sirwave(&["--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("Exit status"));
    for header in ["label,q,r,lambda,eta,residual", "xi,phi,psi,chi", "t,x,s,i,r"] {
        assert!(text.contains(header), "{header}");
    }
    assert_eq!(sirwave(&["roots"]).status.code(), Some(2));
}
