use std::path::Path;
use std::process::{Command, Output};

fn qeverify(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qeverify"))
        .args(args)
        .env_remove("QEVERIFY_OUT_DIR")
        .output()
        .expect("spawn qeverify")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const SPHERE_NEGATIVE_LAMBDA: &str = "qespec 1
name sphere_wrong_lambda
chart {
  coord theta 0 3.141592653589793
  coord phi 0 6.283185307179586 periodic
}
fields {
  g theta theta = 1
  g phi phi = sin(theta)^2
}
expect {
  lambda = -1
}
";

fn write_spec(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn list_is_stable_and_names_the_catalog() {
    let a = qeverify(&["list"]);
    assert_eq!(a.status.code(), Some(0));
    let text = stdout(&a);
    assert!(text.contains("lim_product"));
    assert!(text.contains("sds_cylinder"));
    assert_eq!(text, stdout(&qeverify(&["list"])));
}

#[test]
fn describe_prints_claims_and_anchor() {
    let o = qeverify(&["describe", "lim_product"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("λ = −m"), "{text}");
    assert!(text.contains("anchor: closed non-exact quasi-Einstein product"));

    let o = qeverify(&["describe", "no_such_space"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no_such_space"));
}

#[test]
fn passing_suite_exits_zero_with_schema_v1() {
    let o = qeverify(&["verify", "lemma21", "--grid", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(json["version"], 1);
    assert_eq!(json["suite"], "lemma21");
    // Key order is part of the schema; serde_json::Value sorts keys, so
    // check positions in the raw text of the first report.
    let raw = stdout(&o);
    let mut at = raw.find("\"reports\"").unwrap();
    for key in [
        "check", "geometry", "grid", "backend", "h", "max", "mean", "argmax", "tolerance", "status", "informational",
        "anchor", "note", "measured", "expected",
    ] {
        let next = raw[at..].find(&format!("\"{key}\":")).unwrap_or_else(|| panic!("`{key}` out of order"));
        at += next;
    }
}

#[test]
fn json_reports_are_byte_identical() {
    let args = ["verify", "matter", "--grid", "8"];
    let a = qeverify(&args);
    let b = qeverify(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn corrupted_spec_exits_two_with_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let broken = SPHERE_NEGATIVE_LAMBDA.replace("g phi phi = sin(theta)^2", "g phi phi = sin(theta^2");
    let path = write_spec(dir.path(), "broken.qespec", &broken);
    let o = qeverify(&["verify", "vacuum-static", "--spec", &path]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("9:"), "diagnostic should carry line:col, got {err}");
}

#[test]
fn informational_rows_never_gate() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_spec(dir.path(), "sphere.qespec", SPHERE_NEGATIVE_LAMBDA);
    let o = qeverify(&["verify", "rigidity", "--spec", &path, "--grid", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = json["reports"].as_array().unwrap();
    let scalar = rows.iter().find(|r| r["check"] == "rigidity_scalar_curvature").unwrap();
    assert_eq!(scalar["status"], "fail");
    assert_eq!(scalar["informational"], true);

    // The same file fails the gating quasi-Einstein residual.
    let o = qeverify(&["verify", "vacuum-static", "--spec", &path, "--grid", "8"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn invalid_configuration_exits_two() {
    assert_eq!(qeverify(&["verify", "lemma21", "--grid", "4"]).status.code(), Some(2));
    assert_eq!(qeverify(&["verify", "nonsense"]).status.code(), Some(2));
    assert_eq!(qeverify(&["verify", "lemma21", "--backend", "analytic", "--h", "1e-3"]).status.code(), Some(2));
    assert_eq!(
        qeverify(&["verify", "lemma21", "--geometry", "lim_product", "--param", "m=-1"]).status.code(),
        Some(2)
    );
}

#[test]
fn text_report_to_file_and_env_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/report.txt");
    let o = qeverify(&[
        "verify", "lemma21", "--geometry", "lim_product", "--param", "m=2", "--grid", "8", "--report", "text",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).is_empty());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("suite lemma21"), "{text}");

    let o = Command::new(env!("CARGO_BIN_EXE_qeverify"))
        .args(["verify", "gradient", "--grid", "8"])
        .env("QEVERIFY_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("gradient.json").exists());
}

#[test]
fn fd_backend_and_limit_verb() {
    let o = qeverify(&["verify", "lemma21", "--h", "1e-3", "--grid", "8", "--report", "text"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains(" fd"));

    let o = qeverify(&["limit", "xbtz_product", "--eps", "0.1,0.05,0.025,0.0125", "--grid", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let json: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let order = json["reports"][0]["measured"].as_f64().unwrap();
    assert!((order - 1.0).abs() < 0.2);

    let o = qeverify(&["limit", "xbtz_product", "--eps", "0.1,0.2,0.3,0.4"]);
    assert_eq!(o.status.code(), Some(2));
    let o = qeverify(&["limit", "lim_product"]);
    assert_eq!(o.status.code(), Some(2));
}
