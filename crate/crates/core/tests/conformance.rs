//! Geometry-file conformance corpus: every file under `accept/` parses,
//! instantiates, round-trips through `emit` and passes the suites named in
//! its `# verify:` line; every file under `reject/` fails with the message
//! in its `# error:` line.

use std::path::{Path, PathBuf};

use qe_core::specfile::{parse_spec, parse_spec_text};
use qe_core::suite::{run_suite, Suite, SuiteConfig};

fn corpus(kind: &str) -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/conformance").join(kind);
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "qespec"))
        .collect();
    files.sort();
    files
}

fn directive<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines().find_map(|l| l.strip_prefix(&format!("# {key}:")).map(str::trim))
}

#[test]
fn accepted_files_parse_instantiate_and_round_trip() {
    let files = corpus("accept");
    assert!(files.len() >= 10, "accept corpus has {} files", files.len());
    for path in files {
        let text = std::fs::read_to_string(&path).unwrap();
        let spec = parse_spec_text(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        spec.instantiate(&[]).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let again = parse_spec_text(&spec.emit()).unwrap_or_else(|e| panic!("{}: re-parse: {e}", path.display()));
        assert_eq!(spec, again, "{}", path.display());
    }
}

#[test]
fn accepted_files_pass_their_suites() {
    for path in corpus("accept") {
        let text = std::fs::read_to_string(&path).unwrap();
        let Some(suites) = directive(&text, "verify") else { continue };
        for name in suites.split_whitespace() {
            let mut config = SuiteConfig::new(name.parse::<Suite>().unwrap());
            config.grid = 8;
            config.spec = Some(path.clone());
            let report = run_suite(&config).unwrap();
            assert_eq!(
                report.exit_code(),
                0,
                "{} under {name}:\n{}",
                path.display(),
                report.to_text()
            );
        }
    }
}

#[test]
fn rejected_files_fail_with_their_diagnostic() {
    let files = corpus("reject");
    assert!(files.len() >= 10, "reject corpus has {} files", files.len());
    for path in files {
        let text = std::fs::read_to_string(&path).unwrap();
        let want = directive(&text, "error").unwrap_or_else(|| panic!("{} lacks `# error:`", path.display()));
        let err = parse_spec(&text).expect_err(&path.display().to_string());
        assert!(
            err.to_string().starts_with(want),
            "{}: got `{err}`, want `{want}`",
            path.display()
        );
    }
}
