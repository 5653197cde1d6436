use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_interchain"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(format!("{name}.toml"))
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn run_into(name: &str, dir: &Path, seed: Option<&str>) -> Output {
    let mut c = bin();
    c.arg("run").arg(scenario(name)).arg("--out").arg(dir);
    if let Some(s) = seed {
        c.args(["--seed", s]);
    }
    c.output().unwrap()
}

#[test]
fn run_writes_all_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_into("fig4_transfer", dir.path(), None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).trim_end().ends_with("PASS"));
    for f in ["run.log", "report", "resolver.dump"] {
        assert!(!fs::read_to_string(dir.path().join(f)).unwrap().is_empty(), "{f}");
    }
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/golden/fig4_transfer.log");
    assert_eq!(fs::read_to_string(dir.path().join("run.log")).unwrap(), fs::read_to_string(golden).unwrap());
}

#[test]
fn invalid_scenario_lists_errors_and_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "name = \"bad\"\nhorizon = 10\n[[chains]]\nid = \"BC1\"\nsemantic_type = \"asset-registry\"\nregime = \"private\"\nnodes = 0\nlatency = 1\n[[transfers]]\nid = \"T\"\nasset = \"nope\"\nfrom = \"BC1\"\nto = \"BC9\"\nbeneficiary = \"Y\"\nstart = 1\ndeadline = 5\n").unwrap();
    let o = bin().arg("validate").arg(&bad).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.lines().count() >= 2, "{err}");
    let o = bin().arg("run").arg(&bad).arg("--out").arg(dir.path().join("o")).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_accepts_bundled_scenarios() {
    for name in ["fig2_fallback", "fig4_transfer", "ilp_path", "gateway_crash", "abort_partition"] {
        let o = bin().arg("validate").arg(scenario(name)).output().unwrap();
        assert_eq!(o.status.code(), Some(0), "{name}");
    }
}

#[test]
fn diff_reports_identity_divergence_and_truncation() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_into("gateway_crash", a.path(), None);
    run_into("gateway_crash", b.path(), None);
    let (la, lb) = (a.path().join("run.log"), b.path().join("run.log"));
    assert_eq!(bin().arg("diff").arg(&la).arg(&lb).status().unwrap().code(), Some(0));

    let text = fs::read_to_string(&la).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[3] = "tampered";
    fs::write(&lb, lines.join("\n") + "\n").unwrap();
    let o = bin().arg("diff").arg(&la).arg(&lb).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("line 4:"), "{}", stdout(&o));

    let short: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
    fs::write(&lb, short).unwrap();
    let o = bin().arg("diff").arg(&la).arg(&lb).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("agree up to line 5"), "{}", stdout(&o));
}

#[test]
fn seed_flag_overrides_the_file() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_into("abort_partition", a.path(), Some("1"));
    run_into("abort_partition", b.path(), Some("2"));
    let ra = fs::read_to_string(a.path().join("report")).unwrap();
    let rb = fs::read_to_string(b.path().join("report")).unwrap();
    assert!(ra.contains("\"seed\": 1,") && rb.contains("\"seed\": 2,"));
    assert_ne!(fs::read_to_string(a.path().join("run.log")).unwrap(), fs::read_to_string(b.path().join("run.log")).unwrap());
}

#[test]
fn sweep_summarizes_seeds() {
    let o = bin().arg("sweep").arg(scenario("gateway_crash")).args(["--count", "4"]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("4/4 seeds passed"));
}
