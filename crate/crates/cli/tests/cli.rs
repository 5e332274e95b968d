use std::path::Path;
use std::process::{Command, Output};

fn freqlab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freqlab"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn builtin_frequency_scenario_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = freqlab(&["frequency"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("report-frequency.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "F").unwrap();
    assert!(header.ends_with(&["tol", "seed"]));
    for row in lines {
        let f: f64 = row.split(',').nth(col).unwrap().parse().unwrap();
        assert!((f - 2.0).abs() <= 1e-6, "{row}");
    }
}

#[test]
fn whitney_audit_on_half_plane() {
    let dir = tempfile::tempdir().unwrap();
    let out = freqlab(&["whitney", "--audit"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let json = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert!(json.contains("\"property_iii\""));
    assert!(json.contains("\"seed\": 42"));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "bad.toml", "seed = 1\nslop = 0.1\n\n[experiment]\nkind = \"verify\"\n");
    let out = freqlab(&["verify", "--scenario", &path], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("slop"));
}

#[test]
fn subcommand_must_match_the_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "v.toml", "[experiment]\nkind = \"verify\"\n");
    let out = freqlab(&["doubling", "--scenario", &path], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn module_errors_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[geometry]\ndim = 2\ngraph = { kind = \"flat\" }\nextent = 2.0\n\n[field]\nkind = \"catalog\"\nname = \"linear\"\n\n[experiment]\nkind = \"frequency\"\nr_min = 0.1\nr_max = 5.0\n";
    let path = write(dir.path(), "f.toml", text);
    let out = freqlab(&["frequency", "--scenario", &path], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 10"));
}

#[test]
fn zero_field_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[geometry]\ndim = 2\ngraph = { kind = \"flat\" }\nextent = 2.0\n\n[field]\nkind = \"catalog\"\nname = \"linear\"\nscale = 0.0\n\n[experiment]\nkind = \"frequency\"\nr_min = 0.1\nr_max = 0.5\n";
    let path = write(dir.path(), "z.toml", text);
    let out = freqlab(&["frequency", "--scenario", &path], dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn tight_tolerance_lists_expected_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = freqlab(&["verify", "--filter", "frequency", "--tol", "1e-12"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL frequency.energy_identity"));
}

#[test]
fn seed_override_is_recorded_and_outputs_repeat() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert_eq!(freqlab(&["doubling", "--seed", "7"], d.path()).status.code(), Some(0));
    }
    let ja = std::fs::read(a.path().join("report.json")).unwrap();
    assert_eq!(ja, std::fs::read(b.path().join("report.json")).unwrap());
    assert_eq!(
        std::fs::read(a.path().join("report-doubling.csv")).unwrap(),
        std::fs::read(b.path().join("report-doubling.csv")).unwrap()
    );
    assert!(String::from_utf8_lossy(&ja).contains("\"seed\": 7"));
}

#[test]
fn bad_mode_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(freqlab(&["cauchy", "--mode", "nope"], dir.path()).status.code(), Some(2));
}

#[test]
fn builtin_cascade_and_cauchy_modes_pass() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(freqlab(&["cascade"], dir.path()).status.code(), Some(0));
    for mode in ["alpha", "flux", "mass", "threeball", "ratio"] {
        let out = freqlab(&["cauchy", "--mode", mode], dir.path());
        assert_eq!(out.status.code(), Some(0), "{mode}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
