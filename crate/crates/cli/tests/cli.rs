use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wedge-credit"))
        .args(args)
        .env_remove("WEDGE_CREDIT_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Output without the timestamp header line.
fn body(o: &Output) -> String {
    stdout(o)
        .split_once('\n')
        .map(|(_, b)| b.to_string())
        .unwrap_or_default()
}

fn value(o: &Output, key: &str) -> f64 {
    let prefix = format!("{key} = ");
    stdout(o)
        .lines()
        .find_map(|l| l.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no {key} in output"))
        .parse()
        .unwrap()
}

fn edited(replace: &str, with: &str) -> tempfile::NamedTempFile {
    let src = std::fs::read_to_string(fixture("quick.toml")).unwrap();
    assert!(src.contains(replace));
    let f = tempfile::Builder::new().suffix(".toml").tempfile().unwrap();
    std::fs::write(f.path(), src.replace(replace, with)).unwrap();
    f
}

#[test]
fn price_cds_reports_legs_and_par_spread() {
    let f = fixture("quick.toml");
    let o = run(&["price-cds", "--scenario", f.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("generated_at_unix="));
    assert!((value(&o, "standard_leg.value") - 0.01705567).abs() < 1e-7);
    assert!((value(&o, "counterparty_leg.value") - 0.00108608).abs() < 1e-7);
    let spread = value(&o, "par_spread.value");
    assert!(spread > 0.0 && spread < 0.02);
    assert!(value(&o, "par_spread.residual").abs() < 1e-9);
}

#[test]
fn price_ftd_json() {
    let f = fixture("quick_ftd.toml");
    let o = run(&["price-ftd", "--scenario", f.to_str().unwrap(), "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("{\"generated_at_unix\":"));
    let v: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
    assert!((v["default_leg.value"].as_f64().unwrap() - 0.04941451).abs() < 1e-7);
    assert!(v["fair_spread.value"].as_f64().unwrap() > 0.0);
}

#[test]
fn wrong_contract_for_verb_is_invalid() {
    let f = fixture("quick_ftd.toml");
    let o = run(&["price-cds", "--scenario", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn firm_starting_in_default_exits_2_and_names_it() {
    let f = edited("[firm2]\nlog_distance = 1.2", "[firm2]\nv0 = 1.0\nk_barrier = 1.5");
    let o = run(&["price-cds", "--scenario", f.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("[firm2]") && err.contains("firm2:"), "{err}");
    assert!(err.contains(".toml:9:"), "{err}");
}

#[test]
fn perfect_correlation_exits_2() {
    let f = edited("rho = 0.4", "rho = 1.0");
    let o = run(&["price-cds", "--scenario", f.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("[market] rho"), "{}", stderr(&o));
}

#[test]
fn missing_file_and_bad_flags_exit_2() {
    let o = run(&["price-cds", "--scenario", "/nonexistent/s.toml"]);
    assert_eq!(o.status.code(), Some(2));
    let f = fixture("quick.toml");
    let o = run(&["density", "--scenario", f.to_str().unwrap(), "--t-grid", "1:0:3"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["price-cds", "--scenario", f.to_str().unwrap(), "--tol", "-1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn density_csv_shape() {
    let f = fixture("quick.toml");
    let o = run(&["density", "--scenario", f.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "t,coord,f_horizontal,f_slanted,f_survival");
    assert_eq!(lines.len(), 101);
    let mut prev_t = 0.0;
    for line in &lines[1..] {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert_eq!(cols.len(), 5);
        assert!(cols[0] >= prev_t);
        prev_t = cols[0];
        assert!(cols[2..].iter().all(|v| v.is_finite() && *v >= 0.0));
    }
    let o = run(&[
        "density",
        "--scenario",
        f.to_str().unwrap(),
        "--format",
        "json",
        "--t-grid",
        "1:2:2",
        "--coord-grid",
        "1:3:3",
    ]);
    assert_eq!(stdout(&o).lines().count(), 6);
}

#[test]
fn validate_passes_and_is_reproducible() {
    let f = fixture("quick.toml");
    let a = run(&["validate", "--scenario", f.to_str().unwrap()]);
    assert!(a.status.success(), "{}\n{}", stdout(&a), stderr(&a));
    assert!(stdout(&a).contains("seed = 20240601"));
    assert!(stdout(&a).contains("status = pass"));
    let b = run(&["validate", "--scenario", f.to_str().unwrap()]);
    assert_eq!(body(&a), body(&b));
    let c = run(&["validate", "--scenario", f.to_str().unwrap(), "--seed", "7"]);
    assert!(stdout(&c).contains("seed = 7"));
    assert_ne!(body(&a), body(&c));
}

#[test]
fn thread_count_does_not_change_results() {
    let f = fixture("quick.toml");
    let bodies: Vec<String> = ["1", "3"]
        .iter()
        .map(|n| {
            let o = Command::new(env!("CARGO_BIN_EXE_wedge-credit"))
                .args(["validate", "--scenario", f.to_str().unwrap()])
                .env("WEDGE_CREDIT_THREADS", n)
                .output()
                .unwrap();
            assert!(o.status.success());
            body(&o)
        })
        .collect();
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn corrupted_wedge_angle_is_flagged() {
    let f = fixture("quick.toml");
    let o = run(&[
        "validate",
        "--scenario",
        f.to_str().unwrap(),
        "--corrupt-wedge-angle",
        "0.8",
    ]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stdout(&o).contains("FLAGGED"));
    assert!(stderr(&o).contains("validation flagged"));
}
