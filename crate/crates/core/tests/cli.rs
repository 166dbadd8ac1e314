use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_skewdiff"))
}

fn cfg(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.json"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn report(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

fn record<'a>(r: &'a serde_json::Value, cond: &str) -> Vec<&'a serde_json::Value> {
    r["records"].as_array().unwrap().iter().filter(|x| x["condition"] == cond).collect()
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap().iter().map(str::to_string).collect()).collect()
}

#[test]
fn classify_bessel_three_halves() {
    let t = tempfile::tempdir().unwrap();
    let o = run(&["classify", cfg("bessel_1.5").to_str().unwrap(), "--out", t.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(t.path());
    assert!(record(&r, "s0").iter().all(|x| x["holds"] == "true"));
    assert!(record(&r, "s1").iter().all(|x| x["holds"] == "false"));
    assert!(t.path().join("manifest.json").exists());
}

#[test]
fn classify_counterexample_not_conservative() {
    let t = tempfile::tempdir().unwrap();
    let o = run(&["classify", cfg("counterexample_2").to_str().unwrap(), "--out", t.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(record(&report(t.path()), "conservative").iter().all(|x| x["holds"] == "false"));
}

#[test]
fn classify_inconclusive_exits_2() {
    let t = tempfile::tempdir().unwrap();
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/inconclusive.json");
    let o = run(&["classify", p.to_str().unwrap(), "--out", t.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(t.path().join("report.json").exists());
}

#[test]
fn classify_accepts_every_n0_and_rejects_others() {
    let t = tempfile::tempdir().unwrap();
    for n0 in ["1", "2", "5"] {
        let o = run(&["classify", cfg("skew_bm_0.7").to_str().unwrap(), "--n0", n0, "--out", t.path().to_str().unwrap()]);
        assert_eq!(code(&o), 0);
    }
    let o = run(&["classify", cfg("skew_bm_0.7").to_str().unwrap(), "--n0", "3", "--out", t.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn malformed_config_points_at_line() {
    let t = tempfile::tempdir().unwrap();
    let p = t.path().join("bad.json");
    std::fs::write(&p, "{\n  \"schema\": \"skewdiff-config/1\",\n  \"name\": 3\n}\n").unwrap();
    let o = run(&["classify", p.to_str().unwrap(), "--out", t.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn invalid_config_reports_issues() {
    let t = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(cfg("skew_bm_0.7")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["positive"]["gammas"]["values"][0] = serde_json::json!(-1.0);
    let p = t.path().join("neg.json");
    std::fs::write(&p, v.to_string()).unwrap();
    let o = run(&["classify", p.to_str().unwrap(), "--out", t.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(!o.stderr.is_empty());
}

#[test]
fn scale_queries() {
    let t = tempfile::tempdir().unwrap();
    let out = t.path().to_str().unwrap();
    let o = run(&[
        "scale", cfg("skew_bm_0.7").to_str().unwrap(), "--hitting", "0", "-1", "1", "--phi", "0", "--exit", "0", "-1", "1",
        "--out", out,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let hit = read_csv(&t.path().join("hitting.csv"));
    let p: f64 = hit[0][4].parse().unwrap();
    assert!((p - 0.7).abs() < 1e-12);
    let phi = read_csv(&t.path().join("phi.csv"));
    assert_eq!(phi[0][1].parse::<f64>().unwrap(), 0.0);
    let ex = read_csv(&t.path().join("exit.csv"));
    assert!((ex[0][3].parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn scale_without_scale_function_exits_3() {
    let t = tempfile::tempdir().unwrap();
    let o = run(&["scale", cfg("bessel_1.5").to_str().unwrap(), "--phi", "0", "--out", t.path().to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn seed_is_required() {
    let t = tempfile::tempdir().unwrap();
    let o = run(&["simulate", cfg("brownian").to_str().unwrap(), "--t", "1", "--paths", "2", "--out", t.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn explosive_needs_opt_in() {
    let t = tempfile::tempdir().unwrap();
    let c = cfg("counterexample_2");
    let base = ["simulate", c.to_str().unwrap(), "--t", "1", "--dt", "0.01", "--paths", "4", "--seed", "1", "--out"];
    let o = run(&[&base[..], &[t.path().to_str().unwrap()]].concat());
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("conservative"));
    let o = run(&[&base[..], &[t.path().to_str().unwrap(), "--allow-explosive"]].concat());
    assert_eq!(code(&o), 0);
}

#[test]
fn mc_hit_skew() {
    let t = tempfile::tempdir().unwrap();
    let o = run(&[
        "mc", "hit", cfg("skew_bm_0.7").to_str().unwrap(), "--x", "0", "--a", "-1", "--b", "1", "--paths", "100000",
        "--seed", "5", "--scheme", "euler", "--out", t.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let row = &read_csv(&t.path().join("estimate.csv"))[0];
    let (e, se): (f64, f64) = (row[1].parse().unwrap(), row[2].parse().unwrap());
    assert!((e - 0.7).abs() <= 3.0 * se + 0.01, "{e} ± {se}");
}

#[test]
fn outputs_do_not_depend_on_threads() {
    let c = cfg("skew_bm_0.7");
    let mut dirs = Vec::new();
    for threads in ["1", "8"] {
        let t = tempfile::tempdir().unwrap();
        let o = run(&[
            "simulate", c.to_str().unwrap(), "--t", "0.2", "--dt", "0.001", "--paths", "64", "--seed", "9", "--threads",
            threads, "--stride", "10", "--out", t.path().to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0);
        dirs.push(t);
    }
    let a = std::fs::read(dirs[0].path().join("paths.csv")).unwrap();
    let b = std::fs::read(dirs[1].path().join("paths.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn manifest_records_the_run() {
    let t = tempfile::tempdir().unwrap();
    let o = run(&[
        "mc", "qv", cfg("brownian").to_str().unwrap(), "--t", "0.1", "--dt", "0.01", "--paths", "8", "--seed", "42",
        "--threads", "2", "--out", t.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(t.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "mc qv");
    assert_eq!(m["seed"], 42);
    assert_eq!(m["threads"], 2);
    assert_eq!(m["schemas"]["config"], "skewdiff-config/1");
    assert!(m["argv"].as_array().unwrap().iter().any(|a| a == "--seed"));
    assert!(m["version"].is_string());
}

#[test]
fn layered_commands() {
    let t = tempfile::tempdir().unwrap();
    let l = cfg("layers_bounded_range");
    let out = t.path().join("c");
    let o = run(&["layered", "classify", l.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("layered_report.json")).unwrap()).unwrap();
    assert_eq!(r["recurrent"], "true");
    assert_eq!(r["positive_recurrent"], "true");
    let out = t.path().join("d");
    let o = run(&[
        "layered", "dispersion", l.to_str().unwrap(), "--t", "0.5", "--dt", "0.01", "--paths", "50", "--seed", "3",
        "--grid", "0,0.25,0.5", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(read_csv(&out.join("dispersion.csv")).len(), 3);
}
