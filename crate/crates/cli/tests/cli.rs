use std::path::Path;
use std::process::{Command, Output};

fn sievepost(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sievepost"))
        .args(args)
        .current_dir(dir)
        .env_remove("SIEVEPOST_OUTPUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn printed(out: &str, key: &str) -> f64 {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no `{key}` line in {out}"))
        .trim()
        .parse()
        .unwrap()
}

#[test]
fn constants_table_for_the_small_tilted_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let o = sievepost(
        &[
            "constants",
            "--family",
            "spline-density",
            "--kmax",
            "2",
            "--qmax",
            "1",
            "--lmax",
            "1",
            "--output-dir",
            "out",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(dir.path().join("out/constants.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    let row = rows
        .iter()
        .find(|r| (&r[1], &r[2], &r[4]) == ("0", "1", "1"))
        .expect("(0,1,1) row");
    let a: f64 = row[6].parse().unwrap();
    let eta: f64 = row[8].parse().unwrap();
    assert!(
        (a - 19.28 * 6.0 * 0.5f64.exp() - 0.06).abs() < 1e-9,
        "A = {a}"
    );
    assert!((a - 190.79).abs() < 0.01, "A = {a}");
    // Plug-in oracle at the bisection root of 0.13 g / sqrt(1 - 4g) = 0.056.
    let (mut lo, mut hi) = (0.0f64, 0.25f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 0.13 * mid / (1.0 - 4.0 * mid).sqrt() < 0.056 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = 1.0 - 4.0 * lo;
    let oracle = 4.0 / w * (46.2 * a * w.sqrt() / lo).ln() + 8.0 * 2.0 / w;
    assert!(
        (eta - oracle).abs() < 1e-9 * oracle,
        "eta = {eta}, oracle = {oracle}"
    );
    // The quoted 265.3 uses gamma rounded to 0.1975; eta moves by ~0.2 across that rounding.
    assert!((eta - 265.3).abs() < 0.25, "eta = {eta}");
    // 17 significant digits.
    assert_eq!(
        row[6]
            .split('e')
            .next()
            .unwrap()
            .replace(['.', '-'], "")
            .len(),
        17
    );
}

#[test]
fn divergence_of_the_two_cell_density() {
    let dir = tempfile::tempdir().unwrap();
    let o = sievepost(
        &[
            "divergence",
            "--truth",
            "uniform",
            "--theta",
            "log2,0",
            "--q",
            "1",
            "--k",
            "1",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!((printed(&out, "d_H") - 0.169714).abs() < 1e-6);
    assert!((printed(&out, "D") - 0.058891).abs() < 1e-6);
    assert!((printed(&out, "V") - 0.123581).abs() < 1e-6);
    assert!(
        std::fs::read_dir(dir.path()).unwrap().next().is_none(),
        "ad-hoc query wrote files"
    );
}

#[test]
fn missing_config_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let o = sievepost(&["density-sim", "--config", "missing.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.json"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sievepost(&["nonsense"], dir.path()).status.code(), Some(1));
    assert_eq!(
        sievepost(&["constants", "--no-such-flag"], dir.path())
            .status
            .code(),
        Some(1)
    );
    assert_eq!(sievepost(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn validation_messages_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.json"),
        r#"{"famly": "spline-density"}"#,
    )
    .unwrap();
    let o = sievepost(&["constants", "--config", "bad.json"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("famly"), "{}", stderr(&o));

    let o = sievepost(&["constants"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`family`"), "{}", stderr(&o));

    let o = sievepost(
        &[
            "regression-sim",
            "--family",
            "spline-density",
            "--truth",
            "uniform",
            "--n-grid",
            "10",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`family`"), "{}", stderr(&o));

    let o = sievepost(
        &["constants", "--family", "spline-density", "--rho=-1"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("rho"), "{}", stderr(&o));
}

const SMALL_SIM: &str = r#"{
  "subcommand": "density-sim",
  "truth": {"kind": "uniform"},
  "family": "spline-density",
  "truncation": {"k": [0, 1], "q": [1, 1], "level": [0, 0], "bound": [2, 2]},
  "n_grid": [20, 40, 80],
  "radii": [{"rule": "power", "c": 2.0, "exponent": 0.3333333333333333}, {"rule": "absolute", "r": 1.4142135623730951}],
  "replicates": 2,
  "seed": 5,
  "mc": {"draws": 600, "pilot": 200}
}"#;

#[test]
fn workers_do_not_change_results_and_summaries_rerun() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("sim.json"), SMALL_SIM).unwrap();
    let run = |extra: &[&str], out: &str| {
        let mut args = vec!["density-sim", "--output-dir", out];
        args.extend_from_slice(extra);
        let o = sievepost(&args, dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(dir.path().join(out).join("density_sim.csv")).unwrap()
    };
    let one = run(&["--config", "sim.json", "--workers", "1"], "w1");
    let three = run(&["--config", "sim.json", "--workers", "3"], "w3");
    assert_eq!(one, three);
    let again = run(&["--config", "w1/density_sim.json"], "rerun");
    assert_eq!(one, again);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("w1/density_sim.json")).unwrap())
            .unwrap();
    assert_eq!(summary["config"]["seed"], 5);
    assert_eq!(summary["replicates"].as_array().unwrap().len(), 6);
    // The sqrt(2) radius row is always empty.
    let mut rdr = csv::Reader::from_reader(one.as_slice());
    for r in rdr.records().map(Result::unwrap).filter(|r| &r[2] == "1") {
        assert_eq!(r[4].parse::<f64>().unwrap(), 0.0);
    }
    // Only the two output files remain: nothing half-written.
    let names: Vec<String> = std::fs::read_dir(dir.path().join("w1"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names.len(), 2, "{names:?}");
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_sievepost"))
        .args([
            "constants",
            "--family",
            "haar-density",
            "--level-max",
            "1",
            "--lmax",
            "1",
        ])
        .current_dir(dir.path())
        .env("SIEVEPOST_OUTPUT_DIR", "envout")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("envout/constants.csv").exists());
}

#[test]
fn approx_check_reports_the_decay_slope() {
    let dir = tempfile::tempdir().unwrap();
    let truth = r#"{"kind":"regression","function":"abs","sup_bound":1.0,"sigma":1.0}"#;
    let o = sievepost(
        &[
            "approx-check",
            "--truth",
            truth,
            "--q",
            "2",
            "--ks",
            "4,8,16,32",
            "--output-dir",
            "o",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let s: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("o/approx.json")).unwrap()).unwrap();
    assert!(s["slope"].as_f64().unwrap() <= -0.8, "{s}");
}

#[test]
fn bounds_check_density_table() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("b.json"),
        r#"{"model": {"family": "spline-density", "k": 1, "q": 1, "bound": 1},
            "truth": {"kind": "uniform"}, "n": 50, "xis": [1.0, 100.0], "replicates": 50, "grid": 64, "seed": 3}"#,
    )
    .unwrap();
    let o = sievepost(
        &["bounds-check", "--config", "b.json", "--output-dir", "o"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let mut rdr = csv::Reader::from_path(dir.path().join("o/bounds.csv")).unwrap();
    assert_eq!(rdr.records().count(), 2);
}
