use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use nhtopo::linalg::{c64, scale, ComplexMatrix};
use nhtopo::model::{lattice_hamiltonian, Boundary, ModelParams};
use nhtopo::statmech::{density_couplings, random_lossy_system};
use nhtopo_cli::matrix_file::MatrixFile;
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nhtopo"))
        .args(args)
        .env_remove("NHTOPO_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    serde_json::from_str(&stdout(&all)).unwrap()
}

/// Data rows split into fields, header dropped.
fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn write_matrix(dir: &TempDir, name: &str, h: ComplexMatrix, couplings: Vec<ComplexMatrix>) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, MatrixFile { hamiltonian: h, couplings }.write()).unwrap();
    path
}

fn model_matrix(cells: usize) -> ComplexMatrix {
    let p = ModelParams::new(0.3, 1.0, 1.0, 0.5, 1.0, cells).unwrap();
    lattice_hamiltonian(&p, Boundary::Periodic).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn winding_steps_and_statelessness() {
    let forward = stdout(&["winding", "--preset", "winding-steps", "--u-count", "10", "--grid", "501"]);
    assert_eq!(forward.lines().next(), Some("U,W,w"));
    let table = rows(&forward);
    let value = |u: f64| table.iter().find(|r| r[0].parse::<f64>().unwrap() == u).unwrap().clone();
    assert_eq!(value(0.0)[1..], ["1", "1"]);
    assert_eq!(value(1.5)[1..], ["0", "1"]);
    assert_eq!(value(-0.5)[1..], ["1", "0"]);
    assert_eq!(value(2.5)[1..], ["0", "0"]);
    // U = +-1 sits on a gap closing: W is left empty, w is still defined.
    assert_eq!(value(1.0)[1..], ["", "1"]);

    let reversed = stdout(&["winding", "--preset", "winding-steps", "--u-start", "2.5", "--u-stop", "-2", "--u-count", "10", "--grid", "501"]);
    let mut back = rows(&reversed);
    back.reverse();
    assert_eq!(back, table);

    let hermitian = stdout(&["winding", "--gamma", "0", "--u-count", "17", "--grid", "501"]);
    for row in rows(&hermitian) {
        assert_eq!(row[1], row[2], "{row:?}");
    }
}

#[test]
fn phase_diagram_regions_and_boundaries() {
    let point = json(&[
        "phase-diagram", "--u-start", "1.2", "--u-stop", "1.2", "--u-count", "1", "--gamma-start", "0.5",
        "--gamma-stop", "0.5", "--gamma-count", "1",
    ]);
    assert_eq!(point["rows"][0][4], "II");

    let grid = stdout(&["phase-diagram", "--preset", "phase-map", "--u-count", "8", "--gamma-count", "5", "--grid", "401"]);
    assert_eq!(grid.lines().next(), Some("U,gamma,W,w,region,error"));
    let table = rows(&grid);
    assert_eq!(table.len(), 40);
    // U-major order.
    assert!(table.windows(2).all(|w| w[0][0].parse::<f64>().unwrap() <= w[1][0].parse::<f64>().unwrap()));
    for row in &table {
        let gamma: f64 = row[1].parse().unwrap();
        if gamma.abs() < 1e-12 {
            assert!(["I", "IV", "boundary"].contains(&row[4].as_str()), "{row:?}");
        }
    }

    let boundary = stdout(&[
        "phase-diagram", "--hopping", "0.5", "--u-start", "0.5", "--u-stop", "0.5", "--u-count", "1",
        "--gamma-count", "1", "--gamma-start", "0.3", "--gamma-stop", "0.3",
    ]);
    assert_eq!(rows(&boundary)[0][2..5], ["", "", "boundary"]);

    let invalid = stdout(&["phase-diagram", "--u-count", "1", "--gamma-start", "1", "--gamma-stop", "1", "--gamma-count", "1"]);
    assert!(rows(&invalid)[0][5].contains("gamma"));
}

#[test]
fn spectrum_scan_zero_mode_windows() {
    let zero_modes = |which: &str, u: &str| -> usize {
        let out = stdout(&["spectrum-scan", "--preset", "open-chain", "--which", which, "--u-start", u, "--u-stop", u, "--u-count", "1"]);
        assert_eq!(out.lines().next(), Some("U,index,re_E,im_E,is_zero_mode,error"));
        let table = rows(&out);
        assert_eq!(table.len(), 100);
        table.iter().filter(|r| r[4] == "true").count()
    };
    assert_eq!(zero_modes("bands", "0.5"), 2);
    assert_eq!(zero_modes("bands", "-0.5"), 2);
    assert_eq!(zero_modes("bands", "1.5"), 0);
    assert_eq!(zero_modes("effective", "1.2"), 2);
    assert_eq!(zero_modes("effective", "-0.7"), 0);

    let csv = stdout(&["spectrum-scan", "--preset", "open-chain", "--u-count", "2", "--cells", "4"]);
    let doc = json(&["spectrum-scan", "--preset", "open-chain", "--u-count", "2", "--cells", "4"]);
    let csv_rows = rows(&csv);
    let json_rows = doc["rows"].as_array().unwrap();
    assert_eq!(csv_rows.len(), json_rows.len());
    for (c, j) in csv_rows.iter().zip(json_rows) {
        let re: f64 = c[2].parse().unwrap();
        let im: f64 = c[3].parse().unwrap();
        // serde_json's default float parser is not correctly rounded.
        assert!((j[2][0].as_f64().unwrap() - re).abs() <= 1e-15 * re.abs());
        assert!((j[2][1].as_f64().unwrap() - im).abs() <= 1e-15 * im.abs());
    }
}

#[test]
fn output_is_identical_across_runs_and_thread_counts() {
    let dir = TempDir::new().unwrap();
    let args = |threads: &str, file: &str| {
        let out = dir.path().join(file);
        let status = run(&[
            "phase-diagram", "--u-count", "9", "--gamma-count", "4", "--grid", "301", "--threads", threads, "--out",
            path_str(&out),
        ]);
        assert!(status.status.success());
        assert!(status.stdout.is_empty());
        std::fs::read(out).unwrap()
    };
    let a = args("1", "a.csv");
    assert_eq!(a, args("3", "b.csv"));
    assert_eq!(a, args("3", "c.csv"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("run.conf");
    std::fs::write(&config, "# sweep\npreset = winding-steps\nu-count = 3\ngamma = 0.2\nformat = json\n").unwrap();
    let doc: Value = serde_json::from_str(&stdout(&["winding", "--config", path_str(&config), "--grid", "301"])).unwrap();
    assert_eq!(doc["rows"].as_array().unwrap().len(), 3);
    let csv = stdout(&["winding", "--config", path_str(&config), "--format", "csv", "--u-count", "4", "--grid", "301"]);
    assert_eq!(rows(&csv).len(), 4);

    std::fs::write(&config, "u-count 3\n").unwrap();
    let bad = run(&["winding", "--config", path_str(&config)]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("run.conf:1"));
}

#[test]
fn density_profile_and_summary() {
    let out = stdout(&["density", "--gamma", "0", "--onsite", "20", "--cells", "12", "--particles", "12"]);
    assert_eq!(out.lines().next(), Some("cell,occupation"));
    let table = rows(&out);
    assert_eq!(table.len(), 12);
    for row in table {
        assert!((row[1].parse::<f64>().unwrap() - 1.0).abs() < 1e-3, "{row:?}");
    }
    assert!(out.contains("# edge_accumulation = "));
    let doc = json(&["density", "--cells", "12"]);
    assert_eq!(doc["summary"]["particles"], 13);
}

#[test]
fn classify_model_and_counterexample() {
    let dir = TempDir::new().unwrap();
    let h = model_matrix(6);
    let model = write_matrix(&dir, "model.txt", h.clone(), vec![]);
    let doc = json(&["classify", "--matrix", path_str(&model), "--model-ops", "true"]);
    assert_eq!(doc["label"]["state_class"], "BDI*");
    assert_eq!(doc["label"]["invariant_groups"], serde_json::json!(["Z", "0", "0"]));

    let scaled = write_matrix(&dir, "scaled.txt", scale(&h, c64::new(1.0, -1.0)), vec![]);
    let doc = json(&["classify", "--matrix", path_str(&scaled), "--model-ops", "true"]);
    assert_eq!(doc["report"]["cs"], false);
    assert_eq!(doc["report"]["lcs"], true);

    let random = ComplexMatrix::from_fn(4, 4, |i, j| c64::new((i * 7 + j * 3) as f64 % 5.0 - 2.0, (i + 2 * j) as f64 % 3.0));
    let random = write_matrix(&dir, "random.txt", random, vec![]);
    let doc = json(&["classify", "--matrix", path_str(&random)]);
    assert_eq!(doc["label"]["state_class"], "A");
    assert_eq!(doc["label"]["invariant_groups"], serde_json::json!(["0", "Z", "0"]));
}

#[test]
fn classify_exit_codes() {
    let dir = TempDir::new().unwrap();
    let jordan = dir.path().join("jordan.txt");
    std::fs::write(&jordan, "2 0\n0 1\n0 0\n").unwrap();
    // The linearized checks need the eigenbasis of H.
    let out = run(&["classify", "--matrix", path_str(&jordan), "--model-ops", "true"]);
    assert_eq!(out.status.code(), Some(2));

    let broken = dir.path().join("broken.txt");
    std::fs::write(&broken, "2 0\n0 1\n0 zz\n").unwrap();
    let out = run(&["classify", "--matrix", path_str(&broken)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken.txt:3: bad entry 'zz'"));

    assert_eq!(run(&["classify"]).status.code(), Some(1));
}

#[test]
fn metric_model_hermitian_and_reduced() {
    let dir = TempDir::new().unwrap();
    let h = model_matrix(3);
    let path = write_matrix(&dir, "model.txt", h, density_couplings(6));
    let doc = json(&["metric", "--matrix", path_str(&path)]);
    assert_eq!(doc["path"], "full");
    let (a, b) = (3f64.sqrt(), 1.0 / 3f64.sqrt());
    for cell in 0..3 {
        let d = |i: usize| doc["metric"][i][i][0].as_f64().unwrap();
        assert!((d(2 * cell) - a).abs() < 1e-8, "{}", d(2 * cell));
        assert!((d(2 * cell + 1) - b).abs() < 1e-8);
    }
    let p: f64 = doc["probabilities"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
    assert!((p - 1.0).abs() < 1e-12);
    assert_eq!(doc["effective_hamiltonian"].as_array().unwrap().len(), 6);

    let hermitian = ComplexMatrix::from_fn(3, 3, |i, j| if i == j { c64::new(i as f64, 0.0) } else { c64::new(0.1, 0.0) });
    let path = write_matrix(&dir, "hermitian.txt", hermitian, vec![]);
    let doc = json(&["metric", "--matrix", path_str(&path)]);
    for i in 0..3 {
        for j in 0..3 {
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((doc["metric"][i][j][0].as_f64().unwrap() - expected).abs() < 1e-10);
        }
    }

    let lossy = random_lossy_system(5, 2, 11).unwrap();
    let path = write_matrix(&dir, "lossy.txt", lossy.hamiltonian, lossy.couplings);
    let doc = json(&["metric", "--matrix", path_str(&path)]);
    assert_eq!(doc["path"], "reduced");
    assert_eq!(doc["modes"].as_array().unwrap().len(), 2);
    assert!(doc["effective_hamiltonian"].is_null());
}

#[test]
fn metric_reports_not_thermalizable() {
    let dir = TempDir::new().unwrap();
    // Real spectrum, but a diagonal metric cannot intertwine the upper triangle.
    let path = dir.path().join("stuck.txt");
    std::fs::write(&path, "2 2\n1 1\n0 2\n1 0\n0 0\n0 0\n0 1\n").unwrap();
    let out = run(&["metric", "--matrix", path_str(&path)]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn theorem3_demo_discrepancy_shrinks() {
    let doc = json(&["theorem3-demo", "--systems", "3", "--size", "5", "--seed", "4", "--alpha", "1e2,1e3,1e4"]);
    let rows = doc["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 9);
    for system in rows.chunks(3) {
        let d: Vec<f64> = system.iter().map(|r| r[2].as_f64().unwrap()).collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
        assert!(d[2] < 1e-6);
    }
}

#[test]
fn report_csv_is_field_value_pairs() {
    let dir = TempDir::new().unwrap();
    let path = write_matrix(&dir, "model.txt", model_matrix(2), vec![]);
    let out = stdout(&["classify", "--matrix", path_str(&path), "--model-ops", "true"]);
    assert_eq!(out.lines().next(), Some("field,value"));
    assert!(out.lines().any(|l| l == "label.state_class,BDI*"));
}
