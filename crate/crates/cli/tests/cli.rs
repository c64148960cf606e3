use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

fn qnglab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qnglab")).args(args).current_dir(dir).env_remove("QNGLAB_TABLE_DIR").output().expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "status {:?}, stderr: {}", out.status, String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn schemas() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn check_schema(name: &str, doc: &Value) {
    let header = read_json(&schemas().join("header.v1.schema.json"));
    let resource = jsonschema::Resource::from_contents(header.clone()).unwrap();
    let validator =
        jsonschema::options().with_resource(header["$id"].as_str().unwrap(), resource).build(&read_json(&schemas().join(name))).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| format!("{e} at {}", e.instance_path)).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}");
}

fn table(dir: &TempDir, args: &[&str]) -> PathBuf {
    let out = ok(&qnglab(dir.path(), &[&["threshold"], args].concat()));
    dir.path().join(out.trim())
}

#[test]
fn absolute_table_holds_the_single_photon_threshold() {
    let dir = TempDir::new().unwrap();
    let path = table(&dir, &["--scheme", "absolute", "--n", "1"]);
    let doc = read_json(&path);
    check_schema("threshold-table.v1.schema.json", &doc);
    let level = doc["curve"]["points"][0][1].as_f64().unwrap();
    assert!((level - 0.4779).abs() < 5e-4, "{level}");
    assert_eq!(doc["header"]["convention_version"], 1);
}

#[test]
fn multiplex_table_is_monotone_and_reproducible() {
    let dir = TempDir::new().unwrap();
    let args = ["--scheme", "multiplex", "--n", "2", "--N", "3", "--points", "80"];
    let path = table(&dir, &args);
    let first = std::fs::read(&path).unwrap();
    let doc: Value = serde_json::from_slice(&first).unwrap();
    check_schema("threshold-table.v1.schema.json", &doc);
    let pts: Vec<[f64; 2]> = serde_json::from_value(doc["curve"]["points"].clone()).unwrap();
    assert!(pts.len() > 10);
    assert!(pts.windows(2).all(|w| w[1][0] > w[0][0] && w[1][1] > w[0][1]));

    let refused = qnglab(dir.path(), &[&["threshold"], &args[..]].concat());
    assert_eq!(code(&refused), 2);
    assert!(String::from_utf8_lossy(&refused.stderr).contains("--force"));
    ok(&qnglab(dir.path(), &[&["threshold"], &args[..], &["--force"]].concat()));
    assert_eq!(first, std::fs::read(&path).unwrap());
}

fn write_clicks(path: &Path, rows: impl Iterator<Item = (bool, bool)>) {
    let mut text = String::from("window_id,click_1,click_2\n");
    for (i, (a, b)) in rows.enumerate() {
        text += &format!("{i},{},{}\n", a as u8, b as u8);
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn certify_separates_single_photons_from_vacuum() {
    let dir = TempDir::new().unwrap();
    let tables = dir.path().join("tables");
    std::fs::create_dir(&tables).unwrap();
    let made = Command::new(env!("CARGO_BIN_EXE_qnglab"))
        .args(["threshold", "--scheme", "multiplex", "--n", "1", "--points", "80"])
        .env("QNGLAB_TABLE_DIR", &tables)
        .current_dir(dir.path())
        .output()
        .unwrap();
    ok(&made);
    assert!(tables.join("multiplex-n1-N2.json").exists());

    // an ideal single photon leaves a balanced splitter through exactly one port
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    write_clicks(&dir.path().join("one.csv"), (0..5000).map(|_| rng.gen::<bool>()).map(|left| (left, !left)));
    write_clicks(&dir.path().join("vacuum.csv"), (0..5000).map(|_| (false, false)));
    let certify = |clicks: &str, strict: bool| {
        let mut args = vec!["certify", "--clicks", clicks, "--table", "multiplex-n1-N2.json"];
        if strict {
            args.push("--strict");
        }
        Command::new(env!("CARGO_BIN_EXE_qnglab")).args(args).env("QNGLAB_TABLE_DIR", &tables).current_dir(dir.path()).output().unwrap()
    };

    let one = certify("one.csv", true);
    let report: Value = serde_json::from_str(&ok(&one)).unwrap();
    assert_eq!(report["passed"], true);
    assert!(report["verdict"]["sigma"].as_f64().unwrap() > 3.0);
    assert_eq!(report["nonclassicality"]["alpha"], 0.0);
    check_schema("header.v1.schema.json", &report["header"]);

    let vac = certify("vacuum.csv", true);
    assert_eq!(code(&vac), 1);
    let report: Value = serde_json::from_slice(&vac.stdout).unwrap();
    assert_eq!(report["passed"], false);
    assert_eq!(code(&certify("vacuum.csv", false)), 0);

    std::fs::write(dir.path().join("bad.csv"), "window_id,click_1,click_2\n0,1,0\n1,yes,0\n").unwrap();
    let bad = certify("bad.csv", false);
    assert_eq!(code(&bad), 2);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("schema error"));
    std::fs::write(dir.path().join("cols.csv"), "window,click_1\n0,1\n").unwrap();
    assert_eq!(code(&certify("cols.csv", false)), 2);
    std::fs::write(dir.path().join("c.json"), r#"{"windows":100,"success":10,"error":20}"#).unwrap();
    assert_eq!(code(&certify("c.json", false)), 2);
}

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().filter(|l| !l.starts_with('#')).map(|l| l.split(',').map(String::from).collect()).collect()
}

fn same_cell(a: &str, b: &str) -> bool {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => (x - y).abs() <= 1e-10 * x.abs().max(y.abs()) + 1e-300,
        _ => a == b,
    }
}

fn golden(name: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)).unwrap()
}

#[test]
fn sweeps_match_golden_files() {
    let dir = TempDir::new().unwrap();
    table(&dir, &["--scheme", "multiplex", "--n", "1"]);
    let models = [
        ("ensemble.json", r#"{"model":"ensemble","M":1,"eta":0.5,"nbar":1e-4}"#),
        ("cascade.json", r#"{"model":"cascade","eta":0.5,"T":0.5,"nbar":1e-3}"#),
        ("heralded.json", r#"{"model":"cascade","eta":0.5,"T":0.5,"nbar":1e-3,"heralded":true}"#),
    ];
    for (name, text) in models {
        std::fs::write(dir.path().join(name), text).unwrap();
        check_schema("model.v1.schema.json", &serde_json::from_str(text).unwrap());
    }
    let cases: [(&str, &[&str]); 3] = [
        ("ensemble-eta.csv", &["--model", "ensemble.json", "--criterion", "qng", "--param", "eta", "--range", "1e-3:1:12", "--log"]),
        (
            "cascade-coincidence.csv",
            &["--model", "cascade.json", "--criterion", "coincidence-spad", "--param", "T", "--range", "1e-3:1:12", "--log"],
        ),
        ("heralded-nbar.csv", &["--model", "heralded.json", "--criterion", "qng", "--param", "nbar", "--range", "1e-4:1:12", "--log"]),
    ];
    for (file, args) in cases {
        let got = ok(&qnglab(dir.path(), &[&["sweep", "--table", "multiplex-n1-N2.json"], args].concat()));
        assert!(got.starts_with("# tool: qnglab\n"));
        assert!(got.contains("# convention_version: 1\n") && got.contains("# seed: none\n"));
        let (got, want) = (data_rows(&got), data_rows(&golden(file)));
        assert_eq!(got.len(), want.len(), "{file}");
        for (g, w) in got.iter().zip(&want) {
            assert!(g.len() == w.len() && g.iter().zip(w).all(|(a, b)| same_cell(a, b)), "{file}: {g:?} vs {w:?}");
        }
    }
}

#[test]
fn sweep_rejects_bad_models_and_parameters() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("m.json"), r#"{"model":"ensemble","M":1,"eta":0.5,"nbar":0,"extra":1}"#).unwrap();
    let out = qnglab(dir.path(), &["sweep", "--model", "m.json", "--criterion", "alpha-beta", "--param", "eta", "--range", "0:1:3"]);
    assert_eq!(code(&out), 2);
    std::fs::write(dir.path().join("m.json"), r#"{"model":"ensemble","M":1,"eta":0.5,"nbar":0}"#).unwrap();
    let out = qnglab(dir.path(), &["sweep", "--model", "m.json", "--criterion", "alpha-beta", "--param", "eta", "--range", "0:2:3"]);
    assert_eq!(code(&out), 2);
    let out = qnglab(dir.path(), &["sweep", "--model", "m.json", "--criterion", "coincidence-spad", "--param", "eta", "--range", "0:1:3"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn phonon_depths_are_ordered_and_deterministic() {
    let dir = TempDir::new().unwrap();
    let args = ["phonon-depth", "--n", "2,5,10", "--criteria", "metrological,absolute-qng,wigner-annuli"];
    let first = ok(&qnglab(dir.path(), &args));
    assert_eq!(first, ok(&qnglab(dir.path(), &[&["--threads", "2"], &args[..]].concat())));
    let rows = data_rows(&first);
    assert_eq!(rows[0], ["n", "criterion", "depth"]);
    for chunk in rows[1..].chunks(3) {
        let d: Vec<f64> = chunk.iter().map(|r| r[2].parse().unwrap()).collect();
        assert!(d[0] <= d[1] && d[1] <= d[2], "{chunk:?}");
        assert_eq!(chunk[0][1], format!("metrological-{}", chunk[0][0].parse::<usize>().unwrap() - 1));
    }

    let json = ok(&qnglab(dir.path(), &["phonon-depth", "--n", "2", "--criteria", "absolute-qng", "--format", "json"]));
    let doc: Value = serde_json::from_str(&json).unwrap();
    check_schema("header.v1.schema.json", &doc["header"]);
    assert_eq!(doc["rows"][0][1], "absolute-qng");

    let exhausted = qnglab(dir.path(), &["phonon-depth", "--n", "1", "--criteria", "wigner-annuli", "--max-nbar", "0.04"]);
    assert_eq!(code(&exhausted), 3);
    assert!(String::from_utf8_lossy(&exhausted.stderr).contains("exhausted"));
    assert_eq!(code(&qnglab(dir.path(), &["phonon-depth", "--n", "1", "--criteria", "metrological", "--reference-offset", "2"])), 2);
}

#[test]
fn verification_is_reproducible_across_worker_counts() {
    let dir = TempDir::new().unwrap();
    table(&dir, &["--scheme", "multiplex", "--n", "1", "--points", "80"]);
    let run = |threads: &str, seed: &str| {
        let args = [
            "--threads",
            threads,
            "verify",
            "--family",
            "gaussian-1m",
            "--cycles",
            "5000",
            "--seed",
            seed,
            "--table",
            "multiplex-n1-N2.json",
        ];
        ok(&qnglab(dir.path(), &args))
    };
    let one = run("1", "9");
    assert_eq!(one, run("3", "9"));
    assert_ne!(one, run("1", "10"));
    let doc: Value = serde_json::from_str(&one).unwrap();
    check_schema("header.v1.schema.json", &doc["header"]);
    assert_eq!(doc["header"]["seed"], 9);
    assert_eq!(doc["report"]["violations"], 0);
}

#[test]
fn scenario_files_are_validated_and_overridden_by_flags() {
    let dir = TempDir::new().unwrap();
    let scenario = serde_json::json!({
        "version": 1,
        "threshold": { "scheme": "absolute", "n": 2, "out": "abs.json" },
        "phonon-depth": { "n": [2], "criteria": ["absolute-qng"], "format": "json" }
    });
    check_schema("scenario.v1.schema.json", &scenario);
    std::fs::write(dir.path().join("s.json"), scenario.to_string()).unwrap();
    ok(&qnglab(dir.path(), &["--config", "s.json", "threshold", "--n", "1"]));
    let doc = read_json(&dir.path().join("abs.json"));
    assert_eq!(doc["curve"]["n"], 1);
    let csv = ok(&qnglab(dir.path(), &["--config", "s.json", "phonon-depth", "--format", "csv"]));
    assert!(csv.contains("\n2,absolute-qng,"));

    std::fs::write(dir.path().join("bad.json"), r#"{"version":1,"threshold":{"scheme":"absolute","grid":3}}"#).unwrap();
    let out = qnglab(dir.path(), &["--config", "bad.json", "threshold"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema error"));
    std::fs::write(dir.path().join("old.json"), r#"{"version":2}"#).unwrap();
    assert_eq!(code(&qnglab(dir.path(), &["--config", "old.json", "threshold", "--scheme", "absolute"])), 2);
}
