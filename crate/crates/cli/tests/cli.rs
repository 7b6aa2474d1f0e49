use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const RING: &str = r#"{
  "subsystems": [
    {"id": "g1", "kind": "white_box", "model": {"A": [[-1.0]], "B": [[1.0]], "C": [[2.0]], "D": [[0.0]]}},
    {"id": "g2", "kind": "black_box", "model": {"A": [[-1.0]], "B": [[1.0]], "C": [[1.0]], "D": [[0.0]]}},
    {"id": "g3", "kind": "white_box", "model": {"A": [[-1.0]], "B": [[1.0]], "C": [[1.0]], "D": [[0.0]]}}
  ],
  "connections": [["g1.y0", "g2.u0", 1.0], ["g2.y0", "g3.u0", 1.0], ["g3.y0", "g1.u0", -1.0]]
}"#;

fn vfmodal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vfmodal")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen_siso(dir: &Path) -> std::path::PathBuf {
    let gen = dir.join("gen");
    let out = vfmodal(&["oracle", "gen", "--order", "4", "--seed", "3", "--out", p(&gen)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    gen
}

#[test]
fn siso_fit_writes_one_summary_row() {
    let dir = tempfile::tempdir().unwrap();
    let gen = gen_siso(dir.path());
    let fit = dir.path().join("fit");
    let out = vfmodal(&["fit", p(&gen.join("scan.csv")), "--out", p(&fit)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fit.join("model.json").is_file());
    assert!(fit.join("traces").join("entry_0_0.jsonl").is_file());
    let summary = fs::read_to_string(fit.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines.len(), 2, "{summary}");
    assert!(lines[0].starts_with("entry,order"));
}

#[test]
fn analyzing_the_truth_against_itself_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let gen = gen_siso(dir.path());
    let plant = gen.join("plant.json");
    let ana = dir.path().join("analyze");
    let out = vfmodal(&["analyze", p(&plant), "--truth", p(&plant), "--out", p(&ana)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(ana.join("modes.csv").is_file() && ana.join("pf.csv").is_file());

    let mut rdr = csv::Reader::from_path(ana.join("poles.csv")).unwrap();
    let col = rdr.headers().unwrap().iter().position(|h| h == "error_pct").expect("error_pct column");
    let mut rows = 0;
    for rec in rdr.records() {
        let err: f64 = rec.unwrap()[col].parse().unwrap();
        assert!(err < 1e-9, "{err}");
        rows += 1;
    }
    assert_eq!(rows, 4);
}

#[test]
fn stable_sweep_reports_no_crossing() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("ring.json");
    fs::write(&plan, RING).unwrap();
    let out_dir = dir.path().join("sweep");
    let out = vfmodal(&["sweep", p(&plan), "--subsystem", "g1", "--factors", "0.5,1,2", "--out", p(&out_dir)]);
    assert_eq!(code(&out), 0);
    let report = fs::read_to_string(out_dir.join("crossing.txt")).unwrap();
    assert!(report.contains("stable throughout"), "{report}");
    assert!(fs::read_to_string(out_dir.join("sweep.csv")).unwrap().lines().count() > 3);
}

#[test]
fn unstable_sweep_names_the_crossing() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("ring.json");
    fs::write(&plan, RING).unwrap();
    let out_dir = dir.path().join("sweep");
    let out = vfmodal(&["sweep", p(&plan), "--subsystem", "g1", "--factors", "1:1:6", "--format", "json", "--out", p(&out_dir)]);
    assert_eq!(code(&out), 0);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("sweep.json")).unwrap()).unwrap();
    assert_eq!(doc["crossing"]["unstable_factor"], 5.0);
    assert_eq!(doc["crossing"]["last_stable"], 4.0);
}

#[test]
fn bad_input_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    assert_eq!(code(&vfmodal(&["fit", p(&missing), "--out", p(dir.path())])), 2);

    let plan = dir.path().join("ring.json");
    fs::write(&plan, RING).unwrap();
    let args = ["sweep", p(&plan), "--subsystem", "g1", "--factors", "3:1:1", "--out", p(dir.path())];
    assert_eq!(code(&vfmodal(&args)), 2);
    let args = ["sweep", p(&plan), "--subsystem", "nobody", "--factors", "1", "--out", p(dir.path())];
    assert_eq!(code(&vfmodal(&args)), 2);

    let garbage = dir.path().join("scan.csv");
    fs::write(&garbage, "this,is\nnot,a scan\n").unwrap();
    assert_eq!(code(&vfmodal(&["fit", p(&garbage), "--out", p(dir.path())])), 2);

    let config = dir.path().join("cfg.json");
    fs::write(&config, r#"{"tolerance": 1}"#).unwrap();
    assert_eq!(code(&vfmodal(&["--config", p(&config), "fit", p(&garbage), "--out", p(dir.path())])), 2);
}

#[test]
fn unconverged_fit_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    let out = vfmodal(&["oracle", "gen", "--order", "8", "--seed", "5", "--out", p(&gen)]);
    assert_eq!(code(&out), 0);
    let fit = dir.path().join("fit");
    let out = vfmodal(&["fit", p(&gen.join("scan.csv")), "--tol", "1e-14", "--max-order", "2", "--out", p(&fit)]);
    assert_eq!(code(&out), 1, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fit.join("model.json").is_file());
}
