use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::Context;
use serde_json::{json, Value};
use vfmodal::modal::{analyze, compare_poles, write_modes_csv, write_pf_csv, write_pole_comparison_csv, ModalReport, PoleMatch, StatePartition};
use vfmodal::scan_io::{load_model, ModelFile};
use vfmodal::system::{compose, PlanFile};
use vfmodal::{Complex, StateSpace};

use crate::settings::{OutputFormat, Settings};
use crate::Outcome;

/// Relative distance beyond which a truth pole is reported as unmatched.
const MATCH_GATE: f64 = 0.1;

/// A model file or a composition plan, told apart by a `subsystems` key.
pub fn load_system(path: &Path) -> anyhow::Result<(StateSpace, StatePartition)> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let value: Value = serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))?;
    if value.get("subsystems").is_some() {
        let plan: PlanFile = serde_json::from_value(value).with_context(|| format!("reading plan {}", path.display()))?;
        let plan = plan.into_plan::<f64>(path.parent().unwrap_or(Path::new(".")))?;
        let comp = compose(&plan).context("composing plan")?;
        let partition = comp.partition();
        Ok((comp.model, partition))
    } else {
        let model: ModelFile = serde_json::from_value(value).with_context(|| format!("reading model {}", path.display()))?;
        let ss: StateSpace = model.into_model()?;
        let partition = StatePartition::all_black(ss.n_states());
        Ok((ss, partition))
    }
}

pub fn run(input: &Path, truth: Option<&Path>, out: &Path, settings: &Settings) -> anyhow::Result<Outcome> {
    let (ss, partition) = load_system(input)?;
    let report = analyze(&ss, &partition, settings.dominance_ratio).context("modal analysis")?;
    let comparison = match truth {
        Some(path) => {
            let reference = load_model::<f64>(path).with_context(|| format!("reading truth model {}", path.display()))?;
            let fitted: Vec<Complex<f64>> = report.modes.iter().map(|m| m.lambda).collect();
            Some(compare_poles(&reference.eigenvalues()?, &fitted, MATCH_GATE))
        }
        None => None,
    };

    fs::create_dir_all(out)?;
    match settings.format {
        OutputFormat::Csv => {
            write_with(&out.join("modes.csv"), |w| write_modes_csv(&report, w))?;
            write_with(&out.join("pf.csv"), |w| write_pf_csv(&report, settings.pf_threshold, w))?;
            if let Some(rows) = &comparison {
                write_with(&out.join("poles.csv"), |w| write_pole_comparison_csv(rows, w))?;
            }
        }
        OutputFormat::Json => {
            let doc = report_json(&report, settings.pf_threshold, comparison.as_deref());
            let mut w = BufWriter::new(File::create(out.join("report.json"))?);
            serde_json::to_writer_pretty(&mut w, &doc)?;
            w.flush()?;
        }
    }

    let unstable = report.modes.iter().filter(|m| m.lambda.re >= 0.0).count();
    println!(
        "{} modes, {} unstable, eigenvector condition {:.3e}",
        report.modes.len(),
        unstable,
        report.condition
    );
    Ok(if report.defective {
        Outcome::Flagged("state matrix is defective or nearly so; participation factors are unreliable".into())
    } else {
        Outcome::Clean
    })
}

fn write_with<F>(path: &Path, f: F) -> anyhow::Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> vfmodal::Result<()>,
{
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn pair(z: Option<Complex<f64>>) -> Value {
    z.map_or(Value::Null, |z| json!([z.re, z.im]))
}

fn report_json(report: &ModalReport<f64>, threshold: f64, comparison: Option<&[PoleMatch<f64>]>) -> Value {
    let modes: Vec<Value> = report
        .modes
        .iter()
        .enumerate()
        .map(|(j, m)| {
            json!({
                "mode_id": j + 1,
                "lambda": [m.lambda.re, m.lambda.im],
                "zeta": m.zeta,
                "f_hz": m.freq_hz,
                "dominance": m.dominance.to_string(),
                "label": m.label,
            })
        })
        .collect();
    let pf = &report.participation;
    let mut participation = Vec::new();
    for j in 0..pf.n_modes() {
        for k in 0..pf.n_states() {
            let mag = pf.magnitude(k, j);
            if mag > threshold {
                participation.push(json!({ "state_label": report.state_labels[k], "mode_id": j + 1, "pf_magnitude": mag }));
            }
        }
    }
    let mut doc = json!({
        "modes": modes,
        "participation": participation,
        "condition": report.condition,
        "defective": report.defective,
    });
    if let Some(rows) = comparison {
        doc["poles"] = rows
            .iter()
            .map(|r| json!({ "reference": pair(r.reference), "fitted": pair(r.candidate), "error_pct": r.percent_error() }))
            .collect();
    }
    doc
}
