use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context};
use serde_json::json;
use vfmodal::scan_io::{load_scan, save_model, ScanFormat};
use vfmodal::pipeline::{identify, Identified};

use crate::settings::{OutputFormat, Settings};
use crate::Outcome;

pub fn run(scan_path: &Path, out: &Path, settings: &Settings) -> anyhow::Result<Outcome> {
    let format = ScanFormat::from_path(scan_path)
        .ok_or_else(|| anyhow!(vfmodal::Error::InvalidArgument(format!(
            "cannot infer scan format of {} (expected .csv or .json)",
            scan_path.display()
        ))))?;
    let scan = load_scan::<f64>(scan_path, format).with_context(|| format!("reading scan {}", scan_path.display()))?;
    let nyquist = scan.validate_nyquist();
    if !nyquist.passed() {
        eprintln!("warning: Nyquist check {nyquist}");
    }
    let id = identify(&scan, &settings.identify).context("identification failed")?;

    fs::create_dir_all(out.join("traces"))?;
    let mut model = id.model.clone();
    model.meta.extra.insert("nyquist".into(), serde_json::to_value(&nyquist)?);
    save_model(&model, out.join("model.json"))?;
    for e in &id.entries {
        let path = out.join("traces").join(format!("entry_{}_{}.jsonl", e.output, e.input));
        let mut w = BufWriter::new(File::create(&path)?);
        e.trace.write_jsonl(&mut w, settings.timing)?;
        w.flush()?;
    }
    write_summary(&id, out, settings)?;
    for e in &id.entries {
        println!(
            "entry ({},{}) order {} rms {:.3e} {}",
            e.output,
            e.input,
            e.rational.order(),
            e.final_rms,
            if e.trace.converged { "converged" } else { "NOT converged" }
        );
    }
    println!("model: {} states -> {}", id.model.n_states(), out.join("model.json").display());

    let stable = id.entries.iter().all(|e| e.stable);
    Ok(if id.converged() && stable {
        Outcome::Clean
    } else {
        Outcome::Flagged("fit did not converge on every entry".into())
    })
}

fn write_summary(id: &Identified<f64>, out: &Path, settings: &Settings) -> anyhow::Result<()> {
    match settings.format {
        OutputFormat::Csv => {
            let mut wtr = csv::Writer::from_path(out.join("summary.csv"))?;
            wtr.write_record(["entry", "order", "reduced_order", "id_time_s", "final_rms", "stable", "converged"])?;
            for e in &id.entries {
                let time = if settings.timing { format!("{}", e.elapsed_s) } else { String::new() };
                wtr.write_record([
                    format!("{}_{}", e.output, e.input),
                    e.rational.order().to_string(),
                    e.reduced_order.to_string(),
                    time,
                    format!("{:e}", e.final_rms),
                    e.stable.to_string(),
                    e.trace.converged.to_string(),
                ])?;
            }
            wtr.flush()?;
        }
        OutputFormat::Json => {
            let rows: Vec<_> = id
                .entries
                .iter()
                .map(|e| {
                    json!({
                        "entry": [e.output, e.input],
                        "order": e.rational.order(),
                        "reduced_order": e.reduced_order,
                        "id_time_s": if settings.timing { json!(e.elapsed_s) } else { json!(null) },
                        "final_rms": e.final_rms,
                        "stable": e.stable,
                        "converged": e.trace.converged,
                    })
                })
                .collect();
            let mut w = BufWriter::new(File::create(out.join("summary.json"))?);
            serde_json::to_writer_pretty(&mut w, &json!({ "entries": rows, "states": id.model.n_states() }))?;
            w.flush()?;
        }
    }
    Ok(())
}
