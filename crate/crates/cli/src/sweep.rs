use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context};
use serde_json::{json, Value};
use vfmodal::system::{load_plan, sensitivity_sweep, write_sweep_csv, SweepResult};

use crate::settings::{OutputFormat, Settings};
use crate::Outcome;

/// `a,b,c` or an inclusive range `start:step:stop`.
pub fn parse_factors(text: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let factors = match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop): (f64, f64, f64) = (start.trim().parse()?, step.trim().parse()?, stop.trim().parse()?);
            if !(step > 0.0) || stop < start {
                bail!("factor range `{text}` needs a positive step and start <= stop");
            }
            let n = ((stop - start) / step + 1e-9).floor() as usize;
            (0..=n).map(|k| start + step * k as f64).collect()
        }
        [list] => list
            .split(',')
            .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad factor `{s}`")))
            .collect::<anyhow::Result<Vec<_>>>()?,
        _ => bail!("factors must be `a,b,c` or `start:step:stop`, got `{text}`"),
    };
    if factors.is_empty() {
        bail!("no factors given");
    }
    Ok(factors)
}

pub fn run(plan_path: &Path, subsystem: &str, factors: &[f64], out: &Path, settings: &Settings) -> anyhow::Result<Outcome> {
    let plan = load_plan::<f64>(plan_path).with_context(|| format!("reading plan {}", plan_path.display()))?;
    let result = sensitivity_sweep(&plan, subsystem, factors, settings.dominance_ratio)?;

    fs::create_dir_all(out)?;
    match settings.format {
        OutputFormat::Csv => {
            let mut w = BufWriter::new(File::create(out.join("sweep.csv"))?);
            write_sweep_csv(&result, &mut w)?;
            w.flush()?;
            let mut report = BufWriter::new(File::create(out.join("crossing.txt"))?);
            writeln!(report, "{}", result.crossing_summary())?;
            for (f, msg) in result.failures() {
                writeln!(report, "factor {f} failed: {msg}")?;
            }
            report.flush()?;
        }
        OutputFormat::Json => {
            let mut w = BufWriter::new(File::create(out.join("sweep.json"))?);
            serde_json::to_writer_pretty(&mut w, &sweep_json(&result))?;
            w.flush()?;
        }
    }

    println!("{}", result.crossing_summary());
    let failed = result.failures().count();
    Ok(if failed == 0 {
        Outcome::Clean
    } else {
        Outcome::Flagged(format!("{failed} sweep factor(s) failed"))
    })
}

fn sweep_json(result: &SweepResult<f64>) -> Value {
    let points: Vec<Value> = result
        .points
        .iter()
        .map(|p| match &p.outcome {
            Ok(modes) => json!({
                "factor": p.factor,
                "modes": modes.iter().map(|m| json!({
                    "mode_id": m.mode_id,
                    "lambda": [m.lambda.re, m.lambda.im],
                    "zeta": m.zeta,
                    "f_hz": m.freq_hz,
                    "dominance": m.dominance.to_string(),
                })).collect::<Vec<_>>(),
            }),
            Err(e) => json!({ "factor": p.factor, "error": e }),
        })
        .collect();
    json!({
        "points": points,
        "crossing": result.crossing.map(|c| json!({ "unstable_factor": c.unstable_factor, "last_stable": c.last_stable })),
        "summary": result.crossing_summary(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_lists_and_ranges() {
        assert_eq!(parse_factors("1, 2.5,4").unwrap(), vec![1.0, 2.5, 4.0]);
        assert_eq!(parse_factors("1:0.5:3").unwrap(), vec![1.0, 1.5, 2.0, 2.5, 3.0]);
        assert_eq!(parse_factors("2:1:2").unwrap(), vec![2.0]);
        assert!(parse_factors("1:0:2").is_err());
        assert!(parse_factors("a,b").is_err());
        assert!(parse_factors("1:2").is_err());
    }
}
