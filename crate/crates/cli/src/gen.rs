use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde_json::json;
use vfmodal::oracle::{linear_grid, log_grid, random_stable_system, sample_response, table4_plant};
use vfmodal::scan_io::{save_model, write_scan, ScanFormat};

use crate::settings::{OutputFormat, Settings};
use crate::Outcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Spacing {
    Log,
    Linear,
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// Output directory for plant.json and the scan
    #[arg(long)]
    pub out: PathBuf,
    /// Use the 10th-order converter-study plant instead of a random one
    #[arg(long)]
    pub table4: bool,
    #[arg(long, default_value_t = 6)]
    pub order: usize,
    #[arg(long, default_value_t = 1)]
    pub inputs: usize,
    #[arg(long, default_value_t = 1)]
    pub outputs: usize,
    /// Lowest pole frequency of a random plant, Hz
    #[arg(long, default_value_t = 1.0)]
    pub pole_min_hz: f64,
    /// Highest pole frequency of a random plant, Hz
    #[arg(long, default_value_t = 1000.0)]
    pub pole_max_hz: f64,
    /// First scan frequency, Hz
    #[arg(long, default_value_t = 0.5)]
    pub f_min: f64,
    /// Last scan frequency, Hz
    #[arg(long, default_value_t = 2000.0)]
    pub f_max: f64,
    #[arg(long, default_value_t = 240)]
    pub points: usize,
    #[arg(long, value_enum, default_value_t = Spacing::Log)]
    pub spacing: Spacing,
    /// Relative complex Gaussian noise on each sample
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
}

pub fn run(args: &GenArgs, settings: &Settings) -> anyhow::Result<Outcome> {
    if args.points < 2 || !(args.f_min > 0.0 && args.f_max > args.f_min) {
        return Err(vfmodal::Error::InvalidArgument("scan grid needs >= 2 points and 0 < f-min < f-max".into()).into());
    }
    let plant = if args.table4 {
        table4_plant::<f64>()?
    } else {
        let tau = std::f64::consts::TAU;
        random_stable_system::<f64>(
            args.order,
            args.inputs,
            args.outputs,
            settings.seed,
            (tau * args.pole_min_hz, tau * args.pole_max_hz),
        )?
    };
    let grid: Vec<f64> = match args.spacing {
        Spacing::Log => log_grid(args.f_min, args.f_max, args.points),
        Spacing::Linear => linear_grid(args.f_min, args.f_max, args.points),
    };
    let scan = sample_response(&plant, &grid, args.noise)?.with_meta(json!({
        "seed": plant.seed,
        "noise_rel": args.noise,
        "table4": args.table4,
    }));

    fs::create_dir_all(&args.out)?;
    save_model(&plant.truth, args.out.join("plant.json"))?;
    let (name, format) = match settings.format {
        OutputFormat::Csv => ("scan.csv", ScanFormat::Csv),
        OutputFormat::Json => ("scan.json", ScanFormat::Json),
    };
    write_scan(&scan, args.out.join(name), format)?;
    println!(
        "plant: {} states, {}x{}; scan: {} points -> {}",
        plant.truth.n_states(),
        plant.truth.n_outputs(),
        plant.truth.n_inputs(),
        grid.len(),
        Path::new(&args.out).join(name).display()
    );
    Ok(Outcome::Clean)
}
