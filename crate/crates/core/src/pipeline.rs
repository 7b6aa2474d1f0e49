//! End-to-end identification of a frequency scan: per-entry adaptive
//! fits, realization, per-entry reduction, MIMO assembly and a final
//! balanced truncation of the assembled model.

use std::time::Instant;

use rayon::prelude::*;
use serde_json::Value;

use crate::adaptive::{fit_adaptive, FitConfig, FitTrace};
use crate::error::{Error, Result};
use crate::ratfit::{initial_poles, RationalModel};
use crate::realization::{assemble_mimo, realize_siso, StateSpaceModel};
use crate::reduction::{reduce, DEFAULT_SIGMA_TOL};
use crate::scalar::Real;
use crate::scan_io::FrequencyScan;

#[derive(Debug, Clone, PartialEq)]
pub struct IdentifyConfig<T: Real> {
    pub fit: FitConfig<T>,
    pub init_order: usize,
    pub sigma_tol: T,
}

impl<T: Real> Default for IdentifyConfig<T> {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            init_order: 2,
            sigma_tol: T::lit(DEFAULT_SIGMA_TOL),
        }
    }
}

/// Result of fitting one `(output, input)` entry.
#[derive(Debug, Clone)]
pub struct EntryFit<T: Real> {
    pub output: usize,
    pub input: usize,
    pub rational: RationalModel<T>,
    pub trace: FitTrace,
    /// States left after the per-entry reduction.
    pub reduced_order: usize,
    pub final_rms: f64,
    pub stable: bool,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone)]
pub struct Identified<T: Real> {
    pub model: StateSpaceModel<T>,
    /// Row-major over `(output, input)`.
    pub entries: Vec<EntryFit<T>>,
}

impl<T: Real> Identified<T> {
    pub fn converged(&self) -> bool {
        self.entries.iter().all(|e| e.trace.converged)
    }
}

fn fit_entry<T: Real>(
    scan: &FrequencyScan<T>,
    o: usize,
    i: usize,
    cfg: &IdentifyConfig<T>,
) -> Result<(EntryFit<T>, StateSpaceModel<T>)> {
    let started = Instant::now();
    let resp = scan.extract_siso(o, i)?;
    let omega = resp.omega();
    let w_min = omega.iter().copied().find(|w| *w > T::zero()).ok_or_else(|| {
        Error::InvalidArgument(format!("entry ({o},{i}) has no positive frequency"))
    })?;
    let w_max = omega[omega.len() - 1];
    let init = initial_poles(cfg.init_order, w_min, w_max.max(w_min * T::lit(1.0 + 1e-6)))?;
    let (rational, trace) = fit_adaptive(&resp, &init, &cfg.fit)?;
    let ss = realize_siso(&rational)?;
    let reduced = reduce(&ss, cfg.sigma_tol)?;
    let fit = EntryFit {
        output: o,
        input: i,
        stable: rational.poles().is_stable(),
        final_rms: crate::ratfit::rms_error(&resp, &rational).to_f64_lossy(),
        reduced_order: reduced.n_states(),
        rational,
        trace,
        elapsed_s: started.elapsed().as_secs_f64(),
    };
    Ok((fit, reduced))
}

/// Fits every entry in parallel and assembles the reduced MIMO model.
pub fn identify<T: Real>(scan: &FrequencyScan<T>, cfg: &IdentifyConfig<T>) -> Result<Identified<T>> {
    let (n_out, n_in) = (scan.n_outputs(), scan.n_inputs());
    let cells: Vec<(usize, usize)> = (0..n_out).flat_map(|o| (0..n_in).map(move |i| (o, i))).collect();
    let fitted: Vec<(EntryFit<T>, StateSpaceModel<T>)> = cells
        .par_iter()
        .map(|&(o, i)| fit_entry(scan, o, i, cfg))
        .collect::<Result<_>>()?;
    let mut grid: Vec<Vec<StateSpaceModel<T>>> = vec![Vec::with_capacity(n_in); n_out];
    let mut entries = Vec::with_capacity(fitted.len());
    for (fit, ss) in fitted {
        grid[fit.output].push(ss);
        entries.push(fit);
    }
    let assembled = assemble_mimo(&grid)?;
    let mut model = reduce(&assembled, cfg.sigma_tol)?;
    let worst = entries.iter().map(|e| e.final_rms).fold(0.0, f64::max);
    model.meta.origin = Some("vector fit".into());
    model.meta.fit_tolerance = Some(cfg.fit.tol.to_f64_lossy());
    model.meta.final_rms = Some(worst);
    model.meta.extra.insert("assembled_states".into(), Value::from(assembled.n_states()));
    model
        .meta
        .extra
        .insert("converged".into(), Value::Bool(entries.iter().all(|e| e.trace.converged)));
    Ok(Identified { model, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{log_grid, random_stable_system, sample_response};
    use crate::scalar::cplx;

    #[test]
    fn identifies_small_mimo_plant() {
        let plant = random_stable_system::<f64>(4, 2, 2, 11, (2.0 * std::f64::consts::PI, 600.0)).unwrap();
        let f = log_grid(0.5, 2000.0, 200);
        let scan = sample_response(&plant, &f, 0.0).unwrap();
        let id = identify(&scan, &IdentifyConfig::default()).unwrap();
        assert!(id.converged());
        assert_eq!(id.entries.len(), 4);
        assert!(id.model.n_states() <= 4 * 4);
        for &fk in f.iter().step_by(17) {
            let s = cplx(0.0, fk * std::f64::consts::TAU);
            let g = id.model.eval_tf(s).unwrap();
            let h = plant.truth.eval_tf(s).unwrap();
            assert!((&g - &h).iter().all(|z| z.norm() < 1e-2), "{g} vs {h}");
        }
    }
}
