//! Adaptive pole expansion: iterate vector fitting to an RMS tolerance and,
//! whenever a round stalls above it, insert a lightly damped pole at the
//! midpoint of the interval with the largest local error.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ratfit::{
    enforce_stability, inverse_magnitude_weights, pole_movement, rms_error, vf_iteration, Pole, PoleSet,
    RationalModel,
};
use crate::scalar::{cabs, Complex, Real};
use crate::scan_io::SisoResponse;

/// Relative pole movement below which the inner iteration is at a fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum Weighting<T: Real> {
    Uniform,
    /// `1/|T(s_k)|`
    InverseMagnitude,
    Custom(Vec<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig<T: Real> {
    /// RMS tolerance.
    pub tol: T,
    /// Vector-fitting iterations per expansion round.
    pub inner_iters: usize,
    /// Cap on the total pole count.
    pub max_order: usize,
    /// `|s_mid|` below which a real pole is inserted instead of a pair.
    pub dc_threshold: T,
    pub weighting: Weighting<T>,
}

impl<T: Real> Default for FitConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-6),
            inner_iters: 3,
            max_order: 60,
            dc_threshold: T::lit(1e-3),
            weighting: Weighting::Uniform,
        }
    }
}

impl<T: Real> FitConfig<T> {
    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_order(mut self, max_order: usize) -> Self {
        self.max_order = max_order;
        self
    }

    fn validate(&self, initial_order: usize) -> Result<()> {
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        if self.inner_iters < 1 {
            return Err(Error::InvalidArgument("inner_iters must be at least 1".into()));
        }
        if self.max_order < initial_order {
            return Err(Error::InvalidArgument(format!(
                "max_order {} below initial order {initial_order}",
                self.max_order
            )));
        }
        Ok(())
    }
}

/// One expansion round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub order: usize,
    pub rms: f64,
    /// Upper member of the pole inserted after this round, `[re, im]`.
    pub inserted: Option<[f64; 2]>,
    pub ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitTrace {
    pub rounds: Vec<RoundRecord>,
    pub converged: bool,
}

impl FitTrace {
    pub fn final_order(&self) -> usize {
        self.rounds.last().map_or(0, |r| r.order)
    }

    pub fn insertions(&self) -> usize {
        self.rounds.iter().filter(|r| r.inserted.is_some()).count()
    }

    pub fn total_ms(&self) -> f64 {
        self.rounds.iter().map(|r| r.ms).sum()
    }

    /// JSON lines, one record per round. With `with_timing == false` the
    /// `ms` field is written as `null` so the output is reproducible.
    pub fn write_jsonl<W: Write>(&self, mut w: W, with_timing: bool) -> Result<()> {
        for r in &self.rounds {
            let rec = serde_json::json!({
                "round": r.round,
                "order": r.order,
                "rms": r.rms,
                "inserted": r.inserted,
                "ms": if with_timing { serde_json::json!(r.ms) } else { serde_json::Value::Null },
            });
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Sample with the largest absolute error; ties resolve to the lowest index.
pub fn locate_max_error<T: Real>(response: &SisoResponse<T>, model: &RationalModel<T>) -> usize {
    let mut best = 0;
    let mut best_err = None;
    for k in 0..response.len() {
        let e = cabs(response.values()[k] - model.eval(response.s(k)));
        if best_err.is_none_or(|b| e > b) {
            best = k;
            best_err = Some(e);
        }
    }
    best
}

/// Midpoint of the samples neighbouring `k`; at either end of the axis
/// the nearest available neighbour pair is used.
pub fn midpoint_frequency<T: Real>(response: &SisoResponse<T>, k: usize) -> Complex<T> {
    let n = response.len();
    if n <= 1 {
        return response.s(0);
    }
    let (lo, hi) = if k == 0 {
        (0, 1)
    } else if k >= n - 1 {
        (n - 2, n - 1)
    } else {
        (k - 1, k + 1)
    };
    (response.s(lo) + response.s(hi)).unscale(T::lit(2.0))
}

/// Appends a pole for `s_mid`: a real pole near DC, otherwise the pair
/// `−10⁻⁴|s_mid| ± j·Im(s_mid)`. A pole within 10⁻⁹ (relative) of an
/// existing one has its imaginary part (magnitude, if real) raised by 0.1%.
pub fn expand_poles<T: Real>(poles: &PoleSet<T>, s_mid: Complex<T>, dc_threshold: T) -> PoleSet<T> {
    let mut candidate = if cabs(s_mid) < dc_threshold {
        let re = s_mid.re;
        Pole::Real(if re == T::zero() { -dc_threshold } else { re })
    } else {
        Pole::Pair {
            re: -T::lit(1e-4) * cabs(s_mid),
            im: s_mid.im.abs(),
        }
    };
    let close = |c: &Pole<T>| {
        poles.entries().iter().any(|p| {
            let (a, b) = (p.value(), c.value());
            cabs(a - b) <= T::lit(1e-9) * cabs(a)
        })
    };
    while close(&candidate) {
        candidate = match candidate {
            Pole::Real(x) => Pole::Real(x * T::lit(1.001)),
            Pole::Pair { re, im } => Pole::Pair {
                re,
                im: im * T::lit(1.001),
            },
        };
    }
    let mut entries = poles.entries().to_vec();
    entries.push(candidate);
    enforce_stability(&PoleSet::new(entries).expect("candidate differs from every existing pole"))
}

/// Drives vector fitting to `cfg.tol`, expanding the pole set between
/// rounds. When `max_order` (or the sample budget) is exhausted first, the
/// lowest-RMS model seen is returned and the trace is left unconverged.
pub fn fit_adaptive<T: Real>(
    response: &SisoResponse<T>,
    initial: &PoleSet<T>,
    cfg: &FitConfig<T>,
) -> Result<(RationalModel<T>, FitTrace)> {
    if response.is_empty() {
        return Err(Error::EmptyResponse);
    }
    if initial.is_empty() {
        return Err(Error::InvalidArgument("initial pole set is empty".into()));
    }
    cfg.validate(initial.order())?;
    let weights = match &cfg.weighting {
        Weighting::Uniform => None,
        Weighting::InverseMagnitude => Some(inverse_magnitude_weights(response)),
        Weighting::Custom(w) => Some(w.clone()),
    };
    let w = weights.as_deref();

    let mut poles = enforce_stability(initial);
    let mut trace = FitTrace::default();
    let mut best: Option<(T, RationalModel<T>)> = None;
    let tol_move = T::lit(FIXED_POINT_TOL);

    'rounds: for round in 1.. {
        let started = Instant::now();
        let mut model = None;
        for _ in 0..cfg.inner_iters {
            // a numerical failure after the first round ends the search with the best model so far
            let (relocated, fitted) = match vf_iteration(response, &poles, w) {
                Ok(step) => step,
                Err(_) if best.is_some() => break 'rounds,
                Err(e) => return Err(e),
            };
            let moved = pole_movement(&poles, &relocated);
            poles = relocated;
            model = Some(fitted);
            if moved < tol_move {
                break;
            }
        }
        let model = model.expect("inner_iters >= 1");
        let rms = rms_error(response, &model);
        let mut record = RoundRecord {
            round,
            order: model.order(),
            rms: rms.to_f64_lossy(),
            inserted: None,
            ms: 0.0,
        };
        if best.as_ref().is_none_or(|(b, _)| rms < *b) {
            best = Some((rms, model.clone()));
        }

        if rms < cfg.tol {
            record.ms = started.elapsed().as_secs_f64() * 1e3;
            trace.rounds.push(record);
            trace.converged = true;
            return Ok((model, trace));
        }

        let k_star = locate_max_error(response, &model);
        let s_mid = midpoint_frequency(response, k_star);
        let expanded = expand_poles(&poles, s_mid, cfg.dc_threshold);
        let fits_budget = expanded.order() <= cfg.max_order && response.len() > 2 * expanded.order();
        if fits_budget {
            let added = expanded.entries().last().expect("expanded set is non-empty").value();
            record.inserted = Some([added.re.to_f64_lossy(), added.im.to_f64_lossy()]);
        }
        record.ms = started.elapsed().as_secs_f64() * 1e3;
        trace.rounds.push(record);
        if !fits_budget {
            break;
        }
        poles = expanded;
    }

    let (_, model) = best.expect("at least one round ran");
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratfit::initial_poles;
    use crate::scalar::cplx;

    fn axis(omegas: &[f64]) -> SisoResponse<f64> {
        SisoResponse::new(omegas.to_vec(), vec![cplx(0.0, 0.0); omegas.len()]).unwrap()
    }

    #[test]
    fn max_error_ties_go_low() {
        let omega = [1.0, 2.0, 3.0];
        let resp = SisoResponse::new(omega.to_vec(), vec![cplx(0.1, 0.0), cplx(0.9, 0.0), cplx(0.3, 0.0)]).unwrap();
        assert_eq!(locate_max_error(&resp, &RationalModel::constant(0.0)), 1);
        let flat = SisoResponse::new(omega.to_vec(), vec![cplx(0.5, 0.0); 3]).unwrap();
        assert_eq!(locate_max_error(&flat, &RationalModel::constant(0.0)), 0);
        assert_eq!(locate_max_error(&flat, &RationalModel::constant(0.5)), 0);
    }

    #[test]
    fn midpoint_rules() {
        let resp = axis(&[10.0, 20.0, 30.0]);
        assert_eq!(midpoint_frequency(&resp, 1), cplx(0.0, 20.0));
        assert_eq!(midpoint_frequency(&resp, 0), cplx(0.0, 15.0));
        assert_eq!(midpoint_frequency(&resp, 2), cplx(0.0, 25.0));
        assert_eq!(midpoint_frequency(&axis(&[7.0]), 0), cplx(0.0, 7.0));
    }

    #[test]
    fn expansion_rules() {
        let base = initial_poles(2, 10.0, 20.0).unwrap();
        let p = expand_poles(&base, cplx(0.0, 500.0), 1e-3);
        assert_eq!(p.entries().last(), Some(&Pole::Pair { re: -0.05, im: 500.0 }));
        assert_eq!(p.order(), 4);

        let dc = expand_poles(&base, cplx(0.0, 0.0), 1e-3);
        assert_eq!(dc.entries().last(), Some(&Pole::Real(-1e-3)));
        assert_eq!(dc.order(), 3);

        let again = expand_poles(&p, cplx(0.0, 500.0), 1e-3);
        match again.entries().last() {
            Some(&Pole::Pair { re, im }) => {
                assert_eq!(re, -0.05);
                assert!((im - 500.5f64).abs() < 1e-9);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exact_initial_poles_converge_first_round() {
        let omega: Vec<f64> = (1..=60).map(|k| k as f64 * 2.0).collect();
        let truth = PoleSet::new(vec![Pole::Pair { re: -3.0, im: 40.0 }]).unwrap();
        let model = RationalModel::new(truth.clone(), vec![cplx(1.0, -2.0)], 0.0).unwrap();
        let values = omega.iter().map(|&w| model.eval(cplx(0.0, w))).collect();
        let resp = SisoResponse::new(omega, values).unwrap();
        let (fit, trace) = fit_adaptive(&resp, &truth, &FitConfig::default()).unwrap();
        assert!(trace.converged);
        assert_eq!(trace.rounds.len(), 1);
        assert_eq!(trace.insertions(), 0);
        assert!(rms_error(&resp, &fit) < 1e-6);
    }

    #[test]
    fn rejects_bad_config() {
        let resp = axis(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let init = initial_poles(2, 1.0, 5.0).unwrap();
        let cfg = FitConfig::default().with_tol(0.0);
        assert!(fit_adaptive(&resp, &init, &cfg).is_err());
        let cfg = FitConfig::default().with_max_order(1);
        assert!(fit_adaptive(&resp, &init, &cfg).is_err());
    }
}
