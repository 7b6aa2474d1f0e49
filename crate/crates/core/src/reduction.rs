//! Balanced realization by the square-root method and truncation by
//! Hankel singular value ratio.

use std::io::Write;

use nalgebra::DMatrix;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::linalg;
use crate::realization::StateSpaceModel;
use crate::scalar::{eps, Complex, Real};

pub const DEFAULT_SIGMA_TOL: f64 = 5e-4;

/// HSVs below this fraction of the largest are treated as zero.
const ZERO_HSV_RATIO: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct BalancedModel<T: Real> {
    /// Balanced realization of the minimal part (states with non-zero HSV).
    pub ss: StateSpaceModel<T>,
    /// All `n` Hankel singular values of the input system, non-increasing.
    pub hsv: Vec<T>,
    /// `n×r` map from balanced to original coordinates.
    pub transform: DMatrix<T>,
    /// `r×n` left inverse of `transform`.
    pub inverse: DMatrix<T>,
}

impl<T: Real> BalancedModel<T> {
    pub fn minimal_order(&self) -> usize {
        self.ss.n_states()
    }
}

fn require_hurwitz<T: Real>(a: &DMatrix<T>) -> Result<()> {
    if let Some(e) = linalg::spectral_abscissa(a)? {
        if !(e.re < T::zero()) {
            return Err(Error::Unstable {
                re: e.re.to_f64_lossy(),
                im: e.im.to_f64_lossy(),
            });
        }
    }
    Ok(())
}

/// Controllability and observability Gramians:
/// `A Wc + Wc Aᵀ = −B Bᵀ` and `Aᵀ Wo + Wo A = −Cᵀ C`.
pub fn gramians<T: Real>(ss: &StateSpaceModel<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
    require_hurwitz(&ss.a)?;
    let bb = &ss.b * ss.b.transpose();
    let cc = ss.c.transpose() * &ss.c;
    let wc = linalg::lyapunov(&ss.a, &(-bb))?;
    let wo = linalg::lyapunov(&ss.a.transpose(), &(-cc))?;
    Ok((wc, wo))
}

/// Square-root balancing. States whose HSV is below `1e-12·σ₁` are dropped,
/// so `ss` is minimal while `hsv` keeps the full spectrum.
pub fn balance<T: Real>(ss: &StateSpaceModel<T>) -> Result<BalancedModel<T>> {
    let n = ss.n_states();
    if n == 0 {
        return Ok(BalancedModel {
            ss: ss.clone(),
            hsv: Vec::new(),
            transform: DMatrix::zeros(0, 0),
            inverse: DMatrix::zeros(0, 0),
        });
    }
    require_hurwitz(&ss.a)?;
    let lc = linalg::lyapunov_factor(&ss.a.transpose(), &ss.b.transpose())?;
    let lo = linalg::lyapunov_factor(&ss.a, &ss.c)?;
    let m = lo.transpose() * &lc;
    let (u, sv, v) = linalg::svd(&m);
    let hsv: Vec<T> = sv.iter().map(|&s| s.max(T::zero())).collect();

    let cut = T::lit(ZERO_HSV_RATIO).max(eps::<T>() * T::from_usize_lossy(n)) * hsv[0];
    let r = hsv.iter().take_while(|&&s| s > cut && s > T::zero()).count();
    let mut t = DMatrix::zeros(n, r);
    let mut t_inv = DMatrix::zeros(r, n);
    for j in 0..r {
        let w = T::one() / hsv[j].sqrt();
        t.set_column(j, &((&lc * v.column(j)) * w));
        t_inv.set_row(j, &((u.column(j).transpose() * lo.transpose()) * w));
    }
    let mut out = ss.transformed(&t, &t_inv);
    out.state_labels = (0..r).map(|k| format!("h{k}")).collect();
    Ok(BalancedModel {
        ss: out,
        hsv,
        transform: t,
        inverse: t_inv,
    })
}

/// Keeps the balanced states with `σ_k/σ₁ ≥ sigma_tol`. Records
/// `discarded_states` in the metadata; when nothing survives the result is
/// the feedthrough alone with `all_states_truncated` set.
pub fn truncate<T: Real>(bal: &BalancedModel<T>, sigma_tol: T) -> Result<StateSpaceModel<T>> {
    if bal.hsv.is_empty() {
        return Err(Error::InvalidArgument("no Hankel singular values to truncate".into()));
    }
    if !(sigma_tol >= T::zero()) {
        return Err(Error::InvalidArgument("sigma_tol must be non-negative".into()));
    }
    let top = bal.hsv[0];
    let keep = if top > T::zero() {
        bal.hsv[..bal.minimal_order()]
            .iter()
            .take_while(|&&s| s / top >= sigma_tol)
            .count()
    } else {
        0
    };
    let ss = &bal.ss;
    let mut out = StateSpaceModel::new(
        ss.a.view((0, 0), (keep, keep)).into_owned(),
        ss.b.rows(0, keep).into_owned(),
        ss.c.columns(0, keep).into_owned(),
        ss.d.clone(),
    )?
    .with_state_labels(ss.state_labels[..keep].to_vec())?;
    out.meta = ss.meta.clone();
    let discarded = bal.hsv.len() - keep;
    out.meta.extra.insert("discarded_states".into(), Value::from(discarded));
    if keep == 0 {
        out.meta.extra.insert("all_states_truncated".into(), Value::Bool(true));
    }
    Ok(out)
}

/// Balances then truncates; a model without states passes through.
pub fn reduce<T: Real>(ss: &StateSpaceModel<T>, sigma_tol: T) -> Result<StateSpaceModel<T>> {
    if ss.n_states() == 0 {
        return Ok(ss.clone());
    }
    truncate(&balance(ss)?, sigma_tol)
}

/// The scan frequencies plus three decades below and above, 20 points per decade.
pub fn probe_grid<T: Real>(omega: &[T]) -> Vec<T> {
    let mut grid = Vec::with_capacity(omega.len() + 120);
    let (Some(&lo), Some(&hi)) = (omega.first(), omega.last()) else {
        return grid;
    };
    let step = |k: usize| T::lit(10f64.powf(k as f64 / 20.0));
    if lo > T::zero() {
        grid.extend((1..=60).rev().map(|k| lo / step(k)));
    }
    grid.extend_from_slice(omega);
    grid.extend((1..=60).map(|k| hi * step(k)));
    grid
}

/// Largest singular value of a complex matrix.
pub fn max_singular_value<T: Real>(m: &DMatrix<Complex<T>>) -> T {
    if m.is_empty() {
        return T::zero();
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(T::zero(), |acc, &s| acc.max(s))
}

/// `sup_ω σ̄(G(jω) − G_r(jω))` over `omega`.
pub fn max_response_deviation<T: Real>(
    full: &StateSpaceModel<T>,
    reduced: &StateSpaceModel<T>,
    omega: &[T],
) -> Result<T> {
    let mut worst = T::zero();
    for &w in omega {
        let s = Complex::new(T::zero(), w);
        let diff = full.eval_tf(s)? - reduced.eval_tf(s)?;
        worst = worst.max(max_singular_value(&diff));
    }
    Ok(worst)
}

/// Writes `index, hsv, cumulative_ratio`; the ratio is the running share of the HSV sum.
pub fn write_hsv_csv<T: Real, W: Write>(hsv: &[T], w: W) -> Result<()> {
    let total: f64 = hsv.iter().map(|s| s.to_f64_lossy()).sum();
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["index", "hsv", "cumulative_ratio"])?;
    let mut acc = 0.0;
    for (k, s) in hsv.iter().enumerate() {
        let s = s.to_f64_lossy();
        acc += s;
        let ratio = if total > 0.0 { acc / total } else { 0.0 };
        wtr.write_record([(k + 1).to_string(), format!("{s:e}"), format!("{ratio}")])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::realization::realize_real_pole;
    use crate::scalar::cplx;

    fn ss1(a: f64, b: f64, c: f64) -> StateSpaceModel<f64> {
        StateSpaceModel::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, b),
            DMatrix::from_element(1, 1, c),
            DMatrix::zeros(1, 1),
        )
        .unwrap()
    }

    /// Two copies of `2/(s+5)` in parallel on one channel.
    fn duplicated() -> (StateSpaceModel<f64>, StateSpaceModel<f64>) {
        let one = realize_real_pole(-5.0, cplx(2.0, 0.0)).unwrap();
        let a = DMatrix::from_diagonal_element(2, 2, -5.0);
        let b = DMatrix::from_element(2, 1, 1.0);
        let c = DMatrix::from_element(1, 2, 1.0);
        let dup = StateSpaceModel::new(a, b, c, DMatrix::zeros(1, 1)).unwrap();
        (dup, one)
    }

    #[test]
    fn scalar_gramians() {
        let (wc, wo) = gramians(&ss1(-1.0, 1.0, 1.0)).unwrap();
        assert!((wc[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((wo[(0, 0)] - 0.5).abs() < 1e-14);
        let (wc, _) = gramians(&ss1(-1.0, 0.0, 1.0)).unwrap();
        assert_eq!(wc[(0, 0)], 0.0);
        assert!(matches!(gramians(&ss1(1.0, 1.0, 1.0)), Err(Error::Unstable { .. })));
    }

    #[test]
    fn balanced_scalar_is_identity_up_to_sign() {
        let bal = balance(&ss1(-1.0, 1.0, 1.0)).unwrap();
        assert!((bal.transform[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((bal.hsv[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn duplicate_block_has_one_zero_hsv() {
        let (dup, one) = duplicated();
        let bal = balance(&dup).unwrap();
        assert_eq!(bal.hsv.len(), 2);
        assert!(bal.hsv[0] > 0.0);
        assert!(bal.hsv[1] < 1e-12 * bal.hsv[0]);
        assert_eq!(bal.minimal_order(), 1);
        let red = truncate(&bal, 5e-4).unwrap();
        assert_eq!(red.n_states(), 1);
        assert_eq!(red.meta.extra["discarded_states"], Value::from(1));
        for w in [0.0, 1.0, 5.0, 100.0] {
            let s = cplx(0.0, w);
            let g = red.eval_tf(s).unwrap()[(0, 0)];
            let h = one.eval_tf(s).unwrap()[(0, 0)];
            assert!((g - h).norm() < 1e-9);
        }
    }

    #[test]
    fn ratio_threshold() {
        // 1/(s+1) has hsv 0.5; the weak 1e-3/(s+100) branch has hsv 5e-8
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, -100.0]));
        let b = DMatrix::from_column_slice(2, 1, &[1.0, 0.01]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.01]);
        let ss = StateSpaceModel::new(a, b, c, DMatrix::zeros(1, 1)).unwrap();
        let bal = balance(&ss).unwrap();
        assert_eq!(truncate(&bal, 5e-4).unwrap().n_states(), 1);
        assert_eq!(truncate(&bal, 0.0).unwrap().n_states(), 2);
        let none = truncate(&bal, 2.0).unwrap();
        assert_eq!(none.n_states(), 0);
        assert_eq!(none.meta.extra["all_states_truncated"], Value::Bool(true));
    }

    #[test]
    fn equal_hsv_keeps_everything() {
        let a = DMatrix::<f64>::from_diagonal_element(2, 2, -1.0);
        let b = DMatrix::identity(2, 2);
        let c = DMatrix::identity(2, 2);
        let ss = StateSpaceModel::new(a, b, c, DMatrix::zeros(2, 2)).unwrap();
        let bal = balance(&ss).unwrap();
        assert!((bal.hsv[0] - bal.hsv[1]).abs() < 1e-14);
        assert_eq!(truncate(&bal, 5e-4).unwrap().n_states(), 2);
    }

    #[test]
    fn probe_grid_extends_three_decades() {
        let g = probe_grid(&[1.0f64, 10.0]);
        assert_eq!(g.len(), 122);
        assert!((g[0] - 1e-3).abs() < 1e-15);
        assert!((g[121] - 1e4).abs() < 1e-9);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn hsv_csv() {
        let mut buf = Vec::new();
        write_hsv_csv(&[3.0, 1.0], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "index,hsv,cumulative_ratio\n1,3e0,0.75\n2,1e0,1\n");
    }
}
