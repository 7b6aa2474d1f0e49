//! Eigenanalysis of state-space models: left/right eigenvectors,
//! participation factors, white/black-box dominance, bandwidth labels and
//! modal step responses.

use std::fmt;
use std::io::Write;

use nalgebra::{ComplexField, DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::realization::StateSpaceModel;
use crate::scalar::{cabs, eps, Complex, Real};

pub const DEFECTIVE_CONDITION: f64 = 1e10;
pub const DEFAULT_DOMINANCE_RATIO: f64 = 4.0;
pub const DEFAULT_PF_THRESHOLD: f64 = 0.005;
const NORMALIZATION_TOL: f64 = 1e-8;

/// `A = R Λ L` with `L = R⁻¹`; modes ordered by real part, descending,
/// conjugate pairs adjacent with the positive imaginary part first.
#[derive(Debug, Clone)]
pub struct Eigendecomposition<T: Real> {
    pub values: Vec<Complex<T>>,
    /// Unit-norm right eigenvectors as columns.
    pub right: DMatrix<Complex<T>>,
    /// Left eigenvectors as rows, `left · right = I`.
    pub left: DMatrix<Complex<T>>,
    /// 2-norm condition number of `right`.
    pub condition: T,
    /// Set when `condition` exceeds 1e10; results are low-confidence.
    pub defective: bool,
}

impl<T: Real> Eigendecomposition<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

fn real_vector<T: Real>(v: DVector<Complex<T>>) -> DVector<Complex<T>> {
    let (idx, _) = v
        .iter()
        .enumerate()
        .fold((0, T::zero()), |(bi, bm), (i, z)| if cabs(*z) > bm { (i, cabs(*z)) } else { (bi, bm) });
    let phase = v[idx] / Complex::new(cabs(v[idx]), T::zero());
    v.map(|z| Complex::new((z * phase.conj()).re, T::zero()))
}

fn unit<T: Real>(v: DVector<Complex<T>>) -> DVector<Complex<T>> {
    let norm = v.iter().fold(T::zero(), |acc, z| acc + z.norm_sqr()).sqrt();
    if norm > T::zero() {
        v.map(|z| z.unscale(norm))
    } else {
        v
    }
}

pub fn eigendecompose<T: Real>(a: &DMatrix<T>) -> Result<Eigendecomposition<T>> {
    linalg::check_finite(a, "A")?;
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!("A is {}x{}", n, a.ncols())));
    }
    if n == 0 {
        return Ok(Eigendecomposition {
            values: Vec::new(),
            right: DMatrix::zeros(0, 0),
            left: DMatrix::zeros(0, 0),
            condition: T::one(),
            defective: false,
        });
    }
    let (u, t, pairs) = linalg::complex_schur(a)?;
    let scale = a.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    let smin = eps::<T>() * if scale > T::zero() { scale } else { T::one() };

    // (λ, v, is_pair) groups in Schur order
    let mut groups: Vec<(Complex<T>, DVector<Complex<T>>, bool)> = Vec::new();
    let mut k = 0;
    while k < n {
        let v = unit(&u * linalg::triangular_eigvec(&t, k, smin));
        if pairs.binary_search(&k).is_ok() {
            let lam = t[(k, k)];
            if lam.im >= T::zero() {
                groups.push((lam, v, true));
            } else {
                groups.push((lam.conj(), v.map(|z| z.conj()), true));
            }
            k += 2;
        } else {
            groups.push((Complex::new(t[(k, k)].re, T::zero()), real_vector(v), false));
            k += 1;
        }
    }
    groups.sort_by(|x, y| {
        y.0.re
            .partial_cmp(&x.0.re)
            .unwrap()
            .then(y.0.im.partial_cmp(&x.0.im).unwrap())
    });

    let mut values = Vec::with_capacity(n);
    let mut right = DMatrix::from_element(n, n, czero());
    let mut col = 0;
    for (lam, v, is_pair) in &groups {
        values.push(*lam);
        right.set_column(col, v);
        col += 1;
        if *is_pair {
            values.push(lam.conj());
            right.set_column(col, &v.map(|z| z.conj()));
            col += 1;
        }
    }

    let sv = right.clone().singular_values();
    let smax = sv.iter().fold(T::zero(), |m, &x| m.max(x));
    let smin_r = sv.iter().fold(smax, |m, &x| m.min(x));
    let condition = if smin_r > T::zero() {
        smax / smin_r
    } else {
        T::max_value().unwrap_or(T::one())
    };
    let defective = !(condition <= T::lit(DEFECTIVE_CONDITION));
    let mut left = match right.clone().lu().try_inverse() {
        Some(inv) if inv.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => inv,
        _ => right
            .clone()
            .pseudo_inverse(eps::<T>())
            .map_err(|e| Error::InvalidArgument(e.to_string()))?,
    };
    // exact conjugate symmetry between partner rows, real rows for real modes
    let mut j = 0;
    while j < n {
        if values[j].im > T::zero() && j + 1 < n {
            let row = left.row(j).map(|z| z.conj());
            left.set_row(j + 1, &row);
            j += 2;
        } else {
            let row = left.row(j).map(|z| Complex::new(z.re, T::zero()));
            left.set_row(j, &row);
            j += 1;
        }
    }
    Ok(Eigendecomposition {
        values,
        right,
        left,
        condition,
        defective,
    })
}

/// `p[(k, j)] = left[(j, k)] · right[(k, j)]`: state `k` in mode `j`.
#[derive(Debug, Clone)]
pub struct ParticipationMatrix<T: Real> {
    pub p: DMatrix<Complex<T>>,
}

impl<T: Real> ParticipationMatrix<T> {
    pub fn magnitude(&self, state: usize, mode: usize) -> T {
        cabs(self.p[(state, mode)])
    }

    pub fn n_states(&self) -> usize {
        self.p.nrows()
    }

    pub fn n_modes(&self) -> usize {
        self.p.ncols()
    }
}

fn biorthogonality_residual<T: Real>(right: &DMatrix<Complex<T>>, left: &DMatrix<Complex<T>>) -> T {
    let n = right.ncols();
    let err = left * right - DMatrix::identity(n, n);
    err.iter().fold(T::zero(), |worst, z| worst.max(cabs(*z)))
}

fn participation_unchecked<T: Real>(right: &DMatrix<Complex<T>>, left: &DMatrix<Complex<T>>) -> ParticipationMatrix<T> {
    let n = right.nrows();
    let m = right.ncols();
    ParticipationMatrix {
        p: DMatrix::from_fn(n, m, |k, j| left[(j, k)] * right[(k, j)]),
    }
}

/// Fails with [`Error::NotNormalized`] unless `left · right = I` within 1e-8.
pub fn participation_matrix<T: Real>(
    right: &DMatrix<Complex<T>>,
    left: &DMatrix<Complex<T>>,
) -> Result<ParticipationMatrix<T>> {
    if left.nrows() != right.ncols() || left.ncols() != right.nrows() {
        return Err(Error::Dimension(format!(
            "left is {}x{}, right is {}x{}",
            left.nrows(),
            left.ncols(),
            right.nrows(),
            right.ncols()
        )));
    }
    let res = biorthogonality_residual(right, left);
    if !(res <= T::lit(NORMALIZATION_TOL)) {
        return Err(Error::NotNormalized(res.to_f64_lossy()));
    }
    Ok(participation_unchecked(right, left))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Dominance {
    #[serde(rename = "wb")]
    WhiteBox,
    #[serde(rename = "bb")]
    BlackBox,
    #[serde(rename = "hybrid")]
    Hybrid,
}

impl fmt::Display for Dominance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dominance::WhiteBox => "wb",
            Dominance::BlackBox => "bb",
            Dominance::Hybrid => "hybrid",
        })
    }
}

/// Per-mode dominance from the summed participation magnitudes of the
/// white-box and black-box state sets.
pub fn dominance<T: Real>(
    pf: &ParticipationMatrix<T>,
    white: &[usize],
    black: &[usize],
    ratio: T,
) -> Vec<Dominance> {
    (0..pf.n_modes())
        .map(|j| {
            let wb = white.iter().fold(T::zero(), |acc, &k| acc + pf.magnitude(k, j));
            let bb = black.iter().fold(T::zero(), |acc, &k| acc + pf.magnitude(k, j));
            if bb > ratio * wb {
                Dominance::BlackBox
            } else if wb > ratio * bb {
                Dominance::WhiteBox
            } else {
                Dominance::Hybrid
            }
        })
        .collect()
}

const OSCILLATORY_BANDS: [(&str, f64, f64); 6] = [
    ("x_cc", 100.0, 2000.0),
    ("x_vc", 1.0, 100.0),
    ("x_pll", 5.0, 20.0),
    ("x_dp", 0.1, 5.0),
    ("x_vi", 0.1, 5.0),
    ("x_sys", 40.0, 80.0),
];

fn non_oscillatory_label(re: f64) -> &'static str {
    if re < -500.0 {
        "x_n,il"
    } else if re < -20.0 {
        "x_n,vc"
    } else if re < -2.0 {
        "x_n,syn"
    } else if re < -1.0 {
        "x_n,pc"
    } else {
        "x_n,oc"
    }
}

/// Heuristic control-loop label for an eigenvalue in rad/s. Oscillatory
/// modes get every band containing their frequency, joined by `/`; a mode
/// outside all bands, or a real one, is labelled by its real part.
pub fn classify_state<T: Real>(lambda: Complex<T>) -> String {
    let re = lambda.re.to_f64_lossy();
    let im = lambda.im.to_f64_lossy();
    if im != 0.0 {
        let f = im.abs() / std::f64::consts::TAU;
        let hits: Vec<&str> = OSCILLATORY_BANDS
            .iter()
            .filter(|(_, lo, hi)| f >= *lo && f <= *hi)
            .map(|(name, _, _)| *name)
            .collect();
        if !hits.is_empty() {
            return hits.join("/");
        }
    }
    non_oscillatory_label(re).to_string()
}

pub fn damping_ratio<T: Real>(lambda: Complex<T>) -> T {
    let mag = cabs(lambda);
    if mag > T::zero() {
        -lambda.re / mag
    } else {
        T::zero()
    }
}

pub fn frequency_hz<T: Real>(lambda: Complex<T>) -> T {
    lambda.im.abs() / T::two_pi()
}

#[derive(Debug, Clone)]
pub struct ModeRecord<T: Real> {
    pub lambda: Complex<T>,
    pub zeta: T,
    pub freq_hz: T,
    pub right: DVector<Complex<T>>,
    pub left: DVector<Complex<T>>,
    pub dominance: Dominance,
    pub label: String,
}

/// Which states belong to white-box and which to black-box subsystems.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StatePartition {
    pub white: Vec<usize>,
    pub black: Vec<usize>,
}

impl StatePartition {
    pub fn all_black(n: usize) -> Self {
        Self {
            white: Vec::new(),
            black: (0..n).collect(),
        }
    }

    pub fn all_white(n: usize) -> Self {
        Self {
            white: (0..n).collect(),
            black: Vec::new(),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &k in self.white.iter().chain(&self.black) {
            if k >= n || seen[k] {
                return Err(Error::InvalidArgument(format!(
                    "state partition must cover 0..{n} exactly once (offending index {k})"
                )));
            }
            seen[k] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument(format!("state partition does not cover all {n} states")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ModalReport<T: Real> {
    pub modes: Vec<ModeRecord<T>>,
    pub participation: ParticipationMatrix<T>,
    pub state_labels: Vec<String>,
    pub condition: T,
    pub defective: bool,
}

pub fn analyze<T: Real>(ss: &StateSpaceModel<T>, partition: &StatePartition, ratio: T) -> Result<ModalReport<T>> {
    partition.validate(ss.n_states())?;
    let eig = eigendecompose(&ss.a)?;
    let participation = if eig.defective {
        participation_unchecked(&eig.right, &eig.left)
    } else {
        participation_matrix(&eig.right, &eig.left)?
    };
    let dom = dominance(&participation, &partition.white, &partition.black, ratio);
    let modes = eig
        .values
        .iter()
        .enumerate()
        .map(|(j, &lambda)| ModeRecord {
            lambda,
            zeta: damping_ratio(lambda),
            freq_hz: frequency_hz(lambda),
            right: eig.right.column(j).into_owned(),
            left: eig.left.row(j).transpose(),
            dominance: dom[j],
            label: classify_state(lambda),
        })
        .collect();
    Ok(ModalReport {
        modes,
        participation,
        state_labels: ss.state_labels.clone(),
        condition: eig.condition,
        defective: eig.defective,
    })
}

fn complexify<T: Real>(m: &DMatrix<T>) -> DMatrix<Complex<T>> {
    m.map(|x| Complex::new(x, T::zero()))
}

/// `(R⁻¹ B, C R)`.
pub fn modal_transform<T: Real>(
    ss: &StateSpaceModel<T>,
    eig: &Eigendecomposition<T>,
) -> (DMatrix<Complex<T>>, DMatrix<Complex<T>>) {
    (&eig.left * complexify(&ss.b), complexify(&ss.c) * &eig.right)
}

/// `C_modal[output][mode] · B_modal[mode][input]`.
pub fn modal_residue<T: Real>(
    b_modal: &DMatrix<Complex<T>>,
    c_modal: &DMatrix<Complex<T>>,
    mode: usize,
    input: usize,
    output: usize,
) -> Result<Complex<T>> {
    if mode >= b_modal.nrows() || mode >= c_modal.ncols() {
        return Err(Error::InvalidArgument(format!("mode {mode} out of range ({} modes)", b_modal.nrows())));
    }
    if output >= c_modal.nrows() || input >= b_modal.ncols() {
        return Err(Error::IndexOutOfRange {
            row: output,
            col: input,
            rows: c_modal.nrows(),
            cols: b_modal.ncols(),
        });
    }
    Ok(c_modal[(output, mode)] * b_modal[(mode, input)])
}

/// A model together with its modal coordinates.
#[derive(Debug, Clone)]
pub struct ModalForm<T: Real> {
    pub eig: Eigendecomposition<T>,
    pub b_modal: DMatrix<Complex<T>>,
    pub c_modal: DMatrix<Complex<T>>,
    pub d: DMatrix<T>,
}

impl<T: Real> ModalForm<T> {
    pub fn new(ss: &StateSpaceModel<T>) -> Result<Self> {
        let eig = eigendecompose(&ss.a)?;
        let (b_modal, c_modal) = modal_transform(ss, &eig);
        Ok(Self {
            eig,
            b_modal,
            c_modal,
            d: ss.d.clone(),
        })
    }

    pub fn residue(&self, mode: usize, input: usize, output: usize) -> Result<Complex<T>> {
        modal_residue(&self.b_modal, &self.c_modal, mode, input, output)
    }

    /// `Σ_{i∈modes} Re[(r_i/λ_i)(e^{λ_i t} − 1)]`, plus `D` when `with_feedthrough`.
    pub fn step_response(
        &self,
        modes: &[usize],
        input: usize,
        output: usize,
        times: &[T],
        with_feedthrough: bool,
    ) -> Result<Vec<T>> {
        if output >= self.d.nrows() || input >= self.d.ncols() {
            return Err(Error::IndexOutOfRange {
                row: output,
                col: input,
                rows: self.d.nrows(),
                cols: self.d.ncols(),
            });
        }
        let scale = self.eig.values.iter().fold(T::zero(), |m, z| m.max(cabs(*z)));
        let mut terms = Vec::with_capacity(modes.len());
        for &i in modes {
            let r = self.residue(i, input, output)?;
            let lam = self.eig.values[i];
            if cabs(lam) <= eps::<T>() * scale || cabs(lam) == T::zero() {
                return Err(Error::ZeroEigenvalue(i));
            }
            terms.push((r / lam, lam));
        }
        let feed = if with_feedthrough { self.d[(output, input)] } else { T::zero() };
        let one = Complex::new(T::one(), T::zero());
        Ok(times
            .iter()
            .map(|&t| {
                terms.iter().fold(feed, |acc, &(g, lam)| {
                    let e = <Complex<T> as ComplexField>::exp(lam.scale(t));
                    acc + (g * (e - one)).re
                })
            })
            .collect())
    }
}

pub fn modal_step_response<T: Real>(
    ss: &StateSpaceModel<T>,
    modes: &[usize],
    input: usize,
    output: usize,
    times: &[T],
    with_feedthrough: bool,
) -> Result<Vec<T>> {
    ModalForm::new(ss)?.step_response(modes, input, output, times, with_feedthrough)
}

/// Unit-step response from rest by classical Runge–Kutta with step
/// `1e-3 / max|λ|`, sampled at `times` (non-decreasing, starting at or after 0).
pub fn simulate_step<T: Real>(ss: &StateSpaceModel<T>, input: usize, output: usize, times: &[T]) -> Result<Vec<T>> {
    if output >= ss.n_outputs() || input >= ss.n_inputs() {
        return Err(Error::IndexOutOfRange {
            row: output,
            col: input,
            rows: ss.n_outputs(),
            cols: ss.n_inputs(),
        });
    }
    let n = ss.n_states();
    let d = ss.d[(output, input)];
    let c = ss.c.row(output).transpose();
    if n == 0 {
        return Ok(vec![d; times.len()]);
    }
    let fastest = ss.eigenvalues()?.iter().fold(T::zero(), |m, z| m.max(cabs(*z)));
    let h_max = if fastest > T::zero() { T::lit(1e-3) / fastest } else { T::lit(1e-3) };
    let b = ss.b.column(input).into_owned();
    let f = |x: &DVector<T>| &ss.a * x + &b;
    let mut x = DVector::zeros(n);
    let mut now = T::zero();
    let mut out = Vec::with_capacity(times.len());
    let two = T::lit(2.0);
    let six = T::lit(6.0);
    for &target in times {
        if target < now {
            return Err(Error::InvalidArgument("time grid must be non-decreasing and non-negative".into()));
        }
        let span = target - now;
        let steps = (span / h_max).ceil().to_f64_lossy().max(0.0) as usize;
        if steps > 0 {
            let h = span / T::from_usize_lossy(steps);
            for _ in 0..steps {
                let k1 = f(&x);
                let k2 = f(&(&x + &k1 * (h / two)));
                let k3 = f(&(&x + &k2 * (h / two)));
                let k4 = f(&(&x + &k3 * h));
                x += (k1 + (k2 + k3) * two + k4) * (h / six);
            }
        }
        now = target;
        out.push(c.dot(&x) + d);
    }
    Ok(out)
}

/// One row of a pole comparison; either side may be absent.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleMatch<T: Real> {
    pub reference: Option<Complex<T>>,
    pub candidate: Option<Complex<T>>,
}

impl<T: Real> PoleMatch<T> {
    /// `|candidate − reference| / |reference|` in percent.
    pub fn percent_error(&self) -> Option<T> {
        match (self.reference, self.candidate) {
            (Some(r), Some(c)) if cabs(r) > T::zero() => Some(cabs(c - r) / cabs(r) * T::lit(100.0)),
            (Some(r), Some(c)) => Some(cabs(c - r) * T::lit(100.0)),
            _ => None,
        }
    }
}

fn rel_distance<T: Real>(r: Complex<T>, c: Complex<T>) -> T {
    let d = cabs(c - r);
    if cabs(r) > T::zero() {
        d / cabs(r)
    } else {
        d
    }
}

/// Greedy one-to-one nearest matching: closest pairs first, only pairs within
/// `gate` relative distance. Rows follow `reference` order, then unmatched
/// candidates in their own order.
pub fn compare_poles<T: Real>(reference: &[Complex<T>], candidate: &[Complex<T>], gate: T) -> Vec<PoleMatch<T>> {
    let mut dists: Vec<(T, usize, usize)> = Vec::with_capacity(reference.len() * candidate.len());
    for (i, &r) in reference.iter().enumerate() {
        for (j, &c) in candidate.iter().enumerate() {
            dists.push((rel_distance(r, c), i, j));
        }
    }
    dists.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut ref_to: Vec<Option<usize>> = vec![None; reference.len()];
    let mut used = vec![false; candidate.len()];
    for (d, i, j) in dists {
        if d > gate {
            break;
        }
        if ref_to[i].is_none() && !used[j] {
            ref_to[i] = Some(j);
            used[j] = true;
        }
    }
    let mut rows: Vec<PoleMatch<T>> = reference
        .iter()
        .zip(&ref_to)
        .map(|(&r, m)| PoleMatch {
            reference: Some(r),
            candidate: m.map(|j| candidate[j]),
        })
        .collect();
    rows.extend(candidate.iter().zip(&used).filter(|(_, u)| !**u).map(|(&c, _)| PoleMatch {
        reference: None,
        candidate: Some(c),
    }));
    rows
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x}"))
}

/// `reference_re, reference_im, fitted_re, fitted_im, error_pct, label`;
/// absent values are written as `-`.
pub fn write_pole_comparison_csv<T: Real, W: Write>(rows: &[PoleMatch<T>], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["reference_re", "reference_im", "fitted_re", "fitted_im", "error_pct", "label"])?;
    for row in rows {
        let r = row.reference.map(|z| (z.re.to_f64_lossy(), z.im.to_f64_lossy()));
        let c = row.candidate.map(|z| (z.re.to_f64_lossy(), z.im.to_f64_lossy()));
        let label = row.candidate.or(row.reference).map(classify_state).unwrap_or_default();
        wtr.write_record([
            fmt_opt(r.map(|z| z.0)),
            fmt_opt(r.map(|z| z.1)),
            fmt_opt(c.map(|z| z.0)),
            fmt_opt(c.map(|z| z.1)),
            fmt_opt(row.percent_error().map(|e| e.to_f64_lossy())),
            label,
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// `mode_id, re, im, zeta, f_hz, dominance, label` with 1-based mode ids.
pub fn write_modes_csv<T: Real, W: Write>(report: &ModalReport<T>, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["mode_id", "re", "im", "zeta", "f_hz", "dominance", "label"])?;
    for (j, m) in report.modes.iter().enumerate() {
        wtr.write_record([
            (j + 1).to_string(),
            format!("{}", m.lambda.re.to_f64_lossy()),
            format!("{}", m.lambda.im.to_f64_lossy()),
            format!("{}", m.zeta.to_f64_lossy()),
            format!("{}", m.freq_hz.to_f64_lossy()),
            m.dominance.to_string(),
            m.label.clone(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// `state_label, mode_id, pf_magnitude` for magnitudes strictly above `threshold`.
pub fn write_pf_csv<T: Real, W: Write>(report: &ModalReport<T>, threshold: T, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["state_label", "mode_id", "pf_magnitude"])?;
    let pf = &report.participation;
    for j in 0..pf.n_modes() {
        for k in 0..pf.n_states() {
            let mag = pf.magnitude(k, j);
            if mag > threshold {
                let label = report.state_labels.get(k).cloned().unwrap_or_else(|| format!("x{k}"));
                wtr.write_record([label, (j + 1).to_string(), format!("{}", mag.to_f64_lossy())])?;
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;

    fn m(rows: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(rows, data.len() / rows, data)
    }

    #[test]
    fn diagonal_decomposition() {
        let eig = eigendecompose(&m(2, &[-1.0, 0.0, 0.0, -2.0])).unwrap();
        assert_eq!(eig.values, vec![cplx(-1.0, 0.0), cplx(-2.0, 0.0)]);
        for i in 0..2 {
            for j in 0..2 {
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((eig.right[(i, j)].re.abs() - e).abs() < 1e-14);
            }
        }
        let pf = participation_matrix(&eig.right, &eig.left).unwrap();
        assert!((pf.magnitude(0, 0) - 1.0).abs() < 1e-14);
        assert!(pf.magnitude(1, 0) < 1e-14);
    }

    #[test]
    fn oscillatory_pair() {
        let a = m(2, &[-1.0, 10.0, -10.0, -1.0]);
        let eig = eigendecompose(&a).unwrap();
        assert!((eig.values[0] - cplx(-1.0, 10.0)).norm() < 1e-12);
        assert_eq!(eig.values[1], eig.values[0].conj());
        let ac = a.map(|x| cplx(x, 0.0));
        let res = &ac * &eig.right - &eig.right * DMatrix::from_diagonal(&DVector::from_vec(eig.values.clone()));
        assert!(res.iter().all(|z| z.norm() < 1e-12));
        assert!(!eig.defective);
    }

    #[test]
    fn jordan_block_is_flagged() {
        let eig = eigendecompose(&m(2, &[0.0, 1.0, 0.0, 0.0])).unwrap();
        assert!(eig.defective);
    }

    #[test]
    fn symmetric_coupling_halves() {
        let eig = eigendecompose(&m(2, &[-1.0, 1.0, 1.0, -1.0])).unwrap();
        let pf = participation_matrix(&eig.right, &eig.left).unwrap();
        for j in 0..2 {
            for k in 0..2 {
                assert!((pf.p[(k, j)].re - 0.5).abs() < 1e-14);
                assert!(pf.p[(k, j)].im.abs() < 1e-14);
            }
        }
    }

    #[test]
    fn unnormalized_vectors_rejected() {
        let r = DMatrix::from_element(1, 1, cplx(2.0, 0.0));
        let l = DMatrix::from_element(1, 1, cplx(1.0, 0.0));
        assert!(matches!(participation_matrix(&r, &l), Err(Error::NotNormalized(_))));
    }

    #[test]
    fn dominance_rules() {
        let pf = ParticipationMatrix {
            p: DMatrix::from_row_slice(2, 2, &[cplx(0.5, 0.0), cplx(0.9, 0.0), cplx(0.5, 0.0), cplx(0.1, 0.0)]),
        };
        let d = dominance(&pf, &[0], &[1], 4.0);
        assert_eq!(d, vec![Dominance::Hybrid, Dominance::WhiteBox]);
        let all_white = dominance(&pf, &[0, 1], &[], 4.0);
        assert_eq!(all_white, vec![Dominance::WhiteBox; 2]);
        assert_eq!(dominance(&pf, &[1], &[0], 4.0)[1], Dominance::BlackBox);
    }

    #[test]
    fn labels() {
        assert_eq!(classify_state(cplx(-8.411, 0.0)), "x_n,syn");
        assert_eq!(classify_state(cplx(-406.6, 410.8)), "x_vc/x_sys");
        assert_eq!(classify_state(cplx(-406.6, -410.8)), "x_vc/x_sys");
        assert_eq!(classify_state(cplx(-10189.0, 0.0)), "x_n,il");
        assert_eq!(classify_state(cplx(-500.0, 0.0)), "x_n,vc");
        assert_eq!(classify_state(cplx(-1.0, 0.0)), "x_n,oc");
        assert_eq!(classify_state(cplx(-1.5, 0.0)), "x_n,pc");
        assert_eq!(classify_state(cplx(-1.0, std::f64::consts::TAU)), "x_vc/x_dp/x_vi");
        // 3 kHz matches no band
        assert_eq!(classify_state(cplx(-30.0, 3000.0 * std::f64::consts::TAU)), "x_n,vc");
    }

    #[test]
    fn modal_matrices_for_diagonal() {
        let ss = StateSpaceModel::new(
            m(2, &[-1.0, 0.0, 0.0, -2.0]),
            m(2, &[1.0, 2.0]),
            m(1, &[3.0, 4.0]),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let form = ModalForm::new(&ss).unwrap();
        let cb: Complex<f64> = (0..2).map(|i| form.residue(i, 0, 0).unwrap()).sum();
        assert!((cb - cplx(11.0, 0.0)).norm() < 1e-13);
        assert!(form.residue(2, 0, 0).is_err());
        assert!(form.residue(0, 1, 0).is_err());
    }

    #[test]
    fn symmetric_coupling_modal_matrices() {
        // eigenvectors (1,1)/√2 for −0 and (1,−1)/√2 for −2
        let ss = StateSpaceModel::new(
            m(2, &[-1.0, 1.0, 1.0, -1.0]),
            m(2, &[1.0, 0.0]),
            m(1, &[1.0, 0.0]),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let form = ModalForm::new(&ss).unwrap();
        assert!(form.eig.values[0].norm() < 1e-14);
        for i in 0..2 {
            assert!((form.residue(i, 0, 0).unwrap() - cplx(0.5, 0.0)).norm() < 1e-14);
        }
        assert!(matches!(form.step_response(&[0], 0, 0, &[1.0], false), Err(Error::ZeroEigenvalue(0))));
    }

    #[test]
    fn first_order_step() {
        let ss = StateSpaceModel::new(m(1, &[-1.0]), m(1, &[1.0]), m(1, &[1.0]), DMatrix::zeros(1, 1)).unwrap();
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let y = modal_step_response(&ss, &[0], 0, 0, &times, true).unwrap();
        let sim = simulate_step(&ss, 0, 0, &times).unwrap();
        for ((t, a), b) in times.iter().zip(&y).zip(&sim) {
            let exact = 1.0 - (-t).exp();
            assert!((a - exact).abs() < 1e-14);
            assert!((b - exact).abs() < 1e-12);
        }
        let empty = modal_step_response(&ss, &[], 0, 0, &times, false).unwrap();
        assert!(empty.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn greedy_pole_matching() {
        let truth = [cplx(-8.555, 0.0), cplx(-200.0, 0.0)];
        let fit = [cplx(-8.411, 0.0), cplx(-9774.0, 0.0), cplx(-199.9, 0.0)];
        let rows = compare_poles(&truth, &fit, 0.1);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].candidate, Some(cplx(-8.411, 0.0)));
        assert!((rows[0].percent_error().unwrap() - 1.6832262).abs() < 1e-6);
        assert_eq!(rows[2].reference, None);
        let same = compare_poles(&truth, &truth, 0.1);
        assert!(same.iter().all(|r| r.percent_error() == Some(0.0)));
    }
}
