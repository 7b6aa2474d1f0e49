//! SISO vector fitting: starting poles, one pole-relocation plus residue
//! identification step, RMS error and stability enforcement.
//!
//! The least-squares problems are posed in a real basis: a real pole `p`
//! contributes `1/(s−p)`, a pair `a, ā` contributes
//! `1/(s−a) + 1/(s−ā)` and `j/(s−a) − j/(s−ā)`, so the residues of
//! conjugate poles come out conjugate by construction and `D` is real.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::{cabs, eps, Complex, Real};
use crate::scan_io::SisoResponse;

/// A pole entry: either a real pole or a conjugate pair stored by its
/// upper member `re + j·im`, `im > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pole<T: Real> {
    Real(T),
    Pair { re: T, im: T },
}

impl<T: Real> Pole<T> {
    /// Number of states (and of expanded complex poles) this entry stands for.
    pub fn order(&self) -> usize {
        match self {
            Pole::Real(_) => 1,
            Pole::Pair { .. } => 2,
        }
    }

    /// The upper (or only) member as a complex number.
    pub fn value(&self) -> Complex<T> {
        match *self {
            Pole::Real(p) => Complex::new(p, T::zero()),
            Pole::Pair { re, im } => Complex::new(re, im),
        }
    }

    pub fn re(&self) -> T {
        self.value().re
    }

    fn from_complex(z: Complex<T>) -> Self {
        if z.im == T::zero() {
            Pole::Real(z.re)
        } else {
            Pole::Pair {
                re: z.re,
                im: z.im.abs(),
            }
        }
    }
}

/// Conjugation-closed set of poles, rad/s.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleSet<T: Real> {
    entries: Vec<Pole<T>>,
}

impl<T: Real> PoleSet<T> {
    pub fn new(entries: Vec<Pole<T>>) -> Result<Self> {
        for (k, e) in entries.iter().enumerate() {
            let v = e.value();
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::NonFinite(format!("pole {k}")));
            }
            if let Pole::Pair { im, .. } = e {
                if *im <= T::zero() {
                    return Err(Error::NonPositiveImag(im.to_f64_lossy()));
                }
            }
            if entries[..k].iter().any(|o| o == e) {
                return Err(Error::Duplicate {
                    kind: "pole",
                    name: format!("{}{:+}j", v.re.to_f64_lossy(), v.im.to_f64_lossy()),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    /// Groups an expanded complex list into entries; every non-real pole
    /// must appear together with its exact conjugate.
    pub fn from_complex(poles: &[Complex<T>]) -> Result<Self> {
        let mut used = vec![false; poles.len()];
        let mut entries = Vec::new();
        for k in 0..poles.len() {
            if used[k] {
                continue;
            }
            used[k] = true;
            let z = poles[k];
            if z.im == T::zero() {
                entries.push(Pole::Real(z.re));
                continue;
            }
            let partner = (0..poles.len()).find(|&m| !used[m] && poles[m] == z.conj());
            match partner {
                Some(m) => {
                    used[m] = true;
                    entries.push(Pole::from_complex(z));
                }
                None => {
                    return Err(Error::InvalidArgument(format!(
                        "pole {}{:+}j has no conjugate partner",
                        z.re.to_f64_lossy(),
                        z.im.to_f64_lossy()
                    )))
                }
            }
        }
        Self::new(entries)
    }

    pub fn entries(&self) -> &[Pole<T>] {
        &self.entries
    }

    /// Total number of poles counting both members of each pair.
    pub fn order(&self) -> usize {
        self.entries.iter().map(Pole::order).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every pole as a complex number; pair members adjacent, upper first.
    pub fn expanded(&self) -> Vec<Complex<T>> {
        let mut out = Vec::with_capacity(self.order());
        for e in &self.entries {
            let v = e.value();
            out.push(v);
            if let Pole::Pair { .. } = e {
                out.push(v.conj());
            }
        }
        out
    }

    pub fn is_stable(&self) -> bool {
        self.entries.iter().all(|e| e.re() < T::zero())
    }
}

/// Starting poles spread over `[omega_min, omega_max]` (rad/s): lightly
/// damped pairs `−0.01β ± jβ` with `β` linearly spaced including both
/// endpoints, plus one real pole at the mid-range when `n` is odd.
pub fn initial_poles<T: Real>(n: usize, omega_min: T, omega_max: T) -> Result<PoleSet<T>> {
    if n < 1 {
        return Err(Error::InvalidArgument("initial order must be at least 1".into()));
    }
    if !(omega_min > T::zero()) || !(omega_max > omega_min) || !omega_max.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "frequency range [{}, {}] must satisfy 0 < min < max",
            omega_min.to_f64_lossy(),
            omega_max.to_f64_lossy()
        )));
    }
    let pairs = n / 2;
    let step = (omega_max - omega_min) / T::from_usize_lossy(pairs.saturating_sub(1).max(1));
    let mut entries = Vec::with_capacity(pairs + 1);
    for k in 0..pairs {
        let beta = omega_min + step * T::from_usize_lossy(k);
        entries.push(Pole::Pair {
            re: -T::lit(1e-2) * beta,
            im: beta,
        });
    }
    if n % 2 == 1 {
        entries.push(Pole::Real(-(omega_min + omega_max) / T::lit(2.0)));
    }
    PoleSet::new(entries)
}

/// Pole-residue model `Σ C_n/(s − p_n) + D`; the `sE` term is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalModel<T: Real> {
    poles: PoleSet<T>,
    /// One residue per pole entry; for a pair, the residue of the upper member.
    residues: Vec<Complex<T>>,
    d: T,
}

impl<T: Real> RationalModel<T> {
    pub fn new(poles: PoleSet<T>, residues: Vec<Complex<T>>, d: T) -> Result<Self> {
        if residues.len() != poles.entries().len() {
            return Err(Error::Dimension(format!(
                "{} residues for {} pole entries",
                residues.len(),
                poles.entries().len()
            )));
        }
        let mut residues = residues;
        for (p, r) in poles.entries().iter().zip(residues.iter_mut()) {
            if let Pole::Real(_) = p {
                if r.im.abs() > T::lit(1e-12) {
                    return Err(Error::ComplexResidueOnRealPole {
                        re: r.re.to_f64_lossy(),
                        im: r.im.to_f64_lossy(),
                    });
                }
                r.im = T::zero();
            }
        }
        Ok(Self { poles, residues, d })
    }

    /// Constant `D` only.
    pub fn constant(d: T) -> Self {
        Self {
            poles: PoleSet::empty(),
            residues: Vec::new(),
            d,
        }
    }

    pub fn poles(&self) -> &PoleSet<T> {
        &self.poles
    }

    pub fn residues(&self) -> &[Complex<T>] {
        &self.residues
    }

    /// Residues aligned with [`PoleSet::expanded`].
    pub fn expanded_residues(&self) -> Vec<Complex<T>> {
        let mut out = Vec::with_capacity(self.poles.order());
        for (p, r) in self.poles.entries().iter().zip(&self.residues) {
            out.push(*r);
            if let Pole::Pair { .. } = p {
                out.push(r.conj());
            }
        }
        out
    }

    pub fn d_term(&self) -> T {
        self.d
    }

    /// High-frequency proportional term; structurally zero.
    pub fn e_term(&self) -> T {
        T::zero()
    }

    pub fn order(&self) -> usize {
        self.poles.order()
    }

    pub fn eval(&self, s: Complex<T>) -> Complex<T> {
        let mut acc = Complex::new(self.d, T::zero());
        for (p, r) in self.poles.entries().iter().zip(&self.residues) {
            let a = p.value();
            acc += *r / (s - a);
            if let Pole::Pair { .. } = p {
                acc += r.conj() / (s - a.conj());
            }
        }
        acc
    }
}

/// Reflects right-half-plane poles; poles on the imaginary axis move to
/// `−|10⁻⁶·Im p|` (a real pole at the origin moves to `−10⁻⁶`).
pub fn enforce_stability<T: Real>(poles: &PoleSet<T>) -> PoleSet<T> {
    let tiny = T::lit(1e-6);
    let entries = poles
        .entries()
        .iter()
        .map(|p| match *p {
            Pole::Real(x) if x > T::zero() => Pole::Real(-x),
            Pole::Real(x) if x == T::zero() => Pole::Real(-tiny),
            Pole::Pair { re, im } if re > T::zero() => Pole::Pair { re: -re, im },
            Pole::Pair { re, im } if re == T::zero() => Pole::Pair { re: -tiny * im, im },
            other => other,
        })
        .collect();
    dedup(entries)
}

/// Nudges exact duplicates apart (by 0.1% of the imaginary part for a pair,
/// of the magnitude for a real pole) so the set invariant holds.
fn dedup<T: Real>(mut entries: Vec<Pole<T>>) -> PoleSet<T> {
    let bump = T::lit(1.001);
    for k in 0..entries.len() {
        while entries[..k].contains(&entries[k]) {
            entries[k] = match entries[k] {
                Pole::Real(x) => Pole::Real(if x == T::zero() { -T::lit(1e-6) } else { x * bump }),
                Pole::Pair { re, im } => Pole::Pair { re, im: im * bump },
            };
        }
    }
    PoleSet { entries }
}

/// Real-basis columns for every pole entry evaluated at every sample.
fn basis<T: Real>(response: &SisoResponse<T>, poles: &PoleSet<T>) -> Vec<Vec<Complex<T>>> {
    let j = Complex::new(T::zero(), T::one());
    let mut cols = Vec::with_capacity(poles.order());
    for p in poles.entries() {
        let a = p.value();
        match p {
            Pole::Real(_) => cols.push((0..response.len()).map(|k| (response.s(k) - a).inv()).collect()),
            Pole::Pair { .. } => {
                let (mut c1, mut c2) = (Vec::with_capacity(response.len()), Vec::with_capacity(response.len()));
                for k in 0..response.len() {
                    let s = response.s(k);
                    let u = (s - a).inv();
                    let v = (s - a.conj()).inv();
                    c1.push(u + v);
                    c2.push(j * u - j * v);
                }
                cols.push(c1);
                cols.push(c2);
            }
        }
    }
    cols
}

/// Stacks complex rows `[Re; Im]` into a real system, weighting sample `k` by `w[k]`.
fn stack<T: Real>(columns: &[Vec<Complex<T>>], rhs: &[Complex<T>], w: &[T]) -> (DMatrix<T>, DVector<T>) {
    let k = rhs.len();
    let mut a = DMatrix::<T>::zeros(2 * k, columns.len());
    let mut b = DVector::<T>::zeros(2 * k);
    for (c, col) in columns.iter().enumerate() {
        for r in 0..k {
            a[(r, c)] = w[r] * col[r].re;
            a[(k + r, c)] = w[r] * col[r].im;
        }
    }
    for r in 0..k {
        b[r] = w[r] * rhs[r].re;
        b[k + r] = w[r] * rhs[r].im;
    }
    (a, b)
}

fn lstsq_rcond<T: Real>() -> T {
    T::lit(1e3) * eps::<T>()
}

/// Residues and `D` for fixed poles by linear least squares.
pub fn fit_residues<T: Real>(
    response: &SisoResponse<T>,
    poles: &PoleSet<T>,
    weights: Option<&[T]>,
) -> Result<RationalModel<T>> {
    let unit;
    let w = match weights {
        Some(w) => w,
        None => {
            unit = vec![T::one(); response.len()];
            &unit
        }
    };
    let mut cols = basis(response, poles);
    cols.push(vec![Complex::new(T::one(), T::zero()); response.len()]);
    let (a, b) = stack(&cols, response.values(), w);
    let sol = linalg::lstsq(&a, &b, lstsq_rcond())?;
    if sol.rank < sol.active {
        return Err(Error::RankDeficient {
            rank: sol.rank,
            unknowns: sol.active,
            condition: sol.condition,
        });
    }
    let x = sol.x;
    let mut residues = Vec::with_capacity(poles.entries().len());
    let mut idx = 0;
    for p in poles.entries() {
        match p {
            Pole::Real(_) => {
                residues.push(Complex::new(x[idx], T::zero()));
                idx += 1;
            }
            Pole::Pair { .. } => {
                residues.push(Complex::new(x[idx], x[idx + 1]));
                idx += 2;
            }
        }
    }
    RationalModel::new(poles.clone(), residues, x[idx])
}

fn check_weights<T: Real>(weights: Option<&[T]>, len: usize) -> Result<()> {
    if let Some(w) = weights {
        if w.len() != len {
            return Err(Error::Dimension(format!("{} weights for {len} samples", w.len())));
        }
        if w.iter().any(|&x| !(x > T::zero()) || !x.is_finite()) {
            return Err(Error::InvalidArgument("weights must be positive and finite".into()));
        }
    }
    Ok(())
}

/// One vector-fitting step: relocate the poles to the zeros of the scaling
/// function, reflect any unstable ones, then identify residues and `D`
/// against the relocated set.
pub fn vf_iteration<T: Real>(
    response: &SisoResponse<T>,
    poles: &PoleSet<T>,
    weights: Option<&[T]>,
) -> Result<(PoleSet<T>, RationalModel<T>)> {
    if response.is_empty() {
        return Err(Error::EmptyResponse);
    }
    let n = poles.order();
    let unknowns = 2 * n + 1;
    if response.len() < unknowns {
        return Err(Error::TooFewSamples {
            samples: response.len(),
            unknowns,
        });
    }
    check_weights(weights, response.len())?;
    let unit;
    let w = match weights {
        Some(w) => w,
        None => {
            unit = vec![T::one(); response.len()];
            &unit
        }
    };
    let poles = enforce_stability(poles);

    // [Φ, 1, −f·Φ] [c; d; c̃] = f
    let phi = basis(response, &poles);
    let f = response.values();
    let mut cols = phi.clone();
    cols.push(vec![Complex::new(T::one(), T::zero()); response.len()]);
    for col in &phi {
        cols.push(col.iter().zip(f).map(|(&p, &fk)| -(fk * p)).collect());
    }
    let (a, b) = stack(&cols, f, w);
    let sol = linalg::lstsq(&a, &b, lstsq_rcond())?;
    let sigma_res = sol.x.rows(n + 1, n).into_owned();

    // zeros of σ(s) = 1 + Σ c̃ φ: eig(A_σ − b_σ c̃ᵀ)
    let mut a_sigma = DMatrix::<T>::zeros(n, n);
    let mut b_sigma = DVector::<T>::zeros(n);
    let mut idx = 0;
    for p in poles.entries() {
        match *p {
            Pole::Real(x) => {
                a_sigma[(idx, idx)] = x;
                b_sigma[idx] = T::one();
                idx += 1;
            }
            Pole::Pair { re, im } => {
                a_sigma[(idx, idx)] = re;
                a_sigma[(idx, idx + 1)] = im;
                a_sigma[(idx + 1, idx)] = -im;
                a_sigma[(idx + 1, idx + 1)] = re;
                b_sigma[idx] = T::lit(2.0);
                idx += 2;
            }
        }
    }
    let h = a_sigma - &b_sigma * sigma_res.transpose();
    linalg::check_finite(&h, "scaling-function matrix")?;
    let zeros = linalg::eigenvalues(&h)?;
    let mut entries = Vec::with_capacity(poles.entries().len());
    let mut k = 0;
    while k < zeros.len() {
        let z = zeros[k];
        if z.im == T::zero() {
            entries.push(Pole::Real(z.re));
            k += 1;
        } else {
            entries.push(Pole::from_complex(z));
            k += 2;
        }
    }
    let relocated = enforce_stability(&dedup(entries));
    let fitted = fit_residues(response, &relocated, weights)?;
    Ok((relocated, fitted))
}

/// `sqrt(mean |T(s_k) − T̂(s_k)|²)`.
pub fn rms_error<T: Real>(response: &SisoResponse<T>, model: &RationalModel<T>) -> T {
    if response.is_empty() {
        return T::zero();
    }
    let sum = (0..response.len()).fold(T::zero(), |acc, k| {
        acc + (response.values()[k] - model.eval(response.s(k))).norm_sqr()
    });
    (sum / T::from_usize_lossy(response.len())).sqrt()
}

/// Largest relative displacement between two pole sets of equal order,
/// pairing poles after sorting by imaginary then real part.
pub fn pole_movement<T: Real>(old: &PoleSet<T>, new: &PoleSet<T>) -> T {
    if old.order() != new.order() {
        return T::max_value().unwrap_or(T::one());
    }
    let key = |v: &mut Vec<Complex<T>>| {
        v.sort_by(|a, b| {
            a.im.partial_cmp(&b.im)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.re.partial_cmp(&b.re).unwrap_or(std::cmp::Ordering::Equal))
        })
    };
    let (mut a, mut b) = (old.expanded(), new.expanded());
    key(&mut a);
    key(&mut b);
    a.iter().zip(&b).fold(T::zero(), |m, (&x, &y)| {
        let scale = cabs(x).max(eps::<T>());
        m.max(cabs(x - y) / scale)
    })
}

/// Per-sample weights `1/|T(s_k)|`, floored to avoid division by zero.
pub fn inverse_magnitude_weights<T: Real>(response: &SisoResponse<T>) -> Vec<T> {
    let peak = response.values().iter().fold(T::zero(), |m, v| m.max(cabs(*v)));
    let floor = (peak * T::lit(1e-8)).max(eps::<T>());
    response.values().iter().map(|v| T::one() / cabs(*v).max(floor)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;

    fn response_from(f: impl Fn(Complex<f64>) -> Complex<f64>, n: usize, wmax: f64) -> SisoResponse<f64> {
        let omega: Vec<f64> = (0..n).map(|k| 0.5 + wmax * k as f64 / (n - 1) as f64).collect();
        let values = omega.iter().map(|&w| f(cplx(0.0, w))).collect();
        SisoResponse::new(omega, values).unwrap()
    }

    #[test]
    fn initial_poles_single_pair_sits_at_min() {
        let p = initial_poles(2, 50.0, 100.0).unwrap();
        assert_eq!(p.expanded(), vec![cplx(-0.5, 50.0), cplx(-0.5, -50.0)]);
    }

    #[test]
    fn initial_poles_endpoints() {
        let p = initial_poles(4, 10.0, 1000.0).unwrap();
        assert_eq!(
            p.expanded(),
            vec![cplx(-0.1, 10.0), cplx(-0.1, -10.0), cplx(-10.0, 1000.0), cplx(-10.0, -1000.0)]
        );
    }

    #[test]
    fn initial_poles_odd_adds_midrange_real() {
        let p = initial_poles(3, 10.0, 30.0).unwrap();
        assert_eq!(p.order(), 3);
        assert_eq!(p.entries()[1], Pole::Real(-20.0));
    }

    #[test]
    fn initial_poles_rejects_bad_input() {
        assert!(initial_poles(2, 100.0, 100.0).is_err());
        assert!(initial_poles(0, 1.0, 100.0).is_err());
        assert!(initial_poles(2, 0.0, 100.0).is_err());
    }

    #[test]
    fn single_real_pole_recovery() {
        let resp = response_from(|s| cplx(2.0, 0.0) / (s + 5.0), 50, 100.0);
        let mut poles = PoleSet::new(vec![Pole::Real(-3.0)]).unwrap();
        let mut model = None;
        for _ in 0..2 {
            let (p, m) = vf_iteration(&resp, &poles, None).unwrap();
            poles = p;
            model = Some(m);
        }
        let m = model.unwrap();
        let p = poles.entries()[0].value();
        assert!((p - cplx(-5.0, 0.0)).norm() / 5.0 < 1e-8, "{p}");
        assert!((m.residues()[0] - cplx(2.0, 0.0)).norm() / 2.0 < 1e-8);
        assert!(m.d_term().abs() < 1e-8);
    }

    #[test]
    fn zero_response_gives_zero_model() {
        let resp = response_from(|_| cplx(0.0, 0.0), 30, 100.0);
        let poles = initial_poles(4, 1.0, 100.0).unwrap();
        let (relocated, m) = vf_iteration(&resp, &poles, None).unwrap();
        assert!(pole_movement(&poles, &relocated) < 1e-12);
        assert!(m.residues().iter().all(|r| r.norm() == 0.0));
        assert_eq!(m.d_term(), 0.0);
    }

    #[test]
    fn unstable_pole_is_reflected() {
        let resp = response_from(|s| cplx(1.0, 0.0) / (s - 5.0), 50, 100.0);
        let poles = PoleSet::new(vec![Pole::Real(-3.0)]).unwrap();
        let (relocated, _) = vf_iteration(&resp, &poles, None).unwrap();
        let p = relocated.entries()[0].value();
        assert!((p - cplx(-5.0, 0.0)).norm() < 1e-8, "{p}");
    }

    #[test]
    fn too_few_samples() {
        let resp = response_from(|s| s.inv(), 4, 10.0);
        let poles = initial_poles(2, 1.0, 10.0).unwrap();
        assert!(matches!(vf_iteration(&resp, &poles, None), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn empty_response() {
        let resp = SisoResponse::<f64>::new(vec![], vec![]).unwrap();
        let poles = initial_poles(2, 1.0, 10.0).unwrap();
        assert!(matches!(vf_iteration(&resp, &poles, None), Err(Error::EmptyResponse)));
    }

    #[test]
    fn rms_examples() {
        let resp = response_from(|_| cplx(1.0, 0.0), 7, 10.0);
        assert_eq!(rms_error(&resp, &RationalModel::constant(0.0)), 1.0);
        assert_eq!(rms_error(&resp, &RationalModel::constant(1.0)), 0.0);

        let two = SisoResponse::new(vec![1.0, 2.0], vec![cplx(3.0, 0.0), cplx(0.0, 4.0)]).unwrap();
        let r = rms_error(&two, &RationalModel::constant(0.0));
        assert!((r - 5.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn stability_enforcement_examples() {
        let stable = PoleSet::from_complex(&[cplx(-1.0, 5.0), cplx(-1.0, -5.0)]).unwrap();
        assert_eq!(enforce_stability(&stable), stable);
        let unstable = PoleSet::from_complex(&[cplx(2.0, 10.0), cplx(2.0, -10.0)]).unwrap();
        assert_eq!(enforce_stability(&unstable).expanded(), vec![cplx(-2.0, 10.0), cplx(-2.0, -10.0)]);
        let marginal = PoleSet::from_complex(&[cplx(0.0, 7.0), cplx(0.0, -7.0)]).unwrap();
        assert_eq!(enforce_stability(&marginal).expanded(), vec![cplx(-7e-6, 7.0), cplx(-7e-6, -7.0)]);
    }

    #[test]
    fn pole_set_rejects_unpaired_and_duplicates() {
        assert!(PoleSet::from_complex(&[cplx(-1.0, 2.0)]).is_err());
        assert!(PoleSet::new(vec![Pole::Real(-1.0), Pole::Real(-1.0)]).is_err());
    }

    #[test]
    fn real_pole_with_complex_residue_rejected() {
        let p = PoleSet::new(vec![Pole::Real(-1.0)]).unwrap();
        assert!(RationalModel::new(p, vec![cplx(1.0, 0.5)], 0.0).is_err());
    }
}
