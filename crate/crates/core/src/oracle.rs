//! Seeded synthetic plants with known poles, and their sampled frequency
//! responses, used as ground truth for every stage of the pipeline.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::realization::{ModelMeta, StateSpaceModel};
use crate::scalar::{cabs, jw, Complex, Real};
use crate::scan_io::FrequencyScan;

/// Real parts of generated poles lie in `[-MAX_DECAY, -MIN_DECAY]`.
pub const MAX_DECAY: f64 = 1e4;
pub const MIN_DECAY: f64 = 0.1;
/// Minimum relative distance between any two generated poles.
pub const MIN_SEPARATION: f64 = 0.25;
/// Input/output weights are Gaussian but redrawn while smaller than this.
pub const MIN_WEIGHT: f64 = 0.3;

const TABLE4_SEED: u64 = 0x7AB1E4;
const NOISE_STREAM: u64 = 0x5EED_0001;

#[derive(Debug, Clone)]
pub struct SyntheticPlant<T: Real> {
    pub truth: StateSpaceModel<T>,
    /// Conjugate pairs adjacent, positive imaginary part first.
    pub truth_poles: Vec<Complex<T>>,
    pub seed: u64,
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn weight(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let x: f64 = rng.sample(StandardNormal);
        if x.abs() >= MIN_WEIGHT {
            return x;
        }
    }
}

fn well_separated(candidate: Complex<f64>, taken: &[Complex<f64>]) -> bool {
    taken.iter().all(|&p| {
        let scale = cabs(p).max(cabs(candidate));
        cabs(p - candidate) >= MIN_SEPARATION * scale && cabs(p.conj() - candidate) >= MIN_SEPARATION * scale
    })
}

/// Modal real realization of the given upper-half-plane poles.
/// `b_rows[k]`/`c_cols[k]` hold one row of `B` / column of `C` per state.
fn modal_model<T: Real>(
    poles: &[Complex<f64>],
    b_rows: &[Vec<f64>],
    c_cols: &[Vec<f64>],
    n_in: usize,
    n_out: usize,
) -> Result<StateSpaceModel<T>> {
    let n = b_rows.len();
    let mut a = DMatrix::zeros(n, n);
    let mut labels = Vec::with_capacity(n);
    let mut k = 0;
    for (i, p) in poles.iter().enumerate() {
        if p.im == 0.0 {
            a[(k, k)] = T::lit(p.re);
            labels.push(format!("m{i}"));
            k += 1;
        } else {
            a[(k, k)] = T::lit(p.re);
            a[(k + 1, k + 1)] = T::lit(p.re);
            a[(k, k + 1)] = T::lit(p.im);
            a[(k + 1, k)] = T::lit(-p.im);
            labels.push(format!("m{i}a"));
            labels.push(format!("m{i}b"));
            k += 2;
        }
    }
    let b = DMatrix::from_fn(n, n_in, |r, c| T::lit(b_rows[r][c]));
    let c = DMatrix::from_fn(n_out, n, |r, col| T::lit(c_cols[col][r]));
    StateSpaceModel::new(a, b, c, DMatrix::zeros(n_out, n_in))?.with_state_labels(labels)
}

fn expand(poles: &[Complex<f64>]) -> Vec<Complex<f64>> {
    let mut out = Vec::new();
    for &p in poles {
        out.push(p);
        if p.im != 0.0 {
            out.push(p.conj());
        }
    }
    out
}

/// Random strictly stable `n_out × n_in` plant of the given order.
///
/// Pairs: between one and `order/2` of them (at least one once `order ≥ 2`),
/// imaginary part log-uniform over `omega_range` (rad/s) and damping ratio
/// uniform in `[0.05, 0.6]`. Real poles: magnitude log-uniform over the
/// same range. Real parts are clamped to `[-1e4, -0.1]` and poles are kept
/// 25% apart. `B` and `C` entries are standard normal redrawn below 0.3 in
/// magnitude; each state's `B` row is scaled by its pole magnitude so every
/// mode contributes an O(1) peak, and the whole `B` by `1/√order`. `D = 0`.
pub fn random_stable_system<T: Real>(
    order: usize,
    n_in: usize,
    n_out: usize,
    seed: u64,
    omega_range: (f64, f64),
) -> Result<SyntheticPlant<T>> {
    if order == 0 || n_in == 0 || n_out == 0 {
        return Err(Error::InvalidArgument("order, inputs and outputs must be positive".into()));
    }
    let (wmin, wmax) = omega_range;
    if !(wmin > 0.0 && wmax >= wmin && wmax.is_finite()) {
        return Err(Error::InvalidArgument(format!("invalid frequency range ({wmin}, {wmax})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_pairs = if order >= 2 { rng.random_range(1..=order / 2) } else { 0 };
    let n_real = order - 2 * n_pairs;

    let mut poles: Vec<Complex<f64>> = Vec::with_capacity(n_pairs + n_real);
    let draw = |rng: &mut ChaCha8Rng, pair: bool, taken: &[Complex<f64>]| {
        let mut last = Complex::new(-wmin.max(MIN_DECAY), 0.0);
        for _ in 0..1000 {
            let cand = if pair {
                let beta = log_uniform(rng, wmin, wmax);
                let zeta = rng.random_range(0.05..=0.6);
                let alpha = (-zeta * beta / (1.0 - zeta * zeta).sqrt()).clamp(-MAX_DECAY, -MIN_DECAY);
                Complex::new(alpha, beta)
            } else {
                let mag = log_uniform(rng, wmin, wmax).clamp(MIN_DECAY, MAX_DECAY);
                Complex::new(-mag, 0.0)
            };
            last = cand;
            if well_separated(cand, taken) {
                break;
            }
        }
        last
    };
    for _ in 0..n_pairs {
        let p = draw(&mut rng, true, &poles);
        poles.push(p);
    }
    for _ in 0..n_real {
        let p = draw(&mut rng, false, &poles);
        poles.push(p);
    }

    let norm = 1.0 / (order as f64).sqrt();
    let mut b_rows = Vec::with_capacity(order);
    let mut c_cols = Vec::with_capacity(order);
    for p in &poles {
        let states = if p.im == 0.0 { 1 } else { 2 };
        for _ in 0..states {
            b_rows.push((0..n_in).map(|_| weight(&mut rng) * cabs(*p) * norm).collect());
            c_cols.push((0..n_out).map(|_| weight(&mut rng)).collect());
        }
    }
    let mut truth = modal_model::<T>(&poles, &b_rows, &c_cols, n_in, n_out)?;
    truth.meta = ModelMeta {
        origin: Some(format!("oracle seed {seed}")),
        ..ModelMeta::default()
    };
    Ok(SyntheticPlant {
        truth,
        truth_poles: expand(&poles).into_iter().map(|z| Complex::new(T::lit(z.re), T::lit(z.im))).collect(),
        seed,
    })
}

/// Samples `G(j2πf)` at `freq_hz`, each value multiplied by `1 + ε` with `ε`
/// circular complex Gaussian of RMS magnitude `noise_rel`. The noise stream
/// is derived from the plant seed.
pub fn sample_response<T: Real>(plant: &SyntheticPlant<T>, freq_hz: &[T], noise_rel: T) -> Result<FrequencyScan<T>> {
    let ss = &plant.truth;
    let mut rng = ChaCha8Rng::seed_from_u64(plant.seed ^ NOISE_STREAM);
    let mut entries = vec![vec![Vec::with_capacity(freq_hz.len()); ss.n_inputs()]; ss.n_outputs()];
    let half = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    for &f in freq_hz {
        let g = ss.eval_tf(jw(f * T::two_pi()))?;
        for (o, row) in entries.iter_mut().enumerate() {
            for (i, cell) in row.iter_mut().enumerate() {
                let mut v = g[(o, i)];
                if noise_rel > T::zero() {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    let eps = Complex::new(T::lit(re), T::lit(im)).scale(noise_rel * half);
                    v *= Complex::new(T::one(), T::zero()) + eps;
                }
                cell.push(v);
            }
        }
    }
    FrequencyScan::from_hz(freq_hz.to_vec(), entries, None, None)
}

/// Theoretical poles of the 10th-order converter study, rad/s.
pub const TABLE4_POLES: [(f64, f64); 10] = [
    (-8.555, 0.0),
    (-8.655, 0.0),
    (-199.9, 0.0),
    (-200.0, 0.0),
    (-251.3, 0.0),
    (-251.3, 0.0),
    (-406.5, 407.1),
    (-406.5, -407.1),
    (-9774.0, 0.0),
    (-10000.0, 0.0),
];

/// Modes of [`TABLE4_POLES`] given a residue 1e-4 times smaller than the
/// rest, so they barely show in the response.
pub const TABLE4_WEAK: [f64; 1] = [-251.3];

/// SISO plant with the poles of [`TABLE4_POLES`]. Residues are
/// `g·|λ|` with `g` drawn from a fixed seed as in [`random_stable_system`];
/// the double mode at −251.3 rad/s is weakened by 1e-4.
pub fn table4_plant<T: Real>() -> Result<SyntheticPlant<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(TABLE4_SEED);
    let uppers: Vec<Complex<f64>> = TABLE4_POLES
        .iter()
        .filter(|(_, im)| *im >= 0.0)
        .map(|&(re, im)| Complex::new(re, im))
        .collect();
    let mut b_rows = Vec::new();
    let mut c_cols = Vec::new();
    for p in &uppers {
        let states = if p.im == 0.0 { 1 } else { 2 };
        let damp = if TABLE4_WEAK.contains(&p.re) { 1e-4 } else { 1.0 };
        for _ in 0..states {
            b_rows.push(vec![weight(&mut rng) * cabs(*p) * damp]);
            c_cols.push(vec![1.0]);
        }
    }
    let mut truth = modal_model::<T>(&uppers, &b_rows, &c_cols, 1, 1)?;
    truth.meta = ModelMeta {
        origin: Some("table4 plant".into()),
        ..ModelMeta::default()
    };
    Ok(SyntheticPlant {
        truth,
        truth_poles: expand(&uppers).into_iter().map(|z| Complex::new(T::lit(z.re), T::lit(z.im))).collect(),
        seed: TABLE4_SEED,
    })
}

/// `n` points from `f0` to `f1` inclusive, evenly spaced.
pub fn linear_grid<T: Real>(f0: f64, f1: f64, n: usize) -> Vec<T> {
    match n {
        0 => Vec::new(),
        1 => vec![T::lit(f0)],
        _ => (0..n).map(|k| T::lit(f0 + (f1 - f0) * k as f64 / (n - 1) as f64)).collect(),
    }
}

/// `n` points from `f0` to `f1` inclusive, evenly spaced in log scale.
pub fn log_grid<T: Real>(f0: f64, f1: f64, n: usize) -> Vec<T> {
    let (l0, l1) = (f0.log10(), f1.log10());
    match n {
        0 => Vec::new(),
        1 => vec![T::lit(f0)],
        _ => (0..n)
            .map(|k| T::lit(10f64.powf(l0 + (l1 - l0) * k as f64 / (n - 1) as f64)))
            .collect(),
    }
}
