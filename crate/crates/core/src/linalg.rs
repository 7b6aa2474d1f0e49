//! Dense linear-algebra kernels the public modules build on: real-to-complex
//! Schur conversion, triangular eigenvectors, Bartels–Stewart Lyapunov
//! solves and column-scaled least squares.

use nalgebra::{ComplexField, DMatrix, DVector, Schur};

use crate::error::{Error, Result};
use crate::scalar::{cabs, eps, Complex, Real};

const SCHUR_MAX_ITER: usize = 10_000;

pub(crate) fn check_finite<T: Real>(m: &DMatrix<T>, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

/// Real Schur form `A = Q T Qᵀ`.
pub(crate) fn real_schur<T: Real>(a: &DMatrix<T>) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)));
    }
    let schur = Schur::try_new(a.clone(), eps::<T>(), SCHUR_MAX_ITER).ok_or(Error::NoConvergence)?;
    Ok(schur.unpack())
}

fn is_block_start<T: Real>(t: &DMatrix<T>, m: usize) -> bool {
    // subdiagonal entry t[m, m-1] couples rows m-1 and m
    let sub = t[(m, m - 1)].abs();
    sub > eps::<T>() * (t[(m - 1, m - 1)].abs() + t[(m, m)].abs()) && sub != T::zero()
}

fn eig2x2<T: Real>(a: Complex<T>, b: Complex<T>, c: Complex<T>, d: Complex<T>) -> (Complex<T>, Complex<T>) {
    let two = T::lit(2.0);
    let half_tr = (a + d).unscale(two);
    let det = a * d - b * c;
    let disc = (half_tr * half_tr - det).sqrt();
    (half_tr + disc, half_tr - disc)
}

/// Complex Schur form `A = U T Uᴴ` with `T` upper triangular, obtained by
/// rotating away each 2×2 block of the real Schur form.
///
/// Returns `(U, T, pair_blocks)` where `pair_blocks` lists the leading
/// indices of the split blocks whose eigenvalues form a conjugate pair.
pub(crate) fn complex_schur<T: Real>(
    a: &DMatrix<T>,
) -> Result<(DMatrix<Complex<T>>, DMatrix<Complex<T>>, Vec<usize>)> {
    let n = a.nrows();
    let (q, t) = real_schur(a)?;
    let mut blocks = Vec::new();
    let mut m = n;
    while m > 1 {
        let k = m - 1;
        if is_block_start(&t, k) {
            blocks.push(k - 1);
            m -= 2;
        } else {
            m -= 1;
        }
    }
    let mut tc: DMatrix<Complex<T>> = t.map(|x| Complex::new(x, T::zero()));
    let mut uc: DMatrix<Complex<T>> = q.map(|x| Complex::new(x, T::zero()));
    let mut pairs = Vec::new();
    for &k0 in &blocks {
        let k1 = k0 + 1;
        let (e1, e2) = eig2x2(tc[(k0, k0)], tc[(k0, k1)], tc[(k1, k0)], tc[(k1, k1)]);
        if e1.im != T::zero() || e2.im != T::zero() {
            pairs.push(k0);
        }
        let mu = e1 - tc[(k1, k1)];
        let sub = tc[(k1, k0)];
        let r = (mu.norm_sqr() + sub.norm_sqr()).sqrt();
        let c = mu.unscale(r);
        let s = sub.unscale(r);
        // G = [[c̄, s̄], [−s, c]]
        let g00 = c.conj();
        let g01 = s.conj();
        let g10 = -s;
        let g11 = c;
        for col in k0..n {
            let x = tc[(k0, col)];
            let y = tc[(k1, col)];
            tc[(k0, col)] = g00 * x + g01 * y;
            tc[(k1, col)] = g10 * x + g11 * y;
        }
        // right-multiply by Gᴴ = [[c, −s̄], [s, c̄]]
        for row in 0..=k1 {
            let x = tc[(row, k0)];
            let y = tc[(row, k1)];
            tc[(row, k0)] = x * c + y * s;
            tc[(row, k1)] = -(x * s.conj()) + y * c.conj();
        }
        for row in 0..n {
            let x = uc[(row, k0)];
            let y = uc[(row, k1)];
            uc[(row, k0)] = x * c + y * s;
            uc[(row, k1)] = -(x * s.conj()) + y * c.conj();
        }
        tc[(k1, k0)] = Complex::new(T::zero(), T::zero());
    }
    pairs.sort_unstable();
    Ok((uc, tc, pairs))
}

/// Eigenvector of the upper-triangular `t` for its `k`-th diagonal entry.
pub(crate) fn triangular_eigvec<T: Real>(t: &DMatrix<Complex<T>>, k: usize, smin: T) -> DVector<Complex<T>> {
    let n = t.nrows();
    let lambda = t[(k, k)];
    let mut v = DVector::from_element(n, Complex::new(T::zero(), T::zero()));
    v[k] = Complex::new(T::one(), T::zero());
    for i in (0..k).rev() {
        let mut sum = Complex::new(T::zero(), T::zero());
        for m in (i + 1)..=k {
            sum += t[(i, m)] * v[m];
        }
        let mut den = t[(i, i)] - lambda;
        if cabs(den) < smin {
            den = Complex::new(smin, T::zero());
        }
        v[i] = -(sum / den);
    }
    v
}

/// Solves `A X + X Aᵀ = Q` by the Bartels–Stewart method on the real Schur form.
pub(crate) fn lyapunov<T: Real>(a: &DMatrix<T>, q: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let (u, t) = real_schur(a)?;
    let f = u.transpose() * q * &u;
    let mut y = DMatrix::<T>::zeros(n, n);
    let ident = DMatrix::<T>::identity(n, n);
    let mut worst_pivot = T::max_value().unwrap_or(T::one());
    let scale = t.norm();

    let mut j = n;
    while j > 0 {
        let jj = j - 1;
        let is_pair = jj > 0 && is_block_start(&t, jj);
        let first = if is_pair { jj - 1 } else { jj };
        // right-hand sides for the columns of this block
        let mut rhs: Vec<DVector<T>> = Vec::new();
        for col in first..=jj {
            let mut r = f.column(col).into_owned();
            for k in (jj + 1)..n {
                let coeff = t[(col, k)];
                if coeff != T::zero() {
                    r -= y.column(k) * coeff;
                }
            }
            rhs.push(r);
        }
        if !is_pair {
            let m = &t + &ident * t[(jj, jj)];
            let diag_sum = (t[(jj, jj)] + t[(jj, jj)]).abs();
            worst_pivot = worst_pivot.min(diag_sum);
            let sol = m.lu().solve(&rhs[0]).ok_or(Error::IllConditionedLyapunov {
                condition: f64::INFINITY,
            })?;
            y.set_column(jj, &sol);
        } else {
            let k0 = first;
            let k1 = jj;
            let mut big = DMatrix::<T>::zeros(2 * n, 2 * n);
            big.view_mut((0, 0), (n, n)).copy_from(&(&t + &ident * t[(k0, k0)]));
            big.view_mut((0, n), (n, n)).copy_from(&(&ident * t[(k0, k1)]));
            big.view_mut((n, 0), (n, n)).copy_from(&(&ident * t[(k1, k0)]));
            big.view_mut((n, n), (n, n)).copy_from(&(&t + &ident * t[(k1, k1)]));
            let mut b = DVector::<T>::zeros(2 * n);
            b.rows_mut(0, n).copy_from(&rhs[0]);
            b.rows_mut(n, n).copy_from(&rhs[1]);
            worst_pivot = worst_pivot.min((t[(k0, k0)] + t[(k1, k1)]).abs());
            let sol = big.lu().solve(&b).ok_or(Error::IllConditionedLyapunov {
                condition: f64::INFINITY,
            })?;
            y.set_column(k0, &sol.rows(0, n).into_owned());
            y.set_column(k1, &sol.rows(n, n).into_owned());
        }
        j = first;
    }
    let condition = (scale / worst_pivot).to_f64_lossy();
    if !(condition.is_finite()) || condition > 1.0 / eps::<T>().to_f64_lossy() {
        return Err(Error::IllConditionedLyapunov { condition });
    }
    let x = &u * y * u.transpose();
    let x = (&x + x.transpose()) * T::lit(0.5);
    check_finite(&x, "Lyapunov solution")?;
    Ok(x)
}

/// Factor `L` with `X = L Lᵀ` solving `Aᵀ X + X A = −Cᵀ C`, by Hammarling's
/// method on the complex Schur form. Small directions of `X` keep full
/// relative accuracy, unlike factoring a computed `X`.
pub(crate) fn lyapunov_factor<T: Real>(a: &DMatrix<T>, c: &DMatrix<T>) -> Result<DMatrix<T>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let zero = Complex::new(T::zero(), T::zero());
    let (q, t, _) = complex_schur(a)?;
    let cq = c.map(|x| Complex::new(x, T::zero())) * &q;
    let rows = cq.nrows().max(n);
    let mut padded = DMatrix::from_element(rows, n, zero);
    padded.rows_mut(0, cq.nrows()).copy_from(&cq);
    let mut r = padded.qr().r().rows(0, n).into_owned();

    let mut u = DMatrix::from_element(n, n, zero);
    for k in 0..n {
        let m = n - k - 1;
        let lambda = t[(k, k)];
        if !(lambda.re < T::zero()) {
            return Err(Error::Unstable {
                re: lambda.re.to_f64_lossy(),
                im: lambda.im.to_f64_lossy(),
            });
        }
        let rho = r[(k, k)];
        let mu = cabs(rho) / (-(lambda.re + lambda.re)).sqrt();
        u[(k, k)] = Complex::new(mu, T::zero());
        // R = [ρ rᴴ; 0 R₁], S = [λ sᴴ; 0 S₁]
        let rv: Vec<Complex<T>> = (0..m).map(|j| r[(k, k + 1 + j)].conj()).collect();
        let mut y = rv.clone();
        if mu > T::zero() {
            // (S₁ᴴ + λI) u = −(ρ/μ) r − μ s, lower triangular
            let mut sol = vec![zero; m];
            for i in 0..m {
                let mut acc = -(rho.unscale(mu) * rv[i]) - t[(k, k + 1 + i)].conj().scale(mu);
                for (j, sj) in sol.iter().enumerate().take(i) {
                    acc -= t[(k + 1 + j, k + 1 + i)].conj() * *sj;
                }
                sol[i] = acc / (t[(k + 1 + i, k + 1 + i)].conj() + lambda);
            }
            let coeff = rho.conj().unscale(mu);
            for i in 0..m {
                y[i] -= coeff * sol[i];
                u[(k, k + 1 + i)] = sol[i].conj();
            }
        }
        // fold the row yᴴ into R₁ with Givens rotations
        let mut w: Vec<Complex<T>> = y.iter().map(|v| v.conj()).collect();
        for j in 0..m {
            let (jj, b) = (k + 1 + j, w[j]);
            if b == zero {
                continue;
            }
            let a_jj = r[(jj, jj)];
            let norm = (a_jj.norm_sqr() + b.norm_sqr()).sqrt();
            let (cs, sn) = if cabs(a_jj) == T::zero() {
                (T::zero(), Complex::new(T::one(), T::zero()))
            } else {
                let phase = a_jj.unscale(cabs(a_jj));
                (cabs(a_jj) / norm, phase * b.conj().unscale(norm))
            };
            for col in j..m {
                let cc = k + 1 + col;
                let x = r[(jj, cc)];
                let z = w[col];
                r[(jj, cc)] = x.scale(cs) + sn * z;
                w[col] = -(sn.conj() * x) + z.scale(cs);
            }
        }
    }
    // X = Q Uᴴ U Qᴴ = L Lᴴ with L = Q Uᴴ; the real factor comes from [Re L, Im L]
    let l = q * u.adjoint();
    let mut stacked = DMatrix::<T>::zeros(2 * n, n);
    for i in 0..n {
        for j in 0..n {
            stacked[(j, i)] = l[(i, j)].re;
            stacked[(n + j, i)] = l[(i, j)].im;
        }
    }
    let factor = stacked.qr().r().transpose();
    check_finite(&factor, "Gramian factor")?;
    Ok(factor)
}

/// Thin SVD `a = U diag(s) Vᵀ` by one-sided Jacobi rotations, singular values
/// descending. Small singular values come out with high relative accuracy.
pub(crate) fn svd<T: Real>(a: &DMatrix<T>) -> (DMatrix<T>, Vec<T>, DMatrix<T>) {
    if a.nrows() < a.ncols() {
        let (u, s, v) = svd(&a.transpose());
        return (v, s, u);
    }
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = DMatrix::<T>::identity(n, n);
    let eps = T::default_epsilon();
    for _ in 0..80 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (T::zero(), T::zero(), T::zero());
                for i in 0..m {
                    let (x, y) = (w[(i, p)], w[(i, q)]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (gamma + gamma);
                let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let (x, y) = (w[(i, p)], w[(i, q)]);
                    w[(i, p)] = c * x - s * y;
                    w[(i, q)] = s * x + c * y;
                }
                for i in 0..n {
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * x - s * y;
                    v[(i, q)] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<T> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap_or(std::cmp::Ordering::Equal));
    let mut u = DMatrix::<T>::zeros(m, n);
    let mut vs = DMatrix::<T>::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        if norms[j] > T::zero() {
            u.set_column(k, &(w.column(j) / norms[j]));
        }
        vs.set_column(k, &v.column(j));
        s.push(norms[j]);
    }
    (u, s, vs)
}

pub(crate) struct LstsqSolution<T: Real> {
    pub x: DVector<T>,
    pub rank: usize,
    /// Number of non-zero columns (unknowns actually present).
    pub active: usize,
    /// Ratio of extreme singular values of the column-scaled system.
    pub condition: f64,
}

/// Minimum-norm least squares with unit-norm column scaling; exactly-zero
/// columns are removed and their unknowns fixed to zero.
pub(crate) fn lstsq<T: Real>(a: &DMatrix<T>, b: &DVector<T>, rcond: T) -> Result<LstsqSolution<T>> {
    let cols = a.ncols();
    let norms: Vec<T> = (0..cols).map(|j| a.column(j).norm()).collect();
    let active: Vec<usize> = (0..cols).filter(|&j| norms[j] > T::zero()).collect();
    let mut x = DVector::<T>::zeros(cols);
    if active.is_empty() {
        return Ok(LstsqSolution {
            x,
            rank: 0,
            active: 0,
            condition: 1.0,
        });
    }
    let mut scaled = DMatrix::<T>::zeros(a.nrows(), active.len());
    for (k, &j) in active.iter().enumerate() {
        scaled.set_column(k, &(a.column(j) / norms[j]));
    }
    let (u, sv, v) = svd(&scaled);
    let smax = sv.first().copied().unwrap_or(T::zero());
    let smin = sv.last().copied().unwrap_or(T::zero());
    let cutoff = rcond * smax;
    let rank = sv.iter().filter(|&&s| s > cutoff).count();
    let mut y = DVector::<T>::zeros(active.len());
    for k in 0..rank {
        let coef = u.column(k).dot(b) / sv[k];
        y.axpy(coef, &v.column(k), T::one());
    }
    for (k, &j) in active.iter().enumerate() {
        x[j] = y[k] / norms[j];
    }
    let condition = if smin > T::zero() {
        (smax / smin).to_f64_lossy()
    } else {
        f64::INFINITY
    };
    Ok(LstsqSolution {
        x,
        rank,
        active: active.len(),
        condition,
    })
}

/// Eigenvalues of a real matrix (conjugate pairs adjacent, positive imaginary part first).
pub(crate) fn eigenvalues<T: Real>(a: &DMatrix<T>) -> Result<Vec<Complex<T>>> {
    let n = a.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let (_, t) = real_schur(a)?;
    let mut out = Vec::with_capacity(n);
    let mut i = 0;
    while i < n {
        if i + 1 < n && is_block_start(&t, i + 1) {
            let z = |x: T| Complex::new(x, T::zero());
            let (e1, e2) = eig2x2(z(t[(i, i)]), z(t[(i, i + 1)]), z(t[(i + 1, i)]), z(t[(i + 1, i + 1)]));
            if e1.im == T::zero() && e2.im == T::zero() {
                out.push(e1);
                out.push(e2);
            } else {
                let top = if e1.im > T::zero() { e1 } else { e2 };
                let top = Complex::new(top.re, top.im.abs());
                out.push(top);
                out.push(top.conj());
            }
            i += 2;
        } else {
            out.push(Complex::new(t[(i, i)], T::zero()));
            i += 1;
        }
    }
    Ok(out)
}

/// Largest real part of the spectrum; `None` for an empty matrix.
pub(crate) fn spectral_abscissa<T: Real>(a: &DMatrix<T>) -> Result<Option<Complex<T>>> {
    let eig = eigenvalues(a)?;
    Ok(eig.into_iter().fold(None, |best: Option<Complex<T>>, e| match best {
        Some(b) if b.re >= e.re => Some(b),
        _ => Some(e),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_svd_known_values() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 4.0, 5.0]);
        let (_, s, _) = svd(&a);
        assert!((s[0] - 45f64.sqrt()).abs() < 1e-14 && (s[1] - 5f64.sqrt()).abs() < 1e-14);

        let wide = DMatrix::from_row_slice(3, 5, &[
            1.0, 2.0, 0.0, -1.0, 3.0, //
            0.5, -1.0, 4.0, 2.0, 0.0, //
            1.5, 1.0, 4.0, 1.0, 3.0,
        ]);
        for m in [wide.clone(), wide.transpose()] {
            let (u, s, v) = svd(&m);
            assert_eq!(s.len(), 3);
            assert!(s.windows(2).all(|w| w[0] >= w[1]));
            // third row is the sum of the first two
            assert!(s[2] < 1e-14 * s[0]);
            let back = &u * DMatrix::from_diagonal(&DVector::from_vec(s.clone())) * v.transpose();
            assert!((back - &m).norm() < 1e-13 * m.norm());
            assert!((v.transpose() * &v - DMatrix::identity(3, 3)).norm() < 1e-14);
        }

        // graded columns: tiny singular values keep their relative accuracy
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 1e-12, 0.0, 1e-12]);
        let (_, s, _) = svd(&g);
        let exact = 1e-12 / s[0];
        assert!((s[1] / exact - 1.0).abs() < 1e-12);
    }

    #[test]
    fn factor_matches_bartels_stewart() {
        let a = DMatrix::from_row_slice(4, 4, &[
            -1.0, 3.0, 0.2, 0.0, //
            -3.0, -1.0, 0.0, 0.5, //
            0.1, 0.0, -20.0, 1.0, //
            0.0, -0.3, 0.0, -4.0,
        ]);
        let c = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 2.0, -1.0, 0.0, 1.0, 0.5, 0.0]);
        let l = lyapunov_factor(&a, &c).unwrap();
        let x = lyapunov(&a.transpose(), &(-(c.transpose() * &c))).unwrap();
        assert!((&l * l.transpose() - &x).norm() < 1e-12 * x.norm());
        let single = DMatrix::from_row_slice(1, 4, &[0.0, 0.0, 0.0, 1.0]);
        let l = lyapunov_factor(&a, &single).unwrap();
        let x = lyapunov(&a.transpose(), &(-(single.transpose() * &single))).unwrap();
        assert!((&l * l.transpose() - &x).norm() < 1e-12 * x.norm());
    }

    #[test]
    fn factor_keeps_tiny_directions() {
        // X = diag(1/2, 1e-20/2000): one direction far below eps·‖X‖
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1000.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 1e-10]);
        let l = lyapunov_factor(&a, &c).unwrap();
        let x = &l * l.transpose();
        assert!((x[(1, 1)] / (1e-20 / 2000.0) - 1.0).abs() < 1e-10);
        assert!(lyapunov_factor(&DMatrix::from_element(1, 1, 0.5), &DMatrix::from_element(1, 1, 1.0)).is_err());
        let zero = lyapunov_factor(&a, &DMatrix::zeros(1, 2)).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn lyapunov_scalar() {
        let a = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let q = DMatrix::from_row_slice(1, 1, &[-1.0]);
        let x = lyapunov(&a, &q).unwrap();
        assert!((x[(0, 0)] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn lyapunov_oscillatory_residual() {
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 10.0, 0.0, -10.0, -1.0, 0.5, 0.0, 0.0, -3.0]);
        let b = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.3, 2.0, -1.0, 1.0]);
        let q = -(&b * b.transpose());
        let x = lyapunov(&a, &q).unwrap();
        let res = &a * &x + &x * a.transpose() - &q;
        assert!(res.norm() < 1e-12 * (a.norm() * x.norm() + q.norm()));
    }

    #[test]
    fn complex_schur_reconstructs() {
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 10.0, 2.0, -10.0, -1.0, 0.5, 0.3, 0.0, -3.0]);
        let (u, t, pairs) = complex_schur(&a).unwrap();
        assert_eq!(pairs.len(), 1);
        let ac = a.map(|x| Complex::new(x, 0.0));
        let rec = &u * &t * u.adjoint();
        assert!((rec - ac).norm() < 1e-12);
        for i in 0..3 {
            for j in 0..i {
                assert_eq!(t[(i, j)], Complex::new(0.0, 0.0));
            }
        }
    }

    #[test]
    fn eigenvalues_pair_ordering() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 10.0, -10.0, -1.0]);
        let e = eigenvalues(&a).unwrap();
        assert!((e[0] - Complex::new(-1.0, 10.0)).norm() < 1e-12);
        assert_eq!(e[1], e[0].conj());
    }

    #[test]
    fn lstsq_drops_zero_columns() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let b = DVector::from_vec(vec![2.0, 2.0, 2.0]);
        let sol = lstsq(&a, &b, 1e-14).unwrap();
        assert_eq!(sol.active, 1);
        assert!((sol.x[0] - 2.0).abs() < 1e-14);
        assert_eq!(sol.x[1], 0.0);
    }
}
