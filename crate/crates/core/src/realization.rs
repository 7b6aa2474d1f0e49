//! Real state-space realizations of pole-residue models, MIMO assembly of
//! per-entry realizations, and transfer-function evaluation.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::ratfit::{Pole, RationalModel};
use crate::scalar::{cabs, eps, Complex, Real};

/// Free-form metadata carried with a model and written to its JSON export.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_rms: Option<f64>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

/// `ẋ = A x + B u`, `y = C x + D u` with labelled states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel<T: Real> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
    pub d: DMatrix<T>,
    pub state_labels: Vec<String>,
    pub meta: ModelMeta,
}

impl<T: Real> StateSpaceModel<T> {
    pub fn new(a: DMatrix<T>, b: DMatrix<T>, c: DMatrix<T>, d: DMatrix<T>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Dimension(format!("A is {}x{}", n, a.ncols())));
        }
        if b.nrows() != n {
            return Err(Error::Dimension(format!("B has {} rows, A has {n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(Error::Dimension(format!("C has {} columns, A has {n}", c.ncols())));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::Dimension(format!(
                "D is {}x{}, expected {}x{}",
                d.nrows(),
                d.ncols(),
                c.nrows(),
                b.ncols()
            )));
        }
        for (m, name) in [(&a, "A"), (&b, "B"), (&c, "C"), (&d, "D")] {
            linalg::check_finite(m, name)?;
        }
        let state_labels = (0..n).map(|k| format!("x{k}")).collect();
        Ok(Self {
            a,
            b,
            c,
            d,
            state_labels,
            meta: ModelMeta::default(),
        })
    }

    /// Pure feedthrough, no states.
    pub fn static_gain(d: DMatrix<T>) -> Self {
        let (p, m) = d.shape();
        Self {
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, m),
            c: DMatrix::zeros(p, 0),
            d,
            state_labels: Vec::new(),
            meta: ModelMeta::default(),
        }
    }

    pub fn with_state_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_states() {
            return Err(Error::Dimension(format!(
                "{} labels for {} states",
                labels.len(),
                self.n_states()
            )));
        }
        self.state_labels = labels;
        Ok(self)
    }

    pub fn with_meta(mut self, meta: ModelMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn n_states(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn eigenvalues(&self) -> Result<Vec<Complex<T>>> {
        linalg::eigenvalues(&self.a)
    }

    /// Similarity transform `x = T z`: `(T⁻¹AT, T⁻¹B, CT, D)`.
    pub fn transformed(&self, t: &DMatrix<T>, t_inv: &DMatrix<T>) -> Self {
        Self {
            a: t_inv * &self.a * t,
            b: t_inv * &self.b,
            c: &self.c * t,
            d: self.d.clone(),
            state_labels: (0..t.ncols()).map(|k| format!("z{k}")).collect(),
            meta: self.meta.clone(),
        }
    }

    pub fn eval_tf(&self, s: Complex<T>) -> Result<DMatrix<Complex<T>>> {
        eval_tf(self, s)
    }
}

fn to_c<T: Real>(m: &DMatrix<T>) -> DMatrix<Complex<T>> {
    m.map(|x| Complex::new(x, T::zero()))
}

/// `C (sI − A)⁻¹ B + D`, one LU factorisation and a solve per input column.
pub fn eval_tf<T: Real>(ss: &StateSpaceModel<T>, s: Complex<T>) -> Result<DMatrix<Complex<T>>> {
    let n = ss.n_states();
    let d = to_c(&ss.d);
    if n == 0 {
        return Ok(d);
    }
    let mut m = to_c(&ss.a).map(|z| -z);
    for k in 0..n {
        m[(k, k)] += s;
    }
    let scale = m.iter().fold(T::zero(), |acc, z| acc.max(cabs(*z)));
    let lu = m.lu();
    let u = lu.u();
    let min_pivot = (0..n).fold(T::max_value().unwrap_or(T::one()), |acc, k| acc.min(cabs(u[(k, k)])));
    if min_pivot <= eps::<T>() * scale * T::from_usize_lossy(n) {
        return Err(Error::Singular {
            re: s.re.to_f64_lossy(),
            im: s.im.to_f64_lossy(),
        });
    }
    let x = lu.solve(&to_c(&ss.b)).ok_or(Error::Singular {
        re: s.re.to_f64_lossy(),
        im: s.im.to_f64_lossy(),
    })?;
    Ok(to_c(&ss.c) * x + d)
}

/// 1-state block `c/(s − p)`.
pub fn realize_real_pole<T: Real>(p: T, c_res: Complex<T>) -> Result<StateSpaceModel<T>> {
    if c_res.im.abs() > T::lit(1e-12) {
        return Err(Error::ComplexResidueOnRealPole {
            re: c_res.re.to_f64_lossy(),
            im: c_res.im.to_f64_lossy(),
        });
    }
    StateSpaceModel::new(
        DMatrix::from_element(1, 1, p),
        DMatrix::from_element(1, 1, T::one()),
        DMatrix::from_element(1, 1, c_res.re),
        DMatrix::zeros(1, 1),
    )
}

/// 2-state real block for the pair `α ± jβ` whose upper member carries `c_res`.
pub fn realize_complex_pair<T: Real>(alpha: T, beta: T, c_res: Complex<T>) -> Result<StateSpaceModel<T>> {
    if !(beta > T::zero()) {
        return Err(Error::NonPositiveImag(beta.to_f64_lossy()));
    }
    StateSpaceModel::new(
        DMatrix::from_row_slice(2, 2, &[alpha, beta, -beta, alpha]),
        DMatrix::from_row_slice(2, 1, &[T::lit(2.0), T::zero()]),
        DMatrix::from_row_slice(1, 2, &[c_res.re, c_res.im]),
        DMatrix::zeros(1, 1),
    )
}

fn block_diag<T: Real>(blocks: &[&DMatrix<T>]) -> DMatrix<T> {
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Block-diagonal realization in pole-list order; states labelled
/// `p{k}` for a real pole and `pair{k}a` / `pair{k}b` for a pair.
pub fn realize_siso<T: Real>(model: &RationalModel<T>) -> Result<StateSpaceModel<T>> {
    let mut blocks = Vec::with_capacity(model.poles().entries().len());
    let mut labels = Vec::with_capacity(model.order());
    for (k, (p, r)) in model.poles().entries().iter().zip(model.residues()).enumerate() {
        match *p {
            Pole::Real(x) => {
                blocks.push(realize_real_pole(x, *r)?);
                labels.push(format!("p{k}"));
            }
            Pole::Pair { re, im } => {
                blocks.push(realize_complex_pair(re, im, *r)?);
                labels.push(format!("pair{k}a"));
                labels.push(format!("pair{k}b"));
            }
        }
    }
    let a = block_diag(&blocks.iter().map(|b| &b.a).collect::<Vec<_>>());
    let b = DMatrix::from_fn(a.nrows(), 1, |r, _| {
        let mut off = 0;
        for blk in &blocks {
            if r < off + blk.n_states() {
                return blk.b[(r - off, 0)];
            }
            off += blk.n_states();
        }
        unreachable!()
    });
    let c = DMatrix::from_fn(1, a.nrows(), |_, col| {
        let mut off = 0;
        for blk in &blocks {
            if col < off + blk.n_states() {
                return blk.c[(0, col - off)];
            }
            off += blk.n_states();
        }
        unreachable!()
    });
    let d = DMatrix::from_element(1, 1, model.d_term());
    StateSpaceModel::new(a, b, c, d)?.with_state_labels(labels)
}

/// Aggregates a grid of SISO models, `grid[o][i]` mapping input `i` to
/// output `o`, into one block-diagonal MIMO model.
pub fn assemble_mimo<T: Real>(grid: &[Vec<StateSpaceModel<T>>]) -> Result<StateSpaceModel<T>> {
    let n_out = grid.len();
    if n_out == 0 {
        return Err(Error::Dimension("empty grid".into()));
    }
    let n_in = grid[0].len();
    if n_in == 0 || grid.iter().any(|row| row.len() != n_in) {
        return Err(Error::Dimension("grid rows must all have the same non-zero length".into()));
    }
    for (o, row) in grid.iter().enumerate() {
        for (i, cell) in row.iter().enumerate() {
            if cell.n_inputs() != 1 || cell.n_outputs() != 1 {
                return Err(Error::Dimension(format!(
                    "cell ({o},{i}) is {}x{}, expected 1x1",
                    cell.n_outputs(),
                    cell.n_inputs()
                )));
            }
        }
    }
    let n: usize = grid.iter().flatten().map(|c| c.n_states()).sum();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DMatrix::zeros(n, n_in);
    let mut c = DMatrix::zeros(n_out, n);
    let mut d = DMatrix::zeros(n_out, n_in);
    let mut labels = Vec::with_capacity(n);
    let mut off = 0;
    for (o, row) in grid.iter().enumerate() {
        for (i, cell) in row.iter().enumerate() {
            let k = cell.n_states();
            a.view_mut((off, off), (k, k)).copy_from(&cell.a);
            b.view_mut((off, i), (k, 1)).copy_from(&cell.b);
            c.view_mut((o, off), (1, k)).copy_from(&cell.c);
            d[(o, i)] = cell.d[(0, 0)];
            labels.extend(cell.state_labels.iter().map(|l| format!("e{o}_{i}.{l}")));
            off += k;
        }
    }
    StateSpaceModel::new(a, b, c, d)?.with_state_labels(labels)
}
