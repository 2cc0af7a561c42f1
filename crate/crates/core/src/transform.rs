//! Unitary measurement operators `F`.
//!
//! The DFTs use the unitary normalisation `F_{jl} = n^{-1/2} e^{-2πi jl/n}`;
//! the 2D DFT acts on a row-major `H × W` grid. Row indices are 0-based
//! here; the command line shifts them to 1-based.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{check_len, Error, Result};
use crate::linalg::{gram_schmidt, Matrix};
use crate::rng;
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransformKind {
    Identity,
    Dft1d,
    Dft2d { height: usize, width: usize },
    Hadamard,
    Dense,
}

#[derive(Clone)]
struct Plans<T> {
    /// Along contiguous runs (length n for 1D, width for 2D).
    fwd_rows: Arc<dyn Fft<T>>,
    inv_rows: Arc<dyn Fft<T>>,
    /// Along columns of the 2D grid (length height).
    fwd_cols: Option<Arc<dyn Fft<T>>>,
    inv_cols: Option<Arc<dyn Fft<T>>>,
}

#[derive(Clone)]
pub struct UnitaryOperator<T: Real> {
    kind: TransformKind,
    n: usize,
    dense: Option<Vec<Complex<T>>>,
    plans: Option<Plans<T>>,
}

impl<T: Real> fmt::Debug for UnitaryOperator<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UnitaryOperator")
            .field("kind", &self.kind)
            .field("n", &self.n)
            .finish()
    }
}

/// Reusable buffers for the in-place transforms.
#[derive(Clone, Debug, Default)]
pub struct TransformWork<T> {
    scratch: Vec<Complex<T>>,
    transpose: Vec<Complex<T>>,
}

impl<T: Real> UnitaryOperator<T> {
    pub fn identity(n: usize) -> Self {
        Self {
            kind: TransformKind::Identity,
            n,
            dense: None,
            plans: None,
        }
    }

    pub fn dft1d(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("dft1d needs n >= 1".into()));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            kind: TransformKind::Dft1d,
            n,
            dense: None,
            plans: Some(Plans {
                fwd_rows: planner.plan_fft_forward(n),
                inv_rows: planner.plan_fft_inverse(n),
                fwd_cols: None,
                inv_cols: None,
            }),
        })
    }

    pub fn dft2d(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidArgument("dft2d needs H, W >= 1".into()));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            kind: TransformKind::Dft2d { height, width },
            n: height * width,
            dense: None,
            plans: Some(Plans {
                fwd_rows: planner.plan_fft_forward(width),
                inv_rows: planner.plan_fft_inverse(width),
                fwd_cols: Some(planner.plan_fft_forward(height)),
                inv_cols: Some(planner.plan_fft_inverse(height)),
            }),
        })
    }

    /// Normalised Walsh-Hadamard transform in Sylvester (natural) order.
    pub fn hadamard(n: usize) -> Result<Self> {
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "hadamard needs a power-of-two size, got {n}"
            )));
        }
        Ok(Self {
            kind: TransformKind::Hadamard,
            n,
            dense: None,
            plans: None,
        })
    }

    /// Explicit `n × n` matrix (row-major), checked for unitarity.
    pub fn dense(n: usize, entries: Vec<Complex<T>>) -> Result<Self> {
        check_len("dense operator entries", n * n, entries.len())?;
        let op = Self {
            kind: TransformKind::Dense,
            n,
            dense: Some(entries),
            plans: None,
        };
        let defect = op.unitarity_defect();
        let tol = T::c(1e-8).max(T::epsilon() * T::c(100.0) * T::from_usize_lossy(n));
        if !(defect <= tol) {
            return Err(Error::NotUnitary(defect.as_f64()));
        }
        Ok(op)
    }

    pub fn dense_real(m: &Matrix<T>) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::InvalidArgument(format!(
                "dense operator must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let entries = m
            .as_slice()
            .iter()
            .map(|&v| Complex::new(v, T::zero()))
            .collect();
        Self::dense(m.rows(), entries)
    }

    /// Haar-random orthogonal matrix: Gram-Schmidt (positive `R` diagonal)
    /// of an i.i.d. Gaussian matrix.
    pub fn random_orthogonal(n: usize, seed: u64) -> Result<Self> {
        let mut r = rng::stream(seed, 0);
        loop {
            let g = Matrix::from_fn(n, n, |_, _| rng::gaussian::<T, _>(&mut r));
            if let Some(q) = gram_schmidt(&g) {
                return Self::dense_real(&q);
            }
        }
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn work(&self) -> TransformWork<T> {
        let mut scratch_len = 0;
        if let Some(p) = &self.plans {
            scratch_len = p
                .fwd_rows
                .get_inplace_scratch_len()
                .max(p.inv_rows.get_inplace_scratch_len());
            if let (Some(f), Some(i)) = (&p.fwd_cols, &p.inv_cols) {
                scratch_len = scratch_len
                    .max(f.get_inplace_scratch_len())
                    .max(i.get_inplace_scratch_len());
            }
        }
        let transpose = match self.kind {
            TransformKind::Dft2d { .. } | TransformKind::Dense => self.n,
            _ => 0,
        };
        TransformWork {
            scratch: vec![Complex::default(); scratch_len],
            transpose: vec![Complex::default(); transpose],
        }
    }

    /// `buf ← F buf`.
    pub fn apply_in_place(
        &self,
        buf: &mut [Complex<T>],
        work: &mut TransformWork<T>,
    ) -> Result<()> {
        self.transform(buf, work, false)
    }

    /// `buf ← F* buf`.
    pub fn adjoint_in_place(
        &self,
        buf: &mut [Complex<T>],
        work: &mut TransformWork<T>,
    ) -> Result<()> {
        self.transform(buf, work, true)
    }

    pub fn apply(&self, x: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let mut buf = x.to_vec();
        self.apply_in_place(&mut buf, &mut self.work())?;
        Ok(buf)
    }

    pub fn apply_real(&self, x: &[T]) -> Result<Vec<Complex<T>>> {
        self.apply(&crate::linalg::to_complex(x))
    }

    pub fn adjoint_apply(&self, y: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
        let mut buf = y.to_vec();
        self.adjoint_in_place(&mut buf, &mut self.work())?;
        Ok(buf)
    }

    /// `f_j` (0-based `j`), the conjugate of row `j` of `F`, so that
    /// `⟨f_j, x⟩ = Σ conj(f_j)ₗ xₗ = (F x)_j`.
    pub fn row(&self, j: usize) -> Result<Vec<Complex<T>>> {
        if j >= self.n {
            return Err(Error::InvalidArgument(format!(
                "row index {j} out of range for n = {}",
                self.n
            )));
        }
        let mut e = vec![Complex::default(); self.n];
        e[j] = Complex::new(T::one(), T::zero());
        self.adjoint_apply(&e)
    }

    /// Explicit matrix, row-major, obtained by applying `F` to the
    /// standard basis.
    pub fn to_dense(&self) -> Vec<Complex<T>> {
        let n = self.n;
        let mut out = vec![Complex::default(); n * n];
        let mut work = self.work();
        let mut e = vec![Complex::default(); n];
        for l in 0..n {
            e.iter_mut().for_each(|v| *v = Complex::default());
            e[l] = Complex::new(T::one(), T::zero());
            self.apply_in_place(&mut e, &mut work)
                .expect("length matches");
            for j in 0..n {
                out[j * n + l] = e[j];
            }
        }
        out
    }

    /// Largest entry of `|F*F − I|`, computed column by column.
    pub fn unitarity_defect(&self) -> T {
        let n = self.n;
        let mut work = self.work();
        let mut worst = T::zero();
        let mut e = vec![Complex::default(); n];
        for l in 0..n {
            e.iter_mut().for_each(|v| *v = Complex::default());
            e[l] = Complex::new(T::one(), T::zero());
            self.apply_in_place(&mut e, &mut work)
                .expect("length matches");
            self.adjoint_in_place(&mut e, &mut work)
                .expect("length matches");
            for (j, v) in e.iter().enumerate() {
                let target = if j == l { T::one() } else { T::zero() };
                worst = worst.max((v - Complex::new(target, T::zero())).norm());
            }
        }
        worst
    }

    fn transform(
        &self,
        buf: &mut [Complex<T>],
        work: &mut TransformWork<T>,
        adjoint: bool,
    ) -> Result<()> {
        check_len("transform input", self.n, buf.len())?;
        match self.kind {
            TransformKind::Identity => {}
            TransformKind::Dft1d => {
                let p = self.plans.as_ref().expect("dft plans");
                let plan = if adjoint { &p.inv_rows } else { &p.fwd_rows };
                ensure_len(&mut work.scratch, plan.get_inplace_scratch_len());
                plan.process_with_scratch(buf, &mut work.scratch);
                scale(buf, self.n);
            }
            TransformKind::Dft2d { height, width } => {
                let p = self.plans.as_ref().expect("dft plans");
                let (rows, cols) = if adjoint {
                    (&p.inv_rows, p.inv_cols.as_ref().unwrap())
                } else {
                    (&p.fwd_rows, p.fwd_cols.as_ref().unwrap())
                };
                ensure_len(
                    &mut work.scratch,
                    rows.get_inplace_scratch_len()
                        .max(cols.get_inplace_scratch_len()),
                );
                rows.process_with_scratch(buf, &mut work.scratch);
                ensure_len(&mut work.transpose, self.n);
                let t = &mut work.transpose[..self.n];
                for r in 0..height {
                    for c in 0..width {
                        t[c * height + r] = buf[r * width + c];
                    }
                }
                cols.process_with_scratch(t, &mut work.scratch);
                for c in 0..width {
                    for r in 0..height {
                        buf[r * width + c] = t[c * height + r];
                    }
                }
                scale(buf, self.n);
            }
            TransformKind::Hadamard => {
                // Real symmetric: F* = F.
                let n = self.n;
                let mut h = 1;
                while h < n {
                    for start in (0..n).step_by(2 * h) {
                        for i in start..start + h {
                            let (a, b) = (buf[i], buf[i + h]);
                            buf[i] = a + b;
                            buf[i + h] = a - b;
                        }
                    }
                    h *= 2;
                }
                scale(buf, n);
            }
            TransformKind::Dense => {
                let m = self.dense.as_ref().expect("dense entries");
                let n = self.n;
                ensure_len(&mut work.transpose, n);
                let out = &mut work.transpose[..n];
                if adjoint {
                    out.iter_mut().for_each(|v| *v = Complex::default());
                    for (j, &yj) in buf.iter().enumerate() {
                        let row = &m[j * n..(j + 1) * n];
                        for (o, a) in out.iter_mut().zip(row) {
                            *o = *o + a.conj() * yj;
                        }
                    }
                } else {
                    for (j, o) in out.iter_mut().enumerate() {
                        let row = &m[j * n..(j + 1) * n];
                        *o = row
                            .iter()
                            .zip(buf.iter())
                            .fold(Complex::default(), |acc, (a, x)| acc + a * x);
                    }
                }
                buf.copy_from_slice(out);
            }
        }
        Ok(())
    }
}

fn ensure_len<T: Real>(v: &mut Vec<Complex<T>>, len: usize) {
    if v.len() < len {
        v.resize(len, Complex::default());
    }
}

fn scale<T: Real>(buf: &mut [Complex<T>], n: usize) {
    let s = T::one() / T::from_usize_lossy(n).sqrt();
    buf.iter_mut().for_each(|v| *v = v.scale(s));
}

/// Textual operator choice, as accepted on the command line:
/// `identity | dft1d | dft2d:HxW | hadamard | dense:FILE`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TransformSpec {
    Identity,
    Dft1d,
    Dft2d { height: usize, width: usize },
    Hadamard,
    Dense(PathBuf),
}

impl FromStr for TransformSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("unknown transform '{s}'"));
        match s {
            "identity" => Ok(Self::Identity),
            "dft1d" => Ok(Self::Dft1d),
            "hadamard" => Ok(Self::Hadamard),
            _ => {
                if let Some(dims) = s.strip_prefix("dft2d:") {
                    let (h, w) = dims.split_once(['x', 'X']).ok_or_else(bad)?;
                    let height = h.trim().parse().map_err(|_| bad())?;
                    let width = w.trim().parse().map_err(|_| bad())?;
                    Ok(Self::Dft2d { height, width })
                } else if let Some(path) = s.strip_prefix("dense:") {
                    if path.is_empty() {
                        return Err(bad());
                    }
                    Ok(Self::Dense(PathBuf::from(path)))
                } else {
                    Err(bad())
                }
            }
        }
    }
}

impl fmt::Display for TransformSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => write!(f, "identity"),
            Self::Dft1d => write!(f, "dft1d"),
            Self::Dft2d { height, width } => write!(f, "dft2d:{height}x{width}"),
            Self::Hadamard => write!(f, "hadamard"),
            Self::Dense(p) => write!(f, "dense:{}", p.display()),
        }
    }
}

impl TransformSpec {
    /// Builds the operator for ambient dimension `n`.
    pub fn build<T: Real>(&self, n: usize) -> Result<UnitaryOperator<T>> {
        let op = match self {
            Self::Identity => UnitaryOperator::identity(n),
            Self::Dft1d => UnitaryOperator::dft1d(n)?,
            Self::Dft2d { height, width } => UnitaryOperator::dft2d(*height, *width)?,
            Self::Hadamard => UnitaryOperator::hadamard(n)?,
            Self::Dense(path) => {
                let m = crate::io::read_matrix::<T>(path, "GCSMAT")?;
                UnitaryOperator::dense_real(&m)?
            }
        };
        check_len("transform dimension", n, op.n())?;
        Ok(op)
    }
}
