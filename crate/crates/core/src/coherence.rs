//! Local coherences of the rows of `F` with respect to a prior cone.
//!
//! `α_j` measures how well row `j` of `F` aligns with the piecewise linear
//! expansion of the prior (a union of subspaces). On a single subspace
//! `U` with orthonormal basis `B`, `α_j = ‖Bᴴ f_j‖₂`. Norms are complex
//! Euclidean norms throughout, so `α_j` is the alignment with the
//! complexified subspace.

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::generative_model::{ActivationPiece, GenerativeNetwork};
use crate::linalg::{norm2, orthonormal_range, Matrix};
use crate::rng;
use crate::transform::UnitaryOperator;
use crate::Real;
use num_complex::Complex;

/// Relative singular-value cutoff for piece spans.
pub const RANK_CUTOFF: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoherenceMethod {
    ExactSubspace,
    ExactPieces,
    Heuristic {
        batch: usize,
        seed: u64,
    },
    /// Read from a file.
    Loaded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoherenceVector<T> {
    pub alpha: Vec<T>,
    pub method: CoherenceMethod,
}

impl<T: Real> CoherenceVector<T> {
    /// Checks `α_j ∈ [0, 1]` up to rounding (entries are clamped into range).
    pub fn new(alpha: Vec<T>, method: CoherenceMethod) -> Result<Self> {
        let slack = T::c(1e-9);
        if let Some(j) = alpha
            .iter()
            .position(|a| !a.is_finite() || *a < -slack || *a > T::one() + slack)
        {
            return Err(Error::InvalidArgument(format!(
                "coherence {} at row {} is outside [0, 1]",
                alpha[j],
                j + 1
            )));
        }
        let alpha = alpha
            .into_iter()
            .map(|a| a.max(T::zero()).min(T::one()))
            .collect();
        Ok(Self { alpha, method })
    }

    pub fn len(&self) -> usize {
        self.alpha.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha.is_empty()
    }

    pub fn norm(&self) -> T {
        norm2(&self.alpha)
    }

    pub fn norm_sq(&self) -> T {
        crate::linalg::dot(&self.alpha, &self.alpha)
    }
}

/// `F · B` column by column (`n × r`, column-major as a vector of columns).
pub(crate) fn transform_columns<T: Real>(
    op: &UnitaryOperator<T>,
    basis: &Matrix<T>,
) -> Result<Vec<Vec<Complex<T>>>> {
    check_len("basis rows", op.n(), basis.rows())?;
    let mut work = op.work();
    (0..basis.cols())
        .map(|c| {
            let mut col = crate::linalg::to_complex(&basis.column(c));
            op.apply_in_place(&mut col, &mut work)?;
            Ok(col)
        })
        .collect()
}

/// Row norms of an `n × r` complex matrix given by columns.
fn row_norms<T: Real>(cols: &[Vec<Complex<T>>], n: usize) -> Vec<T> {
    (0..n)
        .map(|j| cols.iter().map(|c| c[j].norm_sqr()).sum::<T>().sqrt())
        .collect()
}

fn check_orthonormal<T: Real>(basis: &Matrix<T>) -> Result<()> {
    let defect = basis.orthonormality_defect();
    if !(defect <= T::c(1e-10)) {
        return Err(Error::NotOrthonormal(defect.as_f64()));
    }
    Ok(())
}

/// Coherences with respect to the subspace spanned by the orthonormal
/// columns of `basis`: `α_j = ‖basisᴴ f_j‖₂`, evaluated as the row norms of
/// `F · basis` (since `(F b)_j = ⟨f_j, b⟩`).
pub fn coherence_exact_subspace<T: Real>(
    op: &UnitaryOperator<T>,
    basis: &Matrix<T>,
) -> Result<CoherenceVector<T>> {
    check_orthonormal(basis)?;
    let fb = transform_columns(op, basis)?;
    CoherenceVector::new(row_norms(&fb, op.n()), CoherenceMethod::ExactSubspace)
}

/// Orthonormal basis of the span of a piece's image.
pub fn piece_span<T: Real>(piece: &ActivationPiece<T>) -> Matrix<T> {
    orthonormal_range(&piece.effective_map, T::c(RANK_CUTOFF))
}

/// Image under `F` of an orthonormal basis of `span(C_i) + span(C_i')`.
pub(crate) struct PairSpan<T> {
    pub transformed: Vec<Vec<Complex<T>>>,
}

/// Calls `visit` for every unordered piece pair (including `i = i'`).
/// `F` is applied once per piece; pair images are recombined from those.
pub(crate) fn for_each_pair_span<T: Real>(
    op: &UnitaryOperator<T>,
    pieces: &[ActivationPiece<T>],
    mut visit: impl FnMut(&PairSpan<T>) -> Result<()>,
) -> Result<()> {
    if pieces.is_empty() {
        return Err(Error::InvalidArgument("empty piece list".into()));
    }
    let spans: Vec<Matrix<T>> = pieces.iter().map(piece_span).collect();
    let images: Vec<Vec<Vec<Complex<T>>>> = spans
        .iter()
        .map(|s| transform_columns(op, s))
        .collect::<Result<_>>()?;
    let n = op.n();
    for i in 0..pieces.len() {
        for j in i..pieces.len() {
            let joint = spans[i].hstack(&spans[j]);
            let joint_img: Vec<&Vec<Complex<T>>> = images[i].iter().chain(&images[j]).collect();
            // joint = U Σ Vᵀ, so an orthonormal basis is U = joint V Σ⁻¹
            // and F U = (F joint) V Σ⁻¹.
            let svd = crate::linalg::svd(&joint);
            let smax = svd.singular_values.first().copied().unwrap_or(T::zero());
            let rank = svd
                .singular_values
                .iter()
                .take_while(|&&s| smax > T::zero() && s > T::c(RANK_CUTOFF) * smax)
                .count();
            let transformed = (0..rank)
                .map(|c| {
                    let s = svd.singular_values[c];
                    let mut col = vec![Complex::default(); n];
                    for (l, img) in joint_img.iter().enumerate() {
                        let w = svd.v[(l, c)] / s;
                        if w == T::zero() {
                            continue;
                        }
                        for (o, v) in col.iter_mut().zip(img.iter()) {
                            *o = *o + v.scale(w);
                        }
                    }
                    col
                })
                .collect();
            visit(&PairSpan { transformed })?;
        }
    }
    Ok(())
}

/// Exact coherences for a network whose pieces are known: the maximum over
/// piece pairs of the coherence with `span(C_i) + span(C_i')`.
pub fn coherence_exact_pieces<T: Real>(
    op: &UnitaryOperator<T>,
    pieces: &[ActivationPiece<T>],
) -> Result<CoherenceVector<T>> {
    if let Some(p) = pieces.first() {
        check_len("piece output dimension", op.n(), p.effective_map.rows())?;
    }
    let n = op.n();
    let mut alpha = vec![T::zero(); n];
    for_each_pair_span(op, pieces, |pair| {
        for (a, r) in alpha.iter_mut().zip(row_norms(&pair.transformed, n)) {
            *a = a.max(r);
        }
        Ok(())
    })?;
    CoherenceVector::new(alpha, CoherenceMethod::ExactPieces)
}

/// Monte-Carlo coherence estimate: `batch` Gaussian codes are pushed
/// through the network and `α_j` is the largest `|(F d)_j|` over all
/// normalised pairwise differences `d = (G(z_a) − G(z_b)) / ‖·‖`.
///
/// The codes are drawn sequentially from one stream, so a larger batch
/// with the same seed extends the smaller one. Identical samples are
/// skipped.
pub fn coherence_heuristic<T: Real>(
    net: &GenerativeNetwork<T>,
    op: &UnitaryOperator<T>,
    batch: usize,
    seed: u64,
) -> Result<CoherenceVector<T>> {
    if batch < 2 {
        return Err(Error::InvalidArgument(format!(
            "heuristic needs a batch of at least 2, got {batch}"
        )));
    }
    let n = op.n();
    check_len("network output dimension", n, net.output_dim())?;
    let mut r = rng::stream(seed, 0);
    let mut points = Vec::with_capacity(batch);
    let mut images = Vec::with_capacity(batch);
    let mut work = op.work();
    for _ in 0..batch {
        let z: Vec<T> = rng::gaussian_vec(&mut r, net.latent_dim());
        let x = net.forward(&z)?;
        let mut fx = crate::linalg::to_complex(&x);
        op.apply_in_place(&mut fx, &mut work)?;
        points.push(x);
        images.push(fx);
    }
    // F is linear, so F d = F G(z_a) − F G(z_b); only ‖d‖ needs the
    // signal-domain difference.
    let alpha = (1..batch)
        .into_par_iter()
        .map(|a| {
            let mut best = vec![T::zero(); n];
            for b in 0..a {
                let dn = norm2(&crate::linalg::sub(&points[a], &points[b]));
                if dn == T::zero() {
                    continue;
                }
                for (o, (u, v)) in best.iter_mut().zip(images[a].iter().zip(&images[b])) {
                    *o = o.max((u - v).norm() / dn);
                }
            }
            best
        })
        .reduce(
            || vec![T::zero(); n],
            |mut x, y| {
                x.iter_mut().zip(y).for_each(|(a, b)| *a = a.max(b));
                x
            },
        );
    CoherenceVector::new(alpha, CoherenceMethod::Heuristic { batch, seed })
}

/// Outcome of [`piecewise_expansion_properties_check`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExpansionReport {
    pub samples: usize,
    /// Range points whose activation pattern matches no supplied piece,
    /// or whose image is not reproduced by that piece's map.
    pub unassigned: usize,
    /// Differences of two points of one piece falling outside its span.
    pub difference_violations: usize,
    /// Pairs of same-piece points actually tested.
    pub differences_tested: usize,
}

impl ExpansionReport {
    pub fn passed(&self) -> bool {
        self.unassigned == 0 && self.difference_violations == 0
    }
}

/// Samples range points and checks that each lies in (the span of) some
/// supplied piece, and that differences of points from the same piece stay
/// in that piece's span.
pub fn piecewise_expansion_properties_check<T: Real>(
    net: &GenerativeNetwork<T>,
    pieces: &[ActivationPiece<T>],
    samples: usize,
    seed: u64,
    tol: T,
) -> Result<ExpansionReport> {
    let spans: Vec<Matrix<T>> = pieces.iter().map(piece_span).collect();
    let mut r = rng::stream(seed, 0);
    let mut report = ExpansionReport {
        samples,
        ..Default::default()
    };
    let mut last_in_piece: Vec<Option<Vec<T>>> = vec![None; pieces.len()];
    for _ in 0..samples {
        let z: Vec<T> = rng::gaussian_vec(&mut r, net.latent_dim());
        let x = net.forward(&z)?;
        let pattern = net.activation_pattern(&z)?;
        let Some(i) = pieces.iter().position(|p| p.pattern == pattern) else {
            report.unassigned += 1;
            continue;
        };
        let lin = pieces[i].effective_map.matvec(&z);
        let scale = T::one().max(norm2(&x));
        if norm2(&crate::linalg::sub(&x, &lin)) > tol * scale
            || residual(&spans[i], &x) > tol * scale
        {
            report.unassigned += 1;
            continue;
        }
        if let Some(prev) = &last_in_piece[i] {
            let d = crate::linalg::sub(&x, prev);
            report.differences_tested += 1;
            if residual(&spans[i], &d) > tol * T::one().max(norm2(&d)) {
                report.difference_violations += 1;
            }
        }
        last_in_piece[i] = Some(x);
    }
    Ok(report)
}

/// `‖x − Q Qᵀ x‖₂` for orthonormal `Q`.
fn residual<T: Real>(q: &Matrix<T>, x: &[T]) -> T {
    let c = q.matvec_t(x);
    let proj = q.matvec(&c);
    norm2(&crate::linalg::sub(x, &proj))
}
