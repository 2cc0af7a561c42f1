//! `(k, d, n)` ReLU generative networks.
//!
//! A network maps a latent code `z ∈ ℝᵏ` to `W_d σ(⋯ W_2 σ(W_1 z))` with
//! `σ = max(·, 0)` applied between layers but not after the last one. It
//! has no biases, so it is positively homogeneous and its range is a finite
//! union of polyhedral cones (see [`pieces`]).

pub mod pieces;

use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::linalg::Matrix;
use crate::rng;
use crate::Real;

pub use pieces::{enumerate_pieces, ActivationPiece, EnumerationMode, MAX_EXHAUSTIVE_HIDDEN};

#[derive(Clone, Debug, PartialEq)]
pub struct GenerativeNetwork<T> {
    widths: Vec<usize>,
    weights: Vec<Matrix<T>>,
}

/// Pre-activations recorded by a forward pass, reused by [`GenerativeNetwork::backward`].
#[derive(Clone, Debug, Default)]
pub struct ForwardTrace<T> {
    /// Pre-activation of every hidden layer (layers `1..d`).
    pub hidden: Vec<Vec<T>>,
    pub output: Vec<T>,
}

pub fn validate_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 {
        return Err(Error::InvalidWidths(format!(
            "need at least two widths (depth d >= 1), got {widths:?}"
        )));
    }
    if widths[0] < 2 {
        return Err(Error::InvalidWidths(format!(
            "latent dimension must be at least 2, got {}",
            widths[0]
        )));
    }
    if let Some(pos) = widths.iter().position(|&w| w == 0) {
        return Err(Error::InvalidWidths(format!("width {pos} is zero")));
    }
    Ok(())
}

impl<T: Real> GenerativeNetwork<T> {
    pub fn new(widths: Vec<usize>, weights: Vec<Matrix<T>>) -> Result<Self> {
        validate_widths(&widths)?;
        if weights.len() != widths.len() - 1 {
            return Err(Error::InvalidWidths(format!(
                "{} widths need {} weight matrices, got {}",
                widths.len(),
                widths.len() - 1,
                weights.len()
            )));
        }
        for (i, w) in weights.iter().enumerate() {
            if w.rows() != widths[i + 1] || w.cols() != widths[i] {
                return Err(Error::InvalidWidths(format!(
                    "layer {} weight is {}x{}, expected {}x{}",
                    i + 1,
                    w.rows(),
                    w.cols(),
                    widths[i + 1],
                    widths[i]
                )));
            }
        }
        Ok(Self { widths, weights })
    }

    /// Single linear layer `G(z) = W z`.
    pub fn linear(w: Matrix<T>) -> Result<Self> {
        Self::new(vec![w.cols(), w.rows()], vec![w])
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn weights(&self) -> &[Matrix<T>] {
        &self.weights
    }

    /// Latent dimension `k`.
    pub fn latent_dim(&self) -> usize {
        self.widths[0]
    }

    /// Ambient dimension `n`.
    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    /// Number of layers `d`.
    pub fn depth(&self) -> usize {
        self.weights.len()
    }

    /// Total number of ReLU units (all layers but the last).
    pub fn hidden_units(&self) -> usize {
        self.widths[1..self.widths.len() - 1].iter().sum()
    }

    pub fn forward(&self, z: &[T]) -> Result<Vec<T>> {
        check_len("latent code", self.latent_dim(), z.len())?;
        let mut h = z.to_vec();
        for (i, w) in self.weights.iter().enumerate() {
            h = w.matvec(&h);
            if i + 1 < self.weights.len() {
                h.iter_mut().for_each(|v| *v = v.max(T::zero()));
            }
        }
        Ok(h)
    }

    /// Forward pass that records hidden pre-activations into `trace`,
    /// reusing its buffers.
    pub fn forward_into(&self, z: &[T], trace: &mut ForwardTrace<T>) -> Result<()> {
        check_len("latent code", self.latent_dim(), z.len())?;
        let d = self.depth();
        trace.hidden.resize(d - 1, Vec::new());
        let mut act = z.to_vec();
        for (i, w) in self.weights.iter().enumerate() {
            let out = (0..w.rows()).map(|r| crate::linalg::dot(w.row(r), &act));
            if i + 1 < d {
                let pre = &mut trace.hidden[i];
                pre.clear();
                pre.extend(out);
                act.clear();
                act.extend(pre.iter().map(|v| v.max(T::zero())));
            } else {
                trace.output.clear();
                trace.output.extend(out);
            }
        }
        Ok(())
    }

    /// `Jᵀ · cotangent` at the point recorded in `trace`, with `σ'(0) = 0`.
    pub fn backward(&self, trace: &ForwardTrace<T>, cotangent: &[T]) -> Result<Vec<T>> {
        check_len("cotangent", self.output_dim(), cotangent.len())?;
        let mut g = cotangent.to_vec();
        for i in (0..self.depth()).rev() {
            g = self.weights[i].matvec_t(&g);
            if i > 0 {
                for (gv, &pre) in g.iter_mut().zip(&trace.hidden[i - 1]) {
                    if pre <= T::zero() {
                        *gv = T::zero();
                    }
                }
            }
        }
        Ok(g)
    }

    /// Gradient of `⟨cotangent, G(z)⟩` with respect to `z`, i.e. `J(z)ᵀ · cotangent`.
    /// At ReLU kinks the subgradient `σ'(0) = 0` is used.
    pub fn latent_gradient(&self, z: &[T], cotangent: &[T]) -> Result<Vec<T>> {
        check_len("cotangent", self.output_dim(), cotangent.len())?;
        let mut trace = ForwardTrace::default();
        self.forward_into(z, &mut trace)?;
        self.backward(&trace, cotangent)
    }

    /// On/off state of every hidden unit at `z` (unit is on iff its
    /// pre-activation is strictly positive).
    pub fn activation_pattern(&self, z: &[T]) -> Result<Vec<bool>> {
        let mut trace = ForwardTrace::default();
        self.forward_into(z, &mut trace)?;
        Ok(trace
            .hidden
            .iter()
            .flat_map(|layer| layer.iter().map(|&v| v > T::zero()))
            .collect())
    }

    /// Linear map `n × k` that `G` agrees with on the cone of codes
    /// having activation `pattern`.
    pub fn effective_map(&self, pattern: &[bool]) -> Result<Matrix<T>> {
        check_len("activation pattern", self.hidden_units(), pattern.len())?;
        let mut map = self.weights[0].clone();
        let mut offset = 0;
        for w in &self.weights[1..] {
            let width = map.rows();
            for r in 0..width {
                if !pattern[offset + r] {
                    map.row_mut(r).iter_mut().for_each(|v| *v = T::zero());
                }
            }
            offset += width;
            map = w.matmul(&map);
        }
        Ok(map)
    }
}

/// I.i.d. Gaussian weights with variance `1 / k_{i-1}` in layer `i`.
/// `n` is the declared ambient dimension and must equal the last width.
pub fn random_gaussian_init<T: Real>(
    widths: &[usize],
    n: usize,
    seed: u64,
) -> Result<GenerativeNetwork<T>> {
    validate_widths(widths)?;
    if *widths.last().unwrap() != n {
        return Err(Error::InvalidWidths(format!(
            "last width {} differs from declared n = {n}",
            widths.last().unwrap()
        )));
    }
    let mut rng = rng::stream(seed, 0);
    let weights = widths
        .windows(2)
        .map(|w| gaussian_layer(&mut rng, w[1], w[0]))
        .collect();
    GenerativeNetwork::new(widths.to_vec(), weights)
}

fn gaussian_layer<T: Real, R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Matrix<T> {
    let scale = T::one() / T::from_usize_lossy(cols).sqrt();
    Matrix::from_fn(rows, cols, |_, _| rng::gaussian::<T, _>(rng) * scale)
}

/// Frequencies `0, 1, 2, …` whose DFT rows (`f` and `n − f`) fit within
/// `max_rows` rows in total.
pub fn low_frequencies(n: usize, max_rows: usize) -> Vec<usize> {
    let mut freqs = Vec::new();
    let mut used = 0;
    for f in 0..=n / 2 {
        let rows = if f == 0 || 2 * f == n { 1 } else { 2 };
        if used + rows > max_rows {
            break;
        }
        used += rows;
        freqs.push(f);
    }
    freqs
}

/// Real orthonormal basis (`n × r`) of the real signals whose DFT is
/// supported on the rows of the given frequencies.
pub fn fourier_basis<T: Real>(n: usize, freqs: &[usize]) -> Matrix<T> {
    let mut cols: Vec<Vec<T>> = Vec::new();
    let two_pi = T::c(2.0) * T::PI();
    let nf = T::from_usize_lossy(n);
    for &f in freqs {
        let angle = |l: usize| two_pi * T::from_usize_lossy((f * l) % n) / nf;
        let mut c: Vec<T> = (0..n).map(|l| angle(l).cos()).collect();
        normalize(&mut c);
        cols.push(c);
        if f != 0 && 2 * f != n {
            let mut s: Vec<T> = (0..n).map(|l| angle(l).sin()).collect();
            normalize(&mut s);
            cols.push(s);
        }
    }
    Matrix::from_columns(n, &cols).expect("columns have length n")
}

fn normalize<T: Real>(v: &mut [T]) {
    let nv = crate::linalg::norm2(v);
    v.iter_mut().for_each(|x| *x = *x / nv);
}

/// Gaussian network whose last layer maps into the span of the lowest
/// Fourier frequencies, so that the range is coherent with at most
/// `max_rows` rows of the unitary DFT.
pub fn lowpass_gaussian_init<T: Real>(
    widths: &[usize],
    n: usize,
    max_rows: usize,
    seed: u64,
) -> Result<GenerativeNetwork<T>> {
    let base = random_gaussian_init::<T>(widths, n, seed)?;
    let freqs = low_frequencies(n, max_rows);
    if freqs.is_empty() {
        return Err(Error::InvalidArgument(
            "lowpass prior needs at least one DFT row".into(),
        ));
    }
    let basis = fourier_basis::<T>(n, &freqs);
    let mut rng = rng::stream(seed, 1);
    let prev = widths[widths.len() - 2];
    let mix = gaussian_layer::<T, _>(&mut rng, basis.cols(), prev);
    let mut weights = base.weights;
    *weights.last_mut().unwrap() = basis.matmul(&mix);
    GenerativeNetwork::new(widths.to_vec(), weights)
}

/// Upper bound on `log N` for the number `N` of linear pieces:
/// `k (d − 1) ln(2e k̄ / k)` with `k̄` the geometric mean of the hidden
/// widths. Zero for a network without hidden layers.
pub fn piece_count_bound(widths: &[usize]) -> f64 {
    if widths.len() <= 2 {
        return 0.0;
    }
    let k = widths[0] as f64;
    let hidden = &widths[1..widths.len() - 1];
    let log_kbar = hidden.iter().map(|&w| (w as f64).ln()).sum::<f64>() / hidden.len() as f64;
    let d = (widths.len() - 1) as f64;
    k * (d - 1.0) * ((2.0 * std::f64::consts::E).ln() + log_kbar - k.ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(n: usize) -> Matrix<f64> {
        Matrix::identity(n)
    }

    /// Straight-line reimplementation of the forward recursion.
    fn reference_forward(net: &GenerativeNetwork<f64>, z: &[f64]) -> Vec<f64> {
        let mut h = z.to_vec();
        let d = net.weights().len();
        for (l, w) in net.weights().iter().enumerate() {
            let mut next = vec![0.0; w.rows()];
            for (i, slot) in next.iter_mut().enumerate() {
                let mut acc = 0.0;
                for (j, hj) in h.iter().enumerate() {
                    acc += w[(i, j)] * hj;
                }
                *slot = if l + 1 < d && acc < 0.0 { 0.0 } else { acc };
            }
            h = next;
        }
        h
    }

    #[test]
    fn single_identity_layer_is_identity() {
        let net = GenerativeNetwork::linear(identity(3)).unwrap();
        let z = [-1.5, 0.25, 2.0];
        assert_eq!(net.forward(&z).unwrap(), z.to_vec());
    }

    #[test]
    fn relu_between_identity_layers() {
        let net = GenerativeNetwork::new(vec![2, 2, 2], vec![identity(2), identity(2)]).unwrap();
        assert_eq!(net.forward(&[-1.0, 2.0]).unwrap(), vec![0.0, 2.0]);
    }

    #[test]
    fn forward_matches_reference_on_random_net() {
        let net = random_gaussian_init::<f64>(&[3, 8, 8, 16], 16, 11).unwrap();
        let mut r = rng::stream(5, 0);
        for _ in 0..20 {
            let z: Vec<f64> = rng::gaussian_vec(&mut r, 3);
            let got = net.forward(&z).unwrap();
            let want = reference_forward(&net, &z);
            let err = crate::linalg::norm2(&crate::linalg::sub(&got, &want));
            assert!(err <= 1e-12 * crate::linalg::norm2(&want).max(1e-300));
        }
    }

    #[test]
    fn forward_into_matches_forward() {
        let net = random_gaussian_init::<f64>(&[3, 5, 7, 9], 9, 2).unwrap();
        let mut trace = ForwardTrace::default();
        let z = [0.3, -0.2, 1.1];
        net.forward_into(&z, &mut trace).unwrap();
        assert_eq!(trace.output, net.forward(&z).unwrap());
        assert_eq!(trace.hidden.len(), 2);
        assert_eq!(trace.hidden[1].len(), 7);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let net = random_gaussian_init::<f64>(&[2, 4, 8], 8, 0).unwrap();
        assert!(matches!(
            net.forward(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(net.latent_gradient(&[1.0, 2.0], &[1.0; 3]).is_err());
    }

    #[test]
    fn linear_gradient_is_transpose() {
        let w = Matrix::from_row_major(3, 2, vec![1.0, 2.0, -1.0, 0.5, 3.0, -2.0]).unwrap();
        let net = GenerativeNetwork::linear(w.clone()).unwrap();
        let cot = [0.5, -1.0, 2.0];
        assert_eq!(
            net.latent_gradient(&[0.7, -0.1], &cot).unwrap(),
            w.matvec_t(&cot)
        );
    }

    #[test]
    fn gradient_at_origin_uses_zero_subgradient() {
        let net = random_gaussian_init::<f64>(&[2, 6, 5], 5, 4).unwrap();
        let g = net.latent_gradient(&[0.0, 0.0], &[1.0; 5]).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let net = random_gaussian_init::<f64>(&[3, 8, 8, 16], 16, 3).unwrap();
        let mut r = rng::stream(8, 0);
        let mut checked = 0;
        while checked < 10 {
            let z: Vec<f64> = rng::gaussian_vec(&mut r, 3);
            let mut trace = ForwardTrace::default();
            net.forward_into(&z, &mut trace).unwrap();
            let kink_free = trace.hidden.iter().flatten().all(|v| v.abs() >= 1e-3);
            if !kink_free {
                continue;
            }
            let cot: Vec<f64> = rng::gaussian_vec(&mut r, 16);
            let g = net.backward(&trace, &cot).unwrap();
            let h = 1e-6;
            let fd: Vec<f64> = (0..3)
                .map(|i| {
                    let mut zp = z.clone();
                    let mut zm = z.clone();
                    zp[i] += h;
                    zm[i] -= h;
                    let fp = crate::linalg::dot(&net.forward(&zp).unwrap(), &cot);
                    let fm = crate::linalg::dot(&net.forward(&zm).unwrap(), &cot);
                    (fp - fm) / (2.0 * h)
                })
                .collect();
            let rel =
                crate::linalg::norm2(&crate::linalg::sub(&g, &fd)) / crate::linalg::norm2(&fd);
            assert!(rel < 1e-5, "relative error {rel}");
            checked += 1;
        }
    }

    #[test]
    fn positive_homogeneity() {
        let mut r = rng::stream(12, 0);
        for trial in 0..100 {
            let net = random_gaussian_init::<f64>(&[3, 6, 10], 10, trial).unwrap();
            let z: Vec<f64> = rng::gaussian_vec(&mut r, 3);
            let t = rng::gaussian::<f64, _>(&mut r).abs() * 3.0;
            let gz = net.forward(&z).unwrap();
            let gtz = net
                .forward(&z.iter().map(|v| v * t).collect::<Vec<_>>())
                .unwrap();
            let diff: Vec<f64> = gtz.iter().zip(&gz).map(|(a, b)| a - t * b).collect();
            assert!(crate::linalg::norm2(&diff) <= 1e-10 * crate::linalg::norm2(&gz) * t.max(1.0));
        }
        let net = random_gaussian_init::<f64>(&[3, 6, 10], 10, 0).unwrap();
        assert!(net.forward(&[0.0; 3]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gaussian_init_is_deterministic() {
        let a = random_gaussian_init::<f64>(&[2, 4, 8], 8, 7).unwrap();
        let b = random_gaussian_init::<f64>(&[2, 4, 8], 8, 7).unwrap();
        assert_eq!(a, b);
        let c = random_gaussian_init::<f64>(&[2, 4, 8], 8, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn gaussian_init_first_layer_variance() {
        // Entries of W1 for widths (2,4,8) have variance 1/2. Pool the
        // column variance estimate over 10^4 resamples and compare with
        // the Monte-Carlo standard error of a Gaussian variance estimate.
        let resamples = 10_000u64;
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for seed in 0..resamples {
            let net = random_gaussian_init::<f64>(&[2, 4, 8], 8, seed).unwrap();
            for &v in net.weights()[0].as_slice() {
                sum_sq += v * v;
                count += 1;
            }
        }
        let var = sum_sq / count as f64;
        // Var(x²) = 2σ⁴ for centred Gaussians.
        let se = (2.0 * 0.25 / count as f64).sqrt();
        assert!((var - 0.5).abs() < 3.0 * se, "variance {var}, se {se}");
    }

    #[test]
    fn gaussian_init_rejects_inconsistent_widths() {
        assert!(random_gaussian_init::<f64>(&[2, 4, 8], 16, 0).is_err());
        assert!(random_gaussian_init::<f64>(&[1, 4, 8], 8, 0).is_err());
        assert!(random_gaussian_init::<f64>(&[8], 8, 0).is_err());
    }

    #[test]
    fn network_constructor_checks_shapes() {
        let bad = GenerativeNetwork::new(vec![2, 3], vec![Matrix::<f64>::zeros(2, 3)]);
        assert!(matches!(bad, Err(Error::InvalidWidths(_))));
    }

    #[test]
    fn piece_bound_values() {
        assert_eq!(piece_count_bound(&[4, 16]), 0.0);
        let four_e = 4.0 * (4.0 * std::f64::consts::E).ln();
        assert!((piece_count_bound(&[2, 4, 4, 9]) - four_e).abs() < 1e-12);
        assert!((piece_count_bound(&[4, 8, 64]) - four_e).abs() < 1e-12);
        assert!((four_e - 9.5452).abs() < 1e-4);
        assert_eq!(four_e.exp().floor(), 13977.0);
    }

    #[test]
    fn low_frequencies_respect_row_budget() {
        assert_eq!(low_frequencies(256, 8), vec![0, 1, 2, 3]);
        assert_eq!(low_frequencies(4, 4), vec![0, 1, 2]);
        assert_eq!(low_frequencies(256, 1), vec![0]);
    }

    #[test]
    fn fourier_basis_is_orthonormal() {
        let b = fourier_basis::<f64>(16, &[0, 1, 2, 8]);
        assert_eq!(b.cols(), 6);
        assert!(b.orthonormality_defect() < 1e-13);
    }

    #[test]
    fn effective_map_matches_forward_at_point() {
        let net = random_gaussian_init::<f64>(&[3, 5, 4, 7], 7, 21).unwrap();
        let z = [0.4, -1.2, 0.9];
        let pattern = net.activation_pattern(&z).unwrap();
        let map = net.effective_map(&pattern).unwrap();
        let got = map.matvec(&z);
        let want = net.forward(&z).unwrap();
        assert!(crate::linalg::norm2(&crate::linalg::sub(&got, &want)) < 1e-12);
    }
}
