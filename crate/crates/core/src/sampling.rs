//! Sampling distributions over the rows of `F`, with-replacement row
//! draws, the diagonal preconditioner and sample-complexity bounds.

use rand::Rng;

use crate::coherence::CoherenceVector;
use crate::error::{check_len, Error, Result};
use crate::rng;
use crate::Real;

/// Probability vector `p ∈ Δ^{n-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityVector<T> {
    p: Vec<T>,
}

impl<T: Real> ProbabilityVector<T> {
    /// Accepts `p` when all entries are finite, nonnegative and sum to one
    /// within `1e-12` (or a few ulps per entry in single precision).
    pub fn new(p: Vec<T>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::InvalidProbability("empty vector".into()));
        }
        if let Some(j) = p.iter().position(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::InvalidProbability(format!(
                "entry {} is {}",
                j + 1,
                p[j]
            )));
        }
        let total: f64 = p.iter().map(|v| v.as_f64()).sum();
        let tol = 1e-12f64.max(T::epsilon().as_f64() * 4.0 * p.len() as f64);
        if (total - 1.0).abs() > tol {
            return Err(Error::InvalidProbability(format!(
                "entries sum to {total}, not 1"
            )));
        }
        Ok(Self { p })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidProbability("empty vector".into()));
        }
        Ok(Self {
            p: vec![T::one() / T::from_usize_lossy(n); n],
        })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.p
    }

    pub fn get(&self, j: usize) -> T {
        self.p[j]
    }
}

/// Adapted probabilities `p*_j = α_j² / ‖α‖₂²`.
pub fn optimal_probabilities<T: Real>(alpha: &CoherenceVector<T>) -> Result<ProbabilityVector<T>> {
    let sq: Vec<f64> = alpha.alpha.iter().map(|a| a.as_f64().powi(2)).collect();
    let total: f64 = sq.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidProbability(
            "coherence vector is identically zero".into(),
        ));
    }
    ProbabilityVector::new(sq.iter().map(|s| T::c(s / total)).collect())
}

/// `µ(α, p) = max_j α_j / √p_j`, with `0/0 = 0` and `a/0 = +∞` for `a > 0`.
pub fn mu<T: Real>(alpha: &[T], p: &ProbabilityVector<T>) -> Result<T> {
    check_len("probability vector", alpha.len(), p.len())?;
    let mut worst = T::zero();
    for (&a, &pj) in alpha.iter().zip(p.as_slice()) {
        let r = if pj > T::zero() {
            a / pj.sqrt()
        } else if a > T::zero() {
            T::infinity()
        } else {
            T::zero()
        };
        worst = worst.max(r);
    }
    Ok(worst)
}

#[derive(Clone, Debug)]
pub struct OptimalityReport<T> {
    pub trials: usize,
    pub mu_star: T,
    pub alpha_norm: T,
    /// Smallest `µ(α, p) − µ(α, p*)` seen.
    pub min_gap: T,
    /// Trials with `µ(α, p) < µ(α, p*) − 1e-12`.
    pub violations: usize,
}

impl<T: Real> OptimalityReport<T> {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Compares `µ(α, p*)` against `µ(α, p)` for `trials` uniformly random
/// points `p` of the simplex.
pub fn verify_p_star_optimality<T: Real>(
    alpha: &CoherenceVector<T>,
    trials: usize,
    seed: u64,
) -> Result<OptimalityReport<T>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let p_star = optimal_probabilities(alpha)?;
    let mu_star = mu(&alpha.alpha, &p_star)?;
    let mut r = rng::stream(seed, 0);
    let mut violations = 0;
    let mut min_gap = T::infinity();
    for _ in 0..trials {
        let q: Vec<T> = rng::simplex_point(&mut r, alpha.len())
            .into_iter()
            .map(T::c)
            .collect();
        let q = ProbabilityVector::new(q)?;
        let gap = mu(&alpha.alpha, &q)? - mu_star;
        min_gap = min_gap.min(gap);
        if gap < -T::c(1e-12) {
            violations += 1;
        }
    }
    Ok(OptimalityReport {
        trials,
        mu_star,
        alpha_norm: alpha.norm(),
        min_gap,
        violations,
    })
}

/// The rows selected by a sampling matrix `S` (`S e_i = e_{indices[i]}`),
/// together with the distribution they were drawn from.
#[derive(Clone, Debug, PartialEq)]
pub struct SamplingPlan<T> {
    indices: Vec<usize>,
    p: ProbabilityVector<T>,
    seed: u64,
}

impl<T: Real> SamplingPlan<T> {
    /// Plan from explicit row choices (0-based).
    pub fn from_indices(indices: Vec<usize>, p: ProbabilityVector<T>, seed: u64) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::InvalidArgument("a plan needs m >= 1 rows".into()));
        }
        if let Some(&bad) = indices.iter().find(|&&j| j >= p.len()) {
            return Err(Error::InvalidArgument(format!(
                "row index {bad} out of range for n = {}",
                p.len()
            )));
        }
        Ok(Self { indices, p, seed })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn probabilities(&self) -> &ProbabilityVector<T> {
        &self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of measurements `m`.
    pub fn m(&self) -> usize {
        self.indices.len()
    }

    /// Ambient dimension `n`.
    pub fn n(&self) -> usize {
        self.p.len()
    }
}

/// Inverse-CDF sampler on a prefix-sum table. A uniform `u ∈ (0, 1]`
/// selects the first row whose cumulative probability is `≥ u`, which
/// never lands on a zero-probability row.
#[derive(Clone, Debug)]
pub struct CategoricalSampler {
    cdf: Vec<f64>,
}

impl CategoricalSampler {
    pub fn new<T: Real>(p: &ProbabilityVector<T>) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = p
            .as_slice()
            .iter()
            .map(|v| {
                acc += v.as_f64();
                acc
            })
            .collect();
        let last = p
            .as_slice()
            .iter()
            .rposition(|v| *v > T::zero())
            .expect("probability vector has positive mass");
        cdf[last..].iter_mut().for_each(|c| *c = 1.0);
        Self { cdf }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u = 1.0 - rng.random::<f64>();
        self.cdf.partition_point(|&c| c < u)
    }
}

/// `m` i.i.d. rows drawn from `p` with replacement.
pub fn draw_plan<T: Real>(
    p: &ProbabilityVector<T>,
    m: usize,
    seed: u64,
) -> Result<SamplingPlan<T>> {
    if m == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let sampler = CategoricalSampler::new(p);
    let mut r = rng::stream(seed, 0);
    let indices = (0..m).map(|_| sampler.sample(&mut r)).collect();
    SamplingPlan::from_indices(indices, p.clone(), seed)
}

/// Per-block sampling: the rows are split into `blocks` contiguous blocks
/// of equal size and `m_per_block` rows are drawn within each block from
/// `p` restricted and renormalised to the block. The plan records the
/// marginal row probability of a uniformly chosen draw, so that the
/// preconditioner stays consistent. This mirrors channel-wise sampling of
/// multi-channel images and is not covered by the recovery guarantee.
pub fn draw_block_plan<T: Real>(
    p: &ProbabilityVector<T>,
    blocks: usize,
    m_per_block: usize,
    seed: u64,
) -> Result<SamplingPlan<T>> {
    let n = p.len();
    if blocks == 0 || !n.is_multiple_of(blocks) {
        return Err(Error::InvalidArgument(format!(
            "{blocks} blocks do not evenly divide n = {n}"
        )));
    }
    if m_per_block == 0 {
        return Err(Error::InvalidArgument("m must be at least 1".into()));
    }
    let size = n / blocks;
    let mut marginal = vec![T::zero(); n];
    let mut indices = Vec::with_capacity(blocks * m_per_block);
    for b in 0..blocks {
        let block = &p.as_slice()[b * size..(b + 1) * size];
        let mass: f64 = block.iter().map(|v| v.as_f64()).sum();
        if !(mass > 0.0) {
            return Err(Error::InvalidProbability(format!(
                "block {} has no mass",
                b + 1
            )));
        }
        let local: Vec<T> = block.iter().map(|v| T::c(v.as_f64() / mass)).collect();
        let local = ProbabilityVector::new(local)?;
        let sub = draw_plan(&local, m_per_block, rng::derive_seed(seed, &[b as u64]))?;
        indices.extend(sub.indices().iter().map(|j| j + b * size));
        for (j, v) in local.as_slice().iter().enumerate() {
            marginal[b * size + j] = *v / T::from_usize_lossy(blocks);
        }
    }
    SamplingPlan::from_indices(indices, ProbabilityVector::new(marginal)?, seed)
}

/// Diagonal preconditioner: `D = diag(1/√p)` over all rows and its
/// restriction `D̃` to the sampled rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Preconditioner<T> {
    /// `1/√p_j` for every row (0 where `p_j = 0`).
    pub d_full: Vec<T>,
    /// `d_full[indices[i]]` for every sampled row `i`.
    pub d_sub: Vec<T>,
}

pub fn build_preconditioner<T: Real>(plan: &SamplingPlan<T>) -> Result<Preconditioner<T>> {
    let p = plan.probabilities().as_slice();
    let d_full: Vec<T> = p
        .iter()
        .map(|&v| {
            if v > T::zero() {
                T::one() / v.sqrt()
            } else {
                T::zero()
            }
        })
        .collect();
    let d_sub = plan
        .indices()
        .iter()
        .map(|&j| {
            if p[j] > T::zero() {
                Ok(d_full[j])
            } else {
                Err(Error::ZeroProbabilityRow { index: j + 1 })
            }
        })
        .collect::<Result<Vec<T>>>()?;
    Ok(Preconditioner { d_full, d_sub })
}

fn check_bound_args(k: usize, d: usize, n: usize, eps: f64, c: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be in (0, 1), got {eps}"
        )));
    }
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "need 0 < k < n, got k = {k}, n = {n}"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("depth must be at least 1".into()));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "constant C must be positive, got {c}"
        )));
    }
    Ok(())
}

/// `⌈C ‖α‖₂² (k d ln(n/k) + ln(2/ε))⌉`.
pub fn sample_complexity(
    alpha_norm_sq: f64,
    k: usize,
    d: usize,
    n: usize,
    eps: f64,
    c: f64,
) -> Result<usize> {
    check_bound_args(k, d, n, eps, c)?;
    if !(alpha_norm_sq > 0.0) || !alpha_norm_sq.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "‖α‖² must be positive and finite, got {alpha_norm_sq}"
        )));
    }
    let complexity = (k * d) as f64 * (n as f64 / k as f64).ln() + (2.0 / eps).ln();
    Ok((c * alpha_norm_sq * complexity).ceil() as usize)
}

/// Bound for an arbitrary sampling distribution: `‖α‖₂²` is replaced by
/// `µ(α, p)²`. Infinite `µ` is an error.
pub fn sample_complexity_mu(
    mu: f64,
    k: usize,
    d: usize,
    n: usize,
    eps: f64,
    c: f64,
) -> Result<usize> {
    if !mu.is_finite() {
        return Err(Error::InvalidArgument(
            "µ is infinite: p vanishes on a coherent row".into(),
        ));
    }
    sample_complexity(mu * mu, k, d, n, eps, c)
}
