//! Empirical checks of the recovery theory: restricted isometry of the
//! subsampled preconditioned operator on subspaces and on the prior cone,
//! isotropy and boundedness of the sampled rows, and the end-to-end error
//! bound.

use std::fmt;

use num_complex::Complex;
use rayon::prelude::*;

use crate::coherence::{
    coherence_exact_pieces, coherence_exact_subspace, coherence_heuristic, for_each_pair_span,
    transform_columns,
};
use crate::error::{check_len, Error, Result};
use crate::generative_model::{
    enumerate_pieces, ActivationPiece, EnumerationMode, GenerativeNetwork,
};
use crate::linalg::{hermitian_eigenvalues, norm2, sub, symmetric_eigenvalues, Matrix};
use crate::recovery::{error_bound_rhs, measure, recover, MeasurementSet, RecoveryConfig};
use crate::rng;
use crate::sampling::{
    build_preconditioner, draw_plan, mu, optimal_probabilities, sample_complexity,
    CategoricalSampler, Preconditioner, ProbabilityVector, SamplingPlan,
};
use crate::transform::UnitaryOperator;
use crate::Real;

/// Default RIP constant.
pub const RIP_THRESHOLD: f64 = 1.0 / 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct DeviationReport<T> {
    /// Largest deviation `|(1/√m)‖S D F x‖ − 1|` found.
    pub estimate: T,
    /// Number of subspaces or probes evaluated.
    pub samples: usize,
    /// Deviation per evaluated subspace or probe.
    pub deviations: Vec<T>,
    pub threshold: T,
    pub passed: bool,
}

impl<T: Real> DeviationReport<T> {
    fn from_deviations(deviations: Vec<T>, threshold: T) -> Self {
        let estimate = deviations.iter().fold(T::zero(), |a, &b| a.max(b));
        Self {
            estimate,
            samples: deviations.len(),
            passed: estimate <= threshold,
            deviations,
            threshold,
        }
    }
}

impl<T: Real> fmt::Display for DeviationReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "deviation {} over {} evaluations (threshold {}): {}",
            self.estimate,
            self.samples,
            self.threshold,
            if self.passed { "pass" } else { "fail" }
        )
    }
}

/// Rows of `(1/√m) d̃ ⊙ (F Q)_S` for `F Q` given by columns.
fn sampled_rows<T: Real>(
    fq: &[Vec<Complex<T>>],
    plan: &SamplingPlan<T>,
    precond: &Preconditioner<T>,
) -> Vec<Vec<Complex<T>>> {
    let s = T::one() / T::from_usize_lossy(plan.m()).sqrt();
    fq.iter()
        .map(|col| {
            plan.indices()
                .iter()
                .zip(&precond.d_sub)
                .map(|(&j, &d)| col[j].scale(d * s))
                .collect()
        })
        .collect()
}

/// Exact deviation on `span(Q)` for real signals: with `A` the sampled
/// matrix, `‖A Q c‖² = cᵀ Re(Aᴴ A) c`, so the extreme values of
/// `‖A x‖` over unit `x` are the square roots of the extreme eigenvalues.
fn gram_deviation<T: Real>(cols: &[Vec<Complex<T>>]) -> T {
    let r = cols.len();
    if r == 0 {
        return T::zero();
    }
    let gram = Matrix::from_fn(r, r, |a, b| {
        cols[a]
            .iter()
            .zip(&cols[b])
            .map(|(u, v)| (u.conj() * v).re)
            .sum::<T>()
    });
    let ev = symmetric_eigenvalues(&gram);
    let lo = ev[0].max(T::zero()).sqrt();
    let hi = ev[r - 1].max(T::zero()).sqrt();
    (hi - T::one()).abs().max((lo - T::one()).abs())
}

fn check_plan<T: Real>(
    plan: &SamplingPlan<T>,
    precond: &Preconditioner<T>,
    op: &UnitaryOperator<T>,
) -> Result<()> {
    check_len("plan dimension", op.n(), plan.n())?;
    check_len("preconditioner", plan.m(), precond.d_sub.len())
}

/// Exact deviation on the subspace spanned by the orthonormal columns of
/// `basis`, via the Gram matrix. When `probes > 0`, that many random unit
/// vectors of the subspace are evaluated as well and reported in
/// `deviations` after the exact value.
pub fn rip_deviation_subspace<T: Real>(
    plan: &SamplingPlan<T>,
    precond: &Preconditioner<T>,
    op: &UnitaryOperator<T>,
    basis: &Matrix<T>,
    probes: usize,
    seed: u64,
) -> Result<DeviationReport<T>> {
    check_plan(plan, precond, op)?;
    let defect = basis.orthonormality_defect();
    if !(defect <= T::c(1e-10)) {
        return Err(Error::NotOrthonormal(defect.as_f64()));
    }
    let fq = transform_columns(op, basis)?;
    let a = sampled_rows(&fq, plan, precond);
    let mut deviations = vec![gram_deviation(&a)];
    let mut r = rng::stream(seed, 0);
    let m = plan.m();
    for _ in 0..probes {
        let c: Vec<T> = rng::unit_vector(&mut r, basis.cols());
        let norm = (0..m)
            .map(|i| {
                a.iter()
                    .zip(&c)
                    .fold(Complex::<T>::default(), |acc, (col, &w)| {
                        acc + col[i].scale(w)
                    })
                    .norm_sqr()
            })
            .sum::<T>()
            .sqrt();
        deviations.push((norm - T::one()).abs());
    }
    Ok(DeviationReport::from_deviations(
        deviations,
        T::c(RIP_THRESHOLD),
    ))
}

/// Exact deviation over the expanded prior of an enumerated network: the
/// maximum of the Gram deviation over every pair span
/// `span(C_i) + span(C_i')`.
pub fn rip_deviation_cone_exact<T: Real>(
    plan: &SamplingPlan<T>,
    precond: &Preconditioner<T>,
    op: &UnitaryOperator<T>,
    pieces: &[ActivationPiece<T>],
) -> Result<DeviationReport<T>> {
    check_plan(plan, precond, op)?;
    let mut deviations = Vec::new();
    for_each_pair_span(op, pieces, |pair| {
        deviations.push(gram_deviation(&sampled_rows(
            &pair.transformed,
            plan,
            precond,
        )));
        Ok(())
    })?;
    Ok(DeviationReport::from_deviations(
        deviations,
        T::c(RIP_THRESHOLD),
    ))
}

/// Monte-Carlo lower bound on the cone deviation: all normalised pairwise
/// differences of `probes` range samples.
pub fn rip_deviation_cone_sampled<T: Real>(
    plan: &SamplingPlan<T>,
    precond: &Preconditioner<T>,
    op: &UnitaryOperator<T>,
    net: &GenerativeNetwork<T>,
    probes: usize,
    seed: u64,
) -> Result<DeviationReport<T>> {
    check_plan(plan, precond, op)?;
    check_len("network output dimension", op.n(), net.output_dim())?;
    let mut r = rng::stream(seed, 0);
    let s = T::one() / T::from_usize_lossy(plan.m()).sqrt();
    let mut points = Vec::with_capacity(probes);
    let mut rows = Vec::with_capacity(probes);
    for _ in 0..probes {
        let z: Vec<T> = rng::gaussian_vec(&mut r, net.latent_dim());
        let x = net.forward(&z)?;
        let fx = op.apply_real(&x)?;
        let y: Vec<Complex<T>> = plan
            .indices()
            .iter()
            .zip(&precond.d_sub)
            .map(|(&j, &d)| fx[j].scale(d * s))
            .collect();
        points.push(x);
        rows.push(y);
    }
    let per_point: Vec<Vec<T>> = (1..probes)
        .into_par_iter()
        .map(|a| {
            (0..a)
                .filter_map(|b| {
                    let dn = norm2(&sub(&points[a], &points[b]));
                    if dn == T::zero() {
                        return None;
                    }
                    let yn = rows[a]
                        .iter()
                        .zip(&rows[b])
                        .map(|(u, v)| (u - v).norm_sqr())
                        .sum::<T>()
                        .sqrt();
                    Some((yn / dn - T::one()).abs())
                })
                .collect()
        })
        .collect();
    Ok(DeviationReport::from_deviations(
        per_point.into_iter().flatten().collect(),
        T::c(RIP_THRESHOLD),
    ))
}

/// How the cone deviation is evaluated.
#[derive(Clone, Debug)]
pub enum ConeMethod<'a, T> {
    Exact(&'a [ActivationPiece<T>]),
    Sampled { probes: usize, seed: u64 },
}

pub fn rip_deviation_cone<T: Real>(
    plan: &SamplingPlan<T>,
    precond: &Preconditioner<T>,
    op: &UnitaryOperator<T>,
    net: &GenerativeNetwork<T>,
    method: ConeMethod<'_, T>,
) -> Result<DeviationReport<T>> {
    match method {
        ConeMethod::Exact(pieces) => rip_deviation_cone_exact(plan, precond, op, pieces),
        ConeMethod::Sampled { probes, seed } => {
            rip_deviation_cone_sampled(plan, precond, op, net, probes, seed)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IsotropyReport<T> {
    pub samples: usize,
    /// `µ_U(F, p)`.
    pub mu: T,
    /// Largest `‖v‖₂` over all draws.
    pub max_norm: T,
    /// Draws with `‖v‖₂ > µ + 1e-9`.
    pub norm_violations: usize,
    /// Operator-norm distance of the empirical `E[v v*]` to the identity.
    pub distance: T,
    /// `5 √(k / samples) µ²`.
    pub tolerance: T,
    pub passed: bool,
}

impl<T: Real> fmt::Display for IsotropyReport<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "isotropy distance {} (tolerance {}), max |v| {} vs mu {}, {} norm violations over {} draws: {}",
            self.distance,
            self.tolerance,
            self.max_norm,
            self.mu,
            self.norm_violations,
            self.samples,
            if self.passed { "pass" } else { "fail" }
        )
    }
}

/// Draws rows `J ~ p` and forms `v = P_U F* D e_J = p_J^{-1/2} P_U f_J`
/// in the coordinates of `basis`. Checks that the empirical mean of
/// `v v*` is close to the identity and that `‖v‖₂ ≤ µ_U(F, p)` always.
pub fn isotropy_check<T: Real>(
    p: &ProbabilityVector<T>,
    op: &UnitaryOperator<T>,
    basis: &Matrix<T>,
    samples: usize,
    seed: u64,
) -> Result<IsotropyReport<T>> {
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be at least 1".into()));
    }
    check_len("probability vector", op.n(), p.len())?;
    let alpha = coherence_exact_subspace(op, basis)?;
    let mu_u = mu(&alpha.alpha, p)?;
    if !mu_u.is_finite() {
        return Err(Error::InvalidProbability(
            "p vanishes on a row coherent with the subspace".into(),
        ));
    }
    let fq = transform_columns(op, basis)?;
    let k = basis.cols();
    let sampler = CategoricalSampler::new(p);
    let mut r = rng::stream(seed, 0);
    let mut re = vec![0.0f64; k * k];
    let mut im = vec![0.0f64; k * k];
    let mut max_norm = T::zero();
    let mut norm_violations = 0;
    let slack = T::c(1e-9);
    for _ in 0..samples {
        let j = sampler.sample(&mut r);
        let w = T::one() / p.get(j).sqrt();
        let v: Vec<Complex<T>> = fq.iter().map(|col| col[j].conj().scale(w)).collect();
        let nv = v.iter().map(|c| c.norm_sqr()).sum::<T>().sqrt();
        max_norm = max_norm.max(nv);
        if nv > mu_u + slack {
            norm_violations += 1;
        }
        for a in 0..k {
            for b in 0..k {
                let e = v[a] * v[b].conj();
                re[a * k + b] += e.re.as_f64();
                im[a * k + b] += e.im.as_f64();
            }
        }
    }
    let inv = 1.0 / samples as f64;
    let re = Matrix::from_fn(k, k, |a, b| {
        re[a * k + b] * inv - if a == b { 1.0 } else { 0.0 }
    });
    let im = Matrix::from_fn(k, k, |a, b| im[a * k + b] * inv);
    let distance = hermitian_eigenvalues(&re, &im)
        .into_iter()
        .fold(0.0f64, |acc, e| acc.max(e.abs()));
    let tolerance = 5.0 * (k as f64 / samples as f64).sqrt() * mu_u.as_f64().powi(2);
    Ok(IsotropyReport {
        samples,
        mu: mu_u,
        max_norm,
        norm_violations,
        distance: T::c(distance),
        tolerance: T::c(tolerance),
        passed: norm_violations == 0 && distance <= tolerance,
    })
}

/// Wilson score interval for `successes` out of `trials` at normal
/// quantile `z` (1.96 for 95%).
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (phat + z2 / (2.0 * n)) / denom;
    let half = z * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Settings for [`projection_onto_range`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionConfig {
    pub restarts: usize,
    pub iterations: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            restarts: 4,
            iterations: 20_000,
            lr: 0.003,
            seed: 0,
        }
    }
}

/// Approximate projection of `x0` onto the range of `net` by multi-restart
/// minimisation of `‖G(z) − x0‖₂`. The origin is always a candidate, so
/// `‖x_perp‖ ≤ ‖x0‖`. Returns `(x_proj, x_perp)`.
pub fn projection_onto_range<T: Real>(
    net: &GenerativeNetwork<T>,
    x0: &[T],
    config: &ProjectionConfig,
) -> Result<(Vec<T>, Vec<T>)> {
    let n = net.output_dim();
    check_len("signal", n, x0.len())?;
    if norm2(x0) == T::zero() {
        return Ok((vec![T::zero(); n], vec![T::zero(); n]));
    }
    let op = UnitaryOperator::identity(n);
    let p = ProbabilityVector::uniform(n)?;
    let plan = SamplingPlan::from_indices((0..n).collect(), p, 0)?;
    let precond = build_preconditioner(&plan)?;
    let eta = vec![Complex::default(); n];
    let meas = measure(x0, &plan, &op, &eta)?;
    let rc = RecoveryConfig {
        restarts: config.restarts,
        iterations: config.iterations,
        lr: T::c(config.lr),
        preconditioned: false,
        seed: config.seed,
        ..Default::default()
    };
    let res = recover(net, &op, &meas, &precond, &rc)?;
    let x_proj = if norm2(&sub(x0, &res.x_hat)) < norm2(x0) {
        res.x_hat
    } else {
        vec![T::zero(); n]
    };
    let x_perp = sub(x0, &x_proj);
    Ok((x_proj, x_perp))
}

/// Sampling distribution used by [`theorem1_end_to_end`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeKind {
    Uniform,
    Adapted,
}

/// Where the coherences come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoherenceSource {
    /// Enumerate pieces exhaustively; cone deviations are exact.
    ExactPieces,
    /// Monte-Carlo coherences and cone deviations.
    Heuristic { batch: usize, probes: usize },
}

#[derive(Clone, Debug)]
pub struct Theorem1Config {
    pub c: f64,
    pub eps: f64,
    pub trials: usize,
    pub seed: u64,
    pub rip_threshold: f64,
    pub coherence: CoherenceSource,
    pub scheme: SchemeKind,
    /// Overrides the computed sample complexity.
    pub m: Option<usize>,
    /// Run an in-range noiseless recovery on every passing realisation.
    pub check_bound: bool,
    pub recovery: RecoveryConfig<f64>,
}

impl Default for Theorem1Config {
    fn default() -> Self {
        Self {
            c: 1.0,
            eps: 0.1,
            trials: 20,
            seed: 0,
            rip_threshold: RIP_THRESHOLD,
            coherence: CoherenceSource::ExactPieces,
            scheme: SchemeKind::Adapted,
            m: None,
            check_bound: true,
            recovery: RecoveryConfig::default(),
        }
    }
}

/// Absolute slack, relative to `max(‖x₀‖, 1)`, allowed when comparing the
/// recovery error with the bound in floating point.
pub const BOUND_ROUNDOFF: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundCheck {
    /// `‖x̂ − x₀‖₂`.
    pub error: f64,
    pub rhs: f64,
    /// `error ≤ rhs + BOUND_ROUNDOFF · max(‖x₀‖, 1)`.
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Theorem1Trial {
    pub trial: usize,
    pub deviation: f64,
    pub rip_passed: bool,
    /// Present when a recovery was run.
    pub bound: Option<BoundCheck>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Theorem1Report {
    pub alpha_norm_sq: f64,
    pub m: usize,
    pub trials: Vec<Theorem1Trial>,
    pub rip_passes: usize,
    /// Wilson 95% interval for the RIP pass probability.
    pub pass_interval: (f64, f64),
    pub bound_checks: usize,
    pub bound_violations: usize,
    /// Whether the RIP pass rate is consistent with `≥ 1 − ε`.
    pub rip_ok: bool,
    pub passed: bool,
}

impl fmt::Display for Theorem1Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "|alpha|^2 = {}, m = {}", self.alpha_norm_sq, self.m)?;
        writeln!(
            f,
            "RIP passed in {}/{} realisations (95% interval [{:.4}, {:.4}])",
            self.rip_passes,
            self.trials.len(),
            self.pass_interval.0,
            self.pass_interval.1
        )?;
        writeln!(
            f,
            "error bound held in {}/{} recoveries",
            self.bound_checks - self.bound_violations,
            self.bound_checks
        )?;
        write!(f, "{}", if self.passed { "pass" } else { "fail" })
    }
}

/// End-to-end check: coherences, sampling distribution, `m` from the
/// sample-complexity bound, then per realisation of `S` the cone RIP
/// deviation and, where it passes, the error bound for an in-range
/// noiseless recovery (`x⊥ = 0`, `η = 0`, `ε̂` = achieved objective).
pub fn theorem1_end_to_end(
    net: &GenerativeNetwork<f64>,
    op: &UnitaryOperator<f64>,
    config: &Theorem1Config,
) -> Result<Theorem1Report> {
    if config.trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let pieces = match config.coherence {
        CoherenceSource::ExactPieces => Some(enumerate_pieces(net, EnumerationMode::Exhaustive)?),
        CoherenceSource::Heuristic { .. } => None,
    };
    let alpha = match (&pieces, config.coherence) {
        (Some(p), _) => coherence_exact_pieces(op, p)?,
        (None, CoherenceSource::Heuristic { batch, .. }) => {
            coherence_heuristic(net, op, batch, rng::derive_seed(config.seed, &[1]))?
        }
        _ => unreachable!(),
    };
    let p = match config.scheme {
        SchemeKind::Adapted => optimal_probabilities(&alpha)?,
        SchemeKind::Uniform => ProbabilityVector::uniform(op.n())?,
    };
    let alpha_norm_sq = alpha.norm_sq();
    let k = net.latent_dim();
    let m = match config.m {
        Some(m) => m,
        None => sample_complexity(alpha_norm_sq, k, net.depth(), op.n(), config.eps, config.c)?,
    };
    let trials: Vec<Theorem1Trial> = (0..config.trials)
        .into_par_iter()
        .map(|t| -> Result<Theorem1Trial> {
            let seed = rng::derive_seed(config.seed, &[2, t as u64]);
            let plan = draw_plan(&p, m, seed)?;
            let precond = build_preconditioner(&plan)?;
            let method = match (&pieces, config.coherence) {
                (Some(pcs), _) => ConeMethod::Exact(pcs),
                (None, CoherenceSource::Heuristic { probes, .. }) => ConeMethod::Sampled {
                    probes,
                    seed: rng::derive_seed(seed, &[3]),
                },
                _ => unreachable!(),
            };
            let dev = rip_deviation_cone(&plan, &precond, op, net, method)?.estimate;
            let rip_passed = dev <= config.rip_threshold;
            let bound = if rip_passed && config.check_bound {
                Some(in_range_bound(net, op, &plan, &precond, config, seed)?)
            } else {
                None
            };
            Ok(Theorem1Trial {
                trial: t,
                deviation: dev,
                rip_passed,
                bound,
            })
        })
        .collect::<Result<_>>()?;
    let rip_passes = trials.iter().filter(|t| t.rip_passed).count();
    let pass_interval = wilson_interval(rip_passes, trials.len(), 1.96);
    let checked: Vec<BoundCheck> = trials.iter().filter_map(|t| t.bound).collect();
    let bound_violations = checked.iter().filter(|b| !b.holds).count();
    let rip_ok = pass_interval.1 >= 1.0 - config.eps;
    Ok(Theorem1Report {
        alpha_norm_sq,
        m,
        rip_passes,
        pass_interval,
        bound_checks: checked.len(),
        bound_violations,
        rip_ok,
        passed: rip_ok && bound_violations == 0,
        trials,
    })
}

fn in_range_bound(
    net: &GenerativeNetwork<f64>,
    op: &UnitaryOperator<f64>,
    plan: &SamplingPlan<f64>,
    precond: &Preconditioner<f64>,
    config: &Theorem1Config,
    seed: u64,
) -> Result<BoundCheck> {
    let mut r = rng::stream(rng::derive_seed(seed, &[4]), 0);
    let z0: Vec<f64> = rng::gaussian_vec(&mut r, net.latent_dim());
    let x0 = net.forward(&z0)?;
    let eta = vec![Complex::default(); plan.m()];
    let meas: MeasurementSet<f64> = measure(&x0, plan, op, &eta)?;
    let rc = RecoveryConfig {
        seed: rng::derive_seed(seed, &[5]),
        preconditioned: true,
        ..config.recovery.clone()
    };
    let res = recover(net, op, &meas, precond, &rc)?;
    let err = norm2(&sub(&res.x_hat, &x0));
    let rhs = error_bound_rhs(&vec![0.0; op.n()], plan, precond, op, &eta, res.eps_hat)?;
    Ok(BoundCheck {
        error: err,
        rhs,
        holds: err <= rhs + BOUND_ROUNDOFF * norm2(&x0).max(1.0),
    })
}
