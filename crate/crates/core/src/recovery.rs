//! Measurements `b = (1/√m) S F x₀ + η`, the (preconditioned) data-fit
//! objective and multi-restart Adam recovery over the latent space.

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::generative_model::{ForwardTrace, GenerativeNetwork};
use crate::linalg::{cnorm2, norm2, sub};
use crate::rng;
use crate::sampling::{Preconditioner, SamplingPlan};
use crate::transform::{TransformWork, UnitaryOperator};
use crate::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSet<T> {
    pub b: Vec<Complex<T>>,
    pub plan: SamplingPlan<T>,
    /// Noise that was added, kept for diagnostics (zeros when unknown).
    pub noise: Vec<Complex<T>>,
    /// The `1/√m` factor applied to `S F x₀`.
    pub scale: T,
}

impl<T: Real> MeasurementSet<T> {
    /// Wraps measurements read back from disk; the noise is unknown.
    pub fn from_parts(b: Vec<Complex<T>>, plan: SamplingPlan<T>) -> Result<Self> {
        check_len("measurements", plan.m(), b.len())?;
        let scale = T::one() / T::from_usize_lossy(plan.m()).sqrt();
        Ok(Self {
            noise: vec![Complex::default(); b.len()],
            b,
            plan,
            scale,
        })
    }

    pub fn m(&self) -> usize {
        self.b.len()
    }
}

/// `b_i = (1/√m) (F x₀)_{indices[i]} + η_i`.
pub fn measure<T: Real>(
    x0: &[T],
    plan: &SamplingPlan<T>,
    op: &UnitaryOperator<T>,
    eta: &[Complex<T>],
) -> Result<MeasurementSet<T>> {
    check_len("signal", op.n(), x0.len())?;
    check_len("plan dimension", op.n(), plan.n())?;
    check_len("noise", plan.m(), eta.len())?;
    let fx = op.apply_real(x0)?;
    let scale = T::one() / T::from_usize_lossy(plan.m()).sqrt();
    let b = plan
        .indices()
        .iter()
        .zip(eta)
        .map(|(&j, e)| fx[j].scale(scale) + e)
        .collect();
    Ok(MeasurementSet {
        b,
        plan: plan.clone(),
        noise: eta.to_vec(),
        scale,
    })
}

/// Circular complex Gaussian noise with `E|η_i|² = sigma²`.
pub fn complex_gaussian_noise<T: Real>(m: usize, sigma: T, seed: u64) -> Vec<Complex<T>> {
    let mut r = rng::stream(seed, 0);
    let s = sigma / T::SQRT_2();
    (0..m)
        .map(|_| {
            let re: T = rng::gaussian(&mut r);
            let im: T = rng::gaussian(&mut r);
            Complex::new(re * s, im * s)
        })
        .collect()
}

/// The data-fit term for fixed measurements. With `preconditioned` set the
/// residual is `(1/√m) d̃ ⊙ (F x)_S − d̃ ⊙ b`, otherwise `(1/√m)(F x)_S − b`.
#[derive(Clone, Debug)]
pub struct Objective<'a, T: Real> {
    net: &'a GenerativeNetwork<T>,
    op: &'a UnitaryOperator<T>,
    indices: &'a [usize],
    /// Per-measurement factor multiplying `(F x)_j`.
    weight: Vec<T>,
    /// Per-measurement target.
    target: Vec<Complex<T>>,
}

/// Reusable buffers for objective and gradient evaluation.
#[derive(Clone, Debug)]
pub struct ObjectiveWork<T> {
    trace: ForwardTrace<T>,
    spectrum: Vec<Complex<T>>,
    transform: TransformWork<T>,
}

impl<'a, T: Real> Objective<'a, T> {
    pub fn new(
        net: &'a GenerativeNetwork<T>,
        op: &'a UnitaryOperator<T>,
        meas: &'a MeasurementSet<T>,
        precond: &Preconditioner<T>,
        preconditioned: bool,
    ) -> Result<Self> {
        check_len("network output dimension", op.n(), net.output_dim())?;
        check_len("plan dimension", op.n(), meas.plan.n())?;
        check_len("measurements", meas.plan.m(), meas.b.len())?;
        check_len("preconditioner", meas.plan.m(), precond.d_sub.len())?;
        let scale = T::one() / T::from_usize_lossy(meas.m()).sqrt();
        let (weight, target) = if preconditioned {
            (
                precond.d_sub.iter().map(|&d| d * scale).collect(),
                meas.b
                    .iter()
                    .zip(&precond.d_sub)
                    .map(|(b, &d)| b.scale(d))
                    .collect(),
            )
        } else {
            (vec![scale; meas.m()], meas.b.clone())
        };
        Ok(Self {
            net,
            op,
            indices: meas.plan.indices(),
            weight,
            target,
        })
    }

    pub fn work(&self) -> ObjectiveWork<T> {
        ObjectiveWork {
            trace: ForwardTrace::default(),
            spectrum: vec![Complex::default(); self.op.n()],
            transform: self.op.work(),
        }
    }

    /// Residual vector at signal `x`.
    pub fn residual_of_signal(&self, x: &[T]) -> Result<Vec<Complex<T>>> {
        check_len("signal", self.op.n(), x.len())?;
        let fx = self.op.apply_real(x)?;
        Ok(self.residual_from_spectrum(&fx))
    }

    fn residual_from_spectrum(&self, fx: &[Complex<T>]) -> Vec<Complex<T>> {
        self.indices
            .iter()
            .zip(self.weight.iter().zip(&self.target))
            .map(|(&j, (&w, t))| fx[j].scale(w) - t)
            .collect()
    }

    /// Unsquared objective at latent code `z`.
    pub fn value(&self, z: &[T]) -> Result<T> {
        let x = self.net.forward(z)?;
        Ok(cnorm2(&self.residual_of_signal(&x)?))
    }

    /// Squared objective and its gradient with respect to `z`.
    ///
    /// For `r_i = w_i (F x)_{j_i} − t_i` the gradient in `x` is
    /// `2 Re(Fᴴ c)` with `c_j = Σ_{i : j_i = j} w_i r_i`; it is then pulled
    /// back through the network.
    pub fn value_and_gradient(&self, z: &[T], work: &mut ObjectiveWork<T>) -> Result<(T, Vec<T>)> {
        self.net.forward_into(z, &mut work.trace)?;
        let spec = &mut work.spectrum;
        for (s, &x) in spec.iter_mut().zip(&work.trace.output) {
            *s = Complex::new(x, T::zero());
        }
        self.op.apply_in_place(spec, &mut work.transform)?;
        let mut value = T::zero();
        let mut c = vec![Complex::default(); self.op.n()];
        for (&j, (&w, t)) in self
            .indices
            .iter()
            .zip(self.weight.iter().zip(&self.target))
        {
            let r = spec[j].scale(w) - t;
            value = value + r.norm_sqr();
            c[j] = c[j] + r.scale(w);
        }
        self.op.adjoint_in_place(&mut c, &mut work.transform)?;
        let two = T::c(2.0);
        let gx: Vec<T> = c.iter().map(|v| v.re * two).collect();
        let gz = self.net.backward(&work.trace, &gx)?;
        Ok((value, gz))
    }
}

/// Unsquared objective `‖(1/√m) d̃ ⊙ (F G(z))_S − d̃ ⊙ b‖₂` (or without
/// `d̃` when `preconditioned` is false).
pub fn objective<T: Real>(
    z: &[T],
    net: &GenerativeNetwork<T>,
    op: &UnitaryOperator<T>,
    meas: &MeasurementSet<T>,
    precond: &Preconditioner<T>,
    preconditioned: bool,
) -> Result<T> {
    Objective::new(net, op, meas, precond, preconditioned)?.value(z)
}

/// Gradient of the squared objective with respect to `z`.
pub fn objective_gradient<T: Real>(
    z: &[T],
    net: &GenerativeNetwork<T>,
    op: &UnitaryOperator<T>,
    meas: &MeasurementSet<T>,
    precond: &Preconditioner<T>,
    preconditioned: bool,
) -> Result<Vec<T>> {
    let obj = Objective::new(net, op, meas, precond, preconditioned)?;
    let mut work = obj.work();
    Ok(obj.value_and_gradient(z, &mut work)?.1)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryConfig<T> {
    pub restarts: usize,
    pub iterations: usize,
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    /// Decoupled weight decay; 0 gives plain Adam.
    pub weight_decay: T,
    pub preconditioned: bool,
    pub seed: u64,
    /// Stop a restart once its unsquared objective falls below this value.
    pub early_stop: Option<T>,
}

impl<T: Real> Default for RecoveryConfig<T> {
    fn default() -> Self {
        Self {
            restarts: 4,
            iterations: 20_000,
            lr: T::c(0.003),
            beta1: T::c(0.9),
            beta2: T::c(0.999),
            weight_decay: T::zero(),
            preconditioned: true,
            seed: 0,
            early_stop: None,
        }
    }
}

impl<T: Real> RecoveryConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.restarts == 0 {
            return bad("restarts must be at least 1".into());
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if !(self.lr > T::zero()) || !self.lr.is_finite() {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(b >= T::zero() && b < T::one()) {
                return bad(format!("{name} must be in [0, 1), got {b}"));
            }
        }
        if !(self.weight_decay >= T::zero()) {
            return bad(format!(
                "weight decay must be nonnegative, got {}",
                self.weight_decay
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryResult<T> {
    pub z_hat: Vec<T>,
    pub x_hat: Vec<T>,
    /// Best unsquared objective reached by each restart.
    pub objectives: Vec<T>,
    pub best_restart: usize,
    /// Achieved objective at `z_hat`, used as the near-optimality slack `ε̂`.
    pub eps_hat: T,
}

impl<T: Real> RecoveryResult<T> {
    pub fn rre(&self, x0: &[T]) -> Result<T> {
        rre(x0, &self.x_hat)
    }
}

/// Adam(W) from a standard Gaussian start, returning the best iterate
/// and its unsquared objective.
fn run_restart<T: Real>(
    obj: &Objective<'_, T>,
    config: &RecoveryConfig<T>,
    restart: usize,
) -> Result<(Vec<T>, T)> {
    let k = obj.net.latent_dim();
    let mut r = rng::stream(config.seed, restart as u64);
    let mut z: Vec<T> = rng::gaussian_vec(&mut r, k);
    let mut m1 = vec![T::zero(); k];
    let mut m2 = vec![T::zero(); k];
    let mut work = obj.work();
    let mut best = (z.clone(), T::infinity());
    let eps = T::c(1e-8);
    let (mut p1, mut p2) = (T::one(), T::one());
    for _ in 0..config.iterations {
        let (sq, g) = obj.value_and_gradient(&z, &mut work)?;
        let value = sq.sqrt();
        if value < best.1 {
            best = (z.clone(), value);
        }
        if config.early_stop.is_some_and(|tol| value < tol) {
            return Ok(best);
        }
        p1 = p1 * config.beta1;
        p2 = p2 * config.beta2;
        for i in 0..k {
            m1[i] = config.beta1 * m1[i] + (T::one() - config.beta1) * g[i];
            m2[i] = config.beta2 * m2[i] + (T::one() - config.beta2) * g[i] * g[i];
            let mh = m1[i] / (T::one() - p1);
            let vh = m2[i] / (T::one() - p2);
            z[i] = z[i] - config.lr * (mh / (vh.sqrt() + eps) + config.weight_decay * z[i]);
        }
    }
    let last = obj.value(&z)?;
    if last < best.1 {
        best = (z, last);
    }
    Ok(best)
}

/// Runs `config.restarts` independent Adam(W) optimisations and keeps the
/// code with the lowest objective (ties go to the lower restart index).
pub fn recover<T: Real>(
    net: &GenerativeNetwork<T>,
    op: &UnitaryOperator<T>,
    meas: &MeasurementSet<T>,
    precond: &Preconditioner<T>,
    config: &RecoveryConfig<T>,
) -> Result<RecoveryResult<T>> {
    config.validate()?;
    let obj = Objective::new(net, op, meas, precond, config.preconditioned)?;
    let runs: Vec<(Vec<T>, T)> = (0..config.restarts)
        .into_par_iter()
        .map(|r| run_restart(&obj, config, r))
        .collect::<Result<_>>()?;
    let objectives: Vec<T> = runs.iter().map(|r| r.1).collect();
    let best_restart = (0..runs.len())
        .min_by(|&a, &b| {
            objectives[a]
                .partial_cmp(&objectives[b])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        })
        .expect("at least one restart");
    let z_hat = runs[best_restart].0.clone();
    let x_hat = net.forward(&z_hat)?;
    Ok(RecoveryResult {
        z_hat,
        x_hat,
        eps_hat: objectives[best_restart],
        objectives,
        best_restart,
    })
}

/// Relative recovery error `‖x₀ − x̂‖₂ / ‖x₀‖₂`.
pub fn rre<T: Real>(x0: &[T], x_hat: &[T]) -> Result<T> {
    check_len("recovered signal", x0.len(), x_hat.len())?;
    let n0 = norm2(x0);
    if n0 == T::zero() {
        return Err(Error::InvalidArgument(
            "relative error is undefined for x0 = 0".into(),
        ));
    }
    Ok(norm2(&sub(x0, x_hat)) / n0)
}

/// Right-hand side of the recovery guarantee:
/// `‖x⊥‖ + (3/√m)‖S D F x⊥‖ + 3‖D̃ η‖ + 1.5 ε̂`.
pub fn error_bound_rhs<T: Real>(
    x_perp: &[T],
    plan: &SamplingPlan<T>,
    precond: &Preconditioner<T>,
    op: &UnitaryOperator<T>,
    eta: &[Complex<T>],
    eps_hat: T,
) -> Result<T> {
    check_len("x_perp", op.n(), x_perp.len())?;
    check_len("plan dimension", op.n(), plan.n())?;
    check_len("noise", plan.m(), eta.len())?;
    check_len("preconditioner", plan.m(), precond.d_sub.len())?;
    let fx = op.apply_real(x_perp)?;
    let sdf: T = plan
        .indices()
        .iter()
        .zip(&precond.d_sub)
        .map(|(&j, &d)| fx[j].scale(d).norm_sqr())
        .sum::<T>()
        .sqrt();
    let noise: T = eta
        .iter()
        .zip(&precond.d_sub)
        .map(|(e, &d)| e.scale(d).norm_sqr())
        .sum::<T>()
        .sqrt();
    let three = T::c(3.0);
    let m = T::from_usize_lossy(plan.m());
    Ok(norm2(x_perp) + three / m.sqrt() * sdf + three * noise + T::c(1.5) * eps_hat)
}
