//! Linear pieces of a ReLU network.
//!
//! Fixing the on/off state of every hidden unit turns the network into a
//! linear map on the polyhedral cone of latent codes producing that state.
//! The range of `G` is the union of the images of these cones.

use std::collections::BTreeMap;

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use super::GenerativeNetwork;
use crate::error::{Error, Result};
use crate::linalg::{norm2, Matrix};
use crate::rng;
use crate::Real;

/// Largest hidden-unit count accepted by exhaustive enumeration.
pub const MAX_EXHAUSTIVE_HIDDEN: usize = 24;

/// Minimum LP margin for a sign pattern to count as having an interior.
const FEASIBILITY_MARGIN: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct ActivationPiece<T> {
    /// On/off state per hidden unit, layers concatenated in order.
    pub pattern: Vec<bool>,
    /// `n × k` map equal to `G` on this piece.
    pub effective_map: Matrix<T>,
    /// A latent code strictly inside the piece.
    pub witness: Vec<T>,
}

#[derive(Clone, Copy, Debug)]
pub enum EnumerationMode {
    /// Every sign pattern with nonempty interior, certified by LP.
    Exhaustive,
    /// Patterns hit by `probes` standard Gaussian latent codes.
    Sampling { probes: usize, seed: u64 },
}

/// Lists the linear pieces of `net`, sorted by pattern.
pub fn enumerate_pieces<T: Real>(
    net: &GenerativeNetwork<T>,
    mode: EnumerationMode,
) -> Result<Vec<ActivationPiece<T>>> {
    match mode {
        EnumerationMode::Exhaustive => exhaustive(net),
        EnumerationMode::Sampling { probes, seed } => sampled(net, probes, seed),
    }
}

fn sampled<T: Real>(
    net: &GenerativeNetwork<T>,
    probes: usize,
    seed: u64,
) -> Result<Vec<ActivationPiece<T>>> {
    let mut rng = rng::stream(seed, 0);
    let mut found: BTreeMap<Vec<bool>, Vec<T>> = BTreeMap::new();
    for _ in 0..probes {
        let z: Vec<T> = rng::gaussian_vec(&mut rng, net.latent_dim());
        let pattern = net.activation_pattern(&z)?;
        found.entry(pattern).or_insert(z);
    }
    found
        .into_iter()
        .map(|(pattern, witness)| make_piece(net, pattern, witness))
        .collect()
}

fn exhaustive<T: Real>(net: &GenerativeNetwork<T>) -> Result<Vec<ActivationPiece<T>>> {
    let hidden = net.hidden_units();
    if hidden > MAX_EXHAUSTIVE_HIDDEN {
        return Err(Error::BudgetExceeded {
            hidden,
            limit: MAX_EXHAUSTIVE_HIDDEN,
        });
    }
    let k = net.latent_dim();
    if net.depth() == 1 {
        let witness = vec![T::one(); k];
        return Ok(vec![make_piece(net, Vec::new(), witness)?]);
    }
    let first = to_f64(&net.weights()[0]);
    let mut search = Search {
        net,
        k,
        constraints: Vec::new(),
        pattern: Vec::with_capacity(hidden),
        out: Vec::new(),
    };
    search.layer(0, first)?;
    let mut pieces = search.out;
    pieces.sort_by(|a, b| a.pattern.cmp(&b.pattern));
    Ok(pieces)
}

struct Search<'a, T> {
    net: &'a GenerativeNetwork<T>,
    k: usize,
    /// Signed, normalised constraint rows `c` meaning `c · z > 0`.
    constraints: Vec<Vec<f64>>,
    pattern: Vec<bool>,
    out: Vec<ActivationPiece<T>>,
}

impl<T: Real> Search<'_, T> {
    /// Decides the units of hidden layer `layer`, whose pre-activation as a
    /// function of `z` is `pre_map` (rows × k).
    fn layer(&mut self, layer: usize, pre_map: Vec<Vec<f64>>) -> Result<()> {
        self.unit(layer, &pre_map, 0)
    }

    fn unit(&mut self, layer: usize, pre_map: &[Vec<f64>], r: usize) -> Result<()> {
        if r == pre_map.len() {
            return self.finish_layer(layer, pre_map);
        }
        let row = &pre_map[r];
        let scale = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if scale <= f64::EPSILON {
            // Pre-activation is identically zero: the unit is always off.
            self.pattern.push(false);
            self.unit(layer, pre_map, r + 1)?;
            self.pattern.pop();
            return Ok(());
        }
        for on in [false, true] {
            let sign = if on { 1.0 } else { -1.0 };
            self.constraints
                .push(row.iter().map(|v| sign * v / scale).collect());
            if max_margin(self.k, &self.constraints).is_some() {
                self.pattern.push(on);
                self.unit(layer, pre_map, r + 1)?;
                self.pattern.pop();
            }
            self.constraints.pop();
        }
        Ok(())
    }

    fn finish_layer(&mut self, layer: usize, pre_map: &[Vec<f64>]) -> Result<()> {
        let hidden_layers = self.net.depth() - 1;
        if layer + 1 == hidden_layers {
            let z = match max_margin(self.k, &self.constraints) {
                Some(z) => z,
                None => return Ok(()),
            };
            let witness: Vec<T> = z.iter().map(|&v| T::c(v)).collect();
            let piece = make_piece(self.net, self.pattern.clone(), witness)?;
            self.out.push(piece);
            return Ok(());
        }
        let width = pre_map.len();
        let start = self.pattern.len() - width;
        let w_next = to_f64(&self.net.weights()[layer + 1]);
        let next: Vec<Vec<f64>> = w_next
            .iter()
            .map(|wrow| {
                (0..self.k)
                    .map(|c| {
                        (0..width)
                            .filter(|&u| self.pattern[start + u])
                            .map(|u| wrow[u] * pre_map[u][c])
                            .sum()
                    })
                    .collect()
            })
            .collect();
        self.layer(layer + 1, next)
    }
}

/// Solves `max t s.t. c·z ≥ t for every constraint, |z_i| ≤ 1, t ≤ 1` and
/// returns the maximiser `z` when `t` exceeds the feasibility margin.
fn max_margin(k: usize, constraints: &[Vec<f64>]) -> Option<Vec<f64>> {
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let z: Vec<_> = (0..k).map(|_| problem.add_var(0.0, (-1.0, 1.0))).collect();
    let t = problem.add_var(1.0, (f64::NEG_INFINITY, 1.0));
    for c in constraints {
        let mut expr: Vec<_> = z.iter().copied().zip(c.iter().copied()).collect();
        expr.push((t, -1.0));
        problem.add_constraint(&expr, ComparisonOp::Ge, 0.0);
    }
    let solution = problem.solve().ok()?;
    if solution[t] > FEASIBILITY_MARGIN {
        Some(z.iter().map(|&v| solution[v]).collect())
    } else {
        None
    }
}

fn to_f64<T: Real>(m: &Matrix<T>) -> Vec<Vec<f64>> {
    (0..m.rows())
        .map(|i| m.row(i).iter().map(|v| v.as_f64()).collect())
        .collect()
}

fn make_piece<T: Real>(
    net: &GenerativeNetwork<T>,
    pattern: Vec<bool>,
    witness: Vec<T>,
) -> Result<ActivationPiece<T>> {
    let effective_map = net.effective_map(&pattern)?;
    let actual = net.activation_pattern(&witness)?;
    let image = net.forward(&witness)?;
    let linear = effective_map.matvec(&witness);
    let err = norm2(&crate::linalg::sub(&image, &linear));
    let tol = T::c(1e-10) * T::one().max(norm2(&image)) + T::epsilon() * T::c(1e3);
    if actual != pattern || err > tol {
        return Err(Error::InvalidArgument(format!(
            "witness verification failed for pattern {}",
            pattern_string(&pattern)
        )));
    }
    Ok(ActivationPiece {
        pattern,
        effective_map,
        witness,
    })
}

pub fn pattern_string(pattern: &[bool]) -> String {
    pattern.iter().map(|&b| if b { '1' } else { '0' }).collect()
}
