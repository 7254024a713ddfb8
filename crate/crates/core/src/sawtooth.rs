//! The quantum sawtooth map: parameters, exact kick and free-rotation
//! diagonals, compilation of one map iteration into elementary gates, a dense
//! oracle Floquet operator, and the classical map.
//!
//! One iteration is `U = exp(-i T (n + phi)^2 / 2) exp(i k (theta + theta0 - pi)^2 / 2)`
//! on `N = 2^n_q` levels with `T = 2 pi / N` and `k = K / T`.

use std::f64::consts::{PI, TAU};

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{qft_gates, Gate, PairPhase};
use crate::seeds;

/// Largest register for which dense `N x N` operators are built.
pub const MAX_DENSE_QUBITS: usize = 12;

/// Constants of one simulated sawtooth map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    /// Classical chaos parameter `K = k T`.
    pub chaos: f64,
    pub n_q: usize,
    /// Number of levels `N = 2^n_q`.
    pub dim: usize,
    /// Free-rotation period `T = 2 pi / N`.
    pub period: f64,
    /// Kick strength `k = K / T`.
    pub kick: f64,
    /// Angle shift added to `theta` in the kick.
    pub theta0: f64,
    /// Flux added to the momentum in the free rotation.
    pub phi: f64,
}

pub fn make_params(chaos: f64, n_q: usize, theta0: f64, phi: f64) -> Result<MapParams> {
    if n_q < 2 {
        return Err(Error::Config(format!("need at least 2 qubits, got {n_q}")));
    }
    if n_q > crate::qcore::MAX_STATE_QUBITS {
        return Err(Error::Config(format!(
            "{n_q} qubits exceeds the register cap"
        )));
    }
    if !(chaos.is_finite() && theta0.is_finite() && phi.is_finite()) {
        return Err(Error::Config("map parameters must be finite".into()));
    }
    let dim = 1usize << n_q;
    let period = TAU / dim as f64;
    Ok(MapParams {
        chaos,
        n_q,
        dim,
        period,
        kick: chaos / period,
        theta0,
        phi,
    })
}

impl MapParams {
    /// Signed momentum of DFT index `idx`: `idx` below `N/2`, else `idx - N`.
    pub fn momentum(&self, idx: usize) -> i64 {
        let half = self.dim / 2;
        if idx < half {
            idx as i64
        } else {
            idx as i64 - self.dim as i64
        }
    }

    pub fn is_shifted(&self) -> bool {
        self.theta0 != 0.0 || self.phi != 0.0
    }
}

/// Kick diagonal in the angle representation:
/// entry `m` is `exp(i k (2 pi m / N + theta0 - pi)^2 / 2)`.
pub fn ideal_kick_phases(p: &MapParams) -> Vec<C64> {
    (0..p.dim)
        .map(|m| {
            let x = TAU * m as f64 / p.dim as f64 + p.theta0 - PI;
            C64::from_polar(1.0, 0.5 * p.kick * x * x)
        })
        .collect()
}

/// Free-rotation diagonal in the momentum representation, indexed by DFT
/// index: entry `idx` is `exp(-i T (n + phi)^2 / 2)` with `n = momentum(idx)`.
pub fn ideal_rotation_phases(p: &MapParams) -> Vec<C64> {
    (0..p.dim)
        .map(|idx| {
            let n = p.momentum(idx) as f64 + p.phi;
            C64::from_polar(1.0, -0.5 * p.period * n * n)
        })
        .collect()
}

/// Which part of the iteration a gate belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    Kick,
    ForwardQft,
    Rotation,
    InverseQft,
}

/// The ordered elementary gates of one map iteration.
#[derive(Clone, Debug)]
pub struct GateSequence {
    n_q: usize,
    entries: Vec<(Stage, Gate)>,
}

impl GateSequence {
    pub fn n_qubits(&self) -> usize {
        self.n_q
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Stage, Gate)] {
        &self.entries
    }

    pub fn gates(&self) -> impl Iterator<Item = &Gate> + '_ {
        self.entries.iter().map(|(_, g)| g)
    }

    pub fn stage(&self, stage: Stage) -> impl Iterator<Item = &Gate> + '_ {
        self.entries
            .iter()
            .filter(move |(s, _)| *s == stage)
            .map(|(_, g)| g)
    }
}

/// Expected gate count per iteration, `3 n_q^2 + n_q`.
pub fn gates_per_iteration(n_q: usize) -> usize {
    3 * n_q * n_q + n_q
}

/// Compiles one iteration: `n_q^2` kick phases, forward QFT, `n_q^2` rotation
/// phases, inverse QFT. Quadratic blocks enumerate ordered pairs `(i, j)`
/// row-major; `i == j` terms act on one qubit.
pub fn compile_iteration(p: &MapParams) -> GateSequence {
    let n_q = p.n_q;
    let nqf = n_q as f64;
    let mut entries = Vec::with_capacity(gates_per_iteration(n_q));

    // theta + theta0 - pi = 2 pi * sum_q (2^-q a_q + c), c = (theta0 - pi) / (2 pi n_q)
    let kick_offset = (p.theta0 - PI) / TAU / nqf;
    let kick_weight = |q: usize| 0.5f64.powi(q as i32);
    for i in 1..=n_q {
        for j in 1..=n_q {
            entries.push((
                Stage::Kick,
                Gate::PairPhase(PairPhase {
                    i,
                    j,
                    strength: 2.0 * PI * PI * p.kick,
                    weight_i: kick_weight(i),
                    offset_i: kick_offset,
                    weight_j: kick_weight(j),
                    offset_j: kick_offset,
                }),
            ));
        }
    }

    entries.extend(
        qft_gates(n_q, false)
            .into_iter()
            .map(|g| (Stage::ForwardQft, g)),
    );

    // Without swaps, qubit q carries bit q-1 of the DFT index. The top bit has
    // two's-complement weight -N/2 so that the bits sum to the signed momentum.
    let rot_weight = |q: usize| {
        if q == n_q {
            -((1u64 << (n_q - 1)) as f64)
        } else {
            (1u64 << (q - 1)) as f64
        }
    };
    let rot_offset = p.phi / nqf;
    for i in 1..=n_q {
        for j in 1..=n_q {
            entries.push((
                Stage::Rotation,
                Gate::PairPhase(PairPhase {
                    i,
                    j,
                    strength: -0.5 * p.period,
                    weight_i: rot_weight(i),
                    offset_i: rot_offset,
                    weight_j: rot_weight(j),
                    offset_j: rot_offset,
                }),
            ));
        }
    }

    entries.extend(
        qft_gates(n_q, true)
            .into_iter()
            .map(|g| (Stage::InverseQft, g)),
    );

    GateSequence { n_q, entries }
}

pub(crate) fn check_dense(n_q: usize) -> Result<()> {
    if n_q > MAX_DENSE_QUBITS {
        return Err(Error::Resource(format!(
            "dense {0}x{0} operator for {n_q} qubits exceeds the {MAX_DENSE_QUBITS}-qubit cap",
            1usize << n_q
        )));
    }
    Ok(())
}

/// Unitary DFT matrix with entries `exp(+2 pi i m n / N) / sqrt(N)`.
pub fn dft_matrix(dim: usize) -> Mat<C64> {
    let scale = 1.0 / (dim as f64).sqrt();
    Mat::from_fn(dim, dim, |n, m| {
        let r = (n * m) % dim;
        C64::from_polar(scale, TAU * r as f64 / dim as f64)
    })
}

/// Floquet operator assembled from the exact diagonals and dense DFTs:
/// `F^-1 diag(rotation) F diag(kick)`, in the angle (register) basis.
pub fn oracle_floquet(p: &MapParams) -> Result<Mat<C64>> {
    check_dense(p.n_q)?;
    let dim = p.dim;
    let kick = ideal_kick_phases(p);
    let rot = ideal_rotation_phases(p);
    let f = dft_matrix(dim);
    let rf_kick = Mat::from_fn(dim, dim, |n, m| rot[n] * f[(n, m)] * kick[m]);
    Ok(f.adjoint() * rf_kick)
}

/// A point of the classical map on the torus: `p` in `[-pi, pi)` and `theta`
/// in `[0, 2 pi)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalState {
    pub p: f64,
    pub theta: f64,
}

pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y >= TAU {
        0.0
    } else {
        y
    }
}

pub fn wrap_momentum(p: f64) -> f64 {
    wrap_angle(p + PI) - PI
}

impl ClassicalState {
    pub fn new(p: f64, theta: f64) -> Self {
        Self {
            p: wrap_momentum(p),
            theta: wrap_angle(theta),
        }
    }

    /// Largest coordinate distance to `other`, measured around the torus.
    pub fn torus_distance(&self, other: &Self) -> f64 {
        let circ = |a: f64, b: f64| {
            let d = (a - b).rem_euclid(TAU);
            d.min(TAU - d)
        };
        circ(self.p, other.p).max(circ(self.theta, other.theta))
    }
}

/// One iteration `p' = p + K (theta - pi)`, `theta' = theta + p'` on the torus.
pub fn classical_step(s: ClassicalState, chaos: f64) -> ClassicalState {
    let p = s.p + chaos * (s.theta - PI);
    ClassicalState::new(p, s.theta + p)
}

/// Momentum diameter of the largest elliptic island around `(pi, 0)` for
/// `-4 < K < 0`, namely `2 pi sqrt(|K|)`; `pi/2` outside that range.
///
/// The linearized map conserves `p^2 + K x p - K x^2` with `x = theta - pi`;
/// the largest invariant ellipse touching the discontinuity at `|x| = pi`
/// reaches `|p| = pi sqrt(-K)`.
pub fn default_diffusion_threshold(chaos: f64) -> f64 {
    if chaos < 0.0 && chaos > -4.0 {
        TAU * (-chaos).sqrt()
    } else {
        PI / 2.0
    }
}

/// Fraction of uniformly drawn initial conditions whose unwrapped momentum
/// excursion `max_t |p(t) - p(0)|` exceeds `threshold` within `n_steps`.
pub fn diffusive_fraction(
    chaos: f64,
    n_samples: usize,
    n_steps: usize,
    threshold: f64,
    seed: u64,
) -> Result<f64> {
    if n_samples < 100 {
        return Err(Error::Contract(format!(
            "diffusive fraction needs at least 100 samples, got {n_samples}"
        )));
    }
    let diffusive = (0..n_samples)
        .into_par_iter()
        .filter(|&i| {
            let mut rng = seeds::stream(seed, &[i as u64]);
            let p0 = rng.random_range(-PI..PI);
            let mut theta = rng.random_range(0.0..TAU);
            let mut p = p0;
            let mut excursion = 0.0f64;
            for _ in 0..n_steps {
                p += chaos * (theta - PI);
                theta = wrap_angle(theta + p);
                excursion = excursion.max((p - p0).abs());
                if excursion > threshold {
                    return true;
                }
            }
            false
        })
        .count();
    Ok(diffusive as f64 / n_samples as f64)
}
