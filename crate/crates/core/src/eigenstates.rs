//! Eigenvector diagnostics: overlaps between perturbed and ideal eigenbases,
//! the eigenstate entropy, and Husimi densities on the `(theta, p)` torus.

use std::f64::consts::{PI, TAU};

use faer::Mat;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::StateVector;
use crate::sawtooth::MapParams;

/// `p[(alpha, beta)] = |<ideal_beta | perturbed_alpha>|^2`.
#[derive(Clone, Debug)]
pub struct OverlapMatrix {
    pub p: Mat<f64>,
}

impl OverlapMatrix {
    pub fn dim(&self) -> usize {
        self.p.nrows()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.p.nrows())
            .map(|a| (0..self.p.ncols()).map(|b| self.p[(a, b)]).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.p.ncols())
            .map(|b| self.p.col_as_slice(b).iter().sum())
            .collect()
    }
}

/// `max |V^dagger V - I|`.
pub fn orthonormality_residual(v: &Mat<C64>) -> f64 {
    crate::floquet::unitarity_residual(v)
}

pub fn overlaps(ideal: &Mat<C64>, perturbed: &Mat<C64>) -> Result<OverlapMatrix> {
    let n = ideal.nrows();
    if ideal.ncols() != n || perturbed.nrows() != n || perturbed.ncols() != n {
        return Err(Error::Contract(
            "eigenbases must be square and of equal size".into(),
        ));
    }
    for (name, v) in [("ideal", ideal), ("perturbed", perturbed)] {
        let r = orthonormality_residual(v);
        if r > 1e-8 {
            return Err(Error::Contract(format!(
                "{name} eigenbasis is not orthonormal (residual {r:e})"
            )));
        }
    }
    // m[(beta, alpha)] = <ideal_beta | perturbed_alpha>
    let m = ideal.adjoint() * perturbed;
    Ok(OverlapMatrix {
        p: Mat::from_fn(n, n, |a, b| m[(b, a)].norm_sqr()),
    })
}

/// Per-state entropies `S_alpha = -sum_beta p log2 p` and their mean.
pub fn entropy(p: &OverlapMatrix) -> Result<(Vec<f64>, f64)> {
    let n = p.dim();
    if n == 0 {
        return Err(Error::Contract("empty overlap matrix".into()));
    }
    let mut s = Vec::with_capacity(n);
    for (a, sum) in p.row_sums().into_iter().enumerate() {
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Contract(format!(
                "row {a} sums to {sum}, expected 1"
            )));
        }
        let h: f64 = (0..n)
            .map(|b| p.p[(a, b)])
            .filter(|&x| x > 0.0)
            .map(|x| -x * x.log2())
            .sum();
        s.push(h.max(0.0));
    }
    let mean = s.iter().sum::<f64>() / n as f64;
    Ok((s, mean))
}

/// Husimi density on `[0, 2 pi) x [-pi, pi)`; `density[(i, j)]` belongs to
/// `theta = thetas[i]`, `p = momenta[j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HusimiGrid {
    pub thetas: Vec<f64>,
    pub momenta: Vec<f64>,
    /// Row-major `thetas.len() x momenta.len()`.
    pub density: Vec<f64>,
    /// Momentum width over angle width of the coherent states.
    pub squeezing: f64,
    /// Factor applied to the raw overlaps so the grid integrates to 1.
    pub normalization: f64,
}

impl HusimiGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.density[i * self.momenta.len() + j]
    }

    pub fn cell_area(&self) -> f64 {
        TAU / self.thetas.len() as f64 * TAU / self.momenta.len() as f64
    }

    pub fn total_mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.cell_area()
    }
}

/// Default points per axis: `4 sqrt(N)` capped at 256.
pub fn default_husimi_dims(dim: usize) -> usize {
    ((4.0 * (dim as f64).sqrt()).ceil() as usize).min(256)
}

const WINDINGS: i32 = 5;
// Gaussian exponents beyond this contribute below 1e-17.
const EXPONENT_CUTOFF: f64 = 40.0;

/// Projects `state` onto periodized coherent states with equal angle and
/// momentum widths `sqrt(T/2)`. Momentum `n` is represented by
/// `exp(-i n theta)` in the register basis, matching the Fourier convention
/// of the circuit.
pub fn husimi(
    state: &StateVector,
    p: &MapParams,
    n_theta: usize,
    n_p: usize,
) -> Result<HusimiGrid> {
    if state.dim() != p.dim {
        return Err(Error::Contract(format!(
            "state has dimension {}, map has {}",
            state.dim(),
            p.dim
        )));
    }
    if n_theta == 0 || n_p == 0 {
        return Err(Error::Config(
            "Husimi grid needs at least one point per axis".into(),
        ));
    }
    let dim = p.dim;
    let width = (p.period / 2.0).sqrt();
    let inv_4var = 1.0 / (4.0 * width * width);
    let amp = state.amplitudes();
    let thetas: Vec<f64> = (0..n_theta)
        .map(|i| TAU * i as f64 / n_theta as f64)
        .collect();
    let momenta: Vec<f64> = (0..n_p)
        .map(|j| -PI + TAU * j as f64 / n_p as f64)
        .collect();

    let raw: Vec<f64> = thetas
        .par_iter()
        .flat_map_iter(|&tc| {
            // Periodized Gaussian displacements for this angle, shared by all momenta.
            let mut terms: Vec<(usize, f64, f64)> = Vec::new();
            for (m, _) in amp.iter().enumerate() {
                let d = TAU * m as f64 / dim as f64 - tc;
                for w in -WINDINGS..=WINDINGS {
                    let x = d + TAU * w as f64;
                    let e = x * x * inv_4var;
                    if e < EXPONENT_CUTOFF {
                        terms.push((m, (-e).exp(), x));
                    }
                }
            }
            let momenta = &momenta;
            momenta.iter().map(move |&pc| {
                let n_center = pc / p.period;
                let mut coh = vec![C64::new(0.0, 0.0); dim];
                for &(m, g, x) in &terms {
                    coh[m] += C64::from_polar(g, -n_center * x);
                }
                let norm2: f64 = coh.iter().map(|c| c.norm_sqr()).sum();
                let proj: C64 = coh.iter().zip(amp).map(|(c, a)| c.conj() * a).sum();
                if norm2 > 0.0 {
                    proj.norm_sqr() / norm2
                } else {
                    0.0
                }
            })
        })
        .collect();

    let area = TAU / n_theta as f64 * TAU / n_p as f64;
    let total: f64 = raw.iter().sum::<f64>() * area;
    if total.is_nan() || total <= 0.0 {
        return Err(Error::Numeric("Husimi density vanishes on the grid".into()));
    }
    let normalization = 1.0 / total;
    Ok(HusimiGrid {
        thetas,
        momenta,
        density: raw.into_iter().map(|x| x * normalization).collect(),
        squeezing: 1.0,
        normalization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sawtooth::make_params;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unitary(n: usize, seed: u64) -> Mat<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Mat::from_fn(n, n, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        a.qr().compute_Q()
    }

    #[test]
    fn identical_bases_give_identity_pattern() {
        let v = random_unitary(16, 1);
        let o = overlaps(&v, &v).unwrap();
        for a in 0..16 {
            for b in 0..16 {
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((o.p[(a, b)] - want).abs() < 1e-10);
            }
        }
        let (s, mean) = entropy(&o).unwrap();
        assert!(s.iter().all(|&x| x < 1e-8));
        assert!(mean < 1e-8);
    }

    #[test]
    fn rotated_pair_has_half_overlaps() {
        let v0 = random_unitary(8, 2);
        let mut v = v0.clone();
        let c = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..8 {
            let (a, b) = (v0[(i, 2)], v0[(i, 5)]);
            v[(i, 2)] = (a + b) * c;
            v[(i, 5)] = (b - a) * c;
        }
        let o = overlaps(&v0, &v).unwrap();
        for row in [2, 5] {
            assert!((o.p[(row, 2)] - 0.5).abs() < 1e-12);
            assert!((o.p[(row, 5)] - 0.5).abs() < 1e-12);
        }
        let (s, _) = entropy(&o).unwrap();
        assert!((s[2] - 1.0).abs() < 1e-10 && (s[5] - 1.0).abs() < 1e-10);
        assert!(s[0] < 1e-10);
    }

    #[test]
    fn doubly_stochastic() {
        let o = overlaps(&random_unitary(20, 3), &random_unitary(20, 4)).unwrap();
        assert!(o.row_sums().iter().all(|s| (s - 1.0).abs() < 1e-8));
        assert!(o.col_sums().iter().all(|s| (s - 1.0).abs() < 1e-8));
    }

    #[test]
    fn non_orthonormal_rejected() {
        let mut v = random_unitary(4, 5);
        v[(0, 0)] += C64::new(0.1, 0.0);
        let w = random_unitary(4, 6);
        assert!(matches!(overlaps(&w, &v), Err(Error::Contract(_))));
    }

    #[test]
    fn uniform_row_has_maximal_entropy() {
        let n = 32;
        let o = OverlapMatrix {
            p: Mat::from_fn(n, n, |_, _| 1.0 / n as f64),
        };
        let (s, mean) = entropy(&o).unwrap();
        assert!(s.iter().all(|&x| (x - 5.0).abs() < 1e-12));
        assert!((mean - 5.0).abs() < 1e-12);
        let bad = OverlapMatrix {
            p: Mat::from_fn(n, n, |_, _| 2.0 / n as f64),
        };
        assert!(entropy(&bad).is_err());
    }

    #[test]
    fn momentum_eigenstate_ridge() {
        let p = make_params(1.0, 5, 0.0, 0.0).unwrap();
        let n0: i64 = 6;
        let amp: Vec<C64> = (0..p.dim)
            .map(|m| C64::from_polar(1.0, -(n0 as f64) * TAU * m as f64 / p.dim as f64))
            .collect();
        let st = StateVector::normalized(5, amp).unwrap();
        let g = husimi(&st, &p, 32, 64).unwrap();
        assert!((g.total_mass() - 1.0).abs() < 1e-6);
        for j in 0..64 {
            let first = g.at(0, j);
            for i in 1..32 {
                assert!((g.at(i, j) - first).abs() < 1e-9 * (1.0 + first));
            }
        }
        let peak = (0..64)
            .max_by(|&a, &b| g.at(0, a).total_cmp(&g.at(0, b)))
            .unwrap();
        assert!((g.momenta[peak] - p.period * n0 as f64).abs() <= TAU / 64.0);
    }

    #[test]
    fn global_phase_invariance() {
        let p = make_params(1.0, 4, 0.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let amp: Vec<C64> = (0..16)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let a = StateVector::normalized(4, amp.clone()).unwrap();
        let phase = C64::from_polar(1.0, 1.234);
        let b = StateVector::normalized(4, amp.into_iter().map(|x| x * phase).collect()).unwrap();
        let (ga, gb) = (
            husimi(&a, &p, 16, 16).unwrap(),
            husimi(&b, &p, 16, 16).unwrap(),
        );
        for (x, y) in ga.density.iter().zip(&gb.density) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(ga.density.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn default_dims() {
        assert_eq!(default_husimi_dims(16), 16);
        assert_eq!(default_husimi_dims(512), 91);
        assert_eq!(default_husimi_dims(1 << 14), 256);
    }
}
