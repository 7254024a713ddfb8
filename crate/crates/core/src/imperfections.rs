//! Static hardware imperfections: random detunings and nearest-neighbour
//! couplings, the resulting many-body Hamiltonian
//! `H_s = sum_i (Delta0 + delta_i) Z_i + sum_i J_i X_i X_{i+1}`, the free
//! evolution `E = exp(-i H_s tau_g)` between gates, and execution of the gate
//! sequence with `E` applied after every gate.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Side};
use num_complex::Complex64 as C64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{apply_gate_slice, qubit_mask, StateVector};
use crate::sawtooth::GateSequence;
use crate::seeds;

/// Amplitudes of the imperfections and the inter-gate interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImperfectionParams {
    /// Detunings are drawn from `[-detuning/2, detuning/2]`.
    pub detuning: f64,
    /// Couplings are drawn from `[-coupling, coupling]`.
    pub coupling: f64,
    pub tau_g: f64,
}

impl ImperfectionParams {
    pub fn new(detuning: f64, coupling: f64, tau_g: f64) -> Result<Self> {
        if !(detuning >= 0.0 && coupling >= 0.0 && detuning.is_finite() && coupling.is_finite()) {
            return Err(Error::Config(format!(
                "imperfection amplitudes must be finite and non-negative (delta={detuning}, J={coupling})"
            )));
        }
        if !(tau_g > 0.0 && tau_g.is_finite()) {
            return Err(Error::Config(format!(
                "tau_g must be positive, got {tau_g}"
            )));
        }
        Ok(Self {
            detuning,
            coupling,
            tau_g,
        })
    }

    /// Rescaled amplitudes for a target `(epsilon, rho)` at interval `tau_g`.
    pub fn from_scaled(epsilon: f64, rho: f64, tau_g: f64) -> Result<Self> {
        Self::new(epsilon / tau_g, rho / tau_g, tau_g)
    }

    pub fn epsilon(&self) -> f64 {
        self.detuning * self.tau_g
    }

    pub fn rho(&self) -> f64 {
        self.coupling * self.tau_g
    }
}

/// One draw of the per-qubit detunings and the `n_q - 1` chain couplings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub n_q: usize,
    pub detunings: Vec<f64>,
    /// `couplings[i]` couples qubits `i+1` and `i+2` (1-based); open chain.
    pub couplings: Vec<f64>,
    pub seed: u64,
}

impl DisorderRealization {
    pub fn clean(n_q: usize) -> Self {
        Self {
            n_q,
            detunings: vec![0.0; n_q],
            couplings: vec![0.0; n_q.saturating_sub(1)],
            seed: 0,
        }
    }

    pub fn has_couplings(&self) -> bool {
        self.couplings.iter().any(|&j| j != 0.0)
    }
}

/// Draws a realization; a pure function of `(master_seed, index)`.
pub fn sample_disorder(
    n_q: usize,
    params: &ImperfectionParams,
    master_seed: u64,
    index: u64,
) -> DisorderRealization {
    let mut rng = seeds::stream(master_seed, &[index]);
    let detunings = (0..n_q)
        .map(|_| params.detuning * (rng.random::<f64>() - 0.5))
        .collect();
    let couplings = (0..n_q.saturating_sub(1))
        .map(|_| params.coupling * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    DisorderRealization {
        n_q,
        detunings,
        couplings,
        seed: seeds::derive_u64(master_seed, &[index]),
    }
}

/// Diagonal of `H_s` in the computational basis (the `Z` fields only).
pub fn field_diagonal(r: &DisorderRealization, mean_splitting: f64) -> Vec<f64> {
    let n_q = r.n_q;
    (0..1usize << n_q)
        .map(|m| {
            (1..=n_q)
                .map(|q| {
                    let z = if m & qubit_mask(n_q, q) == 0 {
                        1.0
                    } else {
                        -1.0
                    };
                    (mean_splitting + r.detunings[q - 1]) * z
                })
                .sum()
        })
        .collect()
}

/// Dense `H_s`. It is real symmetric: `Z` is diagonal and `X X` is a real
/// permutation.
pub fn build_static_hamiltonian(r: &DisorderRealization, mean_splitting: f64) -> Result<Mat<f64>> {
    crate::sawtooth::check_dense(r.n_q)?;
    let n_q = r.n_q;
    let dim = 1usize << n_q;
    let diag = field_diagonal(r, mean_splitting);
    let mut h = Mat::<f64>::zeros(dim, dim);
    for (m, d) in diag.into_iter().enumerate() {
        h[(m, m)] = d;
    }
    for (i, &j) in r.couplings.iter().enumerate() {
        if j == 0.0 {
            continue;
        }
        let flip = qubit_mask(n_q, i + 1) | qubit_mask(n_q, i + 2);
        for m in 0..dim {
            h[(m ^ flip, m)] += j;
        }
    }
    Ok(h)
}

/// `exp(-i H_s tau)`: a phase diagonal when `H_s` is diagonal, otherwise a
/// dense unitary with the cached eigendecomposition of `H_s`.
#[derive(Clone, Debug)]
pub enum InterGatePropagator {
    Diagonal(Vec<C64>),
    Dense {
        matrix: Mat<C64>,
        energies: Vec<f64>,
        eigenvectors: Mat<f64>,
    },
}

impl InterGatePropagator {
    pub fn identity(dim: usize) -> Self {
        InterGatePropagator::Diagonal(vec![C64::new(1.0, 0.0); dim])
    }

    pub fn dim(&self) -> usize {
        match self {
            InterGatePropagator::Diagonal(d) => d.len(),
            InterGatePropagator::Dense { matrix, .. } => matrix.nrows(),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self, InterGatePropagator::Diagonal(_))
    }

    /// Dense matrix form.
    pub fn to_matrix(&self) -> Mat<C64> {
        match self {
            InterGatePropagator::Diagonal(d) => Mat::from_fn(d.len(), d.len(), |i, j| {
                if i == j {
                    d[i]
                } else {
                    C64::new(0.0, 0.0)
                }
            }),
            InterGatePropagator::Dense { matrix, .. } => matrix.clone(),
        }
    }

    /// `v <- E v`. `scratch` must have the same length as `v`.
    pub fn apply(&self, v: &mut [C64], scratch: &mut [C64]) {
        match self {
            InterGatePropagator::Diagonal(d) => {
                v.iter_mut().zip(d).for_each(|(a, p)| *a *= p);
            }
            InterGatePropagator::Dense { matrix, .. } => {
                scratch.fill(C64::new(0.0, 0.0));
                for (j, &vj) in v.iter().enumerate() {
                    if vj == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for (s, &e) in scratch.iter_mut().zip(matrix.col_as_slice(j)) {
                        *s += e * vj;
                    }
                }
                v.copy_from_slice(scratch);
            }
        }
    }

    /// `m <- E m`, with `scratch` of the same shape.
    pub fn apply_left(&self, m: &mut Mat<C64>, scratch: &mut Mat<C64>) {
        match self {
            InterGatePropagator::Diagonal(d) => {
                for j in 0..m.ncols() {
                    m.col_as_slice_mut(j)
                        .iter_mut()
                        .zip(d)
                        .for_each(|(a, p)| *a *= p);
                }
            }
            InterGatePropagator::Dense { matrix, .. } => {
                matmul(
                    scratch.as_mut(),
                    Accum::Replace,
                    matrix.as_ref(),
                    m.as_ref(),
                    C64::new(1.0, 0.0),
                    faer::get_global_parallelism(),
                );
                std::mem::swap(m, scratch);
            }
        }
    }
}

/// Largest entry of `|H - H^T|`.
pub fn symmetry_residual(h: &Mat<f64>) -> f64 {
    let n = h.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..j {
            worst = worst.max((h[(i, j)] - h[(j, i)]).abs());
        }
    }
    worst
}

fn is_diagonal(h: &Mat<f64>) -> bool {
    let n = h.nrows();
    (0..n).all(|j| (0..n).all(|i| i == j || h[(i, j)] == 0.0))
}

/// Builds `exp(-i H tau)`, choosing the diagonal path when `H` is diagonal.
pub fn make_propagator(h: &Mat<f64>, tau: f64) -> Result<InterGatePropagator> {
    check_hamiltonian(h)?;
    if is_diagonal(h) {
        let n = h.nrows();
        return Ok(InterGatePropagator::Diagonal(
            (0..n)
                .map(|m| C64::from_polar(1.0, -tau * h[(m, m)]))
                .collect(),
        ));
    }
    make_dense_propagator(h, tau)
}

fn check_hamiltonian(h: &Mat<f64>) -> Result<()> {
    if h.nrows() != h.ncols() {
        return Err(Error::Contract("Hamiltonian must be square".into()));
    }
    let res = symmetry_residual(h);
    if res > 1e-12 {
        return Err(Error::Contract(format!(
            "Hamiltonian is not Hermitian (residual {res:e})"
        )));
    }
    Ok(())
}

/// Always takes the eigendecomposition route, even for diagonal `H`.
pub fn make_dense_propagator(h: &Mat<f64>, tau: f64) -> Result<InterGatePropagator> {
    check_hamiltonian(h)?;
    let n = h.nrows();
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("Hamiltonian eigensolve failed: {e:?}")))?;
    let energies: Vec<f64> = (0..n).map(|k| evd.S()[k]).collect();
    let eigenvectors = evd.U().to_owned();

    let scale = energies.iter().fold(1.0f64, |a, e| a.max(e.abs()));
    let hv = h * &eigenvectors;
    let mut residual = 0.0f64;
    for k in 0..n {
        for i in 0..n {
            residual = residual.max((hv[(i, k)] - eigenvectors[(i, k)] * energies[k]).abs());
        }
    }
    if residual > 1e-10 * scale {
        return Err(Error::Numeric(format!(
            "Hamiltonian eigendecomposition residual {residual:e} too large"
        )));
    }

    // E = V diag(exp(-i tau e)) V^T
    let phased = Mat::from_fn(n, n, |i, k| {
        C64::from_polar(eigenvectors[(i, k)], -tau * energies[k])
    });
    let vt = Mat::from_fn(n, n, |k, j| C64::new(eigenvectors[(j, k)], 0.0));
    let matrix = phased * vt;
    Ok(InterGatePropagator::Dense {
        matrix,
        energies,
        eigenvectors,
    })
}

/// Propagator for a realization. Uncoupled chains take the `O(N)` diagonal
/// path without forming `H_s`.
pub fn propagator_for(
    r: &DisorderRealization,
    mean_splitting: f64,
    tau_g: f64,
) -> Result<InterGatePropagator> {
    if !r.has_couplings() {
        return Ok(InterGatePropagator::Diagonal(
            field_diagonal(r, mean_splitting)
                .into_iter()
                .map(|e| C64::from_polar(1.0, -tau_g * e))
                .collect(),
        ));
    }
    let h = build_static_hamiltonian(r, mean_splitting)?;
    make_dense_propagator(&h, tau_g)
}

/// Applies every gate of `seq` followed by one interval of free evolution.
pub fn run_perturbed_iteration(
    state: &mut StateVector,
    seq: &GateSequence,
    propagator: &InterGatePropagator,
) -> Result<()> {
    if state.n_qubits() != seq.n_qubits() || state.dim() != propagator.dim() {
        return Err(Error::Contract(format!(
            "dimension mismatch: state {} qubits, sequence {} qubits, propagator dim {}",
            state.n_qubits(),
            seq.n_qubits(),
            propagator.dim()
        )));
    }
    let mut scratch = vec![C64::new(0.0, 0.0); state.dim()];
    perturbed_iteration_slice(state.amplitudes_mut(), seq, propagator, &mut scratch);
    Ok(())
}

pub(crate) fn perturbed_iteration_slice(
    amp: &mut [C64],
    seq: &GateSequence,
    propagator: &InterGatePropagator,
    scratch: &mut [C64],
) {
    let n_q = seq.n_qubits();
    for gate in seq.gates() {
        apply_gate_slice(amp, n_q, gate);
        propagator.apply(amp, scratch);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eigenvalues_sorted(h: &Mat<f64>) -> Vec<f64> {
        let mut e = h.self_adjoint_eigenvalues(Side::Lower).unwrap();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn zero_amplitudes_give_clean_chain() {
        let params = ImperfectionParams::new(0.0, 0.0, 1.0).unwrap();
        let r = sample_disorder(5, &params, 42, 3);
        assert!(r.detunings.iter().all(|&d| d == 0.0));
        assert!(r.couplings.iter().all(|&j| j == 0.0));
        assert_eq!(r.couplings.len(), 4);
    }

    #[test]
    fn sampling_is_deterministic_and_bounded() {
        let params = ImperfectionParams::new(2.0, 0.5, 1.0).unwrap();
        let a = sample_disorder(6, &params, 9, 17);
        let b = sample_disorder(6, &params, 9, 17);
        let c = sample_disorder(6, &params, 9, 18);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.detunings.iter().all(|d| d.abs() <= 1.0));
        assert!(a.couplings.iter().all(|j| j.abs() <= 0.5));
    }

    #[test]
    fn detuning_law_of_large_numbers() {
        let params = ImperfectionParams::new(2.0, 0.0, 1.0).unwrap();
        let draws: Vec<f64> = (0..100_000)
            .map(|i| sample_disorder(1, &params, 1234, i).detunings[0])
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!(draws.iter().all(|d| (-1.0..=1.0).contains(d)));
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / draws.len() as f64;
        assert!((var - 1.0 / 3.0).abs() < 0.01, "var {var}");
    }

    #[test]
    fn params_validation() {
        assert!(ImperfectionParams::new(-1.0, 0.0, 1.0).is_err());
        assert!(ImperfectionParams::new(1.0, 0.0, 0.0).is_err());
        let p = ImperfectionParams::from_scaled(1e-3, 2e-3, 0.5).unwrap();
        assert!((p.epsilon() - 1e-3).abs() < 1e-18);
        assert!((p.rho() - 2e-3).abs() < 1e-18);
    }

    #[test]
    fn single_qubit_field() {
        let r = DisorderRealization {
            n_q: 1,
            detunings: vec![0.37],
            couplings: vec![],
            seed: 0,
        };
        let h = build_static_hamiltonian(&r, 0.0).unwrap();
        let e = eigenvalues_sorted(&h);
        assert!((e[0] + 0.37).abs() < 1e-15 && (e[1] - 0.37).abs() < 1e-15);
    }

    #[test]
    fn uncoupled_hamiltonian_is_diagonal() {
        let r = DisorderRealization {
            n_q: 3,
            detunings: vec![0.1, -0.2, 0.05],
            couplings: vec![0.0, 0.0],
            seed: 0,
        };
        let h = build_static_hamiltonian(&r, 0.0).unwrap();
        for m in 0..8 {
            let expected: f64 = (1..=3)
                .map(|q| {
                    let z = if m & qubit_mask(3, q) == 0 { 1.0 } else { -1.0 };
                    r.detunings[q - 1] * z
                })
                .sum();
            assert!((h[(m, m)] - expected).abs() < 1e-15);
            for n in 0..8 {
                if n != m {
                    assert_eq!(h[(m, n)], 0.0);
                }
            }
        }
    }

    #[test]
    fn two_qubit_coupling_spectrum() {
        // X1 X2 alone: eigenvalues {-g, -g, g, g}.
        let g = 0.7;
        let r = DisorderRealization {
            n_q: 2,
            detunings: vec![0.0, 0.0],
            couplings: vec![g],
            seed: 0,
        };
        let h = build_static_hamiltonian(&r, 0.0).unwrap();
        // Hand diagonalization: X X pairs |00>,|11> and |01>,|10>.
        assert_eq!(h[(0b11, 0b00)], g);
        assert_eq!(h[(0b10, 0b01)], g);
        let e = eigenvalues_sorted(&h);
        for (got, want) in e.iter().zip([-g, -g, g, g]) {
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn hamiltonian_is_traceless_and_symmetric() {
        let params = ImperfectionParams::new(0.3, 0.2, 1.0).unwrap();
        for idx in 0..5 {
            let r = sample_disorder(5, &params, 77, idx);
            let h = build_static_hamiltonian(&r, 0.0).unwrap();
            let tr: f64 = (0..32).map(|m| h[(m, m)]).sum();
            assert!(tr.abs() < 1e-10);
            assert!(symmetry_residual(&h) == 0.0);
        }
    }

    #[test]
    fn zero_time_is_identity() {
        let params = ImperfectionParams::new(0.3, 0.2, 1.0).unwrap();
        let r = sample_disorder(3, &params, 1, 1);
        let h = build_static_hamiltonian(&r, 0.0).unwrap();
        let e = make_propagator(&h, 0.0).unwrap().to_matrix();
        for i in 0..8 {
            for j in 0..8 {
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((e[(i, j)] - C64::new(id, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn forward_then_backward_is_identity() {
        let params = ImperfectionParams::new(0.8, 0.6, 1.0).unwrap();
        let r = sample_disorder(4, &params, 5, 2);
        let h = build_static_hamiltonian(&r, 0.0).unwrap();
        let fwd = make_propagator(&h, 1.3).unwrap().to_matrix();
        let bwd = make_propagator(&h, -1.3).unwrap().to_matrix();
        let prod = fwd * bwd;
        for i in 0..16 {
            for j in 0..16 {
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - C64::new(id, 0.0)).norm() < 1e-11);
            }
        }
    }

    #[test]
    fn diagonal_and_dense_paths_agree() {
        let params = ImperfectionParams::new(0.9, 0.0, 1.0).unwrap();
        let r = sample_disorder(4, &params, 3, 0);
        let h = build_static_hamiltonian(&r, 0.0).unwrap();
        let fast = make_propagator(&h, 1.0).unwrap();
        assert!(fast.is_diagonal());
        let dense = make_dense_propagator(&h, 1.0).unwrap();
        assert!(!dense.is_diagonal());
        let (a, b) = (fast.to_matrix(), dense.to_matrix());
        for i in 0..16 {
            for j in 0..16 {
                assert!((a[(i, j)] - b[(i, j)]).norm() < 1e-12);
            }
        }
        let direct = propagator_for(&r, 0.0, 1.0).unwrap().to_matrix();
        for i in 0..16 {
            assert!((direct[(i, i)] - a[(i, i)]).norm() < 1e-15);
        }
    }

    #[test]
    fn non_symmetric_input_rejected() {
        let mut h = Mat::<f64>::zeros(2, 2);
        h[(0, 1)] = 1.0;
        assert!(matches!(make_propagator(&h, 1.0), Err(Error::Contract(_))));
    }
}
