//! Dense statevector storage and the elementary gate kernels used by the
//! sawtooth-map circuit.
//!
//! Qubit `q` (1-based) is bit `n_q - q` of the basis index, so qubit 1 is the
//! most significant bit. In the angle representation the index `m` encodes
//! `theta = 2*pi*m/N = 2*pi * sum_q alpha_q 2^{-q}`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Largest register the dense statevector will allocate.
pub const MAX_STATE_QUBITS: usize = 26;

/// Tolerance on `sum |amp|^2 = 1` accepted when wrapping caller amplitudes.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// Bit mask of qubit `q` (1-based) in a register of `n_q` qubits.
#[inline]
pub fn qubit_mask(n_q: usize, q: usize) -> usize {
    1usize << (n_q - q)
}

/// `2^n_q` complex amplitudes of a pure register state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_q: usize,
    amp: Vec<C64>,
}

impl StateVector {
    /// Computational basis state `|m>`.
    pub fn basis(n_q: usize, m: usize) -> Result<Self> {
        check_qubits(n_q)?;
        let dim = 1usize << n_q;
        if m >= dim {
            return Err(Error::Config(format!(
                "basis index {m} out of range for {n_q} qubits"
            )));
        }
        let mut amp = vec![C64::new(0.0, 0.0); dim];
        amp[m] = C64::new(1.0, 0.0);
        Ok(Self { n_q, amp })
    }

    /// Wraps caller amplitudes; the length must be `2^n_q` and the norm 1.
    pub fn from_amplitudes(n_q: usize, amp: Vec<C64>) -> Result<Self> {
        check_qubits(n_q)?;
        if amp.len() != 1usize << n_q {
            return Err(Error::Config(format!(
                "expected {} amplitudes for {n_q} qubits, got {}",
                1usize << n_q,
                amp.len()
            )));
        }
        let state = Self { n_q, amp };
        let norm = state.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Contract(format!("state norm is {norm}, not 1")));
        }
        Ok(state)
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(n_q: usize, mut amp: Vec<C64>) -> Result<Self> {
        let norm = amp.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Contract("cannot normalize a zero vector".into()));
        }
        amp.iter_mut().for_each(|a| *a /= norm);
        Self::from_amplitudes(n_q, amp)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_q
    }

    pub fn dim(&self) -> usize {
        self.amp.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amp
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amp
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amp
    }

    pub fn norm(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Applies `gate` in place.
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_q)?;
        apply_gate_slice(&mut self.amp, self.n_q, gate);
        Ok(())
    }
}

fn check_qubits(n_q: usize) -> Result<()> {
    if n_q == 0 || n_q > MAX_STATE_QUBITS {
        return Err(Error::Config(format!(
            "qubit count {n_q} outside [1, {MAX_STATE_QUBITS}]"
        )));
    }
    Ok(())
}

/// Diagonal two-qubit phase gate `exp(i s (w_i a_i + o_i)(w_j a_j + o_j))`
/// where `a_i`, `a_j` are the bit values of qubits `i` and `j`.
///
/// Each factor of a quadratic form over register bits has this shape. With
/// `i == j` the gate acts on a single qubit as `exp(i s (w a + o)^2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairPhase {
    pub i: usize,
    pub j: usize,
    pub strength: f64,
    pub weight_i: f64,
    pub offset_i: f64,
    pub weight_j: f64,
    pub offset_j: f64,
}

impl PairPhase {
    /// Phase factor for the bit values `(a_i, a_j)`.
    pub fn phase(&self, a_i: bool, a_j: bool) -> C64 {
        let x = self.weight_i * f64::from(u8::from(a_i)) + self.offset_i;
        let y = self.weight_j * f64::from(u8::from(a_j)) + self.offset_j;
        C64::from_polar(1.0, self.strength * x * y)
    }
}

/// One elementary gate. Qubit indices are 1-based.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gate {
    Hadamard {
        qubit: usize,
    },
    /// Multiplies `|11>` of (control, target) by `exp(i angle)`.
    ControlledPhase {
        control: usize,
        target: usize,
        angle: f64,
    },
    PairPhase(PairPhase),
}

impl Gate {
    pub fn validate(&self, n_q: usize) -> Result<()> {
        let in_range = |q: usize| (1..=n_q).contains(&q);
        let ok = match *self {
            Gate::Hadamard { qubit } => in_range(qubit),
            Gate::ControlledPhase {
                control, target, ..
            } => in_range(control) && in_range(target) && control != target,
            Gate::PairPhase(pp) => in_range(pp.i) && in_range(pp.j),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "gate {self:?} addresses a qubit outside [1, {n_q}]"
            )))
        }
    }

    /// The inverse gate: negated angle or strength; Hadamard is self-inverse.
    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::Hadamard { qubit } => Gate::Hadamard { qubit },
            Gate::ControlledPhase {
                control,
                target,
                angle,
            } => Gate::ControlledPhase {
                control,
                target,
                angle: -angle,
            },
            Gate::PairPhase(pp) => Gate::PairPhase(PairPhase {
                strength: -pp.strength,
                ..pp
            }),
        }
    }

    pub fn is_diagonal(&self) -> bool {
        !matches!(self, Gate::Hadamard { .. })
    }
}

/// Applies `gate` to a raw amplitude slice of length `2^n_q`.
///
/// The gate is assumed valid for `n_q`; [`StateVector::apply`] checks it.
pub fn apply_gate_slice(amp: &mut [C64], n_q: usize, gate: &Gate) {
    debug_assert_eq!(amp.len(), 1usize << n_q);
    match *gate {
        Gate::Hadamard { qubit } => {
            let mask = qubit_mask(n_q, qubit);
            let block = mask << 1;
            for chunk in amp.chunks_exact_mut(block) {
                let (lo, hi) = chunk.split_at_mut(mask);
                for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                    let (x, y) = (*a, *b);
                    *a = (x + y) * FRAC_1_SQRT_2;
                    *b = (x - y) * FRAC_1_SQRT_2;
                }
            }
        }
        Gate::ControlledPhase {
            control,
            target,
            angle,
        } => {
            let both = qubit_mask(n_q, control) | qubit_mask(n_q, target);
            let factor = C64::from_polar(1.0, angle);
            for (m, a) in amp.iter_mut().enumerate() {
                if m & both == both {
                    *a *= factor;
                }
            }
        }
        Gate::PairPhase(pp) => {
            let mi = qubit_mask(n_q, pp.i);
            let mj = qubit_mask(n_q, pp.j);
            let table = [
                pp.phase(false, false),
                pp.phase(false, true),
                pp.phase(true, false),
                pp.phase(true, true),
            ];
            for (m, a) in amp.iter_mut().enumerate() {
                let slot = (usize::from(m & mi != 0) << 1) | usize::from(m & mj != 0);
                *a *= table[slot];
            }
        }
    }
}

/// Gate list of the quantum Fourier transform without the final swap network.
///
/// The forward list is `n_q` Hadamards and `n_q(n_q-1)/2` controlled phases;
/// its output register holds the frequency index bit-reversed. The inverse
/// list is the forward list reversed with conjugated phases and expects
/// bit-reversed input.
pub fn qft_gates(n_q: usize, inverse: bool) -> Vec<Gate> {
    let mut gates = Vec::with_capacity(n_q * (n_q + 1) / 2);
    for j in 1..=n_q {
        gates.push(Gate::Hadamard { qubit: j });
        for q in j + 1..=n_q {
            gates.push(Gate::ControlledPhase {
                control: q,
                target: j,
                angle: 2.0 * PI / (1u64 << (q - j + 1)) as f64,
            });
        }
    }
    if inverse {
        gates.reverse();
        gates.iter_mut().for_each(|g| *g = g.inverse());
    }
    gates
}

/// Reverses the `n_q`-bit index `m`.
#[inline]
pub fn bit_reverse(m: usize, n_q: usize) -> usize {
    m.reverse_bits() >> (usize::BITS as usize - n_q)
}

/// Permutes amplitudes so that index `m` moves to `bit_reverse(m)`.
pub fn bit_reverse_permute(amp: &mut [C64], n_q: usize) {
    for m in 0..amp.len() {
        let r = bit_reverse(m, n_q);
        if r > m {
            amp.swap(m, r);
        }
    }
}

/// Discrete Fourier transform of the register via the gate decomposition.
///
/// Forward: `out[n] = sum_m exp(+2 pi i m n / N) in[m] / sqrt(N)`; inverse
/// uses the conjugate kernel. Output order is restored by relabeling indices
/// rather than by swap gates.
pub fn qft(state: &mut StateVector, inverse: bool) {
    let n_q = state.n_q;
    if inverse {
        bit_reverse_permute(&mut state.amp, n_q);
    }
    for gate in qft_gates(n_q, inverse) {
        apply_gate_slice(&mut state.amp, n_q, &gate);
    }
    if !inverse {
        bit_reverse_permute(&mut state.amp, n_q);
    }
}

/// Dense `N x N` matrix of `gate`, column `m` being the gate applied to `|m>`.
pub fn gate_matrix(gate: &Gate, n_q: usize) -> Result<Mat<C64>> {
    check_qubits(n_q)?;
    gate.validate(n_q)?;
    let dim = 1usize << n_q;
    let mut out = Mat::<C64>::zeros(dim, dim);
    for m in 0..dim {
        let col = out.col_as_slice_mut(m);
        col[m] = C64::new(1.0, 0.0);
        apply_gate_slice(col, n_q, gate);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_state(n_q: usize, seed: u64) -> StateVector {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let amp = (0..1usize << n_q)
            .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        StateVector::normalized(n_q, amp).unwrap()
    }

    fn max_diff(a: &[C64], b: &[C64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn hadamard_on_ground_state() {
        let mut s = StateVector::basis(3, 0).unwrap();
        s.apply(&Gate::Hadamard { qubit: 1 }).unwrap();
        let amp = s.amplitudes();
        assert!((amp[0].re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((amp[0b100].re - FRAC_1_SQRT_2).abs() < 1e-15);
        let rest: f64 = amp
            .iter()
            .enumerate()
            .filter(|(m, _)| *m != 0 && *m != 0b100)
            .map(|(_, a)| a.norm())
            .sum();
        assert_eq!(rest, 0.0);
    }

    #[test]
    fn pair_phase_on_ground_block() {
        // Kick-block factor from the quadratic decomposition: on |00> it gives
        // exp(i k pi^2 / (2 n_q^2)).
        let (n_q, k) = (4usize, 3.7);
        let c = -1.0 / (2.0 * n_q as f64);
        let gate = Gate::PairPhase(PairPhase {
            i: 2,
            j: 3,
            strength: 2.0 * PI * PI * k,
            weight_i: 0.25,
            offset_i: c,
            weight_j: 0.125,
            offset_j: c,
        });
        let mut s = StateVector::basis(n_q, 0).unwrap();
        s.apply(&gate).unwrap();
        let expected = C64::from_polar(1.0, k * PI * PI / (2.0 * (n_q * n_q) as f64));
        assert!((s.amplitudes()[0] - expected).norm() < 1e-14);
    }

    #[test]
    fn out_of_range_qubit_is_config_error() {
        let mut s = StateVector::basis(3, 0).unwrap();
        assert!(matches!(
            s.apply(&Gate::Hadamard { qubit: 4 }),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            s.apply(&Gate::Hadamard { qubit: 0 }),
            Err(Error::Config(_))
        ));
        let cp = Gate::ControlledPhase {
            control: 2,
            target: 2,
            angle: 1.0,
        };
        assert!(cp.validate(3).is_err());
    }

    #[test]
    fn gate_then_inverse_is_identity() {
        let n_q = 4;
        let gates = [
            Gate::Hadamard { qubit: 3 },
            Gate::ControlledPhase {
                control: 1,
                target: 4,
                angle: 0.731,
            },
            Gate::PairPhase(PairPhase {
                i: 2,
                j: 2,
                strength: 17.3,
                weight_i: 0.25,
                offset_i: -0.3,
                weight_j: 0.25,
                offset_j: -0.3,
            }),
        ];
        for g in gates {
            let original = random_state(n_q, 11);
            let mut s = original.clone();
            s.apply(&g).unwrap();
            s.apply(&g.inverse()).unwrap();
            assert!(max_diff(s.amplitudes(), original.amplitudes()) < 1e-12);
        }
    }

    #[test]
    fn diagonal_single_qubit_degenerate_pair_phase() {
        // alpha^2 = alpha: the i == j gate only depends on one bit.
        let pp = PairPhase {
            i: 1,
            j: 1,
            strength: 2.0,
            weight_i: 0.5,
            offset_i: 0.1,
            weight_j: 0.5,
            offset_j: 0.1,
        };
        let m = gate_matrix(&Gate::PairPhase(pp), 2).unwrap();
        let p0 = C64::from_polar(1.0, 2.0 * 0.01);
        let p1 = C64::from_polar(1.0, 2.0 * 0.36);
        for idx in 0..4 {
            let expected = if idx & 0b10 == 0 { p0 } else { p1 };
            assert!((m[(idx, idx)] - expected).norm() < 1e-15);
        }
    }

    #[test]
    fn qft_of_ground_state_is_uniform() {
        let mut s = StateVector::basis(5, 0).unwrap();
        qft(&mut s, false);
        let expected = 1.0 / 32f64.sqrt();
        for a in s.amplitudes() {
            assert!((a - C64::new(expected, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn qft_round_trip() {
        let original = random_state(6, 3);
        let mut s = original.clone();
        qft(&mut s, false);
        qft(&mut s, true);
        assert!(max_diff(s.amplitudes(), original.amplitudes()) < 1e-12);
    }

    #[test]
    fn qft_gate_count() {
        for n_q in 1..8 {
            assert_eq!(qft_gates(n_q, false).len(), n_q + n_q * (n_q - 1) / 2);
        }
    }

    #[test]
    fn hadamard_matrix_squares_to_identity() {
        let h = gate_matrix(&Gate::Hadamard { qubit: 2 }, 3).unwrap();
        let sq = &h * &h;
        for i in 0..8 {
            for j in 0..8 {
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((sq[(i, j)] - C64::new(id, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn pair_phase_matrix_is_unit_diagonal() {
        let g = Gate::PairPhase(PairPhase {
            i: 1,
            j: 3,
            strength: -5.0,
            weight_i: 0.5,
            offset_i: 0.2,
            weight_j: -4.0,
            offset_j: 0.2,
        });
        let m = gate_matrix(&g, 3).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                if i == j {
                    assert!((m[(i, i)].norm() - 1.0).abs() < 1e-15);
                } else {
                    assert_eq!(m[(i, j)], C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn bit_reverse_is_involution() {
        for n_q in 1..10 {
            for m in 0..1usize << n_q {
                assert_eq!(bit_reverse(bit_reverse(m, n_q), n_q), m);
            }
        }
        assert_eq!(bit_reverse(0b001, 3), 0b100);
        assert_eq!(bit_reverse(0b110, 3), 0b011);
    }
}
