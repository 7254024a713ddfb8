use std::f64::consts::TAU;

use faer::Mat;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qsaw::floquet::{build_floquet, parity_blocks, unitarity_residual};
use qsaw::imperfections::{
    build_static_hamiltonian, make_dense_propagator, propagator_for, run_perturbed_iteration,
    sample_disorder, ImperfectionParams,
};
use qsaw::qcore::{apply_gate_slice, gate_matrix, qft, Gate, PairPhase, StateVector};
use qsaw::sawtooth::{compile_iteration, dft_matrix, make_params, oracle_floquet};

fn max_diff(a: &Mat<C64>, b: &Mat<C64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

fn random_amplitudes(dim: usize, rng: &mut impl Rng) -> Vec<C64> {
    (0..dim)
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect()
}

fn identity(n: usize) -> Mat<C64> {
    Mat::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

// exp(-i tau H) by scaling and squaring a 50-term Taylor series.
fn taylor_exp(h: &Mat<f64>, tau: f64) -> Mat<C64> {
    let n = h.nrows();
    let norm: f64 = (0..n)
        .map(|i| (0..n).map(|j| h[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = ((norm * tau.abs()).max(1.0).log2().ceil() as i32 + 4).max(0);
    let scale = tau / 2f64.powi(squarings);
    let a = Mat::from_fn(n, n, |i, j| C64::new(0.0, -scale * h[(i, j)]));
    let mut sum = identity(n);
    let mut term = identity(n);
    for k in 1..=50 {
        let inv_k = 1.0 / k as f64;
        term = (&term * &a).as_ref().map(|x| x * inv_k);
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

#[test]
fn qft_matches_dense_dft() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n_q in 1..=6 {
        let dim = 1usize << n_q;
        let f = dft_matrix(dim);
        for _ in 0..3 {
            let amp = random_amplitudes(dim, &mut rng);
            let mut st = StateVector::normalized(n_q, amp).unwrap();
            let x = Mat::from_fn(dim, 1, |i, _| st.amplitudes()[i]);
            let want = &f * &x;
            qft(&mut st, false);
            for i in 0..dim {
                assert!(
                    (st.amplitudes()[i] - want[(i, 0)]).norm() < 1e-12,
                    "n_q={n_q}"
                );
            }
            let back = f.adjoint() * &want;
            qft(&mut st, true);
            for i in 0..dim {
                assert!((st.amplitudes()[i] - back[(i, 0)]).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn gate_matrices_agree_with_kernels() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n_q = 4;
    let gates = [
        Gate::Hadamard { qubit: 1 },
        Gate::Hadamard { qubit: 4 },
        Gate::ControlledPhase {
            control: 2,
            target: 3,
            angle: 0.7,
        },
        Gate::ControlledPhase {
            control: 4,
            target: 1,
            angle: -2.1,
        },
        Gate::PairPhase(PairPhase {
            i: 2,
            j: 2,
            strength: 1.3,
            weight_i: 0.5,
            offset_i: -0.2,
            weight_j: 0.5,
            offset_j: -0.2,
        }),
        Gate::PairPhase(PairPhase {
            i: 1,
            j: 3,
            strength: -0.4,
            weight_i: -1.0,
            offset_i: 0.1,
            weight_j: 0.25,
            offset_j: 0.3,
        }),
    ];
    for g in &gates {
        let m = gate_matrix(g, n_q).unwrap();
        assert!(unitarity_residual(&m) < 1e-13);
        let mut amp = random_amplitudes(16, &mut rng);
        let x = Mat::from_fn(16, 1, |i, _| amp[i]);
        let want = &m * &x;
        apply_gate_slice(&mut amp, n_q, g);
        for i in 0..16 {
            assert!((amp[i] - want[(i, 0)]).norm() < 1e-13, "{g:?}");
        }
    }
}

#[test]
fn compiled_iteration_matches_dense_oracle() {
    let shift = 2f64.sqrt() / 5.0;
    for chaos in [2f64.sqrt(), -0.1, -1.0, -5.0] {
        for s in [0.0, shift] {
            for n_q in 3..=8 {
                let p = make_params(chaos, n_q, s, s).unwrap();
                let u = build_floquet(&p, &compile_iteration(&p), None).unwrap();
                let d = max_diff(&u, &oracle_floquet(&p).unwrap());
                assert!(d <= 1e-10, "K={chaos} shift={s} n_q={n_q}: {d:e}");
            }
        }
    }
}

#[test]
fn kick_stage_matches_exact_diagonal() {
    // The kick stage alone is diagonal with entries exp(i k x^2 / 2).
    for n_q in [3, 5, 7] {
        let p = make_params(0.37, n_q, 0.2, -0.3).unwrap();
        let seq = compile_iteration(&p);
        for m in 0..p.dim {
            let mut amp = vec![C64::new(0.0, 0.0); p.dim];
            amp[m] = C64::new(1.0, 0.0);
            for g in seq.stage(qsaw::sawtooth::Stage::Kick) {
                apply_gate_slice(&mut amp, n_q, g);
            }
            let x = TAU * m as f64 / p.dim as f64 + p.theta0 - std::f64::consts::PI;
            let want = C64::from_polar(1.0, 0.5 * p.kick * x * x);
            assert!((amp[m] - want).norm() < 1e-11, "n_q={n_q} m={m}");
        }
    }
}

#[test]
fn propagator_matches_taylor_series() {
    let imp = ImperfectionParams::from_scaled(0.3, 0.3, 1.0).unwrap();
    for idx in 0..5 {
        let r = sample_disorder(3, &imp, 77, idx);
        assert!(r.has_couplings());
        let h = build_static_hamiltonian(&r, 0.0).unwrap();
        for tau in [0.1, 1.0, 2.5] {
            let e = make_dense_propagator(&h, tau).unwrap().to_matrix();
            let d = max_diff(&e, &taylor_exp(&h, tau));
            assert!(d < 1e-10, "tau={tau}: {d:e}");
        }
    }
}

#[test]
fn perturbation_converges_linearly() {
    let p = make_params(2f64.sqrt(), 5, 0.0, 0.0).unwrap();
    let seq = compile_iteration(&p);
    let u0 = build_floquet(&p, &seq, None).unwrap();
    let mut slopes = Vec::new();
    for eps in [1e-3, 1e-4, 1e-5, 1e-6] {
        let imp = ImperfectionParams::from_scaled(eps, eps, 1.0).unwrap();
        let e = propagator_for(&sample_disorder(5, &imp, 5, 0), 0.0, 1.0).unwrap();
        let u = build_floquet(&p, &seq, Some(&e)).unwrap();
        slopes.push(max_diff(&u, &u0) / eps);
    }
    for w in slopes.windows(2) {
        assert!((w[0] / w[1] - 1.0).abs() < 0.02, "{slopes:?}");
    }
}

#[test]
fn clean_hardware_reproduces_the_ideal_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for n_q in [3, 6] {
        let p = make_params(-0.1, n_q, 0.3, 0.3).unwrap();
        let seq = compile_iteration(&p);
        let imp = ImperfectionParams::from_scaled(0.0, 0.0, 1.0).unwrap();
        let e = propagator_for(&sample_disorder(n_q, &imp, 1, 0), 0.0, 1.0).unwrap();
        let oracle = oracle_floquet(&p).unwrap();
        let amp = random_amplitudes(p.dim, &mut rng);
        let mut st = StateVector::normalized(n_q, amp).unwrap();
        let x = Mat::from_fn(p.dim, 1, |i, _| st.amplitudes()[i]);
        let want = &oracle * &x;
        run_perturbed_iteration(&mut st, &seq, &e).unwrap();
        for i in 0..p.dim {
            assert!((st.amplitudes()[i] - want[(i, 0)]).norm() < 1e-10);
        }
    }
}

#[test]
fn parity_blocks_carry_the_whole_spectrum() {
    for n_q in [4, 6] {
        let p = make_params(2f64.sqrt(), n_q, 0.0, 0.0).unwrap();
        let u = oracle_floquet(&p).unwrap();
        let (even, odd) = parity_blocks(&p, &u).unwrap();
        assert_eq!(even.nrows(), p.dim / 2 + 1);
        assert_eq!(odd.nrows(), p.dim / 2 - 1);
        assert!(unitarity_residual(&even) < 1e-12);
        assert!(unitarity_residual(&odd) < 1e-12);
        let trace = |m: &Mat<C64>| (0..m.nrows()).map(|i| m[(i, i)]).sum::<C64>();
        assert!((trace(&even) + trace(&odd) - trace(&u)).norm() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gates_preserve_norm(seed in any::<u64>(), n_q in 2usize..7, which in 0usize..3,
                           angle in -10.0f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = 1usize << n_q;
        let mut st = StateVector::normalized(n_q, random_amplitudes(dim, &mut rng)).unwrap();
        let a = rng.random_range(1..=n_q);
        let b = (a % n_q) + 1;
        let g = match which {
            0 => Gate::Hadamard { qubit: a },
            1 => Gate::ControlledPhase { control: a, target: b, angle },
            _ => Gate::PairPhase(PairPhase {
                i: a, j: b, strength: angle,
                weight_i: 1.0, offset_i: -0.3, weight_j: 0.5, offset_j: 0.2,
            }),
        };
        st.apply(&g).unwrap();
        prop_assert!((st.norm() - 1.0).abs() < 1e-12);
        st.apply(&g.inverse()).unwrap();
        prop_assert!((st.norm() - 1.0).abs() < 1e-12);
    }
}
