use faer::Mat;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use qsaw::eigenstates::{entropy, husimi, overlaps};
use qsaw::floquet::{build_floquet, diagonalize, unitarity_residual};
use qsaw::imperfections::{propagator_for, sample_disorder, ImperfectionParams};
use qsaw::qcore::StateVector;
use qsaw::sawtooth::{compile_iteration, make_params};
use qsaw::spectral::spacings;

fn perturbed_spectrum(
    chaos: f64,
    n_q: usize,
    eps: f64,
    rho: f64,
    seed: u64,
) -> (Mat<C64>, qsaw::floquet::FloquetSpectrum) {
    let p = make_params(chaos, n_q, 0.1, 0.1).unwrap();
    let seq = compile_iteration(&p);
    let imp = ImperfectionParams::from_scaled(eps, rho, 1.0).unwrap();
    let e = propagator_for(&sample_disorder(n_q, &imp, seed, 0), 0.0, 1.0).unwrap();
    let u = build_floquet(&p, &seq, Some(&e)).unwrap();
    let spectrum = diagonalize(&u).unwrap();
    (u, spectrum)
}

fn chaos_strategy() -> impl Strategy<Value = f64> {
    prop_oneof![0.2f64..3.0, -3.9f64..-0.05, -8.0f64..-4.1]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn floquet_operators_are_unitary_and_reconstructed(
        chaos in chaos_strategy(), n_q in 3usize..7, eps in 0.0f64..0.05,
        coupled in any::<bool>(), seed in any::<u64>(),
    ) {
        let rho = if coupled { eps } else { 0.0 };
        let (u, spectrum) = perturbed_spectrum(chaos, n_q, eps, rho, seed);
        prop_assert!(unitarity_residual(&u) < 1e-10);
        prop_assert!(spectrum.eigen_residual < 1e-8);
        prop_assert!(unitarity_residual(&spectrum.eigenvectors) < 1e-8);
        prop_assert!(spectrum.quasi_energies.windows(2).all(|w| w[0] <= w[1]));
        let s = spacings(&spectrum.quasi_energies).unwrap();
        prop_assert!((s.iter().sum::<f64>() - s.len() as f64).abs() < 1e-8);
    }

    #[test]
    fn overlaps_are_doubly_stochastic_with_bounded_entropy(
        chaos in chaos_strategy(), n_q in 3usize..7, eps in 0.0f64..0.2, seed in any::<u64>(),
    ) {
        let (_, ideal) = perturbed_spectrum(chaos, n_q, 0.0, 0.0, seed);
        let (_, pert) = perturbed_spectrum(chaos, n_q, eps, eps, seed);
        let o = overlaps(&ideal.eigenvectors, &pert.eigenvectors).unwrap();
        prop_assert!(o.row_sums().iter().all(|s| (s - 1.0).abs() < 1e-8));
        prop_assert!(o.col_sums().iter().all(|s| (s - 1.0).abs() < 1e-8));
        let (s, mean) = entropy(&o).unwrap();
        let max = n_q as f64 + 1e-9;
        prop_assert!(s.iter().all(|&x| (0.0..=max).contains(&x)));
        prop_assert!((0.0..=max).contains(&mean));
    }

    #[test]
    fn husimi_is_a_normalized_density(
        chaos in chaos_strategy(), n_q in 3usize..6, k in 0usize..8, seed in any::<u64>(),
    ) {
        let (_, spectrum) = perturbed_spectrum(chaos, n_q, 1e-2, 0.0, seed);
        let p = make_params(chaos, n_q, 0.1, 0.1).unwrap();
        let st = StateVector::normalized(n_q, spectrum.eigenvectors.col_as_slice(k).to_vec()).unwrap();
        let g = husimi(&st, &p, 12, 12).unwrap();
        prop_assert!(g.density.iter().all(|&x| x >= 0.0));
        prop_assert!((g.total_mass() - 1.0).abs() < 1e-9);
    }
}
