use num_complex::Complex64;
use proptest::prelude::*;

use weakval::entanglement::{evaluate_witness, WitnessSetting};
use weakval::hilbert::{
    linalg, random_density, random_observable, random_pure, rng_from_seed, random_hermitian_with,
    CMatrix,
};
use weakval::moments::{nth_moment_direct, nth_moment_recursive_pre, PreSelection};
use weakval::oracle::ExactOracle;
use weakval::product::{product_weak_value_direct, product_weak_value_local, LocalPostSelection};
use weakval::robustness::{trace_norm, trace_norm_eig};
use weakval::tomography::{reconstruct_mixed_single, reconstruct_pure_alt, OperatorSet};
use weakval::vaidman::{decompose, spectral_pair};
use weakval::{DensityOperator, Tensor, Tolerances};

fn tol() -> Tolerances {
    Tolerances::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn vaidman_rebuilds_action(d in 2usize..7, seed in any::<u64>()) {
        let a = random_observable(d, seed).unwrap();
        let phi = random_pure(d, seed ^ 1).unwrap();
        let dec = decompose(&a, &phi, &tol()).unwrap();
        let lhs = a.matrix() * phi.vector();
        let rhs = phi.vector() * Complex64::new(dec.mean, 0.0) + dec.phi_perp.vector() * Complex64::new(dec.spread, 0.0);
        prop_assert!((lhs - rhs).norm() < 1e-10);
        prop_assert!(phi.inner(&dec.phi_perp).norm() < 1e-10);
        let pair = spectral_pair(&phi, &dec.phi_perp, &tol()).unwrap();
        let sym = phi.vector() * dec.phi_perp.vector().adjoint() + dec.phi_perp.vector() * phi.vector().adjoint();
        prop_assert!(linalg::max_abs(&(pair.sym_matrix() - sym)) < 1e-9);
    }

    #[test]
    fn moments_match_direct(d in 2usize..6, n in 1u32..5, rank in 0usize..6, seed in any::<u64>()) {
        let a = random_observable(d, seed).unwrap();
        let phi = random_pure(d, seed ^ 2).unwrap();
        let pre: PreSelection = if rank == 0 {
            random_pure(d, seed ^ 3).unwrap().into()
        } else {
            random_density(d, rank.min(d), seed ^ 3).unwrap().into()
        };
        let direct = nth_moment_direct(&a, &pre, &phi, n, &tol()).unwrap();
        let rec = nth_moment_recursive_pre(&a, &pre, &phi, n, &tol()).unwrap();
        prop_assert!((rec - direct).norm() < 1e-8 * direct.norm().max(1.0));
    }

    #[test]
    fn product_local_matches_direct(m in 2usize..4, n in 2usize..4, mixed in any::<bool>(), seed in any::<u64>()) {
        let pre: PreSelection = if mixed {
            random_density(m * n, 1 + (seed as usize) % (m * n), seed).unwrap().with_bipartite(m, n).unwrap().into()
        } else {
            random_pure(m * n, seed).unwrap().with_bipartite(m, n).unwrap().into()
        };
        let a = random_observable(m, seed ^ 5).unwrap();
        let b = random_observable(n, seed ^ 6).unwrap();
        let post = LocalPostSelection::new(random_pure(m, seed ^ 7).unwrap(), random_pure(n, seed ^ 8).unwrap());
        let direct = product_weak_value_direct(&a, &b, &pre, &post, &tol()).unwrap();
        let local = product_weak_value_local(&a, &b, &pre, &post, &tol()).unwrap();
        prop_assert!((local - direct).norm() < 1e-8 * direct.norm().max(1.0));
    }

    #[test]
    fn pure_alt_roundtrip_and_gauge(d in 2usize..8, seed in any::<u64>()) {
        let hidden = random_pure(d, seed).unwrap();
        let oracle = ExactOracle::new(hidden.clone(), tol());
        let r = reconstruct_pure_alt(&oracle, d, &OperatorSet::cyclic_traceless(d).unwrap(), 0, &tol()).unwrap();
        let r = r.compare_with(&hidden.into());
        prop_assert!(r.fidelity_vs_hidden.unwrap() > 1.0 - 1e-9);
        if let weakval::tomography::ReconstructedState::Pure(s) = &r.state {
            prop_assert_eq!(s.amplitudes()[0].im, 0.0);
            prop_assert!(s.amplitudes()[0].re > 0.0);
        }
    }

    #[test]
    fn mixed_single_roundtrip(d in 2usize..7, rank in 1usize..7, seed in any::<u64>()) {
        let hidden = random_density(d, rank.min(d), seed).unwrap();
        let oracle = ExactOracle::new(hidden.clone(), tol());
        let r = reconstruct_mixed_single(&oracle, d, &OperatorSet::cyclic(d).unwrap(), &tol()).unwrap();
        let r = r.compare_with(&hidden.into());
        prop_assert!(r.trace_distance_vs_hidden.unwrap() < 1e-8);
    }

    #[test]
    fn product_states_satisfy_inequality(d in 2usize..4, seed in any::<u64>()) {
        let rho = random_pure(d, seed).unwrap().tensor(&random_pure(d, seed ^ 9).unwrap()).to_density();
        let rho = rho.with_bipartite(d, d).unwrap();
        let mut rng = rng_from_seed(seed);
        let post = LocalPostSelection::new(random_pure(d, seed ^ 10).unwrap(), random_pure(d, seed ^ 11).unwrap());
        let s = WitnessSetting::with_matrices(random_hermitian_with(&mut rng, d), random_hermitian_with(&mut rng, d), post).unwrap();
        prop_assert!(!evaluate_witness(&rho, &s, &tol()).unwrap().violated);
    }

    #[test]
    fn trace_norm_is_a_norm(d in 2usize..6, k in -3.0f64..3.0, seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let x: CMatrix = random_hermitian_with(&mut rng, d) + random_hermitian_with(&mut rng, d) * Complex64::new(0.0, 1.0);
        let y = random_hermitian_with(&mut rng, d);
        let nx = trace_norm(&x).unwrap();
        prop_assert!(nx >= 0.0);
        prop_assert!((nx - trace_norm_eig(&x)).abs() < 1e-10 * nx.max(1.0));
        prop_assert!(trace_norm(&(&x + &y)).unwrap() <= nx + trace_norm(&y).unwrap() + 1e-10);
        prop_assert!((trace_norm(&x.scale(k)).unwrap() - k.abs() * nx).abs() < 1e-10 * nx.max(1.0));
    }

    #[test]
    fn mixtures_stay_valid(p in 0.0f64..1.0, seed in any::<u64>()) {
        let a = random_density(3, 2, seed).unwrap();
        let b = random_density(3, 1, seed ^ 12).unwrap();
        let mix = DensityOperator::mixture(&[(p, a), (1.0 - p, b)]).unwrap();
        prop_assert!(mix.min_eigenvalue() > -1e-12);
        prop_assert!((mix.matrix().trace().re - 1.0).abs() < 1e-12);
    }
}
