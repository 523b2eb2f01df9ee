use fisher_market::stability::{
    assemble_h, certify_points, sample_interior_allocation, symmetric_eigenvalues, PseudoJacobian, DEFAULT_FD_STEP,
};
use fisher_market::vi::monotonicity_product;
use fisher_market::{random_instance, sample_certificate, AllocationMatrix, UtilityFamily, Verdict};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn seeded_tullock_markets_are_certified_at_every_sample() {
    for seed in 0..10 {
        let market = random_instance(seed, 5, 3, UtilityFamily::Tullock);
        let cert = sample_certificate(&market, 50, seed).unwrap();
        assert_eq!(cert.sample_points, 50);
        assert!(cert.sample_lambdas.iter().all(|&l| l < 0.0), "seed {seed}: {}", cert.lambda_max);
        assert_eq!(cert.verdict, Verdict::StrictlyMonotoneAtPoint);
    }
}

#[test]
fn single_buyer_cch_matrix_is_symmetric_negative_semidefinite() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..20 {
        let family = if seed % 2 == 0 { UtilityFamily::CobbDouglas } else { UtilityFamily::Linear };
        let market = random_instance(seed, 1, 4, family);
        let x = sample_interior_allocation(&mut rng, 1, 4);
        let h = assemble_h(&market, &x, DEFAULT_FD_STEP).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((h.get(i, j) - h.get(j, i)).abs() <= 1e-8);
            }
        }
        let top = *symmetric_eigenvalues(&h.symmetrized(), 4).unwrap().last().unwrap();
        assert!(top <= 1e-8, "seed {seed}: {top:e}");
    }
}

#[test]
fn assembly_is_deterministic_and_symmetrization_exact() {
    let market = random_instance(3, 4, 3, UtilityFamily::Tullock);
    let x = sample_interior_allocation(&mut ChaCha8Rng::seed_from_u64(3), 4, 3);
    let h = assemble_h(&market, &x, DEFAULT_FD_STEP).unwrap();
    assert_eq!(h, assemble_h(&market, &x, DEFAULT_FD_STEP).unwrap());
    let s = h.symmetrized();
    let d = h.dim();
    for i in 0..d {
        for j in 0..d {
            assert_eq!(s[i * d + j], s[j * d + i]);
        }
    }
    assert_eq!(h.evaluation_point(), Some(&x));
}

fn midpoint(a: &AllocationMatrix, b: &AllocationMatrix) -> AllocationMatrix {
    AllocationMatrix::from_fn(a.n_buyers(), a.n_goods(), |n, k| 0.5 * (a[(n, k)] + b[(n, k)]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn certificate_agrees_with_pairwise_monotonicity(seed in any::<u64>()) {
        let market = random_instance(seed, 3, 2, UtilityFamily::Tullock);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = sample_interior_allocation(&mut rng, 3, 2);
        let y = sample_interior_allocation(&mut rng, 3, 2);
        let cert = certify_points(&market, &[x.clone(), midpoint(&x, &y), y.clone()], DEFAULT_FD_STEP).unwrap();
        if cert.verdict == Verdict::StrictlyMonotoneAtPoint {
            prop_assert!(monotonicity_product(&market, &x, &y).unwrap() <= 1e-9);
        }
    }

    #[test]
    fn jacobi_matches_a_reference_eigensolver(entries in prop::collection::vec(-10.0f64..10.0, 36)) {
        let a = DMatrix::from_row_slice(6, 6, &entries);
        let sym = &a + a.transpose();
        let flat: Vec<f64> = (0..6).flat_map(|i| (0..6).map(move |j| (i, j))).map(|(i, j)| sym[(i, j)]).collect();
        let ours = symmetric_eigenvalues(&flat, 6).unwrap();
        let mut reference: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
        reference.sort_by(f64::total_cmp);
        for (a, b) in ours.iter().zip(&reference) {
            prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn explicit_negative_definite_matrices_certify(diag in prop::collection::vec(0.1f64..5.0, 1..8)) {
        let d = diag.len();
        let mut e = vec![0.0; d * d];
        for (i, v) in diag.iter().enumerate() {
            e[i * d + i] = -v;
        }
        let cert = fisher_market::certify_monotone(&PseudoJacobian::from_entries(d, e).unwrap()).unwrap();
        prop_assert_eq!(cert.verdict, Verdict::StrictlyMonotoneAtPoint);
        let worst = diag.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!((cert.lambda_max + 2.0 * worst).abs() <= 1e-12);
    }
}
