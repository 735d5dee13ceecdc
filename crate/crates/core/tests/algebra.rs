use csim::coupling::{build_coupling_matrix, coupled_phases, CouplingSpec};
use csim::fhrr::{bind, bundle, encode, make_encoding_matrix, normalize, similarity, unbind, wrap_phase, SspVector};
use csim::rng::seeded;
use proptest::prelude::*;

fn ssp(n: usize, seed: u64) -> SspVector {
    SspVector::random(n, &mut seeded(seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn wrapped_phases_stay_in_range(theta in -1e4f64..1e4) {
        let w = wrap_phase(theta);
        prop_assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI);
        let turns = (theta - w) / std::f64::consts::TAU;
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }

    #[test]
    fn binding_commutes_and_inverts(n in 2usize..300, s1 in any::<u64>(), s2 in any::<u64>()) {
        let (u, v) = (ssp(n, s1), ssp(n, s2));
        let uv = bind(&u, &v).unwrap();
        prop_assert!(uv.max_phase_error(&bind(&v, &u).unwrap()).unwrap() < 1e-12);
        prop_assert!(unbind(&uv, &u).unwrap().max_phase_error(&v).unwrap() < 1e-12);
    }

    #[test]
    fn similarity_is_conjugate_symmetric(n in 2usize..300, s1 in any::<u64>(), s2 in any::<u64>()) {
        let (u, v) = (ssp(n, s1), ssp(n, s2));
        let (a, b) = (similarity(&u, &v).unwrap(), similarity(&v, &u).unwrap());
        prop_assert!((a - b.conj()).norm() < 1e-12);
        prop_assert!(a.norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn encoding_the_origin_gives_the_identity(n in 1usize..300, d in 1usize..4, seed in any::<u64>()) {
        let a = make_encoding_matrix(n, d, seed).unwrap();
        prop_assert_eq!(encode(&a, &vec![0.0; d]).unwrap(), SspVector::identity(n).unwrap());
    }

    #[test]
    fn bundle_of_two_copies_normalizes_back(n in 2usize..300, seed in any::<u64>()) {
        let u = ssp(n, seed);
        let m = normalize(&bundle(&[u.clone(), u.clone()]).unwrap()).unwrap();
        prop_assert!(m.max_phase_error(&u).unwrap() < 1e-12);
    }

    #[test]
    fn coupled_phases_of_a_clean_encoding_follow_the_combined_base_phases(
        n in 8usize..200, d in 1usize..4, seed in any::<u64>(), scale in 0.0f64..1.0,
    ) {
        let a = make_encoding_matrix(n, d, seed).unwrap();
        let c = build_coupling_matrix(&a, &CouplingSpec::uniform_for(d, 5.0, seed ^ 1).unwrap()).unwrap();
        let x: Vec<f64> = (0..d).map(|k| scale * (k as f64 - 1.0)).collect();
        let u = encode(&a, &x).unwrap();
        let observed = coupled_phases(&c, u.phases()).unwrap();
        let base = c.combined_base_phases(&a).unwrap();
        for (psi, row) in observed.iter().zip(base.chunks_exact(d)) {
            let model: f64 = row.iter().zip(&x).map(|(p, q)| p * q).sum();
            prop_assert!((wrap_phase(psi - model)).abs() < 1e-9);
        }
    }
}
