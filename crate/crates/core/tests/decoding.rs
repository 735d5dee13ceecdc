use csim::baselines::{grid_search, GridSpec};
use csim::corruption::{corrupt, NoiseModel};
use csim::coupling::{build_coupling_matrix, CouplingMatrix, CouplingSpec};
use csim::decoder::{CsimDecoder, DecodeConfig};
use csim::fhrr::{encode, make_encoding_matrix, similarity, EncodingMatrix};
use csim::rng::{derive_seed, sample_ball, seeded};

fn setup(n: usize, d: usize, seed: u64) -> (EncodingMatrix, CouplingMatrix) {
    let a = make_encoding_matrix(n, d, seed).unwrap();
    let c = build_coupling_matrix(&a, &CouplingSpec::uniform_for(d, 5.0, seed + 1).unwrap()).unwrap();
    (a, c)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn fine_grid_confirms_noiseless_optimum() {
    let (a, c) = setup(1024, 1, 50);
    let dec = CsimDecoder::new(&a, &c, DecodeConfig::default()).unwrap();
    let grid = GridSpec::symmetric(1, 5.0, 0.005).unwrap();
    let mut r = seeded(51);
    for _ in 0..10 {
        let x = sample_ball(1, 5.0, &mut r);
        let u = encode(&a, &x).unwrap();
        let best = grid_search(&a, &u, &grid).unwrap();
        assert!(dist(&best.x, &x) <= 0.0025 + 1e-9, "grid optimum {:?} for {x:?}", best.x);
        assert!(dist(&dec.decode(&u).unwrap().x_hat, &x) < 0.01);
    }
}

#[test]
fn noisy_failure_rate_tracks_grid_search() {
    let (a, c) = setup(1024, 1, 60);
    let dec = CsimDecoder::new(&a, &c, DecodeConfig::default()).unwrap();
    let grid = GridSpec::symmetric(1, 5.0, 0.1).unwrap();
    let model = NoiseModel::ComponentGaussian { sigma: 0.5 };
    let (mut csim_fails, mut grid_fails) = (0, 0);
    for t in 0..100 {
        let x = sample_ball(1, 5.0, &mut seeded(derive_seed(61, &[t])));
        let u = corrupt(&encode(&a, &x).unwrap(), &model, derive_seed(62, &[t])).unwrap();
        csim_fails += usize::from(dist(&dec.decode(&u).unwrap().x_hat, &x) > 0.1);
        grid_fails += usize::from(dist(&grid_search(&a, &u, &grid).unwrap().x, &x) > 0.1);
    }
    assert!(csim_fails.abs_diff(grid_fails) <= 5, "csim {csim_fails} vs grid {grid_fails} of 100");
}

#[test]
fn cleanup_moves_toward_the_clean_vector() {
    let (a, c) = setup(1024, 2, 70);
    let dec = CsimDecoder::new(&a, &c, DecodeConfig::default()).unwrap();
    let model = NoiseModel::ComponentGaussian { sigma: 0.5 };
    let trials: u64 = 100;
    let mut improved = 0;
    for t in 0..trials {
        let x = sample_ball(2, 5.0, &mut seeded(derive_seed(71, &[t])));
        let clean = encode(&a, &x).unwrap();
        let noisy = corrupt(&clean, &model, derive_seed(72, &[t])).unwrap();
        let cleaned = dec.cleanup_phases(&noisy).unwrap();
        let before = similarity(&noisy, &clean).unwrap().re;
        let after = similarity(&cleaned, &clean).unwrap().re;
        improved += u64::from(after >= before);
    }
    assert!(improved * 100 >= 95 * trials, "improved on {improved}/{trials}");
}

#[test]
fn coupled_stage_has_a_wider_basin_than_direct_ascent() {
    let (a, c) = setup(1024, 1, 80);
    let dec = CsimDecoder::new(&a, &c, DecodeConfig::default()).unwrap();
    let model = NoiseModel::ComponentGaussian { sigma: 0.5 };
    let inits: Vec<f64> = (0..=100).map(|k| -5.0 + 0.1 * k as f64).collect();
    let trials: u64 = 20;
    let mut wider = 0;
    for t in 0..trials {
        let x = sample_ball(1, 5.0, &mut seeded(derive_seed(81, &[t])));
        let u = corrupt(&encode(&a, &x).unwrap(), &model, derive_seed(82, &[t])).unwrap();
        let basin = |lambda| {
            inits
                .iter()
                .filter(|&&g| (dec.run_stage(&u, lambda, &[g], 1000).unwrap().x[0] - x[0]).abs() < 0.5)
                .count()
        };
        wider += u64::from(basin(0.0) >= 3 * basin(1.0));
    }
    assert!(wider * 10 >= 9 * trials, "wider on {wider}/{trials}");
}

#[test]
fn decoding_is_deterministic_across_threads() {
    let (a, c) = setup(512, 2, 90);
    let dec = CsimDecoder::new(&a, &c, DecodeConfig::default()).unwrap();
    let u = corrupt(&encode(&a, &[1.0, -3.0]).unwrap(), &NoiseModel::ComponentGaussian { sigma: 0.4 }, 9).unwrap();
    let here = dec.decode(&u).unwrap();
    let there = std::thread::scope(|s| s.spawn(|| dec.decode(&u).unwrap()).join().unwrap());
    assert_eq!(here, there);
}
