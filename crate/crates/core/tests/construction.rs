use silverforge::channel::{Constellation, Prng};
use silverforge::code::LinearDispersionCode;
use silverforge::info::{
    capacity_samples, ergodic_capacity_mc, expansion_i1, expansion_i2, mc_slope, mutual_info_samples,
    stbc_mutual_info_mc, LogUnit,
};
use silverforge::linalg::{c64, qr_decompose, ComplexMatrix, RealMatrix};
use silverforge::rate1::{build_rate1_4group, min_determinant, rotation_pair};
use silverforge::silver::{assemble_generator, build_silver2, silver_code};
use silverforge::sim::{run_ser_sweep, run_verification, SimulationConfig};
use silverforge::Error;

#[test]
fn qr_of_64_by_64() {
    let mut rng = Prng::new(64);
    let data: Vec<f64> = (0..64 * 64).map(|_| rng.gaussian()).collect();
    let m = RealMatrix::new(64, 64, data).unwrap();
    let qr = qr_decompose(&m).unwrap();
    assert!(qr.q.orthonormality_defect() < 1e-12);
    assert!(qr.q.checked_mul(&qr.r).unwrap().max_abs_diff(&m) < 1e-12);
    for i in 0..64 {
        assert!(qr.r.row(i)[i] > 0.0);
        assert!(qr.r.row(i)[..i].iter().all(|&x| x == 0.0));
    }
}

#[test]
fn min_determinant_regression() {
    // frozen outputs of the dual-path search with 2-PAM per dimension
    let pam = Constellation::pam(2).unwrap();
    let expected = [(2usize, 4.0), (4, 10.237856679382311), (8, 0.007945418172788758)];
    for (n_t, value) in expected {
        let code = build_rate1_4group(n_t.trailing_zeros() as usize).unwrap();
        let md = min_determinant(&code, &rotation_pair(n_t).unwrap(), &pam).unwrap();
        assert!(((md.factorized - value) / value).abs() < 1e-9, "n_t={n_t}: {}", md.factorized);
        assert_eq!(md.brute.is_some(), n_t <= 4);
    }
}

#[test]
fn sixteen_antenna_codes_are_lossless() {
    for layers in [1usize, 2, 3, 16] {
        let code = silver_code(16, layers, None).unwrap();
        let g = assemble_generator(&code);
        assert_eq!(g.rank(), 32 * layers);
        assert!(g.matrix().orthonormality_defect() < 1e-9);
        assert!((expansion_i1(&code, layers) - layers as f64).abs() < 1e-12);
    }
}

#[test]
fn two_antenna_silver_is_the_code_with_u() {
    let a = silver_code(2, 2, None).unwrap();
    let b = build_silver2();
    for (x, y) in a.weights().iter().zip(b.weights()) {
        assert!(x.max_abs_diff(y) < 1e-15);
    }
}

#[test]
fn low_snr_slope_matches_i1() {
    let code = silver_code(4, 2, None).unwrap();
    let g = assemble_generator(&code);
    let slope = mc_slope(&g, 4, 2, 0.01, 20_000, 3).unwrap();
    let i1 = expansion_i1(&code, 2);
    assert!(((slope.mean - i1) / i1).abs() < 0.05, "{slope:?} vs {i1}");
}

#[test]
fn group_decodable_layer_has_larger_i2_than_diagonal_basis() {
    let code = silver_code(4, 1, None).unwrap();
    // Hadamard sign diagonals and their j-multiples: unitary, equal power, and every
    // pair inside each half commutes with a Hermitian product (not HR-orthogonal)
    let rows = [[1.0, 1.0, 1.0, 1.0], [1.0, -1.0, 1.0, -1.0], [1.0, 1.0, -1.0, -1.0], [1.0, -1.0, -1.0, 1.0]];
    let plain: Vec<_> = [c64(1.0, 0.0), c64(0.0, 1.0)]
        .iter()
        .flat_map(|&ph| rows.iter().map(move |r| ComplexMatrix::diagonal(&r.map(|x| ph * x))))
        .collect();
    let plain = LinearDispersionCode::with_contiguous_groups(plain, 8).unwrap();
    assert!((plain.total_energy() - code.total_energy()).abs() < 1e-9);
    let (a, b) = (expansion_i2(&code, 1), expansion_i2(&plain, 1));
    assert!(a > b + 1e-6, "{a} vs {b}");
}

#[test]
fn i2_is_a_property_of_the_spanned_space() {
    let code = silver_code(4, 1, None).unwrap();
    let mut rng = Prng::new(8);
    let mix = qr_decompose(&RealMatrix::new(8, 8, (0..64).map(|_| rng.gaussian()).collect()).unwrap())
        .unwrap()
        .q;
    let w = code.weights();
    let mixed: Vec<_> = (0..8)
        .map(|i| (0..8).map(|k| w[k].scale_real(mix.row(i)[k])).reduce(|a, b| &a + &b).unwrap())
        .collect();
    let mixed = LinearDispersionCode::with_contiguous_groups(mixed, 8).unwrap();
    assert!((expansion_i2(&code, 1) - expansion_i2(&mixed, 1)).abs() < 1e-9);
}

#[test]
fn capacity_limits_and_monotonicity() {
    let low = ergodic_capacity_mc(2, 2, 1e-9, 1000, 1).unwrap();
    assert!(low.mean.abs() <= low.std_error.max(1e-6));
    let a = ergodic_capacity_mc(4, 2, 10.0, 10_000, 2).unwrap();
    let b = ergodic_capacity_mc(4, 4, 10.0, 10_000, 3).unwrap();
    let combined = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    assert!(b.mean - a.mean > 3.0 * combined);
    assert!(matches!(ergodic_capacity_mc(1, 1, 1.0, 99, 1), Err(Error::ConfigInvalid { .. })));
}

#[test]
fn alamouti_is_lossless_for_one_receive_antenna() {
    let g = assemble_generator(&build_rate1_4group(1).unwrap());
    let cap = capacity_samples(2, 1, 5.0, 500, 4, LogUnit::Bits);
    let mi = mutual_info_samples(&g, 2, 1, 5.0, 500, 4, LogUnit::Bits).unwrap();
    assert!(cap.iter().zip(&mi).all(|(c, m)| (c - m).abs() < 1e-9));
    let est = stbc_mutual_info_mc(&g, 2, 1, 5.0, 500, 4).unwrap();
    assert_eq!(est.trials, 500);
}

#[test]
fn ser_decreases_at_high_snr() {
    let cfg = SimulationConfig {
        nt: 2,
        nr: 2,
        snr_db: vec![10.0, 14.0, 18.0],
        target_errors: Some(100),
        seed: Some(17),
        ..Default::default()
    };
    let points = run_ser_sweep(&cfg).unwrap();
    assert!(points.windows(2).all(|w| w[1].ser < w[0].ser), "{points:?}");
    for p in &points {
        assert!(p.symbol_errors >= 100);
        assert_eq!(p.ser, p.symbol_errors as f64 / p.symbols_sent as f64);
    }
}

#[test]
fn decoder_budget_is_enforced() {
    let cfg = SimulationConfig {
        nt: 8,
        nr: 4,
        m: 16,
        snr_db: vec![10.0],
        trials: Some(1),
        seed: Some(1),
        ..Default::default()
    };
    assert!(matches!(run_ser_sweep(&cfg), Err(Error::ConfigInvalid { .. })));
}

#[test]
fn verification_suite_for_eight_by_three() {
    let cfg = SimulationConfig {
        nt: 8,
        nr: 3,
        ..Default::default()
    };
    let report = run_verification(&cfg).unwrap();
    assert!(report.passed(), "{}", report.render());
}
