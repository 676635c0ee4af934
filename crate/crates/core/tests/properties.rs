use num_complex::Complex64;
use proptest::prelude::*;
use silverforge::channel::{sample_channel, transmit, Constellation, Prng};
use silverforge::code::LinearDispersionCode;
use silverforge::decoder::Receiver;
use silverforge::frame::{build_frame, subset_product, ProductMask};
use silverforge::info::{capacity_samples, expansion_i2, mutual_info_samples, LogUnit};
use silverforge::linalg::{qr_decompose, realify, tilde_vec, ComplexMatrix, RealMatrix};
use silverforge::silver::{assemble_generator, silver_code};

fn complex_matrix(rows: usize, cols: usize, vals: &[f64]) -> ComplexMatrix {
    let data = vals.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
    ComplexMatrix::new(rows, cols, data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn codeword_is_linear(
        x in prop::collection::vec(-3.0f64..3.0, 16),
        y in prop::collection::vec(-3.0f64..3.0, 16),
        alpha in -2.0f64..2.0,
    ) {
        let code = silver_code(4, 2, None).unwrap();
        let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + alpha * b).collect();
        let lhs = code.codeword(&mix).unwrap();
        let rhs = &code.codeword(&x).unwrap() + &code.codeword(&y).unwrap().scale_real(alpha);
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn i2_invariant_under_common_phase_and_unitary(theta in 0.0f64..6.3, bits in 0u32..16, layers in 1usize..=4) {
        let code = silver_code(4, layers, None).unwrap();
        let base = expansion_i2(&code, layers);
        let u = subset_product(&build_frame(2).unwrap(), &ProductMask::from_bits(4, bits, false)).unwrap();
        let phase = Complex64::from_polar(1.0, theta);
        let moved = code.map_weights(|a| (&u * a).scale(phase));
        prop_assert!((expansion_i2(&moved, layers) - base).abs() < 1e-9);
    }

    #[test]
    fn stbc_mutual_info_never_exceeds_capacity(seed in any::<u64>(), n_t in prop::sample::select(vec![2usize, 4, 8]), snr_db in -5.0f64..25.0) {
        let snr = 10f64.powf(snr_db / 10.0);
        for n_r in 1..=n_t {
            let g = assemble_generator(&silver_code(n_t, n_r, None).unwrap());
            let cap = capacity_samples(n_t, n_r, snr, 4, seed, LogUnit::Nats);
            let mi = mutual_info_samples(&g, n_t, n_r, snr, 4, seed, LogUnit::Nats).unwrap();
            for (c, m) in cap.iter().zip(&mi) {
                prop_assert!(*m <= c + 1e-9);
                // the single 2 Tx layer is Alamouti, lossless for one receive antenna
                if n_r < n_t && n_t > 2 {
                    prop_assert!(c - m > 1e-9, "punctured code should lose: {c} vs {m}");
                }
            }
        }
    }

    #[test]
    fn quantize_is_nearest(m in prop::sample::select(vec![4usize, 16, 64]), x in -10.0f64..10.0) {
        let cons = Constellation::qam(m).unwrap();
        let q = cons.levels()[cons.quantize(x)];
        for &l in cons.levels() {
            prop_assert!((x - q).abs() <= (x - l).abs() + 1e-12);
        }
    }

    #[test]
    fn realify_is_a_homomorphism(
        h in prop::collection::vec(-1.0f64..1.0, 24),
        x in prop::collection::vec(-1.0f64..1.0, 8),
    ) {
        let hm = complex_matrix(3, 4, &h);
        let xv = complex_matrix(4, 1, &x);
        let lhs = realify(&hm).mul_vec(&tilde_vec(&xv.vec()));
        let rhs = tilde_vec(&(&hm * &xv).vec());
        for (a, b) in lhs.iter().zip(&rhs) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn qr_reconstructs(rows in 1usize..12, extra in 0usize..6, vals in prop::collection::vec(-1.0f64..1.0, 17 * 11)) {
        let cols = rows;
        let rows = rows + extra;
        let m = RealMatrix::new(rows, cols, vals[..rows * cols].to_vec()).unwrap();
        if let Ok(qr) = qr_decompose(&m) {
            prop_assert!(qr.q.orthonormality_defect() < 1e-10);
            for i in 0..cols {
                prop_assert!(qr.r.row(i)[i] > 0.0);
                for j in 0..i {
                    prop_assert_eq!(qr.r.row(i)[j], 0.0);
                }
            }
            prop_assert!(qr.q.checked_mul(&qr.r).unwrap().max_abs_diff(&m) < 1e-10);
        }
    }

    #[test]
    fn code_text_round_trips(n_t in prop::sample::select(vec![2usize, 4, 8]), layers in 1usize..=8, phase in -90.0f64..90.0) {
        let layers = layers.min(n_t);
        let code = silver_code(n_t, layers, Some(phase)).unwrap();
        let back = LinearDispersionCode::from_text(&code.to_text()).unwrap();
        prop_assert_eq!(back.groups(), code.groups());
        prop_assert_eq!(back.layer_tags(), code.layer_tags());
        prop_assert_eq!(back.power_scale(), code.power_scale());
        for (a, b) in back.weights().iter().zip(code.weights()) {
            prop_assert!(a.max_abs_diff(b) == 0.0);
        }
    }

    #[test]
    fn trial_streams_are_reproducible(seed in any::<u64>(), trial in any::<u64>()) {
        let mut a = Prng::for_trial(seed, trial);
        let mut b = Prng::for_trial(seed, trial);
        let mut c = Prng::for_trial(seed, trial.wrapping_add(1));
        let xa: Vec<u64> = (0..4).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..4).map(|_| b.next_u64()).collect();
        let xc: Vec<u64> = (0..4).map(|_| c.next_u64()).collect();
        prop_assert_eq!(&xa, &xb);
        prop_assert_ne!(&xa, &xc);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn conditional_matches_sphere(seed in any::<u64>(), snr_db in 0.0f64..20.0, n_r in 1usize..=2) {
        let code = silver_code(4, n_r, None).unwrap();
        let cons = Constellation::qam(4).unwrap();
        let mut rng = Prng::new(seed);
        let ch = sample_channel(4, n_r, 10f64.powf(snr_db / 10.0), &mut rng);
        let rx = Receiver::new(&ch, &code).unwrap();
        let idx = cons.random_indices(code.weights().len(), &mut rng);
        let y = transmit(&code.codeword(&cons.symbols(&idx)).unwrap(), &ch, &mut rng).unwrap();
        let sd = rx.sphere(&y, &cons).unwrap();
        let cd = rx.conditional(&y, &code, &cons).unwrap();
        prop_assert!((sd.metric - cd.metric).abs() < 1e-9);
        prop_assert_eq!(sd.indices, cd.indices);
    }
}
