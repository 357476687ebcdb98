use hybrid_qkd::channel::{decode, decode_frame, encode, ClassicalMessage};
use hybrid_qkd::optics::{depolarize, qplate_operator, rotation_operator, NoiseParams, QPlateParams};
use hybrid_qkd::protocol::{
    estimate_qber, exact_qber, secret_key_fraction, sift, Basis, Encoding, Optics, RoundRecord, SiftedKey,
    KEY_FRACTION_ZERO,
};
use hybrid_qkd::spinorbit::{apply, DensityMatrix, OamCutoff, Sam, SpinOrbitMode, SpinOrbitState};
use hybrid_qkd::tomography::{log_likelihood, mle_reconstruct, project_to_physical, linear_inversion, CountRecord, MleOptions};
use hybrid_qkd::spinorbit::Polarization;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn basis() -> impl Strategy<Value = Basis> {
    prop_oneof![Just(Basis::Z), Just(Basis::Y)]
}

fn message() -> impl Strategy<Value = ClassicalMessage> {
    prop_oneof![
        prop::collection::vec(basis(), 0..300).prop_map(ClassicalMessage::BasisAnnounce),
        prop::collection::vec(any::<bool>(), 0..300).prop_map(ClassicalMessage::DetectedMask),
        prop::collection::vec(any::<u32>(), 0..100).prop_map(ClassicalMessage::SampleIndices),
        prop::collection::vec(any::<bool>(), 0..300).prop_map(ClassicalMessage::SampleBits),
        (0.0..=1.0f64, any::<u32>(), any::<u32>()).prop_map(|(qber, sample_size, error_count)| {
            ClassicalMessage::QberReport { qber, sample_size, error_count }
        }),
    ]
}

fn amplitude() -> impl Strategy<Value = Complex64> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn hybrid_state() -> impl Strategy<Value = SpinOrbitState> {
    (amplitude(), amplitude())
        .prop_filter("non-zero", |(a, b)| a.norm() + b.norm() > 1e-3)
        .prop_map(|(a, b)| {
            SpinOrbitState::superposition(
                OamCutoff::default(),
                &[(a, SpinOrbitMode::new(Sam::L, -1)), (b, SpinOrbitMode::new(Sam::R, 1))],
            )
            .unwrap()
            .normalize()
            .unwrap()
        })
}

fn record() -> impl Strategy<Value = (Basis, bool, Basis, Option<bool>)> {
    (basis(), any::<bool>(), basis(), prop::option::of(any::<bool>()))
}

fn counts() -> impl Strategy<Value = Vec<CountRecord>> {
    prop::collection::vec((1u64..2000, 0.0..=1.0f64), 6).prop_map(|v| {
        Polarization::ALL
            .iter()
            .zip(v)
            .map(|(&p, (shots, f))| CountRecord::new(p, shots, (f * shots as f64).round() as u64).unwrap())
            .collect()
    })
}

proptest! {
    #[test]
    fn codec_round_trips(msg in message()) {
        let bytes = encode(&msg).unwrap();
        prop_assert_eq!(decode(&bytes).unwrap(), msg.clone());
        prop_assert_eq!(encode(&decode(&bytes).unwrap()).unwrap(), bytes.clone());
        for cut in 0..bytes.len() {
            prop_assert!(decode(&bytes[..cut]).is_err());
        }
    }

    #[test]
    fn concatenated_frames_decode_in_order(a in message(), b in message()) {
        let mut stream = encode(&a).unwrap();
        stream.extend(encode(&b).unwrap());
        let (first, used) = decode_frame(&stream).unwrap();
        prop_assert_eq!(first, a);
        prop_assert_eq!(decode(&stream[used..]).unwrap(), b);
    }

    #[test]
    fn decoder_never_panics(bytes in prop::collection::vec(any::<u8>(), 0..64)) {
        let _ = decode(&bytes);
    }

    #[test]
    fn hybrid_states_are_rotation_invariant(psi in hybrid_state(), theta in -10.0..10.0f64) {
        let rotated = apply(&rotation_operator(theta, psi.cutoff()), &psi).unwrap();
        prop_assert!((rotated.amplitudes() - psi.amplitudes()).norm() < 1e-12);
    }

    #[test]
    fn qplate_is_unitary_on_retained_modes(delta in 0.0..std::f64::consts::TAU, alpha0 in -5.0..5.0f64, two_q in -2i32..=2) {
        let params = QPlateParams::new(delta, f64::from(two_q) / 2.0, alpha0).unwrap();
        let op = qplate_operator(&params, OamCutoff::new(3).unwrap()).unwrap();
        prop_assert!(op.unitarity_deviation() < 1e-10);
    }

    #[test]
    fn normalize_is_idempotent(re in prop::collection::vec(-2.0..2.0f64, 10), im in prop::collection::vec(-2.0..2.0f64, 10)) {
        let amps: Vec<Complex64> = re.iter().zip(&im).map(|(&r, &i)| Complex64::new(r, i)).collect();
        prop_assume!(amps.iter().map(|a| a.norm_sqr()).sum::<f64>() > 1e-6);
        let state = SpinOrbitState::from_amplitudes(OamCutoff::default(), amps).unwrap();
        let once = state.normalize().unwrap();
        let twice = once.normalize().unwrap();
        prop_assert!((once.norm_sqr() - 1.0).abs() < 1e-12);
        prop_assert!((once.amplitudes() - twice.amplitudes()).norm() < 1e-14);
    }

    #[test]
    fn depolarized_states_stay_physical(psi in hybrid_state(), p in 0.0..=1.0f64) {
        let rho = depolarize(&DensityMatrix::from_pure(&psi).unwrap(), p).unwrap();
        prop_assert!(rho.min_eigenvalue() > -1e-12);
        prop_assert!((rho.matrix().trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn depolarization_is_linear_in_qber(p in 0.0..=1.0f64, theta in -4.0..4.0f64) {
        let q = exact_qber(&Optics::default(), Encoding::Hybrid, theta, &NoiseParams::new(p).unwrap(), 0.5).unwrap();
        prop_assert!((q - p / 2.0).abs() < 1e-10);
    }

    #[test]
    fn sifted_keys_are_consistent(raw in prop::collection::vec(record(), 0..200)) {
        let records: Vec<RoundRecord> = raw
            .into_iter()
            .enumerate()
            .map(|(i, (a, bit, b, bob))| RoundRecord {
                round_index: i as u64,
                alice_basis: a,
                alice_bit: bit,
                bob_basis: b,
                detected: bob.is_some(),
                bob_bit: bob,
                multiphoton: false,
            })
            .collect();
        let key = sift(&records);
        prop_assert_eq!(key.alice_bits.len(), key.bob_bits.len());
        prop_assert_eq!(key.alice_bits.len(), key.round_indices.len());
        prop_assert!(key.round_indices.windows(2).all(|w| w[0] < w[1]));
        for &i in &key.round_indices {
            let r = &records[i as usize];
            prop_assert!(r.detected && r.alice_basis == r.bob_basis);
        }
        let expected = records.iter().filter(|r| r.detected && r.alice_basis == r.bob_basis).count();
        prop_assert_eq!(key.len(), expected);
    }

    #[test]
    fn qber_sampling_partitions_the_key(bits in prop::collection::vec((any::<bool>(), any::<bool>()), 1..300), fraction in 0.001..=1.0f64, seed: u64) {
        let key = SiftedKey {
            alice_bits: bits.iter().map(|b| b.0).collect(),
            bob_bits: bits.iter().map(|b| b.1).collect(),
            round_indices: (0..bits.len() as u64).collect(),
        };
        let (report, remaining) = estimate_qber(&key, fraction, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let expected = ((fraction * key.len() as f64).ceil() as usize).min(key.len());
        prop_assert_eq!(report.sample_size as usize, expected);
        prop_assert_eq!(remaining.len() + expected, key.len());
        prop_assert!((0.0..=1.0).contains(&report.qber));
        prop_assert!(remaining.round_indices.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(report.error_count as usize + remaining.errors(), key.errors());
    }

    #[test]
    fn key_fraction_positive_iff_below_crossing(q in 0.0..=0.5f64) {
        let f = secret_key_fraction(q).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        if (q - KEY_FRACTION_ZERO).abs() > 1e-9 {
            prop_assert_eq!(f > 0.0, q < KEY_FRACTION_ZERO);
        }
    }

    #[test]
    fn linear_inversion_has_unit_trace(c in counts()) {
        let m = linear_inversion(&c).unwrap();
        prop_assert!((m.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        prop_assert!((&m - m.adjoint()).camax() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mle_is_physical_and_beats_projected_linear_inversion(c in counts()) {
        prop_assume!(c.iter().any(|r| r.clicks > 0));
        let result = mle_reconstruct(&c, &MleOptions::default()).unwrap();
        prop_assert!(result.rho.min_eigenvalue() > -1e-12);
        prop_assert!((result.rho.matrix().trace().re - 1.0).abs() < 1e-12);
        let projected = project_to_physical(&linear_inversion(&c).unwrap()).unwrap();
        let baseline = log_likelihood(&projected, &c).unwrap();
        prop_assert!(result.log_likelihood >= baseline - 1e-6 * baseline.abs().max(1.0));
        prop_assert!(result.history.windows(2).all(|w| w[1] >= w[0]));
    }
}
