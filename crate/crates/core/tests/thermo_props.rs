use proptest::prelude::*;
use surftrap_core::thermo::{
    estimate_nbar, estimate_nbar_lineshape, excitation_probability, nbar_from_ratio,
    synthesize_scan, thermal_weights, Noise, Sideband, SidebandScan, ThermoError,
};

const TAU: f64 = std::f64::consts::TAU;

fn scan(shots: u32) -> SidebandScan {
    let eta = 0.0969;
    let rabi = TAU * 100e3;
    SidebandScan {
        mode_frequency: TAU * 1.2e6,
        eta,
        rabi_frequency: rabi,
        probe_time: SidebandScan::blue_pi_time(eta, rabi),
        detunings: SidebandScan::uniform_detunings(TAU * 40e3, 41),
        shots,
    }
}

proptest! {
    #[test]
    fn thermal_weights_are_normalized(nbar in 0.0..5.0f64) {
        let w = thermal_weights(nbar);
        let total: f64 = w.iter().sum();
        let mean: f64 = w.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        prop_assert!((total - 1.0).abs() < 1e-11);
        prop_assert!((mean - nbar).abs() < 1e-9 * (1.0 + nbar));
    }

    #[test]
    fn red_to_blue_ratio_is_boltzmann(nbar in 0.0..3.0f64, d in -60e3..60e3f64) {
        // red from n and blue from n − 1 share a Rabi frequency, so the
        // lineshapes differ only by the weight ratio n̄ / (n̄ + 1)
        let s = scan(100);
        let red = excitation_probability(&s, Sideband::Red, nbar, TAU * d);
        let blue = excitation_probability(&s, Sideband::Blue, nbar, TAU * d);
        let r = nbar / (nbar + 1.0);
        prop_assert!((red - r * blue).abs() <= 1e-10 * blue + 1e-11);
    }

    #[test]
    fn lineshapes_are_even_in_detuning(nbar in 0.0..2.0f64, d in 0.0..60e3f64) {
        let s = scan(100);
        for sb in [Sideband::Red, Sideband::Blue, Sideband::Carrier] {
            let a = excitation_probability(&s, sb, nbar, TAU * d);
            let b = excitation_probability(&s, sb, nbar, -TAU * d);
            prop_assert_eq!(a, b);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn ratio_inversion_round_trips(nbar in 0.0..20.0f64) {
        let back = nbar_from_ratio(nbar / (nbar + 1.0)).unwrap();
        prop_assert!((back - nbar).abs() < 1e-10 * (1.0 + nbar));
    }
}

#[test]
fn ratio_for_low_occupation() {
    assert!((0.17f64 / 1.17 - 0.1453).abs() < 1e-4);
    assert!(matches!(
        nbar_from_ratio(1.0),
        Err(ThermoError::NonThermal { .. })
    ));
    assert_eq!(nbar_from_ratio(-0.05).unwrap(), 0.0);
}

#[test]
fn noiseless_scans_recover_occupation() {
    for nbar in [0.01, 0.17, 0.2, 0.8] {
        let s = scan(100);
        let (red, blue) = synthesize_scan(&s, nbar, Noise::Analytic).unwrap();
        let e = estimate_nbar(&red, &blue).unwrap();
        assert!((e.nbar - nbar).abs() < 1e-6, "{nbar}: {}", e.nbar);
        let (n2, _) = estimate_nbar_lineshape(&s, &red, &blue).unwrap();
        assert!((n2 - nbar).abs() < 1e-6);
    }
}

#[test]
fn noiseless_ground_state_has_no_red_feature() {
    let (red, blue) = synthesize_scan(&scan(100), 0.0, Noise::Analytic).unwrap();
    assert!(red.excited.iter().all(|&p| p == 0.0));
    assert!(matches!(
        estimate_nbar(&red, &blue),
        Err(ThermoError::FitFailed(_))
    ));
}

#[test]
fn projection_noise_has_binomial_spread() {
    let s = SidebandScan {
        detunings: vec![0.0],
        ..scan(100)
    };
    let p = excitation_probability(&s, Sideband::Blue, 0.17, 0.0);
    let draws: Vec<f64> = (0..2000)
        .map(|seed| {
            synthesize_scan(&s, 0.17, Noise::Binomial { seed })
                .unwrap()
                .1
                .excited[0]
        })
        .collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
    let expected = p * (1.0 - p) / 100.0;
    assert!((mean - p).abs() < 4.0 * (expected / 2000.0).sqrt());
    assert!((var / expected - 1.0).abs() < 0.1, "{var} vs {expected}");
}

#[test]
fn seeds_are_reproducible() {
    let s = scan(100);
    let a = synthesize_scan(&s, 0.2, Noise::Binomial { seed: 7 }).unwrap();
    let b = synthesize_scan(&s, 0.2, Noise::Binomial { seed: 7 }).unwrap();
    let c = synthesize_scan(&s, 0.2, Noise::Binomial { seed: 8 }).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn gaussian_and_lineshape_estimators_agree() {
    let s = scan(100);
    for seed in 0..10 {
        let (red, blue) = synthesize_scan(&s, 0.17, Noise::Binomial { seed }).unwrap();
        let e = estimate_nbar(&red, &blue).unwrap();
        let (n2, sd2) = estimate_nbar_lineshape(&s, &red, &blue).unwrap();
        let combined = (e.uncertainty.powi(2) + sd2 * sd2).sqrt();
        assert!(
            (e.nbar - n2).abs() < 3.0 * combined,
            "seed {seed}: {} vs {n2}",
            e.nbar
        );
    }
}

#[test]
fn invalid_scans_are_rejected() {
    let mut s = scan(100);
    s.eta = 0.7;
    assert!(matches!(
        synthesize_scan(&s, 0.1, Noise::Analytic),
        Err(ThermoError::InvalidScan(_))
    ));
    let s = scan(0);
    assert!(synthesize_scan(&s, 0.1, Noise::Analytic).is_err());
    assert!(matches!(
        synthesize_scan(&scan(10), -0.1, Noise::Analytic),
        Err(ThermoError::NegativeOccupation(_))
    ));
}
