use proptest::prelude::*;
use surftrap_core::constants::{angular, Ion};
use surftrap_core::dcsolve::{ModeTarget, TiltPlane};
use surftrap_core::efield::{FieldBasis, Order};
use surftrap_core::geometry::reference_layout;
use surftrap_core::pseudo::{
    analyze_point, find_rf_null, mode_analysis, pseudo_jet, pseudopotential,
    rf_amplitude_for_target, rf_sample, shaped_drive, DriveConfig, ModeAxis, ModeOptions,
    NullSearch,
};
use surftrap_core::{Complex64, Vector3};

const UM: f64 = 1e-6;

fn setup(v: f64) -> (FieldBasis, DriveConfig) {
    let layout = reference_layout();
    let d = DriveConfig::vertical_linear(&layout, angular(18.1e6), v, Ion::calcium40()).unwrap();
    (FieldBasis::new(layout), d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn null_axis_cancels(z in 50.0..300.0f64, v in 10.0..400.0f64) {
        let (b, d) = setup(v);
        let on = rf_sample(&b, &d, &Vector3::new(0.0, 0.0, z * UM), Order::Gradient).unwrap().gradient;
        let off = rf_sample(&b, &d, &Vector3::new(50.0 * UM, 0.0, z * UM), Order::Gradient).unwrap().gradient;
        let n = |g: Vector3<Complex64>| g.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(n(on) < 1e-9 * n(off));
    }

    #[test]
    fn pseudo_gradient_matches_finite_difference(
        x in -80.0..80.0f64, y in -80.0..80.0f64, z in 60.0..250.0f64,
    ) {
        let (b, d) = setup(100.0);
        let p = Vector3::new(x * UM, y * UM, z * UM);
        let jet = pseudo_jet(&b, &d, &p).unwrap();
        let h = 1e-3 * p.z;
        for k in 0..3 {
            let mut dv = Vector3::zeros();
            dv[k] = h;
            let f = |s: f64| pseudopotential(&b, &d, &(p + dv * s)).unwrap();
            let fd = (8.0 * (f(0.5) - f(-0.5)) - (f(1.0) - f(-1.0))) / (6.0 * h);
            prop_assert!((fd - jet.gradient[k]).abs() <= 1e-6 * jet.gradient.norm().max(jet.hessian.norm() * h));
        }
    }

    #[test]
    fn pseudo_hessian_matches_finite_difference(
        x in -80.0..80.0f64, y in -80.0..80.0f64, z in 60.0..250.0f64,
    ) {
        let (b, d) = setup(100.0);
        let p = Vector3::new(x * UM, y * UM, z * UM);
        let jet = pseudo_jet(&b, &d, &p).unwrap();
        let h = 1e-3 * p.z;
        for k in 0..3 {
            let mut dv = Vector3::zeros();
            dv[k] = h;
            let g = |s: f64| pseudo_jet(&b, &d, &(p + dv * s)).unwrap().gradient;
            let fd = ((g(0.5) - g(-0.5)) * 8.0 - (g(1.0) - g(-1.0))) / (6.0 * h);
            prop_assert!((fd - jet.hessian.column(k)).norm() <= 1e-5 * jet.hessian.norm());
        }
    }

    #[test]
    fn planar_curvature_scales_as_v_over_omega_squared(v in 20.0..300.0f64, s in 0.5..2.0f64) {
        let (b, d) = setup(v);
        let p = Vector3::new(0.0, 0.0, 120.0 * UM);
        let h0 = pseudo_jet(&b, &d, &p).unwrap().hessian;
        let mut d2 = d.scaled_rf(s);
        d2.rf_frequency *= 1.7;
        let h1 = pseudo_jet(&b, &d2, &p).unwrap().hessian;
        let expected = s * s / (1.7 * 1.7);
        prop_assert!((h1[(0, 0)] / h0[(0, 0)] - expected).abs() < 1e-12 * expected);
        prop_assert!((h1[(1, 1)] / h0[(1, 1)] - expected).abs() < 1e-12 * expected);
    }
}

#[test]
fn pure_rf_is_unconfined_vertically() {
    let (b, d) = setup(100.0);
    let sol = analyze_point(
        &b,
        &d,
        &Vector3::new(0.0, 0.0, 120.0 * UM),
        &ModeOptions::default(),
    )
    .unwrap();
    assert!(!sol.is_stable());
    assert!(sol.frequency(ModeAxis::X) > 0.0 && sol.frequency(ModeAxis::Y) > 0.0);
    // planar pseudopotential is isotropic on the null for the symmetric layout
    assert!((sol.frequency(ModeAxis::X) / sol.frequency(ModeAxis::Y) - 1.0).abs() < 1e-9);
}

#[test]
fn shaped_trap_hits_requested_frequencies() {
    let (b, d) = setup(150.0);
    let shape = ModeTarget::Frequencies {
        omega_x: angular(1.0e6),
        omega_y: angular(1.1e6),
        tilt: 0.0,
        plane: TiltPlane::Xz,
    };
    let (d2, p) = shaped_drive(&b, &d, 110.0 * UM, &shape).unwrap();
    let sol = mode_analysis(&b, &d2, &p).unwrap();
    assert!((sol.frequency(ModeAxis::X) / angular(1.0e6) - 1.0).abs() < 1e-9);
    assert!((sol.frequency(ModeAxis::Y) / angular(1.1e6) - 1.0).abs() < 1e-9);
    assert!(sol.vertical_tilt() < 1e-6);
}

#[test]
fn mathieu_q_tracks_planar_frequency() {
    let (b, d) = setup(150.0);
    let shape = ModeTarget::VerticalDc {
        omega_vertical: angular(1.2e6),
        splitting: 0.0,
        tilt: 0.0,
        plane: TiltPlane::Xz,
    };
    let (d2, p) = shaped_drive(&b, &d, 120.0 * UM, &shape).unwrap();
    let sol = mode_analysis(&b, &d2, &p).unwrap();
    for axis in [ModeAxis::X, ModeAxis::Y] {
        let i = axis as usize;
        let (a, q) = (sol.mathieu_a[i], sol.mathieu_q[i]);
        // lowest-order secular frequency from the Mathieu parameters
        let w = 0.5 * d.rf_frequency * (a + q * q / 2.0).sqrt();
        assert!((w / sol.frequencies[i] - 1.0).abs() < 1e-9, "{axis:?}");
    }
}

#[test]
fn rf_requirement_has_interior_minimum() {
    let (b, d) = setup(1.0);
    let shape = ModeTarget::VerticalDc {
        omega_vertical: angular(1.2e6),
        splitting: 0.1,
        tilt: 0.0,
        plane: TiltPlane::Xz,
    };
    let v: Vec<f64> = [50.0, 120.0, 300.0]
        .iter()
        .map(|z| rf_amplitude_for_target(&b, &d, z * UM, angular(1e6), &shape, 1e5).unwrap())
        .collect();
    assert!(v[1] < v[0] && v[1] < v[2], "{v:?}");
}

#[test]
fn off_axis_guess_converges_to_axis() {
    let (b, d) = setup(100.0);
    for (x, y) in [(60.0, 0.0), (-40.0, 70.0), (90.0, -90.0)] {
        let (nx, ny) =
            find_rf_null(&b, &d, 200.0 * UM, (x * UM, y * UM), &NullSearch::default()).unwrap();
        assert!(nx.abs() < 1e-12 && ny.abs() < 1e-12);
    }
}

#[test]
fn point_trap_has_rf_null_point() {
    let layout = reference_layout();
    let d = DriveConfig::point_trap(&layout, angular(18.1e6), 100.0, Ion::calcium40()).unwrap();
    let b = FieldBasis::new(layout);
    // E_z changes sign along the axis at the null height
    let ez = |z: f64| {
        rf_sample(&b, &d, &Vector3::new(0.0, 0.0, z * UM), Order::Gradient)
            .unwrap()
            .gradient
            .z
            .re
    };
    let (mut lo, mut hi) = (20.0, 1000.0);
    assert!(ez(lo).signum() != ez(hi).signum());
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if ez(mid).signum() == ez(lo).signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let g = rf_sample(&b, &d, &Vector3::new(0.0, 0.0, lo * UM), Order::Gradient)
        .unwrap()
        .gradient;
    assert!(g.iter().all(|c| c.norm() < 1e-6));
}
