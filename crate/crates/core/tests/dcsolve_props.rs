use proptest::prelude::*;
use surftrap_core::constants::{angular, Ion};
use surftrap_core::dcsolve::{
    equilibrium_on_null, mode_dc_target, solve_dc, solve_dc_with, tilt_target, DcError,
    DcSolverOptions, DcTarget, ModeTarget, Regularization, TiltPlane,
};
use surftrap_core::efield::{FieldBasis, Order};
use surftrap_core::geometry::{reference_layout, Role};
use surftrap_core::pseudo::{mode_analysis, DriveConfig, ModeAxis};
use surftrap_core::{Matrix3, Vector3};

const UM: f64 = 1e-6;

fn basis() -> FieldBasis {
    FieldBasis::new(reference_layout())
}

fn traceless(a: f64, b: f64, xy: f64, xz: f64, yz: f64) -> Matrix3<f64> {
    Matrix3::new(a, xy, xz, xy, b, yz, xz, yz, -a - b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reachable_targets_round_trip(
        volts in proptest::collection::vec(-10.0..10.0f64, 9),
        x in -60.0..60.0f64, y in -60.0..60.0f64, z in 50.0..300.0f64,
    ) {
        let b = basis();
        let p = Vector3::new(x * UM, y * UM, z * UM);
        let mut v = vec![0.0; b.len()];
        for (k, i) in b.layout().indices_with_role(Role::Dc).into_iter().enumerate() {
            v[i] = volts[k];
        }
        let s0 = b.superpose_vector(&v, &p, Order::Hessian).unwrap();
        let mut h = s0.hessian;
        let tr = h.trace() / 3.0;
        for k in 0..3 {
            h[(k, k)] -= tr;
        }
        let t = DcTarget::new(p, s0.field(), h);
        let s = solve_dc(&b, &t).unwrap();
        let scale = s0.gradient.norm().max(s0.hessian.norm() * t.length_scale);
        prop_assert!((s.achieved_field - s0.field()).norm() <= 1e-9 * scale);
        prop_assert!((s.achieved_hessian - h).norm() * t.length_scale <= 1e-9 * scale);
    }

    #[test]
    fn solution_is_linear_in_target(
        a in -1e7..1e7f64, c in -1e7..1e7f64, xy in -1e7..1e7f64, ex in -100.0..100.0f64,
        s in -3.0..3.0f64,
    ) {
        let b = basis();
        let p = Vector3::new(0.0, 0.0, 140.0 * UM);
        let t1 = DcTarget::new(p, Vector3::new(ex, 0.0, 0.0), traceless(a, c, 0.0, 0.0, 0.0));
        let t2 = DcTarget::new(p, Vector3::zeros(), traceless(0.0, 0.0, xy, 0.5 * xy, 0.0));
        let sum = DcTarget::new(p, t1.field + t2.field * s, t1.hessian + t2.hessian * s);
        let v1 = solve_dc(&b, &t1).unwrap().voltages;
        let v2 = solve_dc(&b, &t2).unwrap().voltages;
        let vs = solve_dc(&b, &sum).unwrap().voltages;
        let scale = v1.iter().chain(&v2).fold(1e-12f64, |m, v| m.max(v.abs()));
        for k in 0..v1.len() {
            prop_assert!((vs[k] - (v1[k] + s * v2[k])).abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn tilt_preserves_spectrum(angle in -0.5..0.5f64, a in -5.0..5.0f64, c in -5.0..5.0f64) {
        let h = traceless(a, c, 0.3, -0.2, 0.7);
        for plane in [TiltPlane::Xz, TiltPlane::Yz] {
            let t = tilt_target(&h, angle, plane);
            let mut e0: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
            let mut e1: Vec<f64> = t.symmetric_eigenvalues().iter().copied().collect();
            e0.sort_by(f64::total_cmp);
            e1.sort_by(f64::total_cmp);
            for k in 0..3 {
                prop_assert!((e0[k] - e1[k]).abs() < 1e-12 * (1.0 + e0[k].abs()));
            }
        }
    }
}

#[test]
fn equilibrium_round_trips_across_heights() {
    let b = basis();
    let ion = Ion::calcium40();
    for z in (50..=300).step_by(25) {
        let z = z as f64 * UM;
        let c = ion.mass * angular(1e6).powi(2) / ion.charge;
        let t = DcTarget::new(
            Vector3::new(0.0, 0.0, z),
            Vector3::zeros(),
            Matrix3::from_diagonal(&Vector3::new(-0.5 * c, -0.5 * c, c)),
        );
        let s = solve_dc(&b, &t).unwrap();
        let mut d = DriveConfig::vertical_linear(b.layout(), angular(18.1e6), 100.0, ion).unwrap();
        d.dc = s.voltages;
        let found = equilibrium_on_null(&b, &d, (20.0 * UM, 500.0 * UM)).unwrap();
        assert!((found - z).abs() < 0.5 * UM, "{} vs {}", found / UM, z / UM);
    }
}

#[test]
fn tilted_frequency_target_tilts_vertical_mode() {
    let b = basis();
    let d =
        DriveConfig::vertical_linear(b.layout(), angular(18.1e6), 150.0, Ion::calcium40()).unwrap();
    let p = Vector3::new(0.0, 0.0, 110.0 * UM);
    for plane in [TiltPlane::Xz, TiltPlane::Yz] {
        let shape = ModeTarget::Frequencies {
            omega_x: angular(1e6),
            omega_y: angular(1.1e6),
            tilt: 4f64.to_radians(),
            plane,
        };
        let t = mode_dc_target(&b, &d, &p, &shape).unwrap();
        let mut d2 = d.clone();
        d2.dc = solve_dc(&b, &t).unwrap().voltages;
        let sol = mode_analysis(&b, &d2, &p).unwrap();
        assert!((sol.vertical_tilt().to_degrees() - 4.0).abs() < 0.2);
        assert!((sol.planar_splitting() - 0.1).abs() < 1e-3);
        assert!((sol.frequency(ModeAxis::X) / angular(1e6) - 1.0).abs() < 1e-3);
    }
}

#[test]
fn vertical_dc_shape_tilts_by_requested_angle() {
    let b = basis();
    let d =
        DriveConfig::vertical_linear(b.layout(), angular(18.1e6), 120.0, Ion::calcium40()).unwrap();
    let p = Vector3::new(0.0, 0.0, 120.0 * UM);
    let shape = ModeTarget::VerticalDc {
        omega_vertical: angular(1.2e6),
        splitting: 0.1,
        tilt: 4f64.to_radians(),
        plane: TiltPlane::Xz,
    };
    let t = mode_dc_target(&b, &d, &p, &shape).unwrap();
    let mut d2 = d.clone();
    d2.dc = solve_dc(&b, &t).unwrap().voltages;
    let sol = mode_analysis(&b, &d2, &p).unwrap();
    assert!((sol.vertical_tilt().to_degrees() - 4.0).abs() < 1e-6);
}

#[test]
fn unreachable_planar_budget_is_reported() {
    let b = basis();
    let d =
        DriveConfig::vertical_linear(b.layout(), angular(18.1e6), 5.0, Ion::calcium40()).unwrap();
    let shape = ModeTarget::Frequencies {
        omega_x: angular(2e6),
        omega_y: angular(2e6),
        tilt: 0.0,
        plane: TiltPlane::Xz,
    };
    assert!(matches!(
        mode_dc_target(&b, &d, &Vector3::new(0.0, 0.0, 100.0 * UM), &shape),
        Err(DcError::Unconfinable(_))
    ));
}

#[test]
fn regularization_modes_agree_on_well_posed_target() {
    let b = basis();
    let p = Vector3::new(10.0 * UM, 5.0 * UM, 130.0 * UM);
    let t = DcTarget::new(
        p,
        Vector3::new(3.0, -2.0, 1.0),
        traceless(1e6, -3e6, 2e5, 0.0, 1e5),
    );
    let a = solve_dc_with(
        &b,
        &t,
        &DcSolverOptions {
            regularization: Regularization::None,
            ..Default::default()
        },
    )
    .unwrap();
    let r = solve_dc(&b, &t).unwrap();
    for k in 0..a.voltages.len() {
        assert!((a.voltages[k] - r.voltages[k]).abs() < 1e-9 * (1.0 + a.voltages[k].abs()));
    }
    let heavy = solve_dc_with(
        &b,
        &t,
        &DcSolverOptions {
            regularization: Regularization::AlwaysRidge(1e-2),
            ..Default::default()
        },
    )
    .unwrap();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(norm(&heavy.voltages) < norm(&a.voltages));
}

#[test]
fn no_dc_electrodes_is_an_error() {
    let b = basis();
    let t = DcTarget::zero(Vector3::new(0.0, 0.0, 1e-4));
    let opts = DcSolverOptions {
        electrodes: Some(vec![]),
        ..Default::default()
    };
    assert_eq!(solve_dc_with(&b, &t, &opts), Err(DcError::NoElectrodes));
}
