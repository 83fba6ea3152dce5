use proptest::prelude::*;
use surftrap_core::efield::{FieldBasis, Order};
use surftrap_core::geometry::{reference_layout, Electrode, ElectrodeLayout, Rect, Role};
use surftrap_core::Vector3;

const UM: f64 = 1e-6;

fn basis() -> FieldBasis {
    FieldBasis::new(reference_layout())
}

/// Gauss–Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            (x, 2.0 / ((1.0 - x * x) * dp * dp))
        })
        .collect()
}

/// Potential of a 1 V rectangle by direct integration of the half-space
/// Green's function `z / (2π R³)`.
fn quadrature_potential(r: &Rect, p: &Vector3<f64>, gl: &[(f64, f64)]) -> f64 {
    let panel = p.z / 3.0;
    let nx = ((r.x_max - r.x_min) / panel).ceil().max(1.0) as usize;
    let ny = ((r.y_max - r.y_min) / panel).ceil().max(1.0) as usize;
    let (hx, hy) = (
        (r.x_max - r.x_min) / nx as f64,
        (r.y_max - r.y_min) / ny as f64,
    );
    let mut sum = 0.0;
    for i in 0..nx {
        let cx = r.x_min + (i as f64 + 0.5) * hx;
        for j in 0..ny {
            let cy = r.y_min + (j as f64 + 0.5) * hy;
            for &(a, wa) in gl {
                let dx = cx + 0.5 * hx * a - p.x;
                for &(b, wb) in gl {
                    let dy = cy + 0.5 * hy * b - p.y;
                    let r2 = dx * dx + dy * dy + p.z * p.z;
                    sum += wa * wb / (r2 * r2.sqrt());
                }
            }
        }
    }
    sum * 0.25 * hx * hy * p.z / (2.0 * std::f64::consts::PI)
}

fn point() -> impl Strategy<Value = Vector3<f64>> {
    (-600.0..600.0f64, -600.0..600.0f64, 20.0..400.0f64)
        .prop_map(|(x, y, z)| Vector3::new(x * UM, y * UM, z * UM))
}

fn electrode() -> impl Strategy<Value = usize> {
    0..reference_layout().len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn basis_potential_is_harmonic(p in point(), e in electrode()) {
        let h = basis().evaluate(e, &p, Order::Hessian).unwrap().hessian;
        prop_assert!(h.trace().abs() <= 1e-8 * h.norm(), "trace {:e} norm {:e}", h.trace(), h.norm());
    }

    #[test]
    fn third_derivatives_are_traceless(p in point(), e in electrode()) {
        let t = basis().evaluate(e, &p, Order::Third).unwrap().third.unwrap();
        let scale = (0..3).flat_map(|i| (0..3).flat_map(move |j| (0..3).map(move |k| (i, j, k))))
            .map(|(i, j, k)| t.get(i, j, k).abs()).fold(0.0, f64::max);
        for i in 0..3 {
            let tr = t.get(i, 0, 0) + t.get(i, 1, 1) + t.get(i, 2, 2);
            prop_assert!(tr.abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn gradient_matches_finite_difference(p in point(), e in electrode()) {
        let b = basis();
        let g = b.evaluate(e, &p, Order::Gradient).unwrap().gradient;
        let h = 1e-3 * p.z;
        let phi = |q: Vector3<f64>| b.evaluate(e, &q, Order::Potential).unwrap().potential;
        let mut fd = Vector3::zeros();
        for k in 0..3 {
            let d = |s: f64| {
                let mut dv = Vector3::zeros();
                dv[k] = s;
                (phi(p + dv) - phi(p - dv)) / (2.0 * s)
            };
            // Richardson extrapolation of central differences
            fd[k] = (4.0 * d(h / 2.0) - d(h)) / 3.0;
        }
        prop_assert!((fd - g).norm() <= 1e-6 * g.norm(), "fd {fd:?} analytic {g:?}");
    }

    #[test]
    fn hessian_matches_finite_difference(p in point(), e in electrode()) {
        let b = basis();
        let h_an = b.evaluate(e, &p, Order::Hessian).unwrap().hessian;
        let h = 1e-3 * p.z;
        let grad = |q: Vector3<f64>| b.evaluate(e, &q, Order::Gradient).unwrap().gradient;
        for k in 0..3 {
            let d = |s: f64| {
                let mut dv = Vector3::zeros();
                dv[k] = s;
                (grad(p + dv) - grad(p - dv)) / (2.0 * s)
            };
            let col = (d(h / 2.0) * 4.0 - d(h)) / 3.0;
            prop_assert!((col - h_an.column(k)).norm() <= 1e-6 * h_an.norm());
        }
    }

    #[test]
    fn third_matches_finite_difference(p in point(), e in electrode()) {
        let b = basis();
        let t = b.evaluate(e, &p, Order::Third).unwrap().third.unwrap();
        let h = 1e-3 * p.z;
        let hess = |q: Vector3<f64>| b.evaluate(e, &q, Order::Hessian).unwrap().hessian;
        let scale = hess(p).norm() / p.z;
        for k in 0..3 {
            let d = |s: f64| {
                let mut dv = Vector3::zeros();
                dv[k] = s;
                (hess(p + dv) - hess(p - dv)) / (2.0 * s)
            };
            let fd = (d(h / 2.0) * 4.0 - d(h)) / 3.0;
            for i in 0..3 {
                for j in 0..3 {
                    prop_assert!((fd[(i, j)] - t.get(i, j, k)).abs() <= 1e-6 * scale.max(t.get(i, j, k).abs()));
                }
            }
        }
    }

    #[test]
    fn potential_matches_quadrature(p in point(), e in electrode()) {
        let gl = gauss_legendre(12);
        let b = basis();
        let analytic = b.evaluate(e, &p, Order::Potential).unwrap().potential;
        let numeric: f64 = b.layout().electrodes[e].rects.iter().map(|r| quadrature_potential(r, &p, &gl)).sum();
        prop_assert!((analytic - numeric).abs() <= 1e-6 * analytic.abs(), "{analytic:e} vs {numeric:e}");
    }

    #[test]
    fn potential_is_bounded(p in point(), e in electrode()) {
        let v = basis().evaluate(e, &p, Order::Potential).unwrap().potential;
        prop_assert!(v > 0.0 && v < 1.0);
    }
}

#[test]
fn tiled_plane_is_equipotential() {
    // nine abutting tiles covering a large square approach 1 V near its center
    let mut rects = Vec::new();
    for i in -1..=1 {
        for j in -1..=1 {
            rects.push(Rect::centered(i as f64 * 0.02, j as f64 * 0.02, 0.02, 0.02));
        }
    }
    let layout = ElectrodeLayout::new(vec![Electrode::new("all", Role::Dc, rects)], (0.0, 0.0));
    let b = FieldBasis::new(layout);
    let v = b
        .basis_potential("all", &Vector3::new(1e-4, -2e-4, 50.0 * UM))
        .unwrap();
    assert!((1.0 - v) < 2e-3, "{v}");
}

#[test]
fn splitting_a_rectangle_changes_nothing() {
    let whole = Rect::new(-100.0 * UM, 250.0 * UM, -40.0 * UM, 80.0 * UM);
    let halves = vec![
        Rect::new(-100.0 * UM, 30.0 * UM, -40.0 * UM, 80.0 * UM),
        Rect::new(30.0 * UM, 250.0 * UM, -40.0 * UM, 80.0 * UM),
    ];
    let a = FieldBasis::new(ElectrodeLayout::new(
        vec![Electrode::new("e", Role::Dc, vec![whole])],
        (0.0, 0.0),
    ));
    let b = FieldBasis::new(ElectrodeLayout::new(
        vec![Electrode::new("e", Role::Dc, halves)],
        (0.0, 0.0),
    ));
    let p = Vector3::new(20.0 * UM, 10.0 * UM, 70.0 * UM);
    let sa = a.evaluate(0, &p, Order::Third).unwrap();
    let sb = b.evaluate(0, &p, Order::Third).unwrap();
    assert!((sa.potential - sb.potential).abs() < 1e-14);
    assert!((sa.gradient - sb.gradient).norm() < 1e-9 * sa.gradient.norm());
    assert!((sa.hessian - sb.hessian).norm() < 1e-9 * sa.hessian.norm());
}

#[test]
fn quadrature_oracle_self_check() {
    // a point directly above the center of a large square sees almost 1 V
    let gl = gauss_legendre(12);
    let r = Rect::centered(0.0, 0.0, 0.01, 0.01);
    let v = quadrature_potential(&r, &Vector3::new(0.0, 0.0, 200.0 * UM), &gl);
    let exact = 2.0 / std::f64::consts::PI
        * (0.005f64 * 0.005
            / (200.0 * UM * (2.0 * 0.005f64 * 0.005 + (200.0 * UM).powi(2)).sqrt()))
        .atan();
    assert!((v - exact).abs() < 1e-10, "{v} {exact}");
}
