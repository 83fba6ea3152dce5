//! Least-squares dc voltage solving.
//!
//! Each controllable electrode contributes a column of unit-voltage field
//! and curvature values at the target point; the solver finds the
//! minimum-norm voltages that best reproduce a target field and Hessian,
//! optionally within per-electrode bounds.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::efield::{FieldBasis, FieldError, Order};
use crate::geometry::Role;
use crate::numeric::{brent, jacobi_svd, Svd};
use crate::pseudo::{self, DriveConfig, PseudoError};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum DcError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("layout has no controllable dc electrodes")]
    NoElectrodes,
    #[error("hessian target is not traceless (trace {trace:e}, norm {norm:e} V/m^2)")]
    NotLaplaceConsistent { trace: f64, norm: f64 },
    #[error("bounds for electrode {electrode} are infeasible ({lower} > {upper})")]
    InfeasibleBounds {
        electrode: usize,
        lower: f64,
        upper: f64,
    },
    #[error("expected {expected} bounds, got {got}")]
    BoundsLength { expected: usize, got: usize },
    #[error("no sign change of the axial field in the search interval")]
    NoEquilibrium,
    #[error("axial equilibrium at {z:e} m has negative curvature")]
    UnstableEquilibrium { z: f64 },
    #[error("requested mode shape cannot be confined: {0}")]
    Unconfinable(&'static str),
    #[error("pseudopotential evaluation failed: {0}")]
    Pseudo(alloc::boxed::Box<PseudoError>),
}

impl From<PseudoError> for DcError {
    fn from(e: PseudoError) -> Self {
        DcError::Pseudo(alloc::boxed::Box::new(e))
    }
}

/// Singular values below this fraction of the largest are exact null
/// directions (symmetry, tracelessness) and are always dropped.
pub const NULL_SINGULAR_FRACTION: f64 = 1e-10;

/// Condition number of the retained system above which [`Regularization::Ridge`]
/// engages.
pub const RIDGE_CONDITION: f64 = 1e6;

/// Relative trace tolerance for Laplace consistency.
pub const LAPLACE_TOLERANCE: f64 = 1e-9;

/// Row weights. Hessian components are ordered `xx yy zz xy xz yz`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DcWeights {
    pub field: [f64; 3],
    pub hessian: [f64; 6],
}

impl Default for DcWeights {
    fn default() -> Self {
        Self {
            field: [1.0; 3],
            hessian: [1.0; 6],
        }
    }
}

const HESSIAN_SLOTS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

#[derive(Clone, Debug, PartialEq)]
pub struct DcTarget {
    pub point: Vector3<f64>,
    /// Desired static field `E = -∇Φ`, V/m (nonzero for stray-field
    /// compensation).
    pub field: Vector3<f64>,
    /// Desired Hessian of the static potential, V/m².
    pub hessian: Matrix3<f64>,
    pub weights: DcWeights,
    /// Per-controllable-electrode `(lower, upper)` voltage bounds.
    pub bounds: Option<Vec<(f64, f64)>>,
    /// Multiplies curvature rows so they are commensurate with field rows, m.
    pub length_scale: f64,
}

impl DcTarget {
    pub fn new(point: Vector3<f64>, field: Vector3<f64>, hessian: Matrix3<f64>) -> Self {
        Self {
            point,
            field,
            hessian,
            weights: DcWeights::default(),
            bounds: None,
            length_scale: 100e-6,
        }
    }

    /// Zero field and curvature at `point`.
    pub fn zero(point: Vector3<f64>) -> Self {
        Self::new(point, Vector3::zeros(), Matrix3::zeros())
    }

    pub fn with_bounds(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.bounds = Some(bounds);
        self
    }

    fn rhs(&self) -> [f64; 9] {
        let mut b = [0.0; 9];
        for (slot, f) in b.iter_mut().zip(self.field.iter()) {
            *slot = -f;
        }
        for (s, &(i, j)) in HESSIAN_SLOTS.iter().enumerate() {
            b[3 + s] = self.hessian[(i, j)] * self.length_scale;
        }
        b
    }

    fn row_weights(&self) -> [f64; 9] {
        let mut w = [0.0; 9];
        w[..3].copy_from_slice(&self.weights.field);
        w[3..].copy_from_slice(&self.weights.hessian);
        w
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regularization {
    /// Pure pseudo-inverse.
    None,
    /// Tikhonov term `ε = rel · σ_max²` (a fraction of the largest
    /// normal-matrix eigenvalue), applied only when the retained singular
    /// values span more than [`RIDGE_CONDITION`].
    Ridge(f64),
    /// Tikhonov term applied unconditionally.
    AlwaysRidge(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DcSolverOptions {
    pub regularization: Regularization,
    /// Controllable electrodes (layout indices); `None` means every `dc`
    /// electrode.
    pub electrodes: Option<Vec<usize>>,
    /// Residual (V/m, weighted) below which the target counts as attained.
    pub attained_tolerance: f64,
}

impl Default for DcSolverOptions {
    fn default() -> Self {
        Self {
            regularization: Regularization::Ridge(1e-12),
            electrodes: None,
            attained_tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DcSolution {
    /// Controllable electrode indices, in the order of `bounds`.
    pub electrodes: Vec<usize>,
    /// One voltage per layout electrode; uncontrolled electrodes are 0.
    pub voltages: Vec<f64>,
    /// Weighted residual norm, V/m.
    pub residual_norm: f64,
    pub achieved_field: Vector3<f64>,
    pub achieved_hessian: Matrix3<f64>,
    /// Electrodes pinned at a bound by the active-set loop.
    pub clamped: Vec<usize>,
    pub attained: bool,
}

/// Solves with [`DcSolverOptions::default`].
pub fn solve_dc(basis: &FieldBasis, target: &DcTarget) -> Result<DcSolution, DcError> {
    solve_dc_with(basis, target, &DcSolverOptions::default())
}

pub fn solve_dc_with(
    basis: &FieldBasis,
    target: &DcTarget,
    opts: &DcSolverOptions,
) -> Result<DcSolution, DcError> {
    let electrodes = match &opts.electrodes {
        Some(e) => e.clone(),
        None => basis.layout().indices_with_role(Role::Dc),
    };
    if electrodes.is_empty() {
        return Err(DcError::NoElectrodes);
    }
    let norm = target.hessian.norm();
    let trace = target.hessian.trace();
    if trace.abs() > LAPLACE_TOLERANCE * norm || (norm == 0.0 && trace != 0.0) {
        return Err(DcError::NotLaplaceConsistent { trace, norm });
    }
    if let Some(b) = &target.bounds {
        if b.len() != electrodes.len() {
            return Err(DcError::BoundsLength {
                expected: electrodes.len(),
                got: b.len(),
            });
        }
        for (k, &(lo, hi)) in b.iter().enumerate() {
            if !(lo <= hi) {
                return Err(DcError::InfeasibleBounds {
                    electrode: electrodes[k],
                    lower: lo,
                    upper: hi,
                });
            }
        }
    }

    let n = electrodes.len();
    let w = target.row_weights();
    let rhs = target.rhs();
    let mut a = DMatrix::zeros(9, n);
    for (col, &e) in electrodes.iter().enumerate() {
        let s = basis.evaluate(e, &target.point, Order::Hessian)?;
        for k in 0..3 {
            a[(k, col)] = s.gradient[k] * w[k];
        }
        for (slot, &(i, j)) in HESSIAN_SLOTS.iter().enumerate() {
            a[(3 + slot, col)] = s.hessian[(i, j)] * target.length_scale * w[3 + slot];
        }
    }
    let b = DVector::from_iterator(9, rhs.iter().zip(w.iter()).map(|(r, w)| r * w));

    let mut fixed: Vec<Option<f64>> = alloc::vec![None; n];
    let mut v = DVector::zeros(n);
    for _ in 0..=n {
        let free: Vec<usize> = (0..n).filter(|&k| fixed[k].is_none()).collect();
        let mut b_free = b.clone();
        for (k, f) in fixed.iter().enumerate() {
            if let Some(val) = f {
                b_free -= a.column(k) * *val;
            }
        }
        let sub = a.select_columns(free.iter());
        let x = min_norm_solve(&sub, &b_free, opts.regularization);
        for (k, val) in fixed.iter().enumerate() {
            if let Some(val) = val {
                v[k] = *val;
            }
        }
        for (i, &k) in free.iter().enumerate() {
            v[k] = x[i];
        }
        let Some(bounds) = &target.bounds else { break };
        let mut changed = false;
        for &k in &free {
            let (lo, hi) = bounds[k];
            if v[k] < lo {
                fixed[k] = Some(lo);
                changed = true;
            } else if v[k] > hi {
                fixed[k] = Some(hi);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if let Some(bounds) = &target.bounds {
        for k in 0..n {
            v[k] = v[k].clamp(bounds[k].0, bounds[k].1);
        }
    }

    let residual_norm = (&a * &v - &b).norm();
    let mut voltages = alloc::vec![0.0; basis.len()];
    for (k, &e) in electrodes.iter().enumerate() {
        voltages[e] = v[k];
    }
    let achieved = basis.superpose_vector(&voltages, &target.point, Order::Hessian)?;
    let clamped = (0..n)
        .filter(|&k| fixed[k].is_some())
        .map(|k| electrodes[k])
        .collect();
    Ok(DcSolution {
        electrodes,
        voltages,
        residual_norm,
        achieved_field: achieved.field(),
        achieved_hessian: achieved.hessian,
        clamped,
        attained: residual_norm <= opts.attained_tolerance,
    })
}

/// Minimum-norm least-squares solution through the SVD.
fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>, reg: Regularization) -> DVector<f64> {
    if a.ncols() == 0 {
        return DVector::zeros(0);
    }
    let Svd { u, s, v } = jacobi_svd(a);
    let smax = s.iter().fold(0.0_f64, |m, &x| m.max(x));
    if smax == 0.0 {
        return DVector::zeros(a.ncols());
    }
    let cutoff = NULL_SINGULAR_FRACTION * smax;
    let smin_kept = s
        .iter()
        .copied()
        .filter(|&x| x > cutoff)
        .fold(smax, f64::min);
    let ill_conditioned = smin_kept < smax / RIDGE_CONDITION;
    let eps = match reg {
        Regularization::None => 0.0,
        Regularization::Ridge(r) if ill_conditioned => r * smax * smax,
        Regularization::Ridge(_) => 0.0,
        Regularization::AlwaysRidge(r) => r * smax * smax,
    };
    let utb = u.transpose() * b;
    let mut coef = DVector::zeros(s.len());
    for i in 0..s.len() {
        let si = s[i];
        coef[i] = if si <= cutoff {
            0.0
        } else {
            si * utb[i] / (si * si + eps)
        };
    }
    v * coef
}

/// Plane of a principal-axis tilt.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TiltPlane {
    Xz,
    Yz,
}

/// Conjugates `hessian` by a rotation of `angle` in `plane`; a rotation in
/// the xz plane carries the z axis toward +x. Trace and symmetry are
/// preserved.
pub fn tilt_target(hessian: &Matrix3<f64>, angle: f64, plane: TiltPlane) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    let r = match plane {
        TiltPlane::Xz => Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
        TiltPlane::Yz => Matrix3::new(1.0, 0.0, 0.0, 0.0, c, s, 0.0, -s, c),
    };
    r * hessian * r.transpose()
}

/// Behavioral description of the desired secular modes at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModeTarget {
    /// Total planar frequencies `ω_x`, `ω_y` with the principal axes
    /// rotated by `tilt` in `plane`. The vertical frequency follows from
    /// the rf curvature: the dc Hessian must be traceless, so the three
    /// total curvatures sum to the trace of the pseudopotential Hessian.
    Frequencies {
        omega_x: f64,
        omega_y: f64,
        tilt: f64,
        plane: TiltPlane,
    },
    /// Dc-only vertical curvature `m ω_vertical²`, a planar splitting
    /// `ω_y / ω_x − 1`, and an off-diagonal dc quadrupole that tilts the
    /// vertical mode of the total potential by `tilt` in `plane`.
    VerticalDc {
        omega_vertical: f64,
        splitting: f64,
        tilt: f64,
        plane: TiltPlane,
    },
}

/// Dc target (zero net force, Hessian from `shape`) at `point` for `drive`.
pub fn mode_dc_target(
    basis: &FieldBasis,
    drive: &DriveConfig,
    point: &Vector3<f64>,
    shape: &ModeTarget,
) -> Result<DcTarget, DcError> {
    let psi = pseudo::pseudo_jet(basis, drive, point)?;
    let q = drive.ion.charge;
    let m = drive.ion.mass;
    let p = psi.hessian;
    let total = match *shape {
        ModeTarget::Frequencies {
            omega_x,
            omega_y,
            tilt,
            plane,
        } => {
            let kx = m * omega_x * omega_x;
            let ky = m * omega_y * omega_y;
            let kz = p.trace() - kx - ky;
            if !(kz > 0.0) {
                return Err(DcError::Unconfinable(
                    "planar frequencies exceed the rf curvature budget",
                ));
            }
            tilt_target(
                &Matrix3::from_diagonal(&Vector3::new(kx, ky, kz)),
                tilt,
                plane,
            )
        }
        ModeTarget::VerticalDc {
            omega_vertical,
            splitting,
            tilt,
            plane,
        } => {
            let c = m * omega_vertical * omega_vertical;
            let base = 0.5 * (p[(0, 0)] + p[(1, 1)]) - 0.5 * c;
            let r2 = (1.0 + splitting) * (1.0 + splitting);
            let d = (r2 - 1.0) * base / (1.0 + r2);
            let mut dc = Matrix3::from_diagonal(&Vector3::new(-0.5 * c - d, -0.5 * c + d, c));
            let t = p + dc;
            let (i, shear) = match plane {
                TiltPlane::Xz => (
                    0,
                    0.5 * (t[(2, 2)] - t[(0, 0)]) * (2.0 * tilt).tan() - p[(0, 2)],
                ),
                TiltPlane::Yz => (
                    1,
                    0.5 * (t[(2, 2)] - t[(1, 1)]) * (2.0 * tilt).tan() - p[(1, 2)],
                ),
            };
            dc[(i, 2)] = shear;
            dc[(2, i)] = shear;
            p + dc
        }
    };
    let mut hessian = (total - p) / q;
    // remove round-off trace so the Laplace check passes exactly
    let tr = hessian.trace() / 3.0;
    for k in 0..3 {
        hessian[(k, k)] -= tr;
    }
    Ok(DcTarget::new(*point, psi.gradient / q, hessian))
}

/// Height on the vertical line through the layout's symmetry point where
/// the axial dc force vanishes with positive curvature.
///
/// The interval is scanned on a fine grid and the first stable crossing is
/// refined with Brent's method.
pub fn equilibrium_on_null(
    basis: &FieldBasis,
    drive: &DriveConfig,
    interval: (f64, f64),
) -> Result<f64, DcError> {
    const SAMPLES: usize = 400;
    let (x0, y0) = basis.layout().symmetry_point;
    let dphi = |z: f64| -> Result<f64, FieldError> {
        Ok(basis
            .superpose_vector(&drive.dc, &Vector3::new(x0, y0, z), Order::Gradient)?
            .gradient
            .z)
    };
    let (lo, hi) = interval;
    let step = (hi - lo) / SAMPLES as f64;
    let mut prev = (lo, dphi(lo)?);
    let mut unstable = None;
    for k in 1..=SAMPLES {
        let z = lo + k as f64 * step;
        let cur = (z, dphi(z)?);
        let crosses = (prev.1 < 0.0 && cur.1 >= 0.0) || (prev.1 <= 0.0 && cur.1 > 0.0);
        if crosses {
            let root = brent(|z| dphi(z).unwrap_or(f64::NAN), prev.0, cur.0, 1e-13, 200)
                .map_err(|_| DcError::NoEquilibrium)?;
            return Ok(root);
        }
        if unstable.is_none() && prev.1 > 0.0 && cur.1 <= 0.0 {
            unstable = Some(0.5 * (prev.0 + cur.0));
        }
        prev = cur;
    }
    match unstable {
        Some(z) => Err(DcError::UnstableEquilibrium { z }),
        None => Err(DcError::NoEquilibrium),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{angular, Ion};
    use crate::geometry::reference_layout;
    use crate::pseudo::{mode_analysis, ModeAxis};

    const UM: f64 = 1e-6;

    fn basis() -> FieldBasis {
        FieldBasis::new(reference_layout())
    }

    #[test]
    fn zero_target_gives_zero_voltages() {
        let b = basis();
        let s = solve_dc(&b, &DcTarget::zero(Vector3::new(0.0, 0.0, 120.0 * UM))).unwrap();
        assert!(s.voltages.iter().all(|v| *v == 0.0));
        assert!(s.attained);
    }

    #[test]
    fn rejects_non_traceless_target() {
        let b = basis();
        let t = DcTarget::new(
            Vector3::new(0.0, 0.0, 1e-4),
            Vector3::zeros(),
            Matrix3::identity(),
        );
        assert!(matches!(
            solve_dc(&b, &t),
            Err(DcError::NotLaplaceConsistent { .. })
        ));
    }

    #[test]
    fn rejects_inverted_bounds() {
        let b = basis();
        let t =
            DcTarget::zero(Vector3::new(0.0, 0.0, 1e-4)).with_bounds(alloc::vec![(1.0, -1.0); 9]);
        assert!(matches!(
            solve_dc(&b, &t),
            Err(DcError::InfeasibleBounds { .. })
        ));
    }

    #[test]
    fn recovers_known_voltage_set() {
        let b = basis();
        let p = Vector3::new(5.0 * UM, -8.0 * UM, 140.0 * UM);
        let mut v0 = alloc::vec![0.0; b.len()];
        for (k, i) in b
            .layout()
            .indices_with_role(Role::Dc)
            .into_iter()
            .enumerate()
        {
            v0[i] = (k as f64 - 4.0) * 0.7 + 0.3;
        }
        let s0 = b.superpose_vector(&v0, &p, Order::Hessian).unwrap();
        let t = DcTarget::new(p, s0.field(), s0.hessian);
        let s = solve_dc(&b, &t).unwrap();
        let scale = s0.gradient.norm().max(s0.hessian.norm() * t.length_scale);
        assert!(s.residual_norm < 1e-10 * scale, "{:e}", s.residual_norm);
        assert!((s.achieved_field - s0.field()).norm() < 1e-9 * scale);
        assert!((s.achieved_hessian - s0.hessian).norm() * t.length_scale < 1e-9 * scale);
    }

    #[test]
    fn bounds_are_respected() {
        let b = basis();
        let p = Vector3::new(0.0, 0.0, 150.0 * UM);
        let h = Matrix3::from_diagonal(&Vector3::new(-1e7, -1e7, 2e7));
        let t = DcTarget::new(p, Vector3::zeros(), h);
        let free = solve_dc(&b, &t).unwrap();
        let vmax = free.voltages.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let limit = 0.5 * vmax;
        let bounded =
            solve_dc(&b, &t.clone().with_bounds(alloc::vec![(-limit, limit); 9])).unwrap();
        assert!(bounded
            .voltages
            .iter()
            .all(|v| v.abs() <= limit * (1.0 + 1e-12)));
        assert!(!bounded.clamped.is_empty());
        assert!(bounded.residual_norm > free.residual_norm);
    }

    #[test]
    fn tilt_zero_is_identity_and_inverse_restores() {
        let h = Matrix3::new(1.0, 0.2, 0.3, 0.2, -3.0, 0.1, 0.3, 0.1, 2.0);
        assert!((tilt_target(&h, 0.0, TiltPlane::Xz) - h).norm() < 1e-15);
        let a = 4f64.to_radians();
        let back = tilt_target(&tilt_target(&h, a, TiltPlane::Xz), -a, TiltPlane::Xz);
        assert!((back - h).norm() < 1e-12);
        let t = tilt_target(&h, a, TiltPlane::Yz);
        assert!((t - t.transpose()).norm() < 1e-14);
        assert!((t.trace() - h.trace()).abs() < 1e-14);
    }

    fn vertical_target(height: f64, omega: f64) -> DcTarget {
        let ion = Ion::calcium40();
        let c = ion.mass * omega * omega / ion.charge;
        DcTarget::new(
            Vector3::new(0.0, 0.0, height),
            Vector3::zeros(),
            Matrix3::from_diagonal(&Vector3::new(-0.5 * c, -0.5 * c, c)),
        )
    }

    #[test]
    fn equilibrium_round_trip_at_150um() {
        let b = basis();
        let s = solve_dc(&b, &vertical_target(150.0 * UM, angular(1e6))).unwrap();
        let mut d =
            DriveConfig::vertical_linear(b.layout(), angular(18.1e6), 100.0, Ion::calcium40())
                .unwrap();
        d.dc = s.voltages;
        let z = equilibrium_on_null(&b, &d, (20.0 * UM, 500.0 * UM)).unwrap();
        assert!((z - 150.0 * UM).abs() < 0.1 * UM, "{}", z / UM);
    }

    #[test]
    fn zero_dc_has_no_equilibrium() {
        let b = basis();
        let d = DriveConfig::vertical_linear(b.layout(), angular(18.1e6), 100.0, Ion::calcium40())
            .unwrap();
        assert_eq!(
            equilibrium_on_null(&b, &d, (20.0 * UM, 500.0 * UM)),
            Err(DcError::NoEquilibrium)
        );
    }

    #[test]
    fn inverted_dc_is_unstable() {
        let b = basis();
        let s = solve_dc(&b, &vertical_target(150.0 * UM, angular(1e6))).unwrap();
        let mut d =
            DriveConfig::vertical_linear(b.layout(), angular(18.1e6), 100.0, Ion::calcium40())
                .unwrap();
        d.dc = s.voltages.iter().map(|v| -v).collect();
        assert!(matches!(
            equilibrium_on_null(&b, &d, (20.0 * UM, 500.0 * UM)),
            Err(DcError::UnstableEquilibrium { .. })
        ));
    }

    #[test]
    fn frequency_target_sets_tilt_and_splitting() {
        let b = basis();
        let ion = Ion::calcium40();
        let d = DriveConfig::vertical_linear(b.layout(), angular(18.1e6), 120.0, ion).unwrap();
        let p = Vector3::new(0.0, 0.0, 114.0 * UM);
        let shape = ModeTarget::Frequencies {
            omega_x: angular(1e6),
            omega_y: angular(1.1e6),
            tilt: 4f64.to_radians(),
            plane: TiltPlane::Xz,
        };
        let t = mode_dc_target(&b, &d, &p, &shape).unwrap();
        let s = solve_dc(&b, &t).unwrap();
        let mut d2 = d.clone();
        d2.dc = s.voltages;
        let sol = mode_analysis(&b, &d2, &p).unwrap();
        assert!((sol.frequency(ModeAxis::X) / angular(1e6) - 1.0).abs() < 1e-6);
        assert!((sol.planar_splitting() - 0.1).abs() < 1e-6);
        assert!((sol.vertical_tilt().to_degrees() - 4.0).abs() < 1e-3);
    }
}
