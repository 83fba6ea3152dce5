//! Rf pseudopotential, rf-null search, secular mode analysis and Mathieu
//! parameters.
//!
//! The pseudopotential of a field phasor `E` oscillating at `Ω` is
//! `Ψ = q² |E|² / (4 m Ω²)`. Its gradient and Hessian are assembled from the
//! analytic basis derivatives; the Hessian includes the third-derivative term
//! so it is exact away from the rf null as well.

use alloc::boxed::Box;
use alloc::vec::Vec;

use nalgebra::{Matrix2, Matrix3, SymmetricEigen, Vector2, Vector3};
use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::constants::Ion;
use crate::dcsolve::{self, DcError, ModeTarget};
use crate::efield::{FieldBasis, FieldError, FieldSample, Order};
use crate::geometry::{ElectrodeLayout, Role};
use crate::numeric::{brent, ScalarError};

/// Edge of the first Mathieu stability region at `a = 0`.
pub const MATHIEU_Q_LIMIT: f64 = 0.908;

/// Curvatures below this fraction of the largest one count as unconfined.
const STABLE_CURVATURE_FRACTION: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum PseudoError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("invalid drive: {0}")]
    InvalidDrive(&'static str),
    #[error("no rf null found (last in-plane residual {residual:e} V/m)")]
    NoNull { residual: f64 },
    #[error("in-plane rf field vanishes at ({x:e}, {y:e}) m but the pseudopotential is not minimal there")]
    NotMinimum { x: f64, y: f64 },
    #[error("point is not stationary (residual force {force:e} N, displacement estimate {displacement:e} m)")]
    NotStationary { force: f64, displacement: f64 },
    #[error("unstable trap: non-positive curvature along at least one principal axis")]
    Unstable(Box<TrapSolution>),
    #[error("target frequency unreachable below {max_amplitude} V")]
    Unreachable { max_amplitude: f64 },
    #[error(transparent)]
    Dc(#[from] DcError),
    #[error("root search failed: {0:?}")]
    Search(ScalarError),
}

/// Rf drive, dc voltages and ion species.
///
/// Amplitudes are stored per electrode in layout order. Rf amplitudes are
/// zero-to-peak phasors; the physical voltage is `Re(V e^{iΩt})`.
#[derive(Clone, Debug, PartialEq)]
pub struct DriveConfig {
    /// Ω_rf in rad/s.
    pub rf_frequency: f64,
    pub rf: Vec<Complex64>,
    pub dc: Vec<f64>,
    pub ion: Ion,
}

impl DriveConfig {
    /// All electrodes grounded.
    pub fn new(layout: &ElectrodeLayout, rf_frequency: f64, ion: Ion) -> Result<Self, PseudoError> {
        if !(rf_frequency > 0.0) {
            return Err(PseudoError::InvalidDrive("rf frequency must be positive"));
        }
        if !(ion.mass > 0.0) {
            return Err(PseudoError::InvalidDrive("ion mass must be positive"));
        }
        Ok(Self {
            rf_frequency,
            rf: alloc::vec![Complex64::new(0.0, 0.0); layout.len()],
            dc: alloc::vec![0.0; layout.len()],
            ion,
        })
    }

    /// Out-of-phase drive: `+amplitude` on rf_plus electrodes, `-amplitude`
    /// on rf_minus.
    pub fn vertical_linear(
        layout: &ElectrodeLayout,
        rf_frequency: f64,
        amplitude: f64,
        ion: Ion,
    ) -> Result<Self, PseudoError> {
        let mut d = Self::new(layout, rf_frequency, ion)?;
        for (i, e) in layout.electrodes.iter().enumerate() {
            d.rf[i] = match e.role {
                Role::RfPlus => Complex64::new(amplitude, 0.0),
                Role::RfMinus => Complex64::new(-amplitude, 0.0),
                _ => Complex64::new(0.0, 0.0),
            };
        }
        Ok(d)
    }

    /// In-phase drive on every rf electrode (point-trap configuration).
    pub fn point_trap(
        layout: &ElectrodeLayout,
        rf_frequency: f64,
        amplitude: f64,
        ion: Ion,
    ) -> Result<Self, PseudoError> {
        let mut d = Self::new(layout, rf_frequency, ion)?;
        for (i, e) in layout.electrodes.iter().enumerate() {
            if e.role.is_rf() {
                d.rf[i] = Complex64::new(amplitude, 0.0);
            }
        }
        Ok(d)
    }

    pub fn set_rf(
        &mut self,
        basis: &FieldBasis,
        name: &str,
        phasor: Complex64,
    ) -> Result<(), PseudoError> {
        let i = basis.index_of(name)?;
        self.rf[i] = phasor;
        Ok(())
    }

    pub fn set_dc(
        &mut self,
        basis: &FieldBasis,
        name: &str,
        volts: f64,
    ) -> Result<(), PseudoError> {
        let i = basis.index_of(name)?;
        self.dc[i] = volts;
        Ok(())
    }

    /// Copy with every rf phasor multiplied by `s`.
    pub fn scaled_rf(&self, s: f64) -> Self {
        let mut d = self.clone();
        for v in &mut d.rf {
            *v *= s;
        }
        d
    }

    /// Largest rf amplitude magnitude.
    pub fn rf_peak(&self) -> f64 {
        self.rf.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `q² / (4 m Ω²)`, the factor between `|E|²` and `Ψ`.
    pub fn pseudo_prefactor(&self) -> f64 {
        let q = self.ion.charge;
        q * q / (4.0 * self.ion.mass * self.rf_frequency * self.rf_frequency)
    }
}

/// Scalar energy with gradient and Hessian, J, J/m, J/m².
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyJet {
    pub value: f64,
    pub gradient: Vector3<f64>,
    pub hessian: Matrix3<f64>,
}

/// Complex rf field sample (potential phasor and derivatives).
pub fn rf_sample(
    basis: &FieldBasis,
    drive: &DriveConfig,
    point: &Vector3<f64>,
    order: Order,
) -> Result<FieldSample<Complex64>, FieldError> {
    basis.superpose_vector(&drive.rf, point, order)
}

/// Static potential sample of the dc voltages.
pub fn dc_sample(
    basis: &FieldBasis,
    drive: &DriveConfig,
    point: &Vector3<f64>,
    order: Order,
) -> Result<FieldSample<f64>, FieldError> {
    basis.superpose_vector(&drive.dc, point, order)
}

fn pseudo_jet_from(sample: &FieldSample<Complex64>, c: f64) -> EnergyJet {
    let g = &sample.gradient;
    let h = &sample.hessian;
    let value = c * g.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let mut gradient = Vector3::zeros();
    for i in 0..3 {
        let mut acc = 0.0;
        for k in 0..3 {
            acc += (g[k].conj() * h[(k, i)]).re;
        }
        gradient[i] = 2.0 * c * acc;
    }
    let mut hessian = Matrix3::zeros();
    if let Some(t) = sample.third.as_ref() {
        let gc = g.map(|z| z.conj());
        let tg = t.contract(&gc);
        for i in 0..3 {
            for j in 0..3 {
                let mut acc = tg[(i, j)].re;
                for k in 0..3 {
                    acc += (h[(k, j)].conj() * h[(k, i)]).re;
                }
                hessian[(i, j)] = 2.0 * c * acc;
            }
        }
    }
    EnergyJet {
        value,
        gradient,
        hessian,
    }
}

/// Ψ at `point`, J.
pub fn pseudopotential(
    basis: &FieldBasis,
    drive: &DriveConfig,
    point: &Vector3<f64>,
) -> Result<f64, PseudoError> {
    let s = rf_sample(basis, drive, point, Order::Gradient)?;
    Ok(drive.pseudo_prefactor() * s.gradient.iter().map(|z| z.norm_sqr()).sum::<f64>())
}

/// Ψ with exact gradient and Hessian.
pub fn pseudo_jet(
    basis: &FieldBasis,
    drive: &DriveConfig,
    point: &Vector3<f64>,
) -> Result<EnergyJet, PseudoError> {
    let s = rf_sample(basis, drive, point, Order::Third)?;
    Ok(pseudo_jet_from(&s, drive.pseudo_prefactor()))
}

/// Total potential energy `Ψ + q Φ_dc` with gradient and Hessian.
pub fn total_jet(
    basis: &FieldBasis,
    drive: &DriveConfig,
    point: &Vector3<f64>,
) -> Result<EnergyJet, PseudoError> {
    let p = pseudo_jet(basis, drive, point)?;
    let d = dc_sample(basis, drive, point, Order::Hessian)?;
    let q = drive.ion.charge;
    Ok(EnergyJet {
        value: p.value + q * d.potential,
        gradient: p.gradient + d.gradient * q,
        hessian: p.hessian + d.hessian * q,
    })
}

/// Total potential energy only.
pub fn total_energy(
    basis: &FieldBasis,
    drive: &DriveConfig,
    point: &Vector3<f64>,
) -> Result<f64, PseudoError> {
    let d = dc_sample(basis, drive, point, Order::Potential)?;
    Ok(pseudopotential(basis, drive, point)? + drive.ion.charge * d.potential)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NullSearch {
    pub max_iterations: usize,
    /// Convergence threshold on the in-plane field magnitude, V/m.
    pub tolerance: f64,
    /// Iterates farther than this from the symmetry point abort the search.
    pub max_radius: f64,
}

impl Default for NullSearch {
    fn default() -> Self {
        Self {
            max_iterations: 60,
            tolerance: 1e-6,
            max_radius: 1e-3,
        }
    }
}

/// In-plane point at height `z` where both in-plane rf field components
/// vanish and the pseudopotential has an in-plane minimum. Gauss-Newton on
/// the stacked real and imaginary parts, so purely real drives reduce to
/// Newton's method.
pub fn find_rf_null(
    basis: &FieldBasis,
    drive: &DriveConfig,
    z: f64,
    guess: (f64, f64),
    opts: &NullSearch,
) -> Result<(f64, f64), PseudoError> {
    let (sx, sy) = basis.layout().symmetry_point;
    let eval = |x: f64, y: f64| -> Result<(f64, [Complex64; 2], Matrix2<Complex64>), PseudoError> {
        let s = rf_sample(basis, drive, &Vector3::new(x, y, z), Order::Hessian)?;
        let g = [s.gradient.x, s.gradient.y];
        let j = Matrix2::new(
            s.hessian[(0, 0)],
            s.hessian[(0, 1)],
            s.hessian[(1, 0)],
            s.hessian[(1, 1)],
        );
        let r = (g[0].norm_sqr() + g[1].norm_sqr()).sqrt();
        Ok((r, g, j))
    };
    let (mut x, mut y) = guess;
    let (mut r, mut g, mut j) = eval(x, y)?;
    let accept = |x: f64, y: f64| -> Result<(f64, f64), PseudoError> {
        let h = pseudo_jet(basis, drive, &Vector3::new(x, y, z))?.hessian;
        let det = h[(0, 0)] * h[(1, 1)] - h[(0, 1)] * h[(1, 0)];
        if h[(0, 0)] > 0.0 && det > 0.0 {
            Ok((x, y))
        } else {
            Err(PseudoError::NotMinimum { x, y })
        }
    };
    for _ in 0..opts.max_iterations {
        if r < opts.tolerance {
            return accept(x, y);
        }
        // normal equations of the 4x2 real system
        let mut jtj = Matrix2::<f64>::zeros();
        let mut jtr = Vector2::zeros();
        for k in 0..2 {
            for part in 0..2 {
                let pick = |c: Complex64| if part == 0 { c.re } else { c.im };
                let row = [pick(j[(k, 0)]), pick(j[(k, 1)])];
                let res = pick(g[k]);
                for a in 0..2 {
                    jtr[a] += row[a] * res;
                    for b in 0..2 {
                        jtj[(a, b)] += row[a] * row[b];
                    }
                }
            }
        }
        let Some(step) = jtj.lu().solve(&(-jtr)) else {
            break;
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let (nx, ny) = (x + t * step.x, y + t * step.y);
            if ((nx - sx).powi(2) + (ny - sy).powi(2)).sqrt() > opts.max_radius {
                t *= 0.5;
                continue;
            }
            let (nr, ng, nj) = eval(nx, ny)?;
            if nr < r {
                (x, y, r, g, j) = (nx, ny, nr, ng, nj);
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if r < opts.tolerance {
        accept(x, y)
    } else {
        Err(PseudoError::NoNull { residual: r })
    }
}

/// Labels for the three principal axes of a [`TrapSolution`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModeAxis {
    X = 0,
    Y = 1,
    Vertical = 2,
}

impl ModeAxis {
    pub const ALL: [ModeAxis; 3] = [ModeAxis::X, ModeAxis::Y, ModeAxis::Vertical];

    pub fn as_str(self) -> &'static str {
        match self {
            ModeAxis::X => "x",
            ModeAxis::Y => "y",
            ModeAxis::Vertical => "z",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StabilityWarning {
    /// |q| at or beyond the first stability region edge.
    MathieuQ { axis: ModeAxis, q: f64 },
    /// Non-positive total curvature.
    UnstableAxis { axis: ModeAxis, curvature: f64 },
}

/// Result of [`mode_analysis`].
///
/// Axis order is `[x, y, vertical]`: the vertical axis is the eigenvector
/// with the largest |z| component, and of the remaining two the one with the
/// larger |x| component is labeled x.
#[derive(Clone, Debug, PartialEq)]
pub struct TrapSolution {
    pub equilibrium: Vector3<f64>,
    /// Eigenvalues of the total Hessian, J/m².
    pub curvatures: [f64; 3],
    /// Secular angular frequencies, rad/s (zero for unstable axes). These
    /// are adiabatic: the error in ω² is of order q⁴Ω², so axes where dc
    /// defocusing nearly cancels the rf curvature carry larger relative
    /// error.
    pub frequencies: [f64; 3],
    /// Principal axes as matrix columns.
    pub axes: Matrix3<f64>,
    /// `2 q |H_rf e| / (m Ω²)` per axis.
    pub mathieu_q: [f64; 3],
    /// `4 q eᵀ H_dc e / (m Ω²)` per axis.
    pub mathieu_a: [f64; 3],
    /// Pseudopotential depth to the first saddle along each axis, J.
    pub depth: [Option<f64>; 3],
    pub warnings: Vec<StabilityWarning>,
}

impl TrapSolution {
    pub fn frequency(&self, axis: ModeAxis) -> f64 {
        self.frequencies[axis as usize]
    }

    pub fn axis(&self, axis: ModeAxis) -> Vector3<f64> {
        self.axes.column(axis as usize).into_owned()
    }

    /// Signed frequency `sign(λ) sqrt(|λ| / m)`, negative when unstable.
    pub fn signed_frequency(&self, axis: ModeAxis, mass: f64) -> f64 {
        let l = self.curvatures[axis as usize];
        l.signum() * (l.abs() / mass).sqrt()
    }

    /// The lower of the two planar frequencies.
    pub fn planar_min(&self) -> f64 {
        self.frequencies[0].min(self.frequencies[1])
    }

    /// Angle between the vertical mode and the z axis, radians.
    pub fn vertical_tilt(&self) -> f64 {
        self.axes[(2, 2)].abs().min(1.0).acos()
    }

    pub fn is_stable(&self) -> bool {
        !self
            .warnings
            .iter()
            .any(|w| matches!(w, StabilityWarning::UnstableAxis { .. }))
    }

    /// |ω_x − ω_y| / ω_x.
    pub fn planar_splitting(&self) -> f64 {
        (self.frequencies[0] - self.frequencies[1]).abs() / self.frequencies[0]
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeOptions {
    /// Largest accepted `|∇U| / λ_max`, m.
    pub stationarity_tolerance: f64,
    pub compute_depth: bool,
    /// Line-search reach for the depth saddle, m.
    pub depth_range: f64,
}

impl Default for ModeOptions {
    fn default() -> Self {
        Self {
            stationarity_tolerance: 1e-9,
            compute_depth: true,
            depth_range: 400e-6,
        }
    }
}

/// Secular modes at a stationary point of the total potential.
pub fn mode_analysis(
    basis: &FieldBasis,
    drive: &DriveConfig,
    equilibrium: &Vector3<f64>,
) -> Result<TrapSolution, PseudoError> {
    mode_analysis_with(basis, drive, equilibrium, &ModeOptions::default())
}

pub fn mode_analysis_with(
    basis: &FieldBasis,
    drive: &DriveConfig,
    equilibrium: &Vector3<f64>,
    opts: &ModeOptions,
) -> Result<TrapSolution, PseudoError> {
    let sol = analyze_point(basis, drive, equilibrium, opts)?;
    if sol.is_stable() {
        Ok(sol)
    } else {
        Err(PseudoError::Unstable(Box::new(sol)))
    }
}

/// Like [`mode_analysis_with`] but returns unstable solutions as `Ok`.
pub fn analyze_point(
    basis: &FieldBasis,
    drive: &DriveConfig,
    equilibrium: &Vector3<f64>,
    opts: &ModeOptions,
) -> Result<TrapSolution, PseudoError> {
    let rf = rf_sample(basis, drive, equilibrium, Order::Third)?;
    let psi = pseudo_jet_from(&rf, drive.pseudo_prefactor());
    let dc = dc_sample(basis, drive, equilibrium, Order::Hessian)?;
    let q = drive.ion.charge;
    let m = drive.ion.mass;
    let grad = psi.gradient + dc.gradient * q;
    let hess = psi.hessian + dc.hessian * q;
    let hess = (hess + hess.transpose()) * 0.5;

    let eig = SymmetricEigen::new(hess);
    let lmax = eig.eigenvalues.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let displacement = if lmax > 0.0 {
        grad.norm() / lmax
    } else {
        f64::INFINITY
    };
    if !(displacement <= opts.stationarity_tolerance) && grad.norm() > 0.0 {
        return Err(PseudoError::NotStationary {
            force: grad.norm(),
            displacement,
        });
    }

    let order = label_axes(&eig.eigenvectors);
    let mut axes = Matrix3::zeros();
    let mut curvatures = [0.0; 3];
    for (slot, &k) in order.iter().enumerate() {
        let mut v: Vector3<f64> = eig.eigenvectors.column(k).into_owned();
        // orient along the dominant component's positive direction
        let dom = v.iamax();
        if v[dom] < 0.0 {
            v = -v;
        }
        axes.set_column(slot, &v);
        curvatures[slot] = eig.eigenvalues[k];
    }

    let omega2 = drive.rf_frequency * drive.rf_frequency;
    let mut frequencies = [0.0; 3];
    let mut mathieu_q = [0.0; 3];
    let mut mathieu_a = [0.0; 3];
    let mut warnings = Vec::new();
    for (slot, axis) in ModeAxis::ALL.iter().enumerate() {
        let e: Vector3<f64> = axes.column(slot).into_owned();
        let l = curvatures[slot];
        if l > STABLE_CURVATURE_FRACTION * lmax {
            frequencies[slot] = (l / m).sqrt();
        } else {
            warnings.push(StabilityWarning::UnstableAxis {
                axis: *axis,
                curvature: l,
            });
        }
        let he = rf.hessian * e.map(|c| Complex64::new(c, 0.0));
        let he_norm = he.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        mathieu_q[slot] = 2.0 * q * he_norm / (m * omega2);
        mathieu_a[slot] = 4.0 * q * (e.transpose() * dc.hessian * e)[(0, 0)] / (m * omega2);
        if mathieu_q[slot] >= MATHIEU_Q_LIMIT {
            warnings.push(StabilityWarning::MathieuQ {
                axis: *axis,
                q: mathieu_q[slot],
            });
        }
    }

    let mut depth = [None; 3];
    if opts.compute_depth {
        for (slot, d) in depth.iter_mut().enumerate() {
            let e: Vector3<f64> = axes.column(slot).into_owned();
            *d = trap_depth_along(basis, drive, equilibrium, &e, opts.depth_range)?;
        }
    }

    Ok(TrapSolution {
        equilibrium: *equilibrium,
        curvatures,
        frequencies,
        axes,
        mathieu_q,
        mathieu_a,
        depth,
        warnings,
    })
}

/// Column indices of the eigenvector matrix in `[x, y, vertical]` order.
fn label_axes(vecs: &Matrix3<f64>) -> [usize; 3] {
    let vertical = (0..3)
        .max_by(|&a, &b| vecs[(2, a)].abs().total_cmp(&vecs[(2, b)].abs()))
        .unwrap_or(2);
    let mut rest = (0..3).filter(|&k| k != vertical);
    let (a, b) = (rest.next().unwrap_or(0), rest.next().unwrap_or(1));
    if vecs[(0, a)].abs() >= vecs[(0, b)].abs() {
        [a, b, vertical]
    } else {
        [b, a, vertical]
    }
}

/// Depth of the total potential along `±dir`, measured to the first local
/// maximum in each direction; the smaller of the two is returned.
pub fn trap_depth_along(
    basis: &FieldBasis,
    drive: &DriveConfig,
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
    range: f64,
) -> Result<Option<f64>, PseudoError> {
    const SAMPLES: usize = 160;
    let u0 = total_energy(basis, drive, origin)?;
    let z_floor = 0.02 * origin.z;
    let mut best: Option<f64> = None;
    for sign in [1.0, -1.0] {
        let d = dir * sign;
        let ds = range / SAMPLES as f64;
        let energy = |s: f64| total_energy(basis, drive, &(origin + d * s));
        let mut prev = (0.0, u0);
        let mut cur = (ds, energy(ds)?);
        for k in 2..=SAMPLES {
            let s = k as f64 * ds;
            if (origin + d * s).z <= z_floor {
                break;
            }
            let next = (s, energy(s)?);
            if cur.1 > prev.1 && cur.1 >= next.1 {
                let (lo, hi) = (prev.0, next.0);
                let (_, peak) = crate::numeric::golden_max(
                    |t| energy(t).unwrap_or(f64::NEG_INFINITY),
                    lo,
                    hi,
                    1e-4 * ds,
                );
                let depth = peak - u0;
                best = Some(best.map_or(depth, |b: f64| b.min(depth)));
                break;
            }
            prev = cur;
            cur = next;
        }
    }
    Ok(best)
}

/// Rf amplitude such that the lower planar secular frequency at height
/// `height` equals `target_frequency`.
///
/// At each trial amplitude the rf null is located at `height`, dc voltages
/// are solved for `shape` at that point, and the resulting modes are
/// analyzed. The template's rf phasors fix the drive pattern and are scaled
/// so the largest amplitude equals the trial value.
pub fn rf_amplitude_for_target(
    basis: &FieldBasis,
    template: &DriveConfig,
    height: f64,
    target_frequency: f64,
    shape: &ModeTarget,
    max_amplitude: f64,
) -> Result<f64, PseudoError> {
    if !(target_frequency > 0.0) {
        return Err(PseudoError::InvalidDrive(
            "target frequency must be positive",
        ));
    }
    let peak = template.rf_peak();
    if !(peak > 0.0) {
        return Err(PseudoError::InvalidDrive("template has no rf drive"));
    }
    let unit = template.scaled_rf(1.0 / peak);
    let m = template.ion.mass;
    let planar = |v: f64| -> Result<f64, PseudoError> {
        let sol = shaped_solution(basis, &unit.scaled_rf(v), height, shape)?;
        Ok(sol
            .signed_frequency(ModeAxis::X, m)
            .min(sol.signed_frequency(ModeAxis::Y, m)))
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    loop {
        let f = planar(hi)?;
        if f >= target_frequency {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > max_amplitude {
            hi = max_amplitude;
            if planar(hi)? < target_frequency {
                return Err(PseudoError::Unreachable { max_amplitude });
            }
            break;
        }
    }
    let mut failure = None;
    let root = brent(
        |v| match planar(v) {
            Ok(f) => f - target_frequency,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        1e-9 * hi,
        200,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    root.map_err(PseudoError::Search)
}

/// Drive with dc voltages solved for `shape` at the rf null at `height`,
/// and its mode analysis (unstable results are returned, not rejected).
pub fn shaped_solution(
    basis: &FieldBasis,
    drive: &DriveConfig,
    height: f64,
    shape: &ModeTarget,
) -> Result<TrapSolution, PseudoError> {
    let (d, point) = shaped_drive(basis, drive, height, shape)?;
    analyze_point(
        basis,
        &d,
        &point,
        &ModeOptions {
            compute_depth: false,
            ..ModeOptions::default()
        },
    )
}

/// Drive whose dc voltages realize `shape` at the rf null at `height`,
/// together with that null point.
pub fn shaped_drive(
    basis: &FieldBasis,
    drive: &DriveConfig,
    height: f64,
    shape: &ModeTarget,
) -> Result<(DriveConfig, Vector3<f64>), PseudoError> {
    let guess = basis.layout().symmetry_point;
    let (x, y) = if drive.rf_peak() > 0.0 {
        find_rf_null(basis, drive, height, guess, &NullSearch::default())?
    } else {
        guess
    };
    let point = Vector3::new(x, y, height);
    let target = dcsolve::mode_dc_target(basis, drive, &point, shape)?;
    let sol = dcsolve::solve_dc(basis, &target)?;
    let mut d = drive.clone();
    d.dc = sol.voltages;
    Ok((d, point))
}
