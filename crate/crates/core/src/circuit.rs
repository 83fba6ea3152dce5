//! Lumped model of the transformer-fed, two-arm rf resonator.
//!
//! Each arm sees one half of a center-grounded secondary: a source EMF of
//! `±V_s` behind `R_loss + jωL_sec`. The secondary feeds the electrode node
//! through the series capacitor `C1`. The electrode node is loaded by the
//! reference inductor `L1`, the trimmer `CV`, the trap capacitance `C_trap`
//! and the `C2`/`C3` monitoring divider.
//!
//! ```text
//!  ±V_s ─ R_loss ─ L_sec ─ T ─┤C1├─ B ─┬─ L1 ─┐
//!                                     ├─ CV ─┤
//!                                     ├─ C_trap ┤
//!                                     └─┤C2├─ D ─┤C3├─ gnd
//! ```

use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::dynamics::modulation_index;
use crate::efield::{FieldBasis, FieldError, Order};
use crate::geometry::Role;
use crate::numeric::{brent, golden_max, ScalarError};
use crate::pseudo::DriveConfig;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CircuitError {
    #[error("component {name} of the {arm} arm must be positive (got {value:e})")]
    NonPositive {
        arm: Arm,
        name: &'static str,
        value: f64,
    },
    #[error("frequency must be positive (got {0:e})")]
    Frequency(f64),
    #[error("nodal matrix is singular at {omega:e} rad/s")]
    Singular { omega: f64 },
    #[error("no resonance found")]
    NoResonance,
    #[error("template drive has no rf amplitude")]
    NoDrive,
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("root search failed: {0:?}")]
    Search(ScalarError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Arm {
    Plus,
    Minus,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Plus => "plus",
            Arm::Minus => "minus",
        }
    }

    fn polarity(self) -> f64 {
        match self {
            Arm::Plus => 1.0,
            Arm::Minus => -1.0,
        }
    }
}

impl core::fmt::Display for Arm {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Trimmer range of the variable capacitors, F.
pub const TRIMMER_RANGE: (f64, f64) = (2e-12, 7e-12);

/// Component values of one arm (SI units).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmComponents {
    pub l_sec: f64,
    pub r_loss: f64,
    pub c1: f64,
    pub l1: f64,
    pub c2: f64,
    pub c3: f64,
    pub cv: f64,
    pub c_trap: f64,
}

impl Default for ArmComponents {
    fn default() -> Self {
        let l_sec = 1e-6;
        let omega = 2.0 * core::f64::consts::PI * 18.1e6;
        Self {
            l_sec,
            r_loss: omega * l_sec / 200.0,
            c1: 2e-9,
            l1: 100e-3,
            c2: 2e-12,
            c3: 100e-12,
            cv: 4.5e-12,
            c_trap: 74e-12,
        }
    }
}

impl ArmComponents {
    fn check(&self, arm: Arm) -> Result<(), CircuitError> {
        let fields = [
            ("l_sec", self.l_sec),
            ("c1", self.c1),
            ("l1", self.l1),
            ("c2", self.c2),
            ("c3", self.c3),
            ("cv", self.cv),
            ("c_trap", self.c_trap),
        ];
        for (name, value) in fields {
            if !(value > 0.0) {
                return Err(CircuitError::NonPositive { arm, name, value });
            }
        }
        if !(self.r_loss >= 0.0) {
            return Err(CircuitError::NonPositive {
                arm,
                name: "r_loss",
                value: self.r_loss,
            });
        }
        Ok(())
    }

    /// Capacitance seen by `L_sec` with `L1` neglected.
    pub fn effective_capacitance(&self) -> f64 {
        let shunt = self.cv + self.c_trap + self.c2 * self.c3 / (self.c2 + self.c3);
        self.c1 * shunt / (self.c1 + shunt)
    }

    /// `1/sqrt(L_sec C_eff)`, rad/s.
    pub fn nominal_resonance(&self) -> f64 {
        1.0 / (self.l_sec * self.effective_capacitance()).sqrt()
    }

    /// Series resistance giving unloaded quality factor `q` at the nominal
    /// resonance.
    pub fn with_quality_factor(mut self, q: f64) -> Self {
        self.r_loss = self.nominal_resonance() * self.l_sec / q;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResonatorNetwork {
    pub plus: ArmComponents,
    pub minus: ArmComponents,
    /// EMF amplitude of each secondary half, V.
    pub source_amplitude: f64,
}

impl Default for ResonatorNetwork {
    fn default() -> Self {
        Self::symmetric(ArmComponents::default())
    }
}

impl ResonatorNetwork {
    pub fn symmetric(arm: ArmComponents) -> Self {
        Self {
            plus: arm,
            minus: arm,
            source_amplitude: 1.0,
        }
    }

    pub fn arm(&self, arm: Arm) -> &ArmComponents {
        match arm {
            Arm::Plus => &self.plus,
            Arm::Minus => &self.minus,
        }
    }

    pub fn arm_mut(&mut self, arm: Arm) -> &mut ArmComponents {
        match arm {
            Arm::Plus => &mut self.plus,
            Arm::Minus => &mut self.minus,
        }
    }

    /// Network with the two arms' component sets exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            plus: self.minus,
            minus: self.plus,
            source_amplitude: self.source_amplitude,
        }
    }

    pub fn validate(&self) -> Result<(), CircuitError> {
        self.plus.check(Arm::Plus)?;
        self.minus.check(Arm::Minus)
    }

    /// Whether both trimmers lie within [`TRIMMER_RANGE`].
    pub fn trimmers_in_range(&self) -> bool {
        [self.plus.cv, self.minus.cv]
            .iter()
            .all(|c| (TRIMMER_RANGE.0..=TRIMMER_RANGE.1).contains(c))
    }
}

/// Node phasors of one arm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ArmResponse {
    /// Secondary output node.
    pub secondary: Complex64,
    pub electrode: Complex64,
    /// Divider midpoint.
    pub pickoff: Complex64,
    /// Current leaving the source.
    pub source_current: Complex64,
    /// Source EMF.
    pub emf: Complex64,
}

impl ArmResponse {
    /// Time-averaged power delivered by the source, W.
    pub fn source_power(&self) -> f64 {
        0.5 * (self.emf * self.source_current.conj()).re
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetworkResponse {
    pub omega: f64,
    pub plus: ArmResponse,
    pub minus: ArmResponse,
}

impl NetworkResponse {
    pub fn arm(&self, arm: Arm) -> &ArmResponse {
        match arm {
            Arm::Plus => &self.plus,
            Arm::Minus => &self.minus,
        }
    }

    /// `(V₊ − V₋)/2` at the electrodes.
    pub fn differential(&self) -> Complex64 {
        (self.plus.electrode - self.minus.electrode) * 0.5
    }

    /// `(V₊ + V₋)/2` at the electrodes.
    pub fn common_mode(&self) -> Complex64 {
        (self.plus.electrode + self.minus.electrode) * 0.5
    }
}

fn solve_arm(c: &ArmComponents, emf: f64, omega: f64) -> Result<ArmResponse, CircuitError> {
    let j = Complex64::new(0.0, 1.0);
    let ys = (Complex64::new(c.r_loss, 0.0) + j * omega * c.l_sec).inv();
    let y1 = j * omega * c.c1;
    let yl1 = (j * omega * c.l1).inv();
    let yb = j * omega * (c.cv + c.c_trap);
    let y2 = j * omega * c.c2;
    let y3 = j * omega * c.c3;
    let zero = Complex64::new(0.0, 0.0);
    let e = Complex64::new(emf, 0.0);
    let m = Matrix3::new(
        ys + y1,
        -y1,
        zero,
        -y1,
        y1 + yl1 + yb + y2,
        -y2,
        zero,
        -y2,
        y2 + y3,
    );
    let rhs = Vector3::new(e * ys, zero, zero);
    let v = m.lu().solve(&rhs).ok_or(CircuitError::Singular { omega })?;
    if !v.iter().all(|x| x.re.is_finite() && x.im.is_finite()) {
        return Err(CircuitError::Singular { omega });
    }
    Ok(ArmResponse {
        secondary: v[0],
        electrode: v[1],
        pickoff: v[2],
        source_current: (e - v[0]) * ys,
        emf: e,
    })
}

/// Both arms' node phasors at angular frequency `omega`; the arms are
/// driven with opposite polarity.
pub fn solve_network(net: &ResonatorNetwork, omega: f64) -> Result<NetworkResponse, CircuitError> {
    if !(omega > 0.0) {
        return Err(CircuitError::Frequency(omega));
    }
    net.validate()?;
    Ok(NetworkResponse {
        omega,
        plus: solve_arm(&net.plus, net.source_amplitude, omega)?,
        minus: solve_arm(&net.minus, -net.source_amplitude, omega)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mismatch {
    /// |V₊| / |V₋|.
    pub amplitude_ratio: f64,
    /// `(arg V₊ − arg V₋) − π`, wrapped to (−π, π].
    pub phase_error: f64,
    /// `(V₊ + V₋)/2`.
    pub common_mode: Complex64,
}

fn wrap_phase(mut a: f64) -> f64 {
    use core::f64::consts::PI;
    a %= 2.0 * PI;
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

fn mismatch_of(vp: Complex64, vm: Complex64) -> Mismatch {
    Mismatch {
        amplitude_ratio: vp.norm() / vm.norm(),
        phase_error: wrap_phase(vp.arg() - vm.arg() - core::f64::consts::PI),
        common_mode: (vp + vm) * 0.5,
    }
}

/// Electrode amplitude and phase mismatch.
pub fn mismatch(net: &ResonatorNetwork, omega: f64) -> Result<Mismatch, CircuitError> {
    let r = solve_network(net, omega)?;
    Ok(mismatch_of(r.plus.electrode, r.minus.electrode))
}

/// Mismatch as seen on the divider pickoffs.
pub fn pickoff_mismatch(net: &ResonatorNetwork, omega: f64) -> Result<Mismatch, CircuitError> {
    let r = solve_network(net, omega)?;
    Ok(mismatch_of(r.plus.pickoff, r.minus.pickoff))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Resonance {
    /// Angular frequency of the response maximum, rad/s.
    pub omega: f64,
    /// Peak response magnitude, V.
    pub peak: f64,
    /// `ω / Δω` from the half-power points.
    pub loaded_q: f64,
}

fn search_window(net: &ResonatorNetwork) -> (f64, f64) {
    let w0 = net
        .plus
        .nominal_resonance()
        .min(net.minus.nominal_resonance());
    let w1 = net
        .plus
        .nominal_resonance()
        .max(net.minus.nominal_resonance());
    (0.8 * w0, 1.2 * w1)
}

fn find_peak<F>(mut f: F, (lo, hi): (f64, f64)) -> Result<Resonance, CircuitError>
where
    F: FnMut(f64) -> f64,
{
    const GRID: usize = 2000;
    let step = (hi - lo) / GRID as f64;
    let mut best = (lo, f(lo));
    for k in 1..=GRID {
        let w = lo + k as f64 * step;
        let v = f(w);
        if v > best.1 {
            best = (w, v);
        }
    }
    if best.0 <= lo || best.0 >= hi || !best.1.is_finite() {
        return Err(CircuitError::NoResonance);
    }
    let (omega, peak) = golden_max(&mut f, best.0 - step, best.0 + step, 1e-12 * best.0);
    let half = peak / core::f64::consts::SQRT_2;
    let mut lo_w = omega;
    while f(lo_w) > half && lo_w > lo {
        lo_w -= step;
    }
    let mut hi_w = omega;
    while f(hi_w) > half && hi_w < hi {
        hi_w += step;
    }
    let w_lo =
        brent(|w| f(w) - half, lo_w, omega, 1e-12 * omega, 200).map_err(CircuitError::Search)?;
    let w_hi =
        brent(|w| f(w) - half, omega, hi_w, 1e-12 * omega, 200).map_err(CircuitError::Search)?;
    Ok(Resonance {
        omega,
        peak,
        loaded_q: omega / (w_hi - w_lo),
    })
}

/// Peak of one arm's electrode response.
pub fn arm_resonance(net: &ResonatorNetwork, arm: Arm) -> Result<Resonance, CircuitError> {
    net.validate()?;
    let c = *net.arm(arm);
    let emf = arm.polarity() * net.source_amplitude;
    let window = (0.8 * c.nominal_resonance(), 1.2 * c.nominal_resonance());
    find_peak(
        |w| {
            solve_arm(&c, emf, w)
                .map(|r| r.electrode.norm())
                .unwrap_or(f64::NAN)
        },
        window,
    )
}

/// Peak of the differential electrode amplitude `|V₊ − V₋|/2`, the
/// operating point of the drive.
pub fn circuit_resonance(net: &ResonatorNetwork) -> Result<Resonance, CircuitError> {
    net.validate()?;
    find_peak(
        |w| {
            solve_network(net, w)
                .map(|r| r.differential().norm())
                .unwrap_or(f64::NAN)
        },
        search_window(net),
    )
}

/// Electrode phasors of `net` at `omega` mapped onto the rf electrodes of
/// `template`, rescaled so the differential amplitude equals the
/// template's peak rf amplitude.
pub fn drive_from_network(
    net: &ResonatorNetwork,
    basis: &FieldBasis,
    template: &DriveConfig,
    omega: f64,
) -> Result<DriveConfig, CircuitError> {
    let peak = template.rf_peak();
    if !(peak > 0.0) {
        return Err(CircuitError::NoDrive);
    }
    let r = solve_network(net, omega)?;
    let scale = peak / r.differential().norm();
    let mut d = template.clone();
    d.rf_frequency = omega;
    for (i, e) in basis.layout().electrodes.iter().enumerate() {
        d.rf[i] = match e.role {
            Role::RfPlus => r.plus.electrode * scale,
            Role::RfMinus => r.minus.electrode * scale,
            _ => Complex64::new(0.0, 0.0),
        };
    }
    Ok(d)
}

/// One row of a trimmer sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaPoint {
    /// `CV₊`, F.
    pub cv_plus: f64,
    /// Drive (circuit resonance) frequency, rad/s.
    pub resonance: f64,
    pub amplitude_ratio: f64,
    pub phase_error: f64,
    pub beta: f64,
}

/// Modulation index at `point` when the network drives the electrodes at
/// its resonance.
pub fn beta_at_resonance(
    net: &ResonatorNetwork,
    basis: &FieldBasis,
    template: &DriveConfig,
    point: &Vector3<f64>,
    wavevector: &Vector3<f64>,
) -> Result<BetaPoint, CircuitError> {
    let res = circuit_resonance(net)?;
    let d = drive_from_network(net, basis, template, res.omega)?;
    let e = basis
        .superpose_vector(&d.rf, point, Order::Gradient)?
        .field();
    let mm = mismatch(net, res.omega)?;
    Ok(BetaPoint {
        cv_plus: net.plus.cv,
        resonance: res.omega,
        amplitude_ratio: mm.amplitude_ratio,
        phase_error: mm.phase_error,
        beta: modulation_index(&e, d.rf_frequency, &d.ion, wavevector),
    })
}

/// Sweeps `CV₊` over `cv_values`, tracking the circuit resonance.
pub fn beta_vs_resonance(
    net: &ResonatorNetwork,
    basis: &FieldBasis,
    template: &DriveConfig,
    point: &Vector3<f64>,
    wavevector: &Vector3<f64>,
    cv_values: &[f64],
) -> Result<Vec<BetaPoint>, CircuitError> {
    cv_values
        .iter()
        .map(|&cv| {
            let mut n = *net;
            n.plus.cv = cv;
            beta_at_resonance(&n, basis, template, point, wavevector)
        })
        .collect()
}

/// Extra trap capacitance on the plus arm that raises the untuned
/// modulation index to `target_beta`, F.
pub fn fit_asymmetry(
    net: &ResonatorNetwork,
    basis: &FieldBasis,
    template: &DriveConfig,
    point: &Vector3<f64>,
    wavevector: &Vector3<f64>,
    target_beta: f64,
) -> Result<f64, CircuitError> {
    let mut failure = None;
    let mut beta = |dc: f64| -> f64 {
        let mut n = *net;
        n.plus.c_trap += dc;
        match beta_at_resonance(&n, basis, template, point, wavevector) {
            Ok(p) => p.beta - target_beta,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    };
    let mut hi = 1e-15;
    while beta(hi) < 0.0 && hi < 1e-10 {
        hi *= 2.0;
    }
    let root = brent(&mut beta, 0.0, hi, 1e-21, 200);
    if let Some(e) = failure {
        return Err(e);
    }
    root.map_err(CircuitError::Search)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(hz: f64) -> f64 {
        2.0 * core::f64::consts::PI * hz
    }

    #[test]
    fn symmetric_arms_are_antiphase() {
        let net = ResonatorNetwork::default();
        for f in [10e6, 18.1e6, 25e6] {
            let m = mismatch(&net, w(f)).unwrap();
            assert!((m.amplitude_ratio - 1.0).abs() < 1e-14);
            assert!(m.phase_error.abs() < 1e-14);
            assert!(m.common_mode.norm() < 1e-12);
        }
    }

    #[test]
    fn default_resonance_near_18_1_mhz() {
        let net = ResonatorNetwork::default();
        let r = circuit_resonance(&net).unwrap();
        assert!(
            (r.omega / w(18.1e6) - 1.0).abs() < 0.01,
            "{}",
            r.omega / w(1.0)
        );
        let a = arm_resonance(&net, Arm::Plus).unwrap();
        assert!((a.loaded_q - 200.0).abs() < 10.0, "{}", a.loaded_q);
    }

    #[test]
    fn divider_ratio_light_loading() {
        let net = ResonatorNetwork::default();
        let r = solve_network(&net, w(18.1e6)).unwrap();
        let ratio = (r.plus.pickoff / r.plus.electrode).norm();
        assert!((ratio - 2.0 / 102.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        let mut net = ResonatorNetwork::default();
        assert!(matches!(
            solve_network(&net, 0.0),
            Err(CircuitError::Frequency(_))
        ));
        net.minus.c2 = 0.0;
        assert!(matches!(
            solve_network(&net, 1e8),
            Err(CircuitError::NonPositive {
                arm: Arm::Minus,
                ..
            })
        ));
        net.minus.c2 = 2e-12;
        net.plus.r_loss = -1.0;
        assert!(solve_network(&net, 1e8).is_err());
    }

    #[test]
    fn swap_exchanges_responses() {
        let mut net = ResonatorNetwork::default();
        net.plus.cv += 0.3e-12;
        let a = mismatch(&net, w(18.1e6)).unwrap();
        let b = mismatch(&net.swapped(), w(18.1e6)).unwrap();
        assert!((a.amplitude_ratio * b.amplitude_ratio - 1.0).abs() < 1e-12);
        assert!((a.phase_error + b.phase_error).abs() < 1e-12);
    }

    #[test]
    fn common_mode_grows_with_trim_offset() {
        let mut last = 0.0;
        for k in 1..=10 {
            let mut net = ResonatorNetwork::default();
            net.plus.cv += k as f64 * 0.01e-12;
            let cm = mismatch(&net, w(18.1e6)).unwrap().common_mode.norm();
            assert!(cm > last);
            last = cm;
        }
    }

    #[test]
    fn phase_wrap_interval() {
        use core::f64::consts::PI;
        assert_eq!(wrap_phase(PI), PI);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
    }
}
