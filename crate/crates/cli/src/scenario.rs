//! Scenario files: shared trap settings plus one optional section per
//! command. Every dimensional key carries its unit as a suffix; keys without
//! one are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use surftrap_core::constants::{angular, Ion, CA40_ATOMIC_MASS_U, CA40_QUBIT_WAVELENGTH};
use surftrap_core::dcsolve::{ModeTarget, TiltPlane};
use surftrap_core::dynamics::ProbeGeometry;
use surftrap_core::geometry::ElectrodeLayout;
use surftrap_core::pseudo::DriveConfig;
use surftrap_core::Vector3;

use crate::error::CliError;
use crate::netlist::NetlistSpec;

pub const UM: f64 = 1e-6;

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    /// Command this scenario is meant for; checked against the invoked one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    /// Layout file path, relative to the scenario file, or `builtin:reference`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layout: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output directory, relative to the working directory; `--out` wins.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    pub ion: IonSpec,
    pub drive: DriveSpec,
    pub shape: ShapeSpec,
    pub probe: ProbeSpec,
    /// Inline netlist; `netlist_file` takes precedence.
    pub netlist: NetlistSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub netlist_file: Option<String>,
    pub potential_map: PotentialMapSpec,
    pub null_scan: NullScanSpec,
    pub modes: ModesSpec,
    pub rf_power_curve: RfPowerCurveSpec,
    pub dc_solve: DcSolveSpec,
    pub circuit_sweep: CircuitSweepSpec,
    pub beta: BetaSpec,
    pub trajectory: TrajectorySpec,
    pub thermometry: ThermometrySpec,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(format!("scenario: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("scenario file {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The fully resolved scenario as TOML, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn resolve_path(base: Option<&Path>, p: &str) -> PathBuf {
        match base {
            Some(b) if Path::new(p).is_relative() => b.join(p),
            _ => PathBuf::from(p),
        }
    }
}

/// `{ start = .., stop = .., points = .. }`, inclusive of both ends.
#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Range {
    pub fn new(start: f64, stop: f64, points: usize) -> Self {
        Self {
            start,
            stop,
            points,
        }
    }

    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        if self.points == 0 || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(CliError::config(
                "range needs finite ends and at least one point",
            ));
        }
        if self.points == 1 {
            return Ok(vec![self.start]);
        }
        let n = (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|i| self.start + (self.stop - self.start) * i as f64 / n)
            .collect())
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct IonSpec {
    #[serde(rename = "mass_u")]
    pub mass_u: f64,
    #[serde(rename = "charge_e")]
    pub charge_e: f64,
}

impl Default for IonSpec {
    fn default() -> Self {
        Self {
            mass_u: CA40_ATOMIC_MASS_U,
            charge_e: 1.0,
        }
    }
}

impl IonSpec {
    pub fn build(&self) -> Result<Ion, CliError> {
        if !(self.mass_u > 0.0) || self.charge_e == 0.0 || !self.charge_e.is_finite() {
            return Err(CliError::config(
                "ion: mass_u must be positive and charge_e nonzero",
            ));
        }
        if self.mass_u == CA40_ATOMIC_MASS_U && self.charge_e == 1.0 {
            return Ok(Ion::calcium40());
        }
        let ca = Ion::calcium40();
        let mass = ca.mass / CA40_ATOMIC_MASS_U * self.mass_u;
        Ok(Ion::new(ca.charge * self.charge_e, mass))
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Configuration {
    VerticalLinear,
    PointTrap,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DriveSpec {
    pub configuration: Configuration,
    #[serde(rename = "rf_frequency_MHz")]
    pub rf_frequency_mhz: f64,
    /// Zero-to-peak amplitude on each rf electrode.
    #[serde(rename = "rf_amplitude_V")]
    pub rf_amplitude_v: f64,
}

impl Default for DriveSpec {
    fn default() -> Self {
        Self {
            configuration: Configuration::VerticalLinear,
            rf_frequency_mhz: 18.1,
            rf_amplitude_v: 100.0,
        }
    }
}

impl DriveSpec {
    pub fn build(&self, layout: &ElectrodeLayout, ion: Ion) -> Result<DriveConfig, CliError> {
        if !(self.rf_amplitude_v >= 0.0) {
            return Err(CliError::config(
                "drive: rf_amplitude_V must be non-negative",
            ));
        }
        let w = angular(self.rf_frequency_mhz * 1e6);
        Ok(match self.configuration {
            Configuration::VerticalLinear => {
                DriveConfig::vertical_linear(layout, w, self.rf_amplitude_v, ion)?
            }
            Configuration::PointTrap => {
                DriveConfig::point_trap(layout, w, self.rf_amplitude_v, ion)?
            }
        })
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeKind {
    /// Fixed vertical frequency and planar splitting from the dc.
    VerticalDc,
    /// Absolute planar frequencies.
    Frequencies,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Xz,
    Yz,
}

/// Dc mode-shape target at the rf null.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ShapeSpec {
    pub kind: ShapeKind,
    #[serde(rename = "vertical_MHz")]
    pub vertical_mhz: f64,
    pub splitting: f64,
    #[serde(rename = "planar_x_MHz")]
    pub planar_x_mhz: f64,
    #[serde(rename = "planar_y_MHz")]
    pub planar_y_mhz: f64,
    #[serde(rename = "tilt_deg")]
    pub tilt_deg: f64,
    pub plane: Plane,
}

impl Default for ShapeSpec {
    fn default() -> Self {
        Self {
            kind: ShapeKind::VerticalDc,
            vertical_mhz: 1.2,
            splitting: 0.1,
            planar_x_mhz: 1.0,
            planar_y_mhz: 1.1,
            tilt_deg: 0.0,
            plane: Plane::Xz,
        }
    }
}

impl ShapeSpec {
    pub fn target(&self) -> ModeTarget {
        self.target_with_tilt(self.tilt_deg)
    }

    pub fn target_with_tilt(&self, tilt_deg: f64) -> ModeTarget {
        let plane = match self.plane {
            Plane::Xz => TiltPlane::Xz,
            Plane::Yz => TiltPlane::Yz,
        };
        let tilt = tilt_deg.to_radians();
        match self.kind {
            ShapeKind::VerticalDc => ModeTarget::VerticalDc {
                omega_vertical: angular(self.vertical_mhz * 1e6),
                splitting: self.splitting,
                tilt,
                plane,
            },
            ShapeKind::Frequencies => ModeTarget::Frequencies {
                omega_x: angular(self.planar_x_mhz * 1e6),
                omega_y: angular(self.planar_y_mhz * 1e6),
                tilt,
                plane,
            },
        }
    }
}

/// Probe laser direction for micromotion and thermometry.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSpec {
    pub direction: [f64; 3],
    #[serde(rename = "wavelength_nm")]
    pub wavelength_nm: f64,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        Self {
            direction: [0.0, 0.0, 1.0],
            wavelength_nm: CA40_QUBIT_WAVELENGTH * 1e9,
        }
    }
}

impl ProbeSpec {
    pub fn wavevector(&self) -> Result<Vector3<f64>, CliError> {
        let d = Vector3::from(self.direction);
        Ok(ProbeGeometry::along(d, self.wavelength_nm * 1e-9)?.wavevector)
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum MapPlane {
    Xy,
    Xz,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialMapSpec {
    pub plane: MapPlane,
    /// z for an xy map, y for an xz map.
    #[serde(rename = "offset_um")]
    pub offset_um: f64,
    /// First in-plane coordinate (x).
    #[serde(rename = "u_um")]
    pub u_um: Range,
    /// Second in-plane coordinate (y or z).
    #[serde(rename = "v_um")]
    pub v_um: Range,
    /// Add the dc potential solved for `[shape]` at the null at this
    /// height; 0 means rf only.
    #[serde(rename = "dc_height_um")]
    pub dc_height_um: f64,
}

impl Default for PotentialMapSpec {
    fn default() -> Self {
        Self {
            plane: MapPlane::Xy,
            offset_um: 175.0,
            u_um: Range::new(-200.0, 200.0, 81),
            v_um: Range::new(-200.0, 200.0, 81),
            dc_height_um: 0.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct NullScanSpec {
    #[serde(rename = "heights_um")]
    pub heights_um: Range,
    /// Starting guess for the in-plane null search.
    #[serde(rename = "guess_um")]
    pub guess_um: [f64; 2],
}

impl Default for NullScanSpec {
    fn default() -> Self {
        Self {
            heights_um: Range::new(50.0, 300.0, 26),
            guess_um: [0.0, 0.0],
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ModesSpec {
    #[serde(rename = "height_um")]
    pub height_um: f64,
}

impl Default for ModesSpec {
    fn default() -> Self {
        Self { height_um: 120.0 }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RfPowerCurveSpec {
    #[serde(rename = "heights_um")]
    pub heights_um: Range,
    /// Required lower planar secular frequency.
    #[serde(rename = "target_MHz")]
    pub target_mhz: f64,
    /// One voltage column per tilt.
    #[serde(rename = "tilts_deg")]
    pub tilts_deg: Vec<f64>,
    #[serde(rename = "max_amplitude_V")]
    pub max_amplitude_v: f64,
}

impl Default for RfPowerCurveSpec {
    fn default() -> Self {
        Self {
            heights_um: Range::new(50.0, 300.0, 51),
            target_mhz: 1.0,
            tilts_deg: vec![0.0],
            max_amplitude_v: 1e5,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum DcTargetKind {
    /// Realize `[shape]` at the rf null at `point_um`.
    Shape,
    /// Use the explicit field and curvature below.
    Explicit,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum RegularizationKind {
    None,
    Ridge,
    AlwaysRidge,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DcSolveSpec {
    pub target: DcTargetKind,
    /// For `shape` targets only z is used; x and y come from the null.
    #[serde(rename = "point_um")]
    pub point_um: [f64; 3],
    #[serde(rename = "field_V_per_m")]
    pub field_v_per_m: [f64; 3],
    /// xx, yy, zz, xy, xz, yz.
    #[serde(rename = "hessian_V_per_m2")]
    pub hessian_v_per_m2: [f64; 6],
    /// Common lower and upper voltage limit.
    #[serde(rename = "bounds_V", skip_serializing_if = "Option::is_none")]
    pub bounds_v: Option<[f64; 2]>,
    pub regularization: RegularizationKind,
    pub ridge: f64,
    /// Axial search interval for the equilibrium report.
    #[serde(rename = "equilibrium_search_um")]
    pub equilibrium_search_um: [f64; 2],
}

impl Default for DcSolveSpec {
    fn default() -> Self {
        Self {
            target: DcTargetKind::Shape,
            point_um: [0.0, 0.0, 120.0],
            field_v_per_m: [0.0; 3],
            hessian_v_per_m2: [0.0; 6],
            bounds_v: None,
            regularization: RegularizationKind::Ridge,
            ridge: 1e-12,
            equilibrium_search_um: [20.0, 500.0],
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct CircuitSweepSpec {
    /// Ion height; the ion sits at the rf null there.
    #[serde(rename = "height_um")]
    pub height_um: f64,
    /// Modulation index of the untuned network. When set, the plus-arm
    /// trap capacitance is raised until the nominal trimmers give this β.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_beta: Option<f64>,
    /// Sweep of the plus-arm trimmer around the matched value, as a
    /// fraction of the nominal trimmer capacitance.
    pub span_fraction: f64,
    pub points: usize,
}

impl Default for CircuitSweepSpec {
    fn default() -> Self {
        Self {
            height_um: 120.0,
            fit_beta: Some(1.5),
            span_fraction: 0.005,
            points: 41,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct BetaSpec {
    #[serde(rename = "height_um")]
    pub height_um: f64,
    /// Measured sideband-to-carrier Rabi ratios to convert.
    pub ratios: Vec<f64>,
    /// Modulation indices to convert to ratios.
    pub betas: Vec<f64>,
}

impl Default for BetaSpec {
    fn default() -> Self {
        Self {
            height_um: 120.0,
            ratios: vec![],
            betas: vec![0.1, 1.5],
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorKind {
    Adaptive,
    Verlet,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectorySpec {
    #[serde(rename = "height_um")]
    pub height_um: f64,
    /// Initial offset from the trap point.
    #[serde(rename = "displacement_um")]
    pub displacement_um: [f64; 3],
    #[serde(rename = "duration_us")]
    pub duration_us: f64,
    #[serde(rename = "sample_interval_ns")]
    pub sample_interval_ns: f64,
    pub integrator: IntegratorKind,
    pub rtol: f64,
    /// Fixed step for `verlet`, initial step for `adaptive`.
    #[serde(rename = "step_ns")]
    pub step_ns: f64,
    /// Half-width of the box the ion must stay inside.
    #[serde(rename = "bound_um")]
    pub bound_um: f64,
}

impl Default for TrajectorySpec {
    fn default() -> Self {
        Self {
            height_um: 120.0,
            displacement_um: [0.2, 0.1, 0.1],
            duration_us: 20.0,
            sample_interval_ns: 5.0,
            integrator: IntegratorKind::Adaptive,
            rtol: 1e-10,
            step_ns: 1.0,
            bound_um: 100.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ThermometrySpec {
    /// Mean occupations to simulate.
    pub nbar: Vec<f64>,
    #[serde(rename = "mode_MHz")]
    pub mode_mhz: f64,
    /// Lamb-Dicke parameter; computed from the probe when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(rename = "rabi_kHz")]
    pub rabi_khz: f64,
    /// Probe pulse length; the blue-sideband π time when absent.
    #[serde(rename = "probe_time_us", skip_serializing_if = "Option::is_none")]
    pub probe_time_us: Option<f64>,
    /// Half-width of the detuning grid around each sideband.
    #[serde(rename = "span_kHz")]
    pub span_khz: f64,
    pub points: usize,
    pub shots: u32,
    /// Independent noise realizations per occupation, seeded consecutively.
    pub repeats: usize,
}

impl Default for ThermometrySpec {
    fn default() -> Self {
        Self {
            nbar: vec![0.17, 0.20],
            mode_mhz: 1.0,
            eta: None,
            rabi_khz: 100.0,
            probe_time_us: None,
            span_khz: 40.0,
            points: 41,
            shots: 100,
            repeats: 1,
        }
    }
}
