//! Physical constants (CODATA 2018) and ion species.

/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Atomic mass constant, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Electron mass in atomic mass units.
pub const ELECTRON_MASS_U: f64 = 5.485_799_090_65e-4;
/// Neutral ⁴⁰Ca atomic mass in atomic mass units.
pub const CA40_ATOMIC_MASS_U: f64 = 39.962_590_863;
/// Wavelength of the 4S1/2 - 3D5/2 qubit transition in ⁴⁰Ca⁺, m.
pub const CA40_QUBIT_WAVELENGTH: f64 = 729e-9;

/// Charge and mass of a trapped ion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ion {
    /// Charge in coulombs.
    pub charge: f64,
    /// Mass in kilograms.
    pub mass: f64,
}

impl Ion {
    pub fn new(charge: f64, mass: f64) -> Self {
        Self { charge, mass }
    }

    /// Singly charged ion of the given neutral atomic mass (in u).
    pub fn singly_charged(atomic_mass_u: f64) -> Self {
        Self {
            charge: ELEMENTARY_CHARGE,
            mass: (atomic_mass_u - ELECTRON_MASS_U) * ATOMIC_MASS_UNIT,
        }
    }

    pub fn calcium40() -> Self {
        Self::singly_charged(CA40_ATOMIC_MASS_U)
    }
}

/// Converts a frequency in Hz to angular frequency.
#[inline]
pub fn angular(hz: f64) -> f64 {
    core::f64::consts::TAU * hz
}
