//! Error categories and their exit codes.

use std::fmt;

use surftrap_core::circuit::CircuitError;
use surftrap_core::dcsolve::DcError;
use surftrap_core::dynamics::DynamicsError;
use surftrap_core::efield::FieldError;
use surftrap_core::pseudo::PseudoError;
use surftrap_core::thermo::ThermoError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Category {
    /// Unreadable or invalid configuration, exit code 2.
    Config,
    /// A solver, search or fit did not converge, exit code 3.
    Numerical,
    /// Valid input outside the physical model's domain, exit code 4.
    Domain,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Config => 2,
            Category::Numerical => 3,
            Category::Domain => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::Numerical => "numerical",
            Category::Domain => "domain",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.category.as_str(), self.message)
    }
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        Self {
            category: Category::Config,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            category: Category::Numerical,
            message: message.into(),
        }
    }

    pub fn domain(message: impl Into<String>) -> Self {
        Self {
            category: Category::Domain,
            message: message.into(),
        }
    }

    /// Single-line JSON report for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.category.as_str(), "message": self.message }).to_string()
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::config(format!("io: {e}"))
    }
}

fn field_category(e: &FieldError) -> Category {
    match e {
        FieldError::Domain { .. } => Category::Domain,
        _ => Category::Config,
    }
}

fn pseudo_category(e: &PseudoError) -> Category {
    match e {
        PseudoError::Field(f) => field_category(f),
        PseudoError::InvalidDrive(_) => Category::Config,
        PseudoError::NoNull { .. } | PseudoError::Search(_) => Category::Numerical,
        PseudoError::NotMinimum { .. }
        | PseudoError::NotStationary { .. }
        | PseudoError::Unstable(_)
        | PseudoError::Unreachable { .. } => Category::Domain,
        PseudoError::Dc(d) => dc_category(d),
    }
}

fn dc_category(e: &DcError) -> Category {
    match e {
        DcError::Field(f) => field_category(f),
        DcError::NoElectrodes | DcError::InfeasibleBounds { .. } | DcError::BoundsLength { .. } => {
            Category::Config
        }
        DcError::NotLaplaceConsistent { .. }
        | DcError::NoEquilibrium
        | DcError::UnstableEquilibrium { .. }
        | DcError::Unconfinable(_) => Category::Domain,
        DcError::Pseudo(p) => pseudo_category(p),
    }
}

macro_rules! from_core {
    ($t:ty, $f:expr) => {
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                let category: Category = $f(&e);
                CliError {
                    category,
                    message: e.to_string(),
                }
            }
        }
    };
}

from_core!(FieldError, field_category);
from_core!(PseudoError, pseudo_category);
from_core!(DcError, dc_category);
from_core!(CircuitError, |e: &CircuitError| match e {
    CircuitError::Field(f) => field_category(f),
    CircuitError::NonPositive { .. } | CircuitError::Frequency(_) | CircuitError::NoDrive =>
        Category::Config,
    CircuitError::Singular { .. } | CircuitError::NoResonance | CircuitError::Search(_) =>
        Category::Numerical,
});
from_core!(DynamicsError, |e: &DynamicsError| match e {
    DynamicsError::Field(f) => field_category(f),
    DynamicsError::InvalidProbe | DynamicsError::InvalidSetup(_) => Category::Config,
    DynamicsError::StepUnderflow { .. } | DynamicsError::TooManySteps { .. } => Category::Numerical,
    DynamicsError::RatioOutOfRange(_) | DynamicsError::Escaped { .. } => Category::Domain,
});
from_core!(ThermoError, |e: &ThermoError| match e {
    ThermoError::InvalidScan(_) | ThermoError::NegativeOccupation(_) => Category::Config,
    ThermoError::NonThermal { .. } => Category::Domain,
    ThermoError::FitFailed(_) => Category::Numerical,
});

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::config("x").category.exit_code(), 2);
        assert_eq!(CliError::numerical("x").category.exit_code(), 3);
        assert_eq!(CliError::domain("x").category.exit_code(), 4);
    }

    #[test]
    fn json_is_one_line() {
        let j = CliError::domain("height \"z\" below plane").to_json();
        assert!(!j.contains('\n'));
        let v: serde_json::Value = serde_json::from_str(&j).unwrap();
        assert_eq!(v["error"], "domain");
    }
}
