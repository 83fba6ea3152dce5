//! Resonator netlist files.
//!
//! ```toml
//! source_amplitude_V = 1.0
//!
//! [arm]                 # values shared by both arms
//! l_sec_uH = 1.0
//! quality_factor = 200  # replaces r_loss_ohm when given
//! c_trap_pF = 74.0
//!
//! [plus]                # per-arm overrides
//! cv_pF = 4.45
//! ```
//!
//! Omitted values take the library defaults.

use serde::{Deserialize, Serialize};
use surftrap_core::circuit::{ArmComponents, ResonatorNetwork};

use crate::error::CliError;

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ArmSpec {
    #[serde(rename = "l_sec_uH", skip_serializing_if = "Option::is_none")]
    pub l_sec_uh: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_loss_ohm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quality_factor: Option<f64>,
    #[serde(rename = "c1_nF", skip_serializing_if = "Option::is_none")]
    pub c1_nf: Option<f64>,
    #[serde(rename = "l1_mH", skip_serializing_if = "Option::is_none")]
    pub l1_mh: Option<f64>,
    #[serde(rename = "c2_pF", skip_serializing_if = "Option::is_none")]
    pub c2_pf: Option<f64>,
    #[serde(rename = "c3_pF", skip_serializing_if = "Option::is_none")]
    pub c3_pf: Option<f64>,
    #[serde(rename = "cv_pF", skip_serializing_if = "Option::is_none")]
    pub cv_pf: Option<f64>,
    #[serde(rename = "c_trap_pF", skip_serializing_if = "Option::is_none")]
    pub c_trap_pf: Option<f64>,
}

impl ArmSpec {
    fn apply(&self, mut c: ArmComponents) -> Result<ArmComponents, CliError> {
        if let Some(v) = self.l_sec_uh {
            c.l_sec = v * 1e-6;
        }
        if let Some(v) = self.r_loss_ohm {
            c.r_loss = v;
        }
        if let Some(v) = self.c1_nf {
            c.c1 = v * 1e-9;
        }
        if let Some(v) = self.l1_mh {
            c.l1 = v * 1e-3;
        }
        if let Some(v) = self.c2_pf {
            c.c2 = v * 1e-12;
        }
        if let Some(v) = self.c3_pf {
            c.c3 = v * 1e-12;
        }
        if let Some(v) = self.cv_pf {
            c.cv = v * 1e-12;
        }
        if let Some(v) = self.c_trap_pf {
            c.c_trap = v * 1e-12;
        }
        if let Some(q) = self.quality_factor {
            if !(q > 0.0) {
                return Err(CliError::config("netlist: quality_factor must be positive"));
            }
            c = c.with_quality_factor(q);
        }
        Ok(c)
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NetlistSpec {
    #[serde(rename = "source_amplitude_V", skip_serializing_if = "Option::is_none")]
    pub source_amplitude_v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm: Option<ArmSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plus: Option<ArmSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minus: Option<ArmSpec>,
}

impl NetlistSpec {
    pub fn build(&self) -> Result<ResonatorNetwork, CliError> {
        let shared = match &self.arm {
            Some(s) => s.apply(ArmComponents::default())?,
            None => ArmComponents::default(),
        };
        let arm = |o: &Option<ArmSpec>| match o {
            Some(s) => s.apply(shared),
            None => Ok(shared),
        };
        let net = ResonatorNetwork {
            plus: arm(&self.plus)?,
            minus: arm(&self.minus)?,
            source_amplitude: self.source_amplitude_v.unwrap_or(1.0),
        };
        net.validate()?;
        Ok(net)
    }
}

pub fn parse_netlist(text: &str) -> Result<NetlistSpec, CliError> {
    toml::from_str(text).map_err(|e| CliError::config(format!("netlist: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_netlist_is_default_network() {
        let n = parse_netlist("").unwrap().build().unwrap();
        assert_eq!(n, ResonatorNetwork::default());
    }

    #[test]
    fn overrides_apply_per_arm() {
        let text = "source_amplitude_V = 2.0\n[arm]\nc_trap_pF = 70.0\n[plus]\ncv_pF = 5.0\n";
        let n = parse_netlist(text).unwrap().build().unwrap();
        assert!((n.plus.cv - 5e-12).abs() < 1e-24);
        assert!((n.minus.cv - 4.5e-12).abs() < 1e-24);
        assert!((n.minus.c_trap - 70e-12).abs() < 1e-24);
        assert_eq!(n.source_amplitude, 2.0);
    }

    #[test]
    fn unit_less_keys_are_rejected() {
        assert!(parse_netlist("[arm]\ncv = 4.5\n").is_err());
    }

    #[test]
    fn non_positive_values_are_rejected() {
        assert!(parse_netlist("[minus]\nc2_pF = 0.0\n")
            .unwrap()
            .build()
            .is_err());
    }
}
