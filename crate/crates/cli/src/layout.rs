//! Electrode layout files.
//!
//! ```toml
//! symmetry_point_um = [0.0, 0.0]
//!
//! [[electrode]]
//! name = "rf_ne"
//! role = "rf_plus"
//! rects_um = [[135.0, 425.0, 135.0, 425.0]]   # x_min, x_max, y_min, y_max
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use surftrap_core::geometry::{validate, Electrode, ElectrodeLayout, Rect, Role};

use crate::error::CliError;

/// The checked-in default layout.
pub const DEFAULT_LAYOUT: &str = include_str!("../layouts/reference.toml");

/// Environment variable naming a layout file that replaces the default.
pub const LAYOUT_ENV: &str = "SURFTRAP_LAYOUT";

const UM: f64 = 1e-6;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct LayoutFile {
    symmetry_point_um: Option<[f64; 2]>,
    electrode: Vec<ElectrodeRecord>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ElectrodeRecord {
    name: String,
    role: String,
    rects_um: Vec<[f64; 4]>,
}

/// Parsed layout together with the text it came from.
#[derive(Clone, Debug)]
pub struct LoadedLayout {
    pub layout: ElectrodeLayout,
    /// `builtin:reference` or the file path.
    pub source: String,
    pub sha256: String,
}

pub fn parse_layout(text: &str) -> Result<ElectrodeLayout, CliError> {
    let file: LayoutFile =
        toml::from_str(text).map_err(|e| CliError::config(format!("layout: {e}")))?;
    let mut electrodes = Vec::with_capacity(file.electrode.len());
    for rec in file.electrode {
        let role: Role = rec
            .role
            .parse()
            .map_err(|e: String| CliError::config(format!("layout: {e}")))?;
        if rec.rects_um.is_empty() {
            return Err(CliError::config(format!(
                "layout: electrode `{}` has no rectangles",
                rec.name
            )));
        }
        let rects = rec
            .rects_um
            .iter()
            .map(|r| Rect::new(r[0] * UM, r[1] * UM, r[2] * UM, r[3] * UM))
            .collect();
        electrodes.push(Electrode::new(rec.name, role, rects));
    }
    let sp = file.symmetry_point_um.unwrap_or([0.0, 0.0]);
    let layout = ElectrodeLayout::new(electrodes, (sp[0] * UM, sp[1] * UM));
    let report = validate(&layout);
    if !report.is_valid() {
        return Err(CliError::config(format!("layout: {report}")));
    }
    Ok(layout)
}

/// Layout text back to the file format, micrometers.
pub fn format_layout(layout: &ElectrodeLayout) -> String {
    let file = LayoutFile {
        symmetry_point_um: Some([layout.symmetry_point.0 / UM, layout.symmetry_point.1 / UM]),
        electrode: layout
            .electrodes
            .iter()
            .map(|e| ElectrodeRecord {
                name: e.name.clone(),
                role: e.role.as_str().to_string(),
                rects_um: e
                    .rects
                    .iter()
                    .map(|r| [r.x_min / UM, r.x_max / UM, r.y_min / UM, r.y_max / UM])
                    .collect(),
            })
            .collect(),
    };
    toml::to_string(&file).expect("layout serializes")
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Resolves a layout in order: explicit path, `SURFTRAP_LAYOUT`, builtin.
/// Relative paths are taken from `base`.
pub fn load_layout(path: Option<&str>, base: Option<&Path>) -> Result<LoadedLayout, CliError> {
    let env = std::env::var(LAYOUT_ENV).ok().filter(|s| !s.is_empty());
    let chosen = path.map(str::to_string).or(env);
    match chosen.as_deref() {
        None | Some("builtin:reference") => Ok(LoadedLayout {
            layout: parse_layout(DEFAULT_LAYOUT)?,
            source: "builtin:reference".into(),
            sha256: sha256_hex(DEFAULT_LAYOUT),
        }),
        Some(p) => {
            let full = match base {
                Some(b) if Path::new(p).is_relative() => b.join(p),
                _ => Path::new(p).to_path_buf(),
            };
            let text = std::fs::read_to_string(&full)
                .map_err(|e| CliError::config(format!("layout file {}: {e}", full.display())))?;
            Ok(LoadedLayout {
                layout: parse_layout(&text)?,
                source: p.to_string(),
                sha256: sha256_hex(&text),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use surftrap_core::geometry::reference_layout;

    #[test]
    fn builtin_file_matches_library_layout() {
        let a = parse_layout(DEFAULT_LAYOUT).unwrap();
        let b = reference_layout();
        assert_eq!(a.len(), b.len());
        for (ea, eb) in a.electrodes.iter().zip(&b.electrodes) {
            assert_eq!(ea.name, eb.name);
            assert_eq!(ea.role, eb.role);
            for (ra, rb) in ea.rects.iter().zip(&eb.rects) {
                for (x, y) in [
                    (ra.x_min, rb.x_min),
                    (ra.x_max, rb.x_max),
                    (ra.y_min, rb.y_min),
                    (ra.y_max, rb.y_max),
                ] {
                    assert!((x - y).abs() < 1e-15, "{}", ea.name);
                }
            }
        }
    }

    #[test]
    fn format_round_trips() {
        let a = parse_layout(DEFAULT_LAYOUT).unwrap();
        let b = parse_layout(&format_layout(&a)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_layouts_are_config_errors() {
        let unknown_role =
            "[[electrode]]\nname = \"a\"\nrole = \"hv\"\nrects_um = [[0.0, 1.0, 0.0, 1.0]]\n";
        assert!(parse_layout(unknown_role).is_err());
        let no_suffix =
            "[[electrode]]\nname = \"a\"\nrole = \"dc\"\nrects = [[0.0, 1.0, 0.0, 1.0]]\n";
        assert!(parse_layout(no_suffix).is_err());
        // only one rf phase present
        let one_phase =
            "[[electrode]]\nname = \"a\"\nrole = \"rf_plus\"\nrects_um = [[0.0, 1.0, 0.0, 1.0]]\n";
        assert!(parse_layout(one_phase).is_err());
    }
}
