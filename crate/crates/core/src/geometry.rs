//! Planar electrode layouts in the gapless-plane approximation.
//!
//! Electrodes are unions of axis-aligned rectangles in the `z = 0` plane.
//! Whatever the rectangles do not cover is grounded, and the trenches
//! between electrodes are ignored.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// Electrical role of an electrode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    RfPlus,
    RfMinus,
    Dc,
    Ground,
}

impl Role {
    pub fn is_rf(self) -> bool {
        matches!(self, Role::RfPlus | Role::RfMinus)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::RfPlus => "rf_plus",
            Role::RfMinus => "rf_minus",
            Role::Dc => "dc",
            Role::Ground => "ground",
        }
    }

    /// The opposite rf phase; dc and ground map to themselves.
    pub fn swapped(self) -> Role {
        match self {
            Role::RfPlus => Role::RfMinus,
            Role::RfMinus => Role::RfPlus,
            r => r,
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl core::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rf_plus" | "rf+" => Ok(Role::RfPlus),
            "rf_minus" | "rf-" => Ok(Role::RfMinus),
            "dc" => Ok(Role::Dc),
            "ground" | "gnd" => Ok(Role::Ground),
            other => Err(format!("unknown electrode role `{other}`")),
        }
    }
}

/// Axis-aligned rectangle in the electrode plane, meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
        }
    }

    /// Rectangle of the given width and height centered on `(cx, cy)`.
    pub fn centered(cx: f64, cy: f64, width: f64, height: f64) -> Self {
        Self::new(
            cx - 0.5 * width,
            cx + 0.5 * width,
            cy - 0.5 * height,
            cy + 0.5 * height,
        )
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn center(&self) -> (f64, f64) {
        (
            0.5 * (self.x_min + self.x_max),
            0.5 * (self.y_min + self.y_max),
        )
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.x_min < self.x_max && self.y_min < self.y_max)
    }

    /// Area of the interior intersection with `other` (zero when they only
    /// share an edge).
    pub fn overlap_area(&self, other: &Rect) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    /// Image under a 90° counter-clockwise rotation about the origin.
    pub fn rotated_quarter(&self) -> Rect {
        // (x, y) -> (-y, x)
        Rect::new(-self.y_max, -self.y_min, self.x_min, self.x_max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Electrode {
    pub name: String,
    pub role: Role,
    pub rects: Vec<Rect>,
}

impl Electrode {
    pub fn new(name: impl Into<String>, role: Role, rects: Vec<Rect>) -> Self {
        Self {
            name: name.into(),
            role,
            rects,
        }
    }

    pub fn area(&self) -> f64 {
        self.rects.iter().map(Rect::area).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElectrodeLayout {
    pub electrodes: Vec<Electrode>,
    /// Nominal in-plane trap center, meters.
    pub symmetry_point: (f64, f64),
}

impl ElectrodeLayout {
    pub fn new(electrodes: Vec<Electrode>, symmetry_point: (f64, f64)) -> Self {
        Self {
            electrodes,
            symmetry_point,
        }
    }

    pub fn len(&self) -> usize {
        self.electrodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.electrodes.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.electrodes.iter().position(|e| e.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&Electrode> {
        self.electrodes.iter().find(|e| e.name == name)
    }

    /// Indices of all electrodes with the given role, in layout order.
    pub fn indices_with_role(&self, role: Role) -> Vec<usize> {
        self.electrodes
            .iter()
            .enumerate()
            .filter(|(_, e)| e.role == role)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn rf_area(&self) -> f64 {
        self.electrodes
            .iter()
            .filter(|e| e.role.is_rf())
            .map(Electrode::area)
            .sum()
    }
}

/// Sizes of the nine dc electrodes of the default layout.
///
/// The dc pattern fills the cross-shaped gap between the rf squares with a
/// center pad and four arms, and places four corner pads diagonally outside
/// the rf squares. The arms and the center pad abut the rf squares.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DcPattern {
    /// Side of the central dc pad.
    pub center_side: f64,
    /// Width of each arm pad (along the direction tangent to the center).
    pub arm_width: f64,
    /// Side of each diagonal corner pad.
    pub corner_side: f64,
    /// Distance from the origin to the inner corner of each corner pad,
    /// measured along x and y.
    pub corner_inner: f64,
}

impl Default for DcPattern {
    fn default() -> Self {
        Self {
            center_side: 270e-6,
            arm_width: 270e-6,
            corner_side: 300e-6,
            corner_inner: 425e-6,
        }
    }
}

/// Rf electrode dimensions of the default layout.
pub const RF_SIDE: f64 = 290e-6;
/// Side of the square whose corners carry the rf electrode centers.
pub const RF_PLACEMENT_SQUARE: f64 = 560e-6;

/// The four-rf-electrode layout with the default dc pattern.
pub fn reference_layout() -> ElectrodeLayout {
    reference_layout_with(&DcPattern::default())
}

/// The four-rf-electrode layout with a custom dc pattern.
///
/// Rf squares of side 290 µm sit on the corners of a 560 µm square centered
/// on the origin; the (+,+)/(−,−) pair is `rf_plus` and the (+,−)/(−,+) pair
/// is `rf_minus`.
pub fn reference_layout_with(dc: &DcPattern) -> ElectrodeLayout {
    let c = 0.5 * RF_PLACEMENT_SQUARE;
    let s = RF_SIDE;
    let inner = c - 0.5 * s;
    let outer = c + 0.5 * s;
    let mut electrodes = alloc::vec![
        Electrode::new(
            "rf_ne",
            Role::RfPlus,
            alloc::vec![Rect::centered(c, c, s, s)]
        ),
        Electrode::new(
            "rf_sw",
            Role::RfPlus,
            alloc::vec![Rect::centered(-c, -c, s, s)]
        ),
        Electrode::new(
            "rf_nw",
            Role::RfMinus,
            alloc::vec![Rect::centered(-c, c, s, s)]
        ),
        Electrode::new(
            "rf_se",
            Role::RfMinus,
            alloc::vec![Rect::centered(c, -c, s, s)]
        ),
    ];
    let h = 0.5 * dc.center_side;
    electrodes.push(Electrode::new(
        "dc_c",
        Role::Dc,
        alloc::vec![Rect::new(-h, h, -h, h)],
    ));
    let a = 0.5 * dc.arm_width;
    let arm_lo = h.max(inner);
    electrodes.push(Electrode::new(
        "dc_n",
        Role::Dc,
        alloc::vec![Rect::new(-a, a, arm_lo, outer)],
    ));
    electrodes.push(Electrode::new(
        "dc_s",
        Role::Dc,
        alloc::vec![Rect::new(-a, a, -outer, -arm_lo)],
    ));
    electrodes.push(Electrode::new(
        "dc_e",
        Role::Dc,
        alloc::vec![Rect::new(arm_lo, outer, -a, a)],
    ));
    electrodes.push(Electrode::new(
        "dc_w",
        Role::Dc,
        alloc::vec![Rect::new(-outer, -arm_lo, -a, a)],
    ));
    let (ci, co) = (dc.corner_inner, dc.corner_inner + dc.corner_side);
    electrodes.push(Electrode::new(
        "dc_ne",
        Role::Dc,
        alloc::vec![Rect::new(ci, co, ci, co)],
    ));
    electrodes.push(Electrode::new(
        "dc_nw",
        Role::Dc,
        alloc::vec![Rect::new(-co, -ci, ci, co)],
    ));
    electrodes.push(Electrode::new(
        "dc_sw",
        Role::Dc,
        alloc::vec![Rect::new(-co, -ci, -co, -ci)],
    ));
    electrodes.push(Electrode::new(
        "dc_se",
        Role::Dc,
        alloc::vec![Rect::new(ci, co, -co, -ci)],
    ));
    ElectrodeLayout::new(electrodes, (0.0, 0.0))
}

/// A single problem found by [`validate`].
#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    DuplicateName {
        name: String,
    },
    Degenerate {
        electrode: String,
        rect: usize,
    },
    Overlap {
        first: String,
        second: String,
        area: f64,
    },
    MissingRole {
        role: Role,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateName { name } => write!(f, "duplicate electrode name `{name}`"),
            Violation::Degenerate { electrode, rect } => {
                write!(f, "electrode `{electrode}` rectangle {rect} is degenerate")
            }
            Violation::Overlap {
                first,
                second,
                area,
            } => write!(
                f,
                "electrodes `{first}` and `{second}` overlap ({:.3} um^2)",
                area * 1e12
            ),
            Violation::MissingRole { role } => write!(f, "no electrode with role {role}"),
        }
    }
}

/// Result of [`validate`]; valid layouts have no violations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("layout valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks names, rectangle degeneracy, interior overlaps between distinct
/// electrodes, and presence of both rf phases.
pub fn validate(layout: &ElectrodeLayout) -> ValidationReport {
    let mut violations = Vec::new();
    let els = &layout.electrodes;
    for (i, e) in els.iter().enumerate() {
        if els[..i].iter().any(|p| p.name == e.name) {
            violations.push(Violation::DuplicateName {
                name: e.name.clone(),
            });
        }
        for (k, r) in e.rects.iter().enumerate() {
            if r.is_degenerate() {
                violations.push(Violation::Degenerate {
                    electrode: e.name.clone(),
                    rect: k,
                });
            }
        }
    }
    for (i, a) in els.iter().enumerate() {
        for b in &els[i + 1..] {
            let area: f64 = a
                .rects
                .iter()
                .filter(|r| !r.is_degenerate())
                .flat_map(|ra| {
                    b.rects
                        .iter()
                        .filter(|r| !r.is_degenerate())
                        .map(move |rb| ra.overlap_area(rb))
                })
                .sum();
            // edge round-off between abutting rectangles is not an overlap
            let scale = a.area().min(b.area());
            if area > 1e-9 * scale {
                violations.push(Violation::Overlap {
                    first: a.name.clone(),
                    second: b.name.to_string(),
                    area,
                });
            }
        }
    }
    for role in [Role::RfPlus, Role::RfMinus] {
        if !els.iter().any(|e| e.role == role) {
            violations.push(Violation::MissingRole { role });
        }
    }
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    const UM: f64 = 1e-6;

    #[test]
    fn rf_plus_square_on_placement_corner() {
        let l = reference_layout();
        let ne = l.get("rf_ne").unwrap();
        assert_eq!(ne.role, Role::RfPlus);
        let r = ne.rects[0];
        let (cx, cy) = r.center();
        assert!((cx - 280.0 * UM).abs() < 1e-12 && (cy - 280.0 * UM).abs() < 1e-12);
        assert!((r.x_max - r.x_min - 290.0 * UM).abs() < 1e-12);
        assert!((r.y_max - r.y_min - 290.0 * UM).abs() < 1e-12);
    }

    #[test]
    fn rf_plus_pair_is_point_symmetric() {
        let l = reference_layout();
        let plus: Vec<_> = l
            .indices_with_role(Role::RfPlus)
            .into_iter()
            .map(|i| l.electrodes[i].rects[0].center())
            .collect();
        assert_eq!(plus.len(), 2);
        assert!((plus[0].0 + plus[1].0).abs() < 1e-15 && (plus[0].1 + plus[1].1).abs() < 1e-15);
    }

    #[test]
    fn rf_area_is_four_squares() {
        let expected = 4.0 * (290.0 * UM) * (290.0 * UM);
        assert!((reference_layout().rf_area() - expected).abs() < 1e-6 * expected);
    }

    #[test]
    fn nine_dc_electrodes() {
        assert_eq!(reference_layout().indices_with_role(Role::Dc).len(), 9);
    }

    #[test]
    fn reference_layout_is_valid() {
        let report = validate(&reference_layout());
        assert!(report.is_valid(), "{report}");
    }

    #[test]
    fn overlap_names_both_electrodes() {
        let l = ElectrodeLayout::new(
            vec![
                Electrode::new("a", Role::RfPlus, vec![Rect::new(0.0, 2.0, 0.0, 2.0)]),
                Electrode::new("b", Role::RfMinus, vec![Rect::new(1.0, 3.0, 1.0, 3.0)]),
            ],
            (0.0, 0.0),
        );
        let report = validate(&l);
        assert_eq!(report.violations.len(), 1);
        match &report.violations[0] {
            Violation::Overlap {
                first,
                second,
                area,
            } => {
                assert_eq!((first.as_str(), second.as_str()), ("a", "b"));
                assert!((area - 1.0).abs() < 1e-12);
            }
            v => panic!("unexpected {v:?}"),
        }
    }

    #[test]
    fn shared_edges_are_not_overlaps() {
        let l = ElectrodeLayout::new(
            vec![
                Electrode::new("a", Role::RfPlus, vec![Rect::new(0.0, 1.0, 0.0, 1.0)]),
                Electrode::new("b", Role::RfMinus, vec![Rect::new(1.0, 2.0, 0.0, 1.0)]),
            ],
            (0.0, 0.0),
        );
        assert!(validate(&l).is_valid());
    }

    #[test]
    fn degenerate_rectangle_reported() {
        let l = ElectrodeLayout::new(
            vec![
                Electrode::new("a", Role::RfPlus, vec![Rect::new(1.0, 1.0, 0.0, 1.0)]),
                Electrode::new("b", Role::RfMinus, vec![Rect::new(2.0, 3.0, 0.0, 1.0)]),
            ],
            (0.0, 0.0),
        );
        assert_eq!(
            validate(&l).violations,
            vec![Violation::Degenerate {
                electrode: "a".into(),
                rect: 0
            }]
        );
    }

    #[test]
    fn missing_rf_roles_and_duplicates_reported() {
        let l = ElectrodeLayout::new(
            vec![
                Electrode::new("a", Role::Dc, vec![Rect::new(0.0, 1.0, 0.0, 1.0)]),
                Electrode::new("a", Role::Dc, vec![Rect::new(2.0, 3.0, 0.0, 1.0)]),
            ],
            (0.0, 0.0),
        );
        let v = validate(&l).violations;
        assert!(v.contains(&Violation::DuplicateName { name: "a".into() }));
        assert!(v.contains(&Violation::MissingRole { role: Role::RfPlus }));
        assert!(v.contains(&Violation::MissingRole {
            role: Role::RfMinus
        }));
    }

    fn same_rect(a: &Rect, b: &Rect) -> bool {
        (a.x_min - b.x_min).abs() < 1e-15
            && (a.x_max - b.x_max).abs() < 1e-15
            && (a.y_min - b.y_min).abs() < 1e-15
            && (a.y_max - b.y_max).abs() < 1e-15
    }

    #[test]
    fn quarter_turn_swaps_rf_phases() {
        let l = reference_layout();
        for e in &l.electrodes {
            for r in &e.rects {
                let image = r.rotated_quarter();
                let hit = l
                    .electrodes
                    .iter()
                    .find(|o| o.rects.iter().any(|q| same_rect(q, &image)))
                    .unwrap_or_else(|| panic!("no image for {}", e.name));
                assert_eq!(hit.role, e.role.swapped(), "{} -> {}", e.name, hit.name);
            }
        }
    }
}
