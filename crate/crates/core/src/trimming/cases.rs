use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::curve::{Point, PointClass, TrimmingCurve};
use crate::error::{Error, Result};

/// The valid part of the parameter domain: everything left of the trimming
/// curve, or the whole domain when untrimmed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrimmedDomain {
    curve: Option<TrimmingCurve>,
}

impl TrimmedDomain {
    pub fn untrimmed() -> Self {
        TrimmedDomain { curve: None }
    }

    pub fn trimmed(curve: TrimmingCurve) -> Self {
        TrimmedDomain { curve: Some(curve) }
    }

    pub fn curve(&self) -> Option<&TrimmingCurve> {
        self.curve.as_ref()
    }

    pub fn classify(&self, p: Point) -> PointClass {
        match &self.curve {
            Some(c) => c.classify(p),
            None => PointClass::Inside,
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        self.classify(p) == PointClass::Inside
    }
}

/// Names of the canonical trimming cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseName {
    Line,
    Circle,
    Corner,
}

impl CaseName {
    pub const ALL: [CaseName; 3] = [CaseName::Line, CaseName::Circle, CaseName::Corner];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseName::Line => "line",
            CaseName::Circle => "circle",
            CaseName::Corner => "corner",
        }
    }
}

impl fmt::Display for CaseName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line" => Ok(CaseName::Line),
            "circle" => Ok(CaseName::Circle),
            "corner" => Ok(CaseName::Corner),
            _ => Err(Error::Config(format!("unknown case {s:?} (expected line, circle or corner)"))),
        }
    }
}

/// Numeric parameters of the three cases. Any field left out of a JSON
/// config keeps its default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaseParams {
    /// Height of the horizontal trimming line; the valid part lies below.
    pub line_level: f64,
    pub circle_center: Point,
    /// The valid part is the inside of the circle.
    pub circle_radius: f64,
    /// Control points of the cubic corner cut; the valid part contains the
    /// origin.
    pub corner_ctrl: [Point; 4],
}

impl Default for CaseParams {
    fn default() -> Self {
        CaseParams {
            line_level: 0.37,
            circle_center: [0.0, 0.0],
            circle_radius: 0.8,
            corner_ctrl: [[1.05, 0.4], [0.55, 0.55], [0.85, 0.85], [0.4, 1.05]],
        }
    }
}

impl CaseParams {
    pub fn domain(&self, case: CaseName) -> TrimmedDomain {
        TrimmedDomain::trimmed(self.curve(case))
    }

    pub fn curve(&self, case: CaseName) -> TrimmingCurve {
        match case {
            // oriented right to left so that the lower half is on its left
            CaseName::Line => TrimmingCurve::line([1.5, self.line_level], [-0.5, self.line_level]),
            // counter-clockwise, overshooting the axes so the ends lie outside
            CaseName::Circle => TrimmingCurve::arc(self.circle_center, self.circle_radius, -0.2, PI / 2.0 + 0.2),
            CaseName::Corner => {
                let c = self.corner_ctrl;
                let far = 2.0 + c.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
                // clockwise around the cut-off corner, outside the unit square
                let closing = vec![c[3], [c[3][0], far], [far, far], [far, c[0][1]], c[0]];
                TrimmingCurve::cubic_bezier(c, closing)
            }
        }
    }
}

/// Canonical domain of a case.
pub fn case_domain(case: CaseName) -> TrimmedDomain {
    CaseParams::default().domain(case)
}
