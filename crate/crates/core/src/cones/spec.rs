use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::algebra::TransformParams;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConeKind {
    /// Nonnegative isotropic curvature.
    #[serde(rename = "PIC")]
    Pic,
    /// `M x R` has nonnegative isotropic curvature.
    #[serde(rename = "TILDE_C")]
    TildeC,
    /// `M x R^2` has nonnegative isotropic curvature.
    #[serde(rename = "HAT_C")]
    HatC,
    /// `M x S^2(1)` has nonnegative isotropic curvature.
    #[serde(rename = "SET_E")]
    SetE,
    /// Image of `SET_E` under `l_{a,b}`.
    #[serde(rename = "LAB_E")]
    LabE,
}

impl ConeKind {
    pub fn name(&self) -> &'static str {
        match self {
            ConeKind::Pic => "PIC",
            ConeKind::TildeC => "TILDE_C",
            ConeKind::HatC => "HAT_C",
            ConeKind::SetE => "SET_E",
            ConeKind::LabE => "LAB_E",
        }
    }
}

/// A convex set to test against; `params` is present iff `kind` is `LAB_E`.
///
/// Serializes as its label; deserializes from a label or from
/// `{"kind": ..., "params": {"a": ..., "b": ...}}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpecRepr", into = "String")]
pub struct ConeSpec {
    kind: ConeKind,
    params: Option<TransformParams>,
}

impl ConeSpec {
    pub const PIC: ConeSpec = ConeSpec::plain(ConeKind::Pic);
    pub const TILDE_C: ConeSpec = ConeSpec::plain(ConeKind::TildeC);
    pub const HAT_C: ConeSpec = ConeSpec::plain(ConeKind::HatC);
    pub const SET_E: ConeSpec = ConeSpec::plain(ConeKind::SetE);

    const fn plain(kind: ConeKind) -> Self {
        Self { kind, params: None }
    }

    pub fn new(kind: ConeKind, params: Option<TransformParams>) -> Result<Self> {
        match (kind, params) {
            (ConeKind::LabE, None) => Err(Error::Config("LAB_E requires (a, b)".into())),
            (ConeKind::LabE, Some(_)) => Ok(Self { kind, params }),
            (_, Some(_)) => Err(Error::Config(format!(
                "{} takes no transform parameters",
                kind.name()
            ))),
            (_, None) => Ok(Self::plain(kind)),
        }
    }

    pub fn lab_e(params: TransformParams) -> Self {
        Self {
            kind: ConeKind::LabE,
            params: Some(params),
        }
    }

    pub fn kind(&self) -> ConeKind {
        self.kind
    }

    pub fn params(&self) -> Option<TransformParams> {
        self.params
    }

    /// Column-friendly label, e.g. `SET_E` or `LAB_E(0.24,0.2)`.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for ConeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.params {
            Some(p) => write!(f, "{}({},{})", self.kind.name(), p.a, p.b),
            None => write!(f, "{}", self.kind.name()),
        }
    }
}

impl FromStr for ConeSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let upper = s.to_ascii_uppercase();
        match upper.as_str() {
            "PIC" => return Ok(Self::PIC),
            "TILDE_C" => return Ok(Self::TILDE_C),
            "HAT_C" => return Ok(Self::HAT_C),
            "SET_E" => return Ok(Self::SET_E),
            _ => {}
        }
        let inner = upper
            .strip_prefix("LAB_E(")
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::Config(format!("unknown cone spec '{s}'")))?;
        let nums: Vec<f64> = inner
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("bad LAB_E parameters in '{s}': {e}")))?;
        match nums.as_slice() {
            [a, b] => Ok(Self::lab_e(TransformParams::new(*a, *b))),
            _ => Err(Error::Config(format!("LAB_E needs two parameters: '{s}'"))),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SpecRepr {
    Label(String),
    Raw(RawSpec),
}

#[derive(Deserialize)]
struct RawSpec {
    kind: ConeKind,
    #[serde(default)]
    params: Option<TransformParams>,
}

impl TryFrom<SpecRepr> for ConeSpec {
    type Error = Error;
    fn try_from(repr: SpecRepr) -> Result<Self> {
        match repr {
            SpecRepr::Label(s) => s.parse(),
            SpecRepr::Raw(raw) => ConeSpec::new(raw.kind, raw.params),
        }
    }
}

impl From<ConeSpec> for String {
    fn from(s: ConeSpec) -> Self {
        s.label()
    }
}
