use serde::{Deserialize, Serialize};

use crate::algebra::TransformParams;
use crate::cones::ConeSpec;
use crate::error::{Error, Result};

/// Right-hand side of the ODE: `Q(R)`, plus `eps I`, or plus `D_{a,b}(R)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Variant {
    Plain,
    Epsilon { epsilon: f64 },
    BohmWilking { params: TransformParams },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Scheme {
    Rk4Fixed { h: f64 },
    /// Dormand–Prince 5(4) with per-entry error control.
    Rk45Adaptive { rel_tol: f64, abs_tol: f64 },
}

impl Default for Scheme {
    fn default() -> Self {
        Scheme::Rk45Adaptive {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    #[serde(default = "infinite", with = "maybe_infinite")]
    pub max_time: f64,
    /// Stop once `scal(R)` reaches this value. Defaults to `1000 scal(R0)` when
    /// `scal(R0) > 0`.
    #[serde(default)]
    pub max_trace: Option<f64>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

fn infinite() -> f64 {
    f64::INFINITY
}

fn default_max_steps() -> usize {
    200_000
}

impl Default for StopRule {
    fn default() -> Self {
        Self {
            max_time: f64::INFINITY,
            max_trace: None,
            max_steps: default_max_steps(),
        }
    }
}

/// JSON has no infinity; an absent or null `max_time` means unbounded.
mod maybe_infinite {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    pub variant: Variant,
    pub scheme: Scheme,
    pub stop: StopRule,
    pub monitors: Vec<ConeSpec>,
    /// Record every `sample_every`-th accepted step (the first and last states are always kept).
    pub sample_every: usize,
    /// Random starts per monitor evaluation, on top of the previous witness.
    pub monitor_starts: usize,
    pub seed: u64,
    /// Adaptive steps satisfy `h <= step_cap / |R|`.
    pub step_cap: f64,
    pub track_pinching: bool,
    pub pinching_starts: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Plain,
            scheme: Scheme::default(),
            stop: StopRule::default(),
            monitors: Vec::new(),
            sample_every: 1,
            monitor_starts: 4,
            seed: 0,
            step_cap: 0.01,
            track_pinching: false,
            pinching_starts: 8,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        match self.variant {
            Variant::Epsilon { epsilon } if !(epsilon >= 0.0 && epsilon.is_finite()) => {
                return bad(format!("epsilon = {epsilon} must be finite and >= 0"));
            }
            Variant::BohmWilking { params } if !(params.a.is_finite() && params.b.is_finite()) => {
                return bad("transform parameters must be finite".into());
            }
            _ => {}
        }
        match self.scheme {
            Scheme::Rk4Fixed { h } if !(h > 0.0 && h.is_finite()) => {
                return bad(format!("step h = {h} must be positive"));
            }
            Scheme::Rk45Adaptive { rel_tol, abs_tol } if !(rel_tol > 0.0 && abs_tol > 0.0) => {
                return bad("adaptive tolerances must be positive".into());
            }
            _ => {}
        }
        if let Some(t) = self.stop.max_trace {
            if !(t > 0.0) {
                return bad(format!("max_trace = {t} must be positive"));
            }
        }
        if self.stop.max_time.is_nan() || self.stop.max_time <= 0.0 {
            return bad("max_time must be positive".into());
        }
        if self.sample_every == 0 {
            return bad("sample_every must be at least 1".into());
        }
        if !(self.step_cap > 0.0) {
            return bad("step_cap must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let cfg = FlowConfig {
            variant: Variant::BohmWilking {
                params: TransformParams::new(0.24, 0.2),
            },
            monitors: vec![ConeSpec::SET_E],
            ..FlowConfig::default()
        };
        let s = serde_json::to_string(&cfg).unwrap();
        let back: FlowConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, cfg);
        let partial: FlowConfig =
            serde_json::from_str(r#"{"variant":{"kind":"EPSILON","epsilon":0.1},"stop":{"max_time":1.0}}"#)
                .unwrap();
        assert_eq!(partial.variant, Variant::Epsilon { epsilon: 0.1 });
        assert_eq!(partial.stop.max_time, 1.0);
    }

    #[test]
    fn invalid_values_rejected() {
        let mut cfg = FlowConfig::default();
        cfg.variant = Variant::Epsilon { epsilon: -1.0 };
        assert!(cfg.validate().is_err());
        cfg.variant = Variant::Plain;
        cfg.scheme = Scheme::Rk4Fixed { h: 0.0 };
        assert!(cfg.validate().is_err());
        cfg.scheme = Scheme::default();
        cfg.stop.max_trace = Some(-1.0);
        assert!(cfg.validate().is_err());
    }
}
