//! Search-space definition and the bijection between natural parameter values
//! and the normalized "basic" space in which all modeling and local search
//! happen.
//!
//! Each parameter is transformed (`ln` for Log, logit for Logit, identity for
//! Linear), shifted so the search center lands at the origin, and divided by
//! its per-dimension scale. The result is an order-one coordinate system.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Natural-unit parameter assignment, keyed by parameter name.
pub type ParamMap = BTreeMap<String, f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("parameter `{0}` is missing from the value map")]
    MissingParam(String),
    #[error("parameter `{name}` value {value} is outside its open bounds ({min}, {max})")]
    OutOfBounds { name: String, value: f64, min: f64, max: f64 },
    #[error("parameter `{name}` value {value} is not finite")]
    NonFinite { name: String, value: f64 },
    #[error("invalid spec for `{name}`: {reason}")]
    InvalidSpec { name: String, reason: String },
    #[error("search space must contain at least one parameter")]
    Empty,
    #[error("duplicate parameter name `{0}`")]
    DuplicateName(String),
    #[error("basic vector has length {got}, expected {want}")]
    DimensionMismatch { got: usize, want: usize },
}

/// How a parameter's natural values map onto the real line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceType {
    Log,
    Logit,
    Linear,
}

impl SpaceType {
    fn transform(self, v: f64) -> f64 {
        match self {
            SpaceType::Log => v.ln(),
            SpaceType::Logit => (v / (1.0 - v)).ln(),
            SpaceType::Linear => v,
        }
    }

    fn inverse(self, t: f64) -> f64 {
        match self {
            SpaceType::Log => t.exp(),
            // exp(t)/(1+exp(t)), computed stably on both tails
            SpaceType::Logit => {
                if t >= 0.0 {
                    1.0 / (1.0 + (-t).exp())
                } else {
                    let e = t.exp();
                    e / (1.0 + e)
                }
            }
            SpaceType::Linear => t,
        }
    }
}

/// One searchable hyperparameter dimension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub space_type: SpaceType,
    pub search_center: f64,
    /// Lower bound in natural units; `f64::NEG_INFINITY` when unbounded.
    #[serde(default = "neg_inf")]
    pub min: f64,
    /// Upper bound in natural units; `f64::INFINITY` when unbounded.
    #[serde(default = "pos_inf")]
    pub max: f64,
    #[serde(default)]
    pub is_integer: bool,
    /// Basic-space units per transformed unit. Default 1.
    #[serde(default = "one")]
    pub scale: f64,
}

fn neg_inf() -> f64 {
    f64::NEG_INFINITY
}
fn pos_inf() -> f64 {
    f64::INFINITY
}
fn one() -> f64 {
    1.0
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, space_type: SpaceType, search_center: f64) -> Self {
        ParamSpec {
            name: name.into(),
            space_type,
            search_center,
            min: f64::NEG_INFINITY,
            max: f64::INFINITY,
            is_integer: false,
            scale: 1.0,
        }
    }

    pub fn with_bounds(mut self, min: f64, max: f64) -> Self {
        self.min = min;
        self.max = max;
        self
    }

    pub fn integer(mut self) -> Self {
        self.is_integer = true;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    // negated comparisons are deliberate: they reject NaN as well
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn validate(&self) -> Result<(), SpaceError> {
        let fail = |reason: String| {
            Err(SpaceError::InvalidSpec { name: self.name.clone(), reason })
        };
        if !self.search_center.is_finite() {
            return fail("search center must be finite".into());
        }
        if !(self.min < self.search_center && self.search_center < self.max) {
            return fail(format!(
                "requires min < center < max, got {} < {} < {}",
                self.min, self.search_center, self.max
            ));
        }
        if self.scale <= 0.0 || !self.scale.is_finite() {
            return fail(format!("scale must be positive and finite, got {}", self.scale));
        }
        match self.space_type {
            SpaceType::Log => {
                if self.min < 0.0 {
                    return fail(format!("log space requires min >= 0, got {}", self.min));
                }
                if self.search_center <= 0.0 {
                    return fail("log space requires a positive center".into());
                }
            }
            SpaceType::Logit => {
                if !(0.0..1.0).contains(&self.min) || self.max > 1.0 || self.min >= self.max {
                    return fail(format!(
                        "logit space requires 0 <= min < max <= 1, got [{}, {}]",
                        self.min, self.max
                    ));
                }
            }
            SpaceType::Linear => {}
        }
        Ok(())
    }

    /// Natural value -> basic coordinate.
    fn to_basic(&self, value: f64) -> Result<f64, SpaceError> {
        if !value.is_finite() {
            return Err(SpaceError::NonFinite { name: self.name.clone(), value });
        }
        let value = match self.space_type {
            // Logit observations sitting exactly on 0 or 1 are nudged inward.
            SpaceType::Logit if value == 0.0 => {
                log::warn!("logit parameter `{}` is exactly 0; nudging by 1e-9", self.name);
                1e-9
            }
            SpaceType::Logit if value == 1.0 => {
                log::warn!("logit parameter `{}` is exactly 1; nudging by 1e-9", self.name);
                1.0 - 1e-9
            }
            _ => value,
        };
        // closed bounds: clamped suggestions may sit exactly on a finite
        // bound and must still round-trip
        let in_bounds = value >= self.min && value <= self.max;
        let domain_ok = match self.space_type {
            SpaceType::Log => value > 0.0,
            SpaceType::Logit => value > 0.0 && value < 1.0,
            SpaceType::Linear => true,
        };
        if !in_bounds || !domain_ok {
            return Err(SpaceError::OutOfBounds {
                name: self.name.clone(),
                value,
                min: self.min,
                max: self.max,
            });
        }
        Ok((self.space_type.transform(value) - self.space_type.transform(self.search_center))
            / self.scale)
    }

    /// Basic coordinate -> natural value, clamped into bounds and rounded for
    /// integer parameters (ties resolved toward the search center).
    #[allow(clippy::wrong_self_convention)]
    fn from_basic(&self, basic: f64) -> f64 {
        let mut v = if basic == 0.0 {
            // keep the origin exact instead of round-tripping through T
            self.search_center
        } else {
            let t = basic * self.scale + self.space_type.transform(self.search_center);
            let inv = self.space_type.inverse(t);
            if self.space_type == SpaceType::Log && inv == 0.0 {
                // guard against exp underflow on extreme negative coordinates
                f64::MIN_POSITIVE
            } else {
                inv
            }
        };
        v = v.clamp(self.min, self.max);
        if self.is_integer {
            v = self.round_to_integer(v);
        }
        v
    }

    fn round_to_integer(&self, v: f64) -> f64 {
        let lo = v.floor();
        let hi = v.ceil();
        let mut r = if v - lo < hi - v {
            lo
        } else if hi - v < v - lo {
            hi
        } else {
            // exact tie: round toward the search center
            if (lo - self.search_center).abs() <= (hi - self.search_center).abs() {
                lo
            } else {
                hi
            }
        };
        // keep the rounded value inside the bounds
        if r < self.min {
            r = self.min.ceil();
        }
        if r > self.max {
            r = self.max.floor();
        }
        r
    }
}

/// Ordered collection of parameter specs; the basic space is R^d with one
/// coordinate per spec, in declaration order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchSpace {
    specs: Vec<ParamSpec>,
}

impl SearchSpace {
    pub fn new(specs: Vec<ParamSpec>) -> Result<Self, SpaceError> {
        if specs.is_empty() {
            return Err(SpaceError::Empty);
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &specs {
            s.validate()?;
            if !seen.insert(s.name.clone()) {
                return Err(SpaceError::DuplicateName(s.name.clone()));
            }
        }
        Ok(SearchSpace { specs })
    }

    pub fn dimension(&self) -> usize {
        self.specs.len()
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    /// Map a natural-unit value map into basic coordinates.
    pub fn to_basic(&self, natural: &ParamMap) -> Result<Vec<f64>, SpaceError> {
        self.specs
            .iter()
            .map(|spec| {
                let v = natural
                    .get(&spec.name)
                    .copied()
                    .ok_or_else(|| SpaceError::MissingParam(spec.name.clone()))?;
                spec.to_basic(v)
            })
            .collect()
    }

    /// Map basic coordinates back to natural units. Clamping and integer
    /// rounding absorb out-of-range coordinates, so this cannot fail on
    /// finite input.
    pub fn from_basic(&self, basic: &[f64]) -> Result<ParamMap, SpaceError> {
        if basic.len() != self.specs.len() {
            return Err(SpaceError::DimensionMismatch {
                got: basic.len(),
                want: self.specs.len(),
            });
        }
        let mut map = ParamMap::new();
        for (spec, &b) in self.specs.iter().zip(basic.iter()) {
            if !b.is_finite() {
                return Err(SpaceError::NonFinite { name: spec.name.clone(), value: b });
            }
            map.insert(spec.name.clone(), spec.from_basic(b));
        }
        Ok(map)
    }

    /// Natural values of all search centers (integer params rounded).
    pub fn centers(&self) -> ParamMap {
        self.from_basic(&vec![0.0; self.dimension()])
            .expect("zero vector is always valid")
    }
}
