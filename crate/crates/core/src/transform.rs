//! Invertible covariate transforms and their log-Jacobians.
//!
//! A transform maps an observed value `x` to the modelled value `y`; the
//! evidence for `x` is the evidence for `y` plus `ln |dy/dx|`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("{transform} is undefined at {value}; values must lie in {domain}")]
    OutOfDomain {
        transform: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error(
        "{transform} maps the boundary value {value} to infinity; apply a shrink transform with a small eps first"
    )]
    Boundary { transform: &'static str, value: f64 },
    #[error("invalid {transform} parameters: {message}")]
    Parameters { transform: &'static str, message: String },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Transform {
    Identity,
    /// `y = ln x` for `x > 0`.
    Log,
    /// `y = -ln x` for `x` in `(0, 1]`.
    NegLogUnit,
    /// `y = ln(x / (1 - x))` for `x` in `(0, 1)`.
    LogitUnit,
    /// `y = 2 artanh x` for `x` in `(-1, 1)`.
    ArctanhSym,
    /// `y = scale * x + shift`.
    Affine {
        scale: f64,
        shift: f64,
    },
    /// Affinely maps `[lo, hi]` onto `[lo + eps, hi - eps]`.
    Shrink {
        lo: f64,
        hi: f64,
        eps: f64,
    },
    /// Splits the channel into a sign channel (1 for positive values, 0
    /// otherwise) and a magnitude channel; later steps act on the magnitude.
    SignMagnitude,
}

impl Transform {
    pub fn name(&self) -> &'static str {
        match self {
            Transform::Identity => "identity",
            Transform::Log => "log",
            Transform::NegLogUnit => "neg-log-unit",
            Transform::LogitUnit => "logit-unit",
            Transform::ArctanhSym => "arctanh-sym",
            Transform::Affine { .. } => "affine",
            Transform::Shrink { .. } => "shrink",
            Transform::SignMagnitude => "sign-magnitude",
        }
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        let bad = |message: String| {
            Err(TransformError::Parameters {
                transform: self.name(),
                message,
            })
        };
        match *self {
            Transform::Affine { scale, shift } => {
                if !(scale.is_finite() && shift.is_finite()) || scale == 0.0 {
                    return bad(format!(
                        "scale {scale} and shift {shift} must be finite with scale != 0"
                    ));
                }
            }
            Transform::Shrink { lo, hi, eps } => {
                if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                    return bad(format!("need lo < hi, got [{lo}, {hi}]"));
                }
                if !(eps >= 0.0 && 2.0 * eps < hi - lo) {
                    return bad(format!("eps {eps} must lie in [0, (hi - lo) / 2)"));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Returns `(y, ln |dy/dx|)`. [`Transform::SignMagnitude`] acts as the
    /// magnitude map `|x|`.
    pub fn apply(&self, x: f64) -> Result<(f64, f64), TransformError> {
        let domain = |domain: &'static str| TransformError::OutOfDomain {
            transform: self.name(),
            value: x,
            domain,
        };
        let boundary = || TransformError::Boundary {
            transform: self.name(),
            value: x,
        };
        match *self {
            Transform::Identity => Ok((x, 0.0)),
            Transform::Log => {
                if x > 0.0 {
                    Ok((x.ln(), -x.ln()))
                } else if x == 0.0 {
                    Err(boundary())
                } else {
                    Err(domain("(0, inf)"))
                }
            }
            Transform::NegLogUnit => {
                if x > 0.0 && x <= 1.0 {
                    Ok((-x.ln(), -x.ln()))
                } else if x == 0.0 {
                    Err(boundary())
                } else {
                    Err(domain("(0, 1]"))
                }
            }
            Transform::LogitUnit => {
                if x > 0.0 && x < 1.0 {
                    Ok(((x / (1.0 - x)).ln(), -x.ln() - (-x).ln_1p()))
                } else if x == 0.0 || x == 1.0 {
                    Err(boundary())
                } else {
                    Err(domain("(0, 1)"))
                }
            }
            Transform::ArctanhSym => {
                if x > -1.0 && x < 1.0 {
                    Ok((2.0 * x.atanh(), std::f64::consts::LN_2 - (-x * x).ln_1p()))
                } else if x.abs() == 1.0 {
                    Err(boundary())
                } else {
                    Err(domain("(-1, 1)"))
                }
            }
            Transform::Affine { scale, shift } => Ok((scale * x + shift, scale.abs().ln())),
            Transform::Shrink { lo, hi, eps } => {
                if x < lo || x > hi {
                    return Err(domain("[lo, hi]"));
                }
                let ratio = (hi - lo - 2.0 * eps) / (hi - lo);
                Ok((lo + eps + (x - lo) * ratio, ratio.ln()))
            }
            Transform::SignMagnitude => Ok((x.abs(), 0.0)),
        }
    }

    /// Inverse map; for [`Transform::SignMagnitude`] the positive branch.
    pub fn invert(&self, y: f64) -> f64 {
        match *self {
            Transform::Identity => y,
            Transform::Log => y.exp(),
            Transform::NegLogUnit => (-y).exp(),
            Transform::LogitUnit => 1.0 / (1.0 + (-y).exp()),
            Transform::ArctanhSym => (y / 2.0).tanh(),
            Transform::Affine { scale, shift } => (y - shift) / scale,
            Transform::Shrink { lo, hi, eps } => lo + (y - lo - eps) * (hi - lo) / (hi - lo - 2.0 * eps),
            Transform::SignMagnitude => y,
        }
    }
}

/// Applies a chain of transforms (none of them a sign split) to one value.
pub fn apply_chain(chain: &[Transform], x: f64) -> Result<(f64, f64), TransformError> {
    let mut y = x;
    let mut log_j = 0.0;
    for t in chain {
        let (v, j) = t.apply(y)?;
        y = v;
        log_j += j;
    }
    Ok((y, log_j))
}

pub fn invert_chain(chain: &[Transform], y: f64) -> f64 {
    chain.iter().rev().fold(y, |acc, t| t.invert(acc))
}
