//! Covariate channel specifications and their preparation for inference.

use crate::graph::WeightedGraph;
use crate::special::{ln_binom, ln_factorial};
use crate::transform::{Transform, TransformError};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("channel {name:?} does not exist in the graph")]
    UnknownChannel { name: String },
    #[error("channel {channel:?}: {source}")]
    Transform {
        channel: String,
        #[source]
        source: TransformError,
    },
    #[error("channel {channel:?}: value {value} is outside the support of the {family} family ({support})")]
    Domain {
        channel: String,
        value: f64,
        family: &'static str,
        support: &'static str,
    },
    #[error("channel {channel:?}: {message}")]
    Parameters { channel: String, message: String },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Hash)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Exponential,
    Normal,
    Geometric,
    Binomial,
    Poisson,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Exponential => "exponential",
            Family::Normal => "normal",
            Family::Geometric => "geometric",
            Family::Binomial => "binomial",
            Family::Poisson => "poisson",
        }
    }

    pub fn is_discrete(self) -> bool {
        matches!(self, Family::Geometric | Family::Binomial | Family::Poisson)
    }
}

/// How a channel's values are scored: by the nested microcanonical model or
/// by a flat conjugate prior with fixed hyperparameters.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq, Hash)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    ExponentialMicro,
    NormalMicro,
    GeometricMicro,
    BinomialMicro,
    PoissonMicro,
    ExponentialConjugate,
    NormalConjugate,
    GeometricConjugate,
    BinomialConjugate,
    PoissonConjugate,
}

impl FamilyKind {
    pub fn family(self) -> Family {
        use FamilyKind::*;
        match self {
            ExponentialMicro | ExponentialConjugate => Family::Exponential,
            NormalMicro | NormalConjugate => Family::Normal,
            GeometricMicro | GeometricConjugate => Family::Geometric,
            BinomialMicro | BinomialConjugate => Family::Binomial,
            PoissonMicro | PoissonConjugate => Family::Poisson,
        }
    }

    pub fn is_micro(self) -> bool {
        use FamilyKind::*;
        matches!(
            self,
            ExponentialMicro | NormalMicro | GeometricMicro | BinomialMicro | PoissonMicro
        )
    }

    pub fn micro(family: Family) -> Self {
        match family {
            Family::Exponential => FamilyKind::ExponentialMicro,
            Family::Normal => FamilyKind::NormalMicro,
            Family::Geometric => FamilyKind::GeometricMicro,
            Family::Binomial => FamilyKind::BinomialMicro,
            Family::Poisson => FamilyKind::PoissonMicro,
        }
    }

    pub fn conjugate(family: Family) -> Self {
        match family {
            Family::Exponential => FamilyKind::ExponentialConjugate,
            Family::Normal => FamilyKind::NormalConjugate,
            Family::Geometric => FamilyKind::GeometricConjugate,
            Family::Binomial => FamilyKind::BinomialConjugate,
            Family::Poisson => FamilyKind::PoissonConjugate,
        }
    }
}

/// Hyperparameters of a conjugate prior.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Prior {
    /// Gamma(shape `alpha`, rate `beta`) on an exponential or Poisson rate.
    Gamma { alpha: f64, beta: f64 },
    /// Beta(`alpha`, `beta`) on a success probability.
    Beta { alpha: f64, beta: f64 },
    /// Normal-scaled-inverse-chi-squared on a mean and variance.
    NormalInvChi2 {
        mu0: f64,
        kappa0: f64,
        nu0: f64,
        sigma0_sq: f64,
    },
}

impl Prior {
    pub fn default_for(family: Family) -> Self {
        match family {
            Family::Exponential | Family::Poisson => Prior::Gamma { alpha: 1.0, beta: 1.0 },
            Family::Geometric | Family::Binomial => Prior::Beta { alpha: 1.0, beta: 1.0 },
            Family::Normal => Prior::NormalInvChi2 {
                mu0: 0.0,
                kappa0: 1.0,
                nu0: 1.0,
                sigma0_sq: 1.0,
            },
        }
    }

    pub fn matches(&self, family: Family) -> bool {
        matches!(
            (self, family),
            (Prior::Gamma { .. }, Family::Exponential | Family::Poisson)
                | (Prior::Beta { .. }, Family::Geometric | Family::Binomial)
                | (Prior::NormalInvChi2 { .. }, Family::Normal)
        )
    }

    /// Parameters as a flat vector, in declaration order.
    pub fn to_vec(&self) -> Vec<f64> {
        match *self {
            Prior::Gamma { alpha, beta } | Prior::Beta { alpha, beta } => vec![alpha, beta],
            Prior::NormalInvChi2 {
                mu0,
                kappa0,
                nu0,
                sigma0_sq,
            } => vec![mu0, kappa0, nu0, sigma0_sq],
        }
    }

    pub fn with_values(&self, v: &[f64]) -> Self {
        match self {
            Prior::Gamma { .. } => Prior::Gamma {
                alpha: v[0],
                beta: v[1],
            },
            Prior::Beta { .. } => Prior::Beta {
                alpha: v[0],
                beta: v[1],
            },
            Prior::NormalInvChi2 { .. } => Prior::NormalInvChi2 {
                mu0: v[0],
                kappa0: v[1],
                nu0: v[2],
                sigma0_sq: v[3],
            },
        }
    }

    fn validate(&self) -> Result<(), String> {
        let v = self.to_vec();
        if v.iter().any(|x| !x.is_finite()) {
            return Err("hyperparameters must be finite".into());
        }
        let positive = match self {
            Prior::NormalInvChi2 { .. } => &v[1..],
            _ => &v[..],
        };
        if positive.iter().any(|&x| x <= 0.0) {
            return Err(format!("hyperparameters {v:?} must be positive"));
        }
        Ok(())
    }
}

/// One covariate channel as configured by the user.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    /// Name of the graph channel the values come from.
    pub name: String,
    pub family: FamilyKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transforms: Vec<Transform>,
    /// Number of trials for binomial channels; the largest observed value
    /// when absent.
    #[serde(default, rename = "M", skip_serializing_if = "Option::is_none")]
    pub bound: Option<u64>,
    /// Conjugate hyperparameters; family defaults when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<Prior>,
}

impl ChannelSpec {
    pub fn new(name: impl Into<String>, family: FamilyKind) -> Self {
        Self {
            name: name.into(),
            family,
            transforms: Vec::new(),
            bound: None,
            prior: None,
        }
    }

    pub fn with_transforms(mut self, transforms: Vec<Transform>) -> Self {
        self.transforms = transforms;
        self
    }
}

/// A channel with transformed, validated values ready for scoring.
#[derive(Clone, Debug)]
pub struct PreparedChannel {
    pub name: String,
    pub kind: FamilyKind,
    /// Binomial trial count; zero for other families.
    pub bound: u64,
    pub prior: Prior,
    /// One value per parallel edge copy, aligned with the graph's layout.
    pub values: Vec<f64>,
    /// `Σ ln |dy/dx|` over all values; zero for discrete families.
    pub log_jacobian: f64,
    /// Partition-independent part of the log-likelihood, e.g. `Σ ln C(M, x)`.
    pub constant: f64,
}

impl PreparedChannel {
    pub fn family(&self) -> Family {
        self.kind.family()
    }

    /// Builds a channel from already-transformed values.
    pub fn from_values(
        name: impl Into<String>,
        kind: FamilyKind,
        values: Vec<f64>,
        bound: Option<u64>,
        log_jacobian: f64,
    ) -> Result<Self, ChannelError> {
        let name = name.into();
        let family = kind.family();
        let support = match family {
            Family::Exponential => "[0, inf)",
            Family::Normal => "finite reals",
            Family::Geometric | Family::Poisson => "non-negative integers",
            Family::Binomial => "integers in [0, M]",
        };
        let is_int = |x: f64| x >= 0.0 && x.fract() == 0.0 && x < 9.0e15;
        let mut max_int = 0u64;
        for &x in &values {
            let ok = match family {
                Family::Exponential => x >= 0.0 && x.is_finite(),
                Family::Normal => x.is_finite(),
                _ => is_int(x),
            };
            if !ok {
                return Err(ChannelError::Domain {
                    channel: name,
                    value: x,
                    family: family.name(),
                    support,
                });
            }
            if family.is_discrete() {
                max_int = max_int.max(x as u64);
            }
        }
        let bound = if family == Family::Binomial {
            let m = bound.unwrap_or(max_int.max(1));
            if m == 0 {
                return Err(ChannelError::Parameters {
                    channel: name,
                    message: "binomial channels need M >= 1".into(),
                });
            }
            if let Some(&x) = values.iter().find(|&&x| x as u64 > m) {
                return Err(ChannelError::Domain {
                    channel: name,
                    value: x,
                    family: family.name(),
                    support,
                });
            }
            m
        } else {
            0
        };
        let constant = match family {
            Family::Binomial => values.iter().map(|&x| ln_binom(bound, x as u64)).sum(),
            Family::Poisson => -values.iter().map(|&x| ln_factorial(x as u64)).sum::<f64>(),
            _ => 0.0,
        };
        Ok(Self {
            name,
            kind,
            bound,
            prior: Prior::default_for(family),
            values,
            log_jacobian: if family.is_discrete() { 0.0 } else { log_jacobian },
            constant,
        })
    }

    pub fn with_prior(mut self, prior: Prior) -> Result<Self, ChannelError> {
        if !prior.matches(self.family()) {
            let family = self.family().name();
            return Err(ChannelError::Parameters {
                channel: self.name,
                message: format!("prior {prior:?} does not fit the {family} family"),
            });
        }
        prior.validate().map_err(|message| ChannelError::Parameters {
            channel: self.name.clone(),
            message,
        })?;
        self.prior = prior;
        Ok(self)
    }
}

/// Applies each spec's transform chain to the matching graph channel and
/// validates the results. A sign-magnitude step yields two channels named
/// `<name>.sign` (binomial with one trial) and `<name>.magnitude`.
pub fn prepare_channels(graph: &WeightedGraph, specs: &[ChannelSpec]) -> Result<Vec<PreparedChannel>, ChannelError> {
    let mut out = Vec::new();
    for spec in specs {
        let idx = graph
            .channel_index(&spec.name)
            .ok_or_else(|| ChannelError::UnknownChannel {
                name: spec.name.clone(),
            })?;
        for t in &spec.transforms {
            t.validate().map_err(|source| ChannelError::Transform {
                channel: spec.name.clone(),
                source,
            })?;
        }
        let raw = graph.channel_values(idx);
        let split = spec.transforms.iter().position(|t| *t == Transform::SignMagnitude);
        let mut values = Vec::with_capacity(raw.len());
        let mut signs = Vec::new();
        let mut log_j = 0.0;
        for &x in raw {
            let mut y = x;
            for (i, t) in spec.transforms.iter().enumerate() {
                if Some(i) == split {
                    signs.push(if y > 0.0 { 1.0 } else { 0.0 });
                }
                let (v, j) = t.apply(y).map_err(|source| ChannelError::Transform {
                    channel: spec.name.clone(),
                    source,
                })?;
                y = v;
                log_j += j;
            }
            values.push(y);
        }
        let with_prior = |c: PreparedChannel| match spec.prior {
            Some(p) => c.with_prior(p),
            None => Ok(c),
        };
        if split.is_some() {
            out.push(PreparedChannel::from_values(
                format!("{}.sign", spec.name),
                FamilyKind::BinomialMicro,
                signs,
                Some(1),
                0.0,
            )?);
            out.push(with_prior(PreparedChannel::from_values(
                format!("{}.magnitude", spec.name),
                spec.family,
                values,
                spec.bound,
                log_j,
            )?)?);
        } else {
            out.push(with_prior(PreparedChannel::from_values(
                spec.name.clone(),
                spec.family,
                values,
                spec.bound,
                log_j,
            )?)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphBuilder;

    fn graph(vals: &[f64]) -> WeightedGraph {
        let mut b = GraphBuilder::new(vals.len() + 1, false, vec!["w".into()]);
        for (i, v) in vals.iter().enumerate() {
            b.add_edge(i as u32, i as u32 + 1, &[*v]).unwrap();
        }
        b.build()
    }

    #[test]
    fn sign_magnitude_split() {
        let g = graph(&[-2.0, 3.0, 0.5]);
        let spec = ChannelSpec::new("w", FamilyKind::ExponentialMicro).with_transforms(vec![Transform::SignMagnitude]);
        let ch = prepare_channels(&g, &[spec]).unwrap();
        assert_eq!(ch.len(), 2);
        assert_eq!(ch[0].name, "w.sign");
        assert_eq!(ch[0].values, vec![0.0, 1.0, 1.0]);
        assert_eq!(ch[0].bound, 1);
        assert_eq!(ch[1].values, vec![2.0, 3.0, 0.5]);
    }

    #[test]
    fn domain_errors() {
        let g = graph(&[-1.0]);
        let spec = ChannelSpec::new("w", FamilyKind::ExponentialMicro);
        assert!(matches!(
            prepare_channels(&g, &[spec]),
            Err(ChannelError::Domain { .. })
        ));
        let g = graph(&[1.5]);
        let spec = ChannelSpec::new("w", FamilyKind::PoissonMicro);
        assert!(prepare_channels(&g, &[spec]).is_err());
        let spec = ChannelSpec::new("nope", FamilyKind::PoissonMicro);
        assert!(matches!(
            prepare_channels(&g, &[spec]),
            Err(ChannelError::UnknownChannel { .. })
        ));
    }

    #[test]
    fn binomial_bound_defaults_to_max() {
        let g = graph(&[1.0, 4.0, 2.0]);
        let spec = ChannelSpec::new("w", FamilyKind::BinomialMicro);
        let ch = prepare_channels(&g, &[spec]).unwrap();
        assert_eq!(ch[0].bound, 4);
        let expected: f64 = [1u64, 4, 2].iter().map(|&x| ln_binom(4, x)).sum();
        assert!((ch[0].constant - expected).abs() < 1e-12);
    }

    #[test]
    fn jacobian_accumulates() {
        let g = graph(&[2.0, 3.0]);
        let spec = ChannelSpec::new("w", FamilyKind::NormalMicro).with_transforms(vec![Transform::Log]);
        let ch = prepare_channels(&g, &[spec]).unwrap();
        assert!((ch[0].log_jacobian + 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn spec_json() {
        let s: ChannelSpec =
            serde_json::from_str(r#"{"name": "w", "family": "binomial-micro", "M": 10, "transforms": ["identity"]}"#)
                .unwrap();
        assert_eq!(s.bound, Some(10));
        assert!(serde_json::from_str::<ChannelSpec>(r#"{"name": "w", "family": "x"}"#).is_err());
    }
}
