//! Synthetic weighted graphs with planted group structure.
//!
//! Edges are drawn independently with a probability depending on the groups
//! of their endpoints, then each edge gets a covariate drawn from the
//! distribution assigned to its group pair. Graphs are simple: no parallel
//! edges and no self-loops.

use crate::graph::{GraphBuilder, WeightedGraph};
use rand::seq::SliceRandom;
use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Exp, Geometric, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("the edge probability matrix must be {groups}x{groups} to match the labels")]
    Shape { groups: usize },
    #[error("edge probability {value} for groups ({r}, {s}) is outside [0, 1]")]
    Probability { r: usize, s: usize, value: f64 },
    #[error("undirected graphs need a symmetric {what} matrix; ({r}, {s}) differs from ({s}, {r})")]
    Asymmetric { what: &'static str, r: usize, s: usize },
    #[error("invalid weight distribution {0:?}")]
    Distribution(WeightDistribution),
    #[error("channel {0:?} does not exist")]
    Channel(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WeightDistribution {
    Exponential {
        mean: f64,
    },
    Normal {
        mean: f64,
        sd: f64,
    },
    LogNormal {
        mu: f64,
        sigma: f64,
    },
    /// Failures before the first success, with the given mean.
    Geometric {
        mean: f64,
    },
    Binomial {
        trials: u64,
        p: f64,
    },
    Poisson {
        mean: f64,
    },
    Constant {
        value: f64,
    },
}

impl WeightDistribution {
    fn err(&self) -> SynthError {
        SynthError::Distribution(self.clone())
    }

    /// Draws one value.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64, SynthError> {
        Ok(match *self {
            Self::Exponential { mean } => {
                if mean.is_nan() || mean <= 0.0 {
                    return Err(self.err());
                }
                rng.sample(Exp::new(1.0 / mean).map_err(|_| self.err())?)
            }
            Self::Normal { mean, sd } => rng.sample(Normal::new(mean, sd).map_err(|_| self.err())?),
            Self::LogNormal { mu, sigma } => rng.sample(LogNormal::new(mu, sigma).map_err(|_| self.err())?),
            Self::Geometric { mean } => {
                if mean.is_nan() || mean < 0.0 {
                    return Err(self.err());
                }
                rng.sample(Geometric::new(1.0 / (1.0 + mean)).map_err(|_| self.err())?) as f64
            }
            Self::Binomial { trials, p } => rng.sample(Binomial::new(trials, p).map_err(|_| self.err())?) as f64,
            Self::Poisson { mean } => {
                if mean == 0.0 {
                    0.0
                } else {
                    rng.sample(Poisson::new(mean).map_err(|_| self.err())?)
                }
            }
            Self::Constant { value } => {
                if !value.is_finite() {
                    return Err(self.err());
                }
                value
            }
        })
    }
}

/// Parameters of a planted-partition graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    /// Group of every node.
    pub labels: Vec<u32>,
    /// `B × B` edge probabilities.
    pub probabilities: Vec<Vec<f64>>,
    /// `B × B` covariate distributions.
    pub weights: Vec<Vec<WeightDistribution>>,
    #[serde(default)]
    pub directed: bool,
    #[serde(default = "default_channel")]
    pub channel: String,
}

fn default_channel() -> String {
    "weight".into()
}

impl SynthSpec {
    /// Two or more equal-sized groups with the same distribution inside every
    /// group and another one between groups.
    pub fn planted(
        n: usize,
        groups: usize,
        p_in: f64,
        p_out: f64,
        w_in: WeightDistribution,
        w_out: WeightDistribution,
    ) -> Self {
        let labels = (0..n).map(|i| (i * groups / n) as u32).collect();
        let pick = |r: usize, s: usize, a: f64, b: f64| if r == s { a } else { b };
        Self {
            labels,
            probabilities: (0..groups)
                .map(|r| (0..groups).map(|s| pick(r, s, p_in, p_out)).collect())
                .collect(),
            weights: (0..groups)
                .map(|r| {
                    (0..groups)
                        .map(|s| if r == s { w_in.clone() } else { w_out.clone() })
                        .collect()
                })
                .collect(),
            directed: false,
            channel: default_channel(),
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let b = self.labels.iter().map(|&x| x as usize + 1).max().unwrap_or(0);
        let square = |rows: usize, cols: &dyn Fn(usize) -> usize| rows == b && (0..rows).all(|r| cols(r) == b);
        if !square(self.probabilities.len(), &|r| self.probabilities[r].len())
            || !square(self.weights.len(), &|r| self.weights[r].len())
        {
            return Err(SynthError::Shape { groups: b });
        }
        for r in 0..b {
            for s in 0..b {
                let p = self.probabilities[r][s];
                if !(0.0..=1.0).contains(&p) {
                    return Err(SynthError::Probability { r, s, value: p });
                }
                if !self.directed {
                    if p != self.probabilities[s][r] {
                        return Err(SynthError::Asymmetric {
                            what: "probability",
                            r,
                            s,
                        });
                    }
                    if self.weights[r][s] != self.weights[s][r] {
                        return Err(SynthError::Asymmetric { what: "weight", r, s });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Samples a graph from `spec`; identical seeds give identical graphs.
pub fn synth_generate(spec: &SynthSpec, seed: u64) -> Result<WeightedGraph, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.labels.len();
    let mut builder = GraphBuilder::new(n, spec.directed, vec![spec.channel.clone()]);
    for i in 0..n {
        let targets = if spec.directed { 0..n } else { i + 1..n };
        for j in targets {
            if i == j {
                continue;
            }
            let (r, s) = (spec.labels[i] as usize, spec.labels[j] as usize);
            if rng.random_bool(spec.probabilities[r][s]) {
                let w = spec.weights[r][s].sample(&mut rng)?;
                builder
                    .add_edge(i as u32, j as u32, &[w])
                    .expect("endpoints are in range and values finite");
            }
        }
    }
    Ok(builder.build())
}

/// Randomly permutes the values of one channel across all edges, destroying
/// any relation between covariates and structure.
pub fn shuffle_weights(graph: &WeightedGraph, channel: &str, seed: u64) -> Result<WeightedGraph, SynthError> {
    let c = graph
        .channel_index(channel)
        .ok_or_else(|| SynthError::Channel(channel.into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values: Vec<Vec<f64>> = (0..graph.channel_count())
        .map(|k| graph.channel_values(k).to_vec())
        .collect();
    values[c].shuffle(&mut rng);
    Ok(graph.with_channels(graph.channel_names().to_vec(), values))
}
