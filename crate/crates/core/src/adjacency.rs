//! Unweighted part of the joint: the adjacency likelihood given the
//! hierarchy and the prior over hierarchical partitions.
//!
//! The default is a nested microcanonical degree-corrected model. At the
//! bottom level the graph is a uniformly random multigraph with the given
//! block edge counts and degrees, and degrees are uniform given each group's
//! total. Above it, each level's edge counts are spread uniformly over the
//! group pairs of the level below. Each level's partition is uniform given
//! its group sizes, sizes are uniform given the number of groups, and the
//! number of groups is uniform.

use crate::graph::WeightedGraph;
use crate::special::{ln_binom, ln_double_factorial_even, ln_factorial, ln_multiset};
use serde::{Deserialize, Serialize};
use std::str::FromStr;

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum AdjacencyModel {
    #[default]
    DegreeCorrectedMicro,
    NonDegreeCorrectedMicro,
    /// The adjacency is fixed (e.g. a complete graph of correlations) and
    /// carries no information about the partition.
    FixedCompleteGraph,
}

impl FromStr for AdjacencyModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "degree-corrected-micro" => Ok(Self::DegreeCorrectedMicro),
            "non-degree-corrected-micro" => Ok(Self::NonDegreeCorrectedMicro),
            "fixed-complete-graph" => Ok(Self::FixedCompleteGraph),
            other => Err(format!(
                "unknown adjacency model {other:?}; expected degree-corrected-micro, \
                 non-degree-corrected-micro or fixed-complete-graph"
            )),
        }
    }
}

impl AdjacencyModel {
    pub fn name(self) -> &'static str {
        match self {
            Self::DegreeCorrectedMicro => "degree-corrected-micro",
            Self::NonDegreeCorrectedMicro => "non-degree-corrected-micro",
            Self::FixedCompleteGraph => "fixed-complete-graph",
        }
    }

    pub fn is_fixed(self) -> bool {
        self == Self::FixedCompleteGraph
    }

    /// Partition-independent part: `Σ ln k_i!` for degree-corrected models
    /// minus the edge multiplicity factorials.
    pub fn constant(self, graph: &WeightedGraph) -> f64 {
        if self.is_fixed() {
            return 0.0;
        }
        let mut c = 0.0;
        for e in 0..graph.edge_count() {
            let (s, t) = graph.endpoints(e);
            let k = graph.multiplicity(e) as u64;
            c -= if s == t && !graph.is_directed() {
                ln_double_factorial_even(k)
            } else {
                ln_factorial(k)
            };
        }
        if self == Self::DegreeCorrectedMicro {
            let (out, inn) = graph.degrees();
            c += out.iter().map(|&k| ln_factorial(k)).sum::<f64>();
            if graph.is_directed() {
                c += inn.iter().map(|&k| ln_factorial(k)).sum::<f64>();
            }
        }
        c
    }

    /// Bottom-level pair term `ln m!`, or `ln (2m)!!` for an undirected
    /// self-pair.
    pub fn base_pair(self, directed: bool, self_pair: bool, m: u64) -> f64 {
        if self.is_fixed() {
            0.0
        } else if self_pair && !directed {
            ln_double_factorial_even(m)
        } else {
            ln_factorial(m)
        }
    }

    /// Upper-level pair term: the `m` edges between two groups are spread over
    /// the pairs of their `na` and `nb` subgroups.
    pub fn upper_pair(self, directed: bool, self_pair: bool, na: u64, nb: u64, m: u64) -> f64 {
        if self.is_fixed() || m == 0 {
            return 0.0;
        }
        let slots = if self_pair && !directed {
            na * (na + 1) / 2
        } else {
            na * nb
        };
        -ln_multiset(slots, m)
    }

    /// Bottom-level group term from its size and half-edge totals.
    /// Undirected graphs pass the total degree in `deg_out`.
    pub fn base_group(self, directed: bool, size: u64, deg_out: u64, deg_in: u64) -> f64 {
        match self {
            Self::FixedCompleteGraph => 0.0,
            Self::DegreeCorrectedMicro => {
                let mut t = -ln_factorial(deg_out) - ln_multiset(size, deg_out);
                if directed {
                    t += -ln_factorial(deg_in) - ln_multiset(size, deg_in);
                }
                t
            }
            Self::NonDegreeCorrectedMicro => {
                let k = if directed { deg_out + deg_in } else { deg_out };
                if k == 0 {
                    0.0
                } else {
                    -(k as f64) * (size as f64).ln()
                }
            }
        }
    }
}

/// Group term of the partition prior: `ln n_r!`.
pub fn prior_group(size: u64) -> f64 {
    ln_factorial(size)
}

/// Level term of the partition prior for `elements` non-empty elements split
/// into `groups` non-empty groups: `−ln N! − ln C(N−1, B−1) − ln N`.
pub fn prior_level(elements: u64, groups: u64) -> f64 {
    if elements == 0 {
        return 0.0;
    }
    -ln_factorial(elements) - ln_binom(elements - 1, groups.max(1) - 1) - (elements as f64).ln()
}
