//! Hierarchical partitions stored as one label vector per level.
//!
//! `levels[0][i]` is the group of node `i`; `levels[l][g]` is the group at
//! level `l + 1` containing group `g` of level `l`. The last level holds a
//! single group. Group slots may be empty; [`HierarchicalPartition::compact`]
//! removes them.

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("a hierarchy needs at least one level")]
    Empty,
    #[error("level 0 has {found} labels but the graph has {expected} nodes")]
    NodeCount { expected: usize, found: usize },
    #[error("level {level} has {found} labels but level {below} uses group {max_label}")]
    Coverage {
        level: usize,
        below: usize,
        max_label: u32,
        found: usize,
    },
    #[error("the top level must place everything in group 0")]
    Top,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HierarchicalPartition {
    levels: Vec<Vec<u32>>,
}

fn max_label(labels: &[u32]) -> Option<u32> {
    labels.iter().copied().max()
}

impl HierarchicalPartition {
    pub fn new(levels: Vec<Vec<u32>>) -> Result<Self, PartitionError> {
        if levels.is_empty() {
            return Err(PartitionError::Empty);
        }
        for l in 1..levels.len() {
            if let Some(m) = max_label(&levels[l - 1]) {
                if levels[l].len() <= m as usize {
                    return Err(PartitionError::Coverage {
                        level: l,
                        below: l - 1,
                        max_label: m,
                        found: levels[l].len(),
                    });
                }
            }
        }
        if levels.last().unwrap().iter().any(|&x| x != 0) {
            return Err(PartitionError::Top);
        }
        Ok(Self { levels })
    }

    /// Checks the partition against a graph with `node_count` nodes.
    pub fn validate_for(&self, node_count: usize) -> Result<(), PartitionError> {
        if self.levels[0].len() != node_count {
            return Err(PartitionError::NodeCount {
                expected: node_count,
                found: self.levels[0].len(),
            });
        }
        Ok(())
    }

    /// Every node in one group.
    pub fn trivial(node_count: usize) -> Self {
        Self {
            levels: vec![vec![0; node_count]],
        }
    }

    /// A single partition of the nodes topped by one all-encompassing group.
    pub fn flat(labels: Vec<u32>) -> Self {
        let slots = max_label(&labels).map_or(0, |m| m as usize + 1);
        Self {
            levels: vec![labels, vec![0; slots]],
        }
    }

    pub fn levels(&self) -> &[Vec<u32>] {
        &self.levels
    }

    pub fn into_levels(self) -> Vec<Vec<u32>> {
        self.levels
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn node_count(&self) -> usize {
        self.levels[0].len()
    }

    /// Group of every node at level `level`.
    pub fn node_labels(&self, level: usize) -> Vec<u32> {
        let mut labels = self.levels[0].clone();
        for l in 1..=level {
            for x in labels.iter_mut() {
                *x = self.levels[l][*x as usize];
            }
        }
        labels
    }

    /// Number of distinct groups used at `level`, counting only groups that
    /// contain at least one node.
    pub fn group_count(&self, level: usize) -> usize {
        let mut seen = self.node_labels(level);
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    /// Drops empty group slots and relabels every level by first appearance,
    /// so that equivalent hierarchies compare equal.
    pub fn compact(&self) -> Self {
        let mut levels = Vec::with_capacity(self.levels.len());
        // Old labels of the surviving elements of the current level, in order.
        let mut elements: Vec<u32> = (0..self.levels[0].len() as u32).collect();
        for (l, labels) in self.levels.iter().enumerate() {
            let mut map: FxHashMap<u32, u32> = FxHashMap::default();
            let mut order = Vec::new();
            let mut out = Vec::with_capacity(elements.len());
            for &e in &elements {
                let old = labels[e as usize];
                let next = map.len() as u32;
                let new = *map.entry(old).or_insert_with(|| {
                    order.push(old);
                    next
                });
                out.push(new);
            }
            if l + 1 == self.levels.len() {
                out.iter_mut().for_each(|x| *x = 0);
            }
            levels.push(out);
            elements = order;
        }
        Self { levels }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.levels).expect("partition serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let levels: Vec<Vec<u32>> = serde_json::from_str(text).map_err(|e| e.to_string())?;
        Self::new(levels).map_err(|e| e.to_string())
    }
}

/// Relabels a flat partition by order of first appearance.
pub fn canonical_labels(labels: &[u32]) -> Vec<u32> {
    let mut map: FxHashMap<u32, u32> = FxHashMap::default();
    labels
        .iter()
        .map(|&x| {
            let next = map.len() as u32;
            *map.entry(x).or_insert(next)
        })
        .collect()
}

fn entropy(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information `2 I(a; b) / (H(a) + H(b))`; 1 when both
/// partitions are trivial.
pub fn nmi(a: &[u32], b: &[u32]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    if a.is_empty() {
        return 1.0;
    }
    let mut joint: FxHashMap<(u32, u32), usize> = FxHashMap::default();
    let mut ca: FxHashMap<u32, usize> = FxHashMap::default();
    let mut cb: FxHashMap<u32, usize> = FxHashMap::default();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
    }
    let ha = entropy(ca.values().copied(), n);
    let hb = entropy(cb.values().copied(), n);
    if ha + hb == 0.0 {
        return 1.0;
    }
    let hab = entropy(joint.values().copied(), n);
    let mi = ha + hb - hab;
    (2.0 * mi / (ha + hb)).clamp(0.0, 1.0)
}
