//! A graph bundled with its prepared covariate channels and adjacency model.

use crate::adjacency::AdjacencyModel;
use crate::channel::{prepare_channels, ChannelError, ChannelSpec, Family, PreparedChannel};
use crate::graph::WeightedGraph;
use crate::stats::{PairStats, Tracked};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("channel {name:?} has {found} values but the graph has {expected} edges")]
    ValueCount {
        name: String,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

#[derive(Clone, Debug)]
pub struct Model {
    graph: WeightedGraph,
    channels: Vec<PreparedChannel>,
    adjacency: AdjacencyModel,
    adjacency_constant: f64,
    /// Edges incident to each node; self-loops appear once.
    pub(crate) node_edges: Vec<Vec<u32>>,
    /// Far endpoint of every half-edge of each node, one entry per parallel
    /// copy and direction.
    pub(crate) node_units: Vec<Vec<u32>>,
    /// Bottom-level contribution of each edge.
    pub(crate) edge_stats: Vec<PairStats>,
    /// Per channel, the statistics kept above the bottom level.
    pub(crate) lift_tracking: Vec<Tracked>,
}

impl Model {
    pub fn new(
        graph: WeightedGraph,
        channels: Vec<PreparedChannel>,
        adjacency: AdjacencyModel,
    ) -> Result<Self, ModelError> {
        for ch in &channels {
            if ch.values.len() != graph.total_multiplicity() {
                return Err(ModelError::ValueCount {
                    name: ch.name.clone(),
                    expected: graph.total_multiplicity(),
                    found: ch.values.len(),
                });
            }
        }
        let squares = |ch: &PreparedChannel| {
            if ch.family() == Family::Normal {
                Tracked::SumAndSquares
            } else {
                Tracked::Sum
            }
        };
        let base_tracking: Vec<Tracked> = channels.iter().map(squares).collect();
        let lift_tracking = channels
            .iter()
            .map(|ch| {
                if ch.kind.is_micro() {
                    squares(ch)
                } else {
                    Tracked::Nothing
                }
            })
            .collect();
        let n = graph.node_count();
        let mut node_edges = vec![Vec::new(); n];
        let mut node_units = vec![Vec::new(); n];
        let offsets = graph.edge_offsets();
        let mut edge_stats = Vec::with_capacity(graph.edge_count());
        for e in 0..graph.edge_count() {
            let (s, t) = graph.endpoints(e);
            let k = graph.multiplicity(e);
            node_edges[s as usize].push(e as u32);
            if s != t {
                node_edges[t as usize].push(e as u32);
            }
            for _ in 0..k {
                node_units[s as usize].push(t);
                node_units[t as usize].push(s);
            }
            let vals: Vec<&[f64]> = channels.iter().map(|c| &c.values[offsets[e]..offsets[e + 1]]).collect();
            edge_stats.push(PairStats::from_edge(&vals, k as u64, &base_tracking));
        }
        let adjacency_constant = adjacency.constant(&graph);
        Ok(Self {
            graph,
            channels,
            adjacency,
            adjacency_constant,
            node_edges,
            node_units,
            edge_stats,
            lift_tracking,
        })
    }

    /// Prepares `specs` against the graph and builds the model.
    pub fn from_specs(
        graph: WeightedGraph,
        specs: &[ChannelSpec],
        adjacency: AdjacencyModel,
    ) -> Result<Self, ModelError> {
        let channels = prepare_channels(&graph, specs)?;
        Self::new(graph, channels, adjacency)
    }

    /// A model that ignores all covariates.
    pub fn unweighted(graph: WeightedGraph, adjacency: AdjacencyModel) -> Self {
        Self::new(graph, Vec::new(), adjacency).expect("no channels to validate")
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn channels(&self) -> &[PreparedChannel] {
        &self.channels
    }

    pub fn adjacency(&self) -> AdjacencyModel {
        self.adjacency
    }

    pub fn adjacency_constant(&self) -> f64 {
        self.adjacency_constant
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn is_directed(&self) -> bool {
        self.graph.is_directed()
    }

    /// Same data under a different adjacency model.
    pub fn with_adjacency(&self, adjacency: AdjacencyModel) -> Self {
        Self {
            adjacency,
            adjacency_constant: adjacency.constant(&self.graph),
            ..self.clone()
        }
    }
}
