//! Weighted multigraphs with one or more real-valued covariate channels.
//!
//! Parallel edges are merged into a single edge record carrying a
//! multiplicity; every parallel copy keeps its own value in each channel.
//! Undirected edges are stored with `source <= target`.

use crate::channel::ChannelSpec;
use rustc_hash::{FxHashMap, FxHasher};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::hash::Hasher;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: endpoint {node} is out of range for a graph with {node_count} nodes")]
    EndpointOutOfRange { line: usize, node: u64, node_count: usize },
    #[error("edge ({source_node}, {target_node}): expected {expected} covariate values, found {found}")]
    ChannelCount {
        source_node: u32,
        target_node: u32,
        expected: usize,
        found: usize,
    },
    #[error("edge ({source_node}, {target_node}): covariate value {value} is not finite")]
    NonFinite {
        source_node: u32,
        target_node: u32,
        value: f64,
    },
    #[error("node {node} is out of range for a graph with {node_count} nodes")]
    NodeOutOfRange { node: u32, node_count: usize },
    #[error("invalid graph metadata in {path}: {message}")]
    Meta { path: PathBuf, message: String },
    #[error("invalid JSON graph: {0}")]
    Json(#[from] serde_json::Error),
}

/// Sidecar metadata stored next to a TSV edge list as `<stem>.meta.json`.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GraphMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_count: Option<usize>,
    #[serde(default)]
    pub directed: bool,
    #[serde(default)]
    pub channels: Vec<ChannelSpec>,
}

impl GraphMeta {
    pub fn sidecar_path(graph_path: &Path) -> PathBuf {
        let stem = graph_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        graph_path.with_file_name(format!("{stem}.meta.json"))
    }

    pub fn load(path: &Path) -> Result<Self, GraphError> {
        let text = std::fs::read_to_string(path).map_err(|source| GraphError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|e| GraphError::Meta {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    /// Loads the sidecar for `graph_path` if one exists.
    pub fn load_sidecar(graph_path: &Path) -> Result<Option<Self>, GraphError> {
        let p = Self::sidecar_path(graph_path);
        if p.exists() {
            Self::load(&p).map(Some)
        } else {
            Ok(None)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    node_count: usize,
    directed: bool,
    channel_names: Vec<String>,
    sources: Vec<u32>,
    targets: Vec<u32>,
    /// `offsets[e]..offsets[e + 1]` indexes the parallel copies of edge `e`.
    offsets: Vec<usize>,
    /// Per channel, one value per parallel copy.
    values: Vec<Vec<f64>>,
}

/// Endpoints and, per channel, the values of each parallel copy.
type PendingEdge = ((u32, u32), Vec<Vec<f64>>);

/// Incrementally collects parallel edges, merging repeated endpoint pairs.
#[derive(Debug)]
pub struct GraphBuilder {
    node_count: usize,
    directed: bool,
    channel_names: Vec<String>,
    index: FxHashMap<(u32, u32), usize>,
    pending: Vec<PendingEdge>,
}

impl GraphBuilder {
    pub fn new(node_count: usize, directed: bool, channel_names: Vec<String>) -> Self {
        Self {
            node_count,
            directed,
            channel_names,
            index: FxHashMap::default(),
            pending: Vec::new(),
        }
    }

    /// Adds one parallel copy of `(source, target)` with one value per channel.
    pub fn add_edge(&mut self, source: u32, target: u32, values: &[f64]) -> Result<(), GraphError> {
        for node in [source, target] {
            if node as usize >= self.node_count {
                return Err(GraphError::NodeOutOfRange {
                    node,
                    node_count: self.node_count,
                });
            }
        }
        if values.len() != self.channel_names.len() {
            return Err(GraphError::ChannelCount {
                source_node: source,
                target_node: target,
                expected: self.channel_names.len(),
                found: values.len(),
            });
        }
        if let Some(&value) = values.iter().find(|v| !v.is_finite()) {
            return Err(GraphError::NonFinite {
                source_node: source,
                target_node: target,
                value,
            });
        }
        let key = if self.directed || source <= target {
            (source, target)
        } else {
            (target, source)
        };
        let slot = *self.index.entry(key).or_insert_with(|| {
            self.pending.push((key, Vec::new()));
            self.pending.len() - 1
        });
        self.pending[slot].1.push(values.to_vec());
        Ok(())
    }

    pub fn build(self) -> WeightedGraph {
        let channels = self.channel_names.len();
        let mut sources = Vec::with_capacity(self.pending.len());
        let mut targets = Vec::with_capacity(self.pending.len());
        let mut offsets = vec![0];
        let mut values = vec![Vec::new(); channels];
        for ((s, t), copies) in self.pending {
            sources.push(s);
            targets.push(t);
            for copy in &copies {
                for (c, v) in copy.iter().enumerate() {
                    values[c].push(*v);
                }
            }
            offsets.push(offsets.last().unwrap() + copies.len());
        }
        WeightedGraph {
            node_count: self.node_count,
            directed: self.directed,
            channel_names: self.channel_names,
            sources,
            targets,
            offsets,
            values,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonGraph {
    node_count: usize,
    #[serde(default)]
    directed: bool,
    #[serde(default)]
    channels: Vec<String>,
    edges: Vec<JsonEdge>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonEdge {
    source: u32,
    target: u32,
    #[serde(default)]
    values: Vec<f64>,
}

impl WeightedGraph {
    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn channel_count(&self) -> usize {
        self.channel_names.len()
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channel_names.iter().position(|n| n == name)
    }

    /// Number of distinct endpoint pairs.
    pub fn edge_count(&self) -> usize {
        self.sources.len()
    }

    /// Number of edges counting parallel copies.
    pub fn total_multiplicity(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn endpoints(&self, e: usize) -> (u32, u32) {
        (self.sources[e], self.targets[e])
    }

    pub fn multiplicity(&self, e: usize) -> usize {
        self.offsets[e + 1] - self.offsets[e]
    }

    pub fn edge_values(&self, channel: usize, e: usize) -> &[f64] {
        &self.values[channel][self.offsets[e]..self.offsets[e + 1]]
    }

    /// All values of a channel, ordered by edge and then by parallel copy.
    pub fn channel_values(&self, channel: usize) -> &[f64] {
        &self.values[channel]
    }

    pub fn edge_offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Degree of every node counting parallel copies; self-loops count twice
    /// for undirected graphs. Directed graphs yield `(out, in)`.
    pub fn degrees(&self) -> (Vec<u64>, Vec<u64>) {
        let mut out = vec![0u64; self.node_count];
        let mut inn = vec![0u64; self.node_count];
        for e in 0..self.edge_count() {
            let (s, t) = self.endpoints(e);
            let k = self.multiplicity(e) as u64;
            if self.directed {
                out[s as usize] += k;
                inn[t as usize] += k;
            } else {
                out[s as usize] += k;
                out[t as usize] += k;
            }
        }
        (out, inn)
    }

    /// Replaces the covariate channels, keeping the topology.
    pub fn with_channels(&self, names: Vec<String>, values: Vec<Vec<f64>>) -> Self {
        assert_eq!(names.len(), values.len());
        for v in &values {
            assert_eq!(v.len(), self.total_multiplicity());
        }
        Self {
            channel_names: names,
            values,
            ..self.clone()
        }
    }

    /// A hash of topology and raw covariates identifying the data set.
    pub fn fingerprint(&self) -> u64 {
        let mut h = FxHasher::default();
        h.write_usize(self.node_count);
        h.write_u8(self.directed as u8);
        for e in 0..self.edge_count() {
            h.write_u32(self.sources[e]);
            h.write_u32(self.targets[e]);
            h.write_usize(self.multiplicity(e));
        }
        for (name, vals) in self.channel_names.iter().zip(&self.values) {
            h.write(name.as_bytes());
            for v in vals {
                h.write_u64(v.to_bits());
            }
        }
        h.finish()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# source\ttarget");
        for name in &self.channel_names {
            out.push('\t');
            out.push_str(name);
        }
        out.push('\n');
        for e in 0..self.edge_count() {
            let (s, t) = self.endpoints(e);
            for copy in self.offsets[e]..self.offsets[e + 1] {
                let _ = write!(out, "{s}\t{t}");
                for c in 0..self.channel_count() {
                    let _ = write!(out, "\t{:e}", self.values[c][copy]);
                }
                out.push('\n');
            }
        }
        out
    }

    /// Parses a whitespace-separated edge list. Lines starting with `#` are
    /// comments, except that a leading `# source target name...` line names
    /// the channels. `meta` supplies the node count, directedness and channel
    /// names when known.
    pub fn from_tsv(text: &str, meta: Option<&GraphMeta>) -> Result<Self, GraphError> {
        let mut header: Option<Vec<String>> = None;
        let mut rows: Vec<(usize, u64, u64, Vec<f64>)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let toks: Vec<&str> = rest.split_whitespace().collect();
                if header.is_none()
                    && rows.is_empty()
                    && toks.len() >= 2
                    && toks[0].eq_ignore_ascii_case("source")
                    && toks[1].eq_ignore_ascii_case("target")
                {
                    header = Some(toks[2..].iter().map(|s| s.to_string()).collect());
                }
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() < 2 {
                return Err(GraphError::Parse {
                    line: line_no,
                    message: "expected at least a source and a target".into(),
                });
            }
            let node = |tok: &str| {
                tok.parse::<u64>().map_err(|_| GraphError::Parse {
                    line: line_no,
                    message: format!("invalid node id {tok:?}"),
                })
            };
            let s = node(toks[0])?;
            let t = node(toks[1])?;
            let mut vals = Vec::with_capacity(toks.len() - 2);
            for tok in &toks[2..] {
                let v: f64 = tok.parse().map_err(|_| GraphError::Parse {
                    line: line_no,
                    message: format!("invalid covariate value {tok:?}"),
                })?;
                if !v.is_finite() {
                    return Err(GraphError::Parse {
                        line: line_no,
                        message: format!("covariate value {tok:?} is not finite"),
                    });
                }
                vals.push(v);
            }
            if let Some(first) = rows.first() {
                if first.3.len() != vals.len() {
                    return Err(GraphError::Parse {
                        line: line_no,
                        message: format!("expected {} covariate values, found {}", first.3.len(), vals.len()),
                    });
                }
            }
            rows.push((line_no, s, t, vals));
        }
        let width = rows.first().map(|r| r.3.len());
        let names: Vec<String> = match (meta.filter(|m| !m.channels.is_empty()), header) {
            (Some(m), _) => m.channels.iter().map(|c| c.name.clone()).collect(),
            (None, Some(h)) if width.is_none_or(|w| w == h.len()) => h,
            _ => (0..width.unwrap_or(0)).map(|c| format!("w{c}")).collect(),
        };
        if let Some(w) = width {
            if w != names.len() {
                return Err(GraphError::Parse {
                    line: rows[0].0,
                    message: format!("expected {} covariate values, found {w}", names.len()),
                });
            }
        }
        let max_id = rows.iter().map(|r| r.1.max(r.2)).max();
        let node_count = match meta.and_then(|m| m.node_count) {
            Some(n) => n,
            None => max_id.map_or(0, |m| m as usize + 1),
        };
        let directed = meta.is_some_and(|m| m.directed);
        let mut b = GraphBuilder::new(node_count, directed, names);
        for (line, s, t, vals) in rows {
            for node in [s, t] {
                if node as usize >= node_count || node > u32::MAX as u64 {
                    return Err(GraphError::EndpointOutOfRange { line, node, node_count });
                }
            }
            b.add_edge(s as u32, t as u32, &vals)?;
        }
        Ok(b.build())
    }

    /// Reads a TSV edge list, picking up `<stem>.meta.json` when present.
    pub fn load_tsv(path: &Path) -> Result<Self, GraphError> {
        let meta = GraphMeta::load_sidecar(path)?;
        let text = std::fs::read_to_string(path).map_err(|source| GraphError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_tsv(&text, meta.as_ref())
    }

    pub fn to_json(&self) -> String {
        let mut edges = Vec::with_capacity(self.total_multiplicity());
        for e in 0..self.edge_count() {
            let (s, t) = self.endpoints(e);
            for copy in self.offsets[e]..self.offsets[e + 1] {
                edges.push(JsonEdge {
                    source: s,
                    target: t,
                    values: self.values.iter().map(|v| v[copy]).collect(),
                });
            }
        }
        let g = JsonGraph {
            node_count: self.node_count,
            directed: self.directed,
            channels: self.channel_names.clone(),
            edges,
        };
        serde_json::to_string_pretty(&g).expect("graph serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let g: JsonGraph = serde_json::from_str(text)?;
        let mut b = GraphBuilder::new(g.node_count, g.directed, g.channels);
        for e in g.edges {
            b.add_edge(e.source, e.target, &e.values)?;
        }
        Ok(b.build())
    }

    /// Loads a graph, choosing the format from the extension (`.json` or an
    /// edge list otherwise).
    pub fn load(path: &Path) -> Result<Self, GraphError> {
        if path.extension().is_some_and(|e| e == "json") {
            let text = std::fs::read_to_string(path).map_err(|source| GraphError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            Self::from_json(&text)
        } else {
            Self::load_tsv(path)
        }
    }
}
