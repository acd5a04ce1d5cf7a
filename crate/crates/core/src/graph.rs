//! Undirected communication graphs and the Laplacian quadratic form.
//!
//! Graphs are stored as a dense symmetric adjacency matrix. The node counts
//! used by the experiments stay in the low thousands, where a dense layout is
//! both simpler and faster than an adjacency list.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("{kind} graph needs at least {min} nodes, got {got}")]
    TooFewNodes {
        kind: GraphKind,
        min: usize,
        got: usize,
    },
    #[error("line {line}: expected two node indices, got {text:?}")]
    MalformedLine { line: usize, text: String },
    #[error("line {line}: self-loop on node {node}")]
    SelfLoop { line: usize, node: usize },
    #[error("edge list contains no edges")]
    Empty,
    #[error("node {node} out of range for a graph with {n_nodes} nodes")]
    NodeOutOfRange { node: usize, n_nodes: usize },
    #[error("state has {got} entries but the graph has {expected} nodes")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown graph kind {0:?} (expected complete, ring, path or star)")]
    UnknownKind(String),
}

/// Topology families produced by [`Graph::generate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Complete,
    Ring,
    Path,
    Star,
}

impl GraphKind {
    pub fn min_nodes(self) -> usize {
        match self {
            GraphKind::Ring => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            GraphKind::Complete => "complete",
            GraphKind::Ring => "ring",
            GraphKind::Path => "path",
            GraphKind::Star => "star",
        };
        f.write_str(name)
    }
}

impl FromStr for GraphKind {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "complete" => Ok(GraphKind::Complete),
            "ring" | "cycle" => Ok(GraphKind::Ring),
            "path" | "line" => Ok(GraphKind::Path),
            "star" => Ok(GraphKind::Star),
            other => Err(GraphError::UnknownKind(other.to_string())),
        }
    }
}

/// Immutable undirected graph without self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n_nodes: usize,
    adjacency: Vec<bool>,
}

impl Graph {
    /// Builds a graph from undirected edges. Duplicates and reversed
    /// duplicates collapse to a single edge.
    pub fn from_edges<I>(n_nodes: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adjacency = vec![false; n_nodes * n_nodes];
        for (i, j) in edges {
            for node in [i, j] {
                if node >= n_nodes {
                    return Err(GraphError::NodeOutOfRange { node, n_nodes });
                }
            }
            if i == j {
                return Err(GraphError::SelfLoop { line: 0, node: i });
            }
            adjacency[i * n_nodes + j] = true;
            adjacency[j * n_nodes + i] = true;
        }
        Ok(Self { n_nodes, adjacency })
    }

    pub fn generate(kind: GraphKind, n: usize) -> Result<Self, GraphError> {
        let min = kind.min_nodes();
        if n < min {
            return Err(GraphError::TooFewNodes { kind, min, got: n });
        }
        let edges: Vec<(usize, usize)> = match kind {
            GraphKind::Complete => (0..n)
                .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                .collect(),
            GraphKind::Ring => (0..n).map(|i| (i, (i + 1) % n)).collect(),
            GraphKind::Path => (0..n - 1).map(|i| (i, i + 1)).collect(),
            GraphKind::Star => (1..n).map(|i| (0, i)).collect(),
        };
        Self::from_edges(n, edges)
    }

    /// Parses the `i j` per line edge-list format. `#` starts a comment line,
    /// blank lines are skipped. The node count is one more than the largest
    /// index seen. Disconnected inputs are accepted; check [`Graph::is_connected`].
    pub fn load_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut edges = Vec::new();
        let mut max_node = None::<usize>;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = || GraphError::MalformedLine {
                line: line_no,
                text: raw.to_string(),
            };
            let mut fields = line.split_whitespace();
            let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(malformed());
            };
            let i: usize = a.parse().map_err(|_| malformed())?;
            let j: usize = b.parse().map_err(|_| malformed())?;
            if i == j {
                return Err(GraphError::SelfLoop {
                    line: line_no,
                    node: i,
                });
            }
            max_node = Some(max_node.map_or(i.max(j), |m| m.max(i).max(j)));
            edges.push((i, j));
        }
        let n_nodes = max_node.ok_or(GraphError::Empty)? + 1;
        Self::from_edges(n_nodes, edges)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n_nodes + j]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        let row = &self.adjacency[i * self.n_nodes..(i + 1) * self.n_nodes];
        row.iter()
            .enumerate()
            .filter_map(|(j, &adjacent)| adjacent.then_some(j))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors(i).count()
    }

    /// Undirected edges as `(i, j)` with `i < j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n_nodes).flat_map(move |i| {
            self.neighbors(i)
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    /// Number of ordered adjacent pairs, i.e. the trace of the Laplacian.
    pub fn directed_edge_count(&self) -> usize {
        self.adjacency.iter().filter(|&&a| a).count()
    }

    pub fn is_connected(&self) -> bool {
        if self.n_nodes <= 1 {
            return true;
        }
        let mut seen = vec![false; self.n_nodes];
        let mut stack = vec![0];
        seen[0] = true;
        let mut reached = 1;
        while let Some(i) = stack.pop() {
            for j in self.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    reached += 1;
                    stack.push(j);
                }
            }
        }
        reached == self.n_nodes
    }

    /// Dense row-major Laplacian `D - A`.
    pub fn laplacian(&self) -> Vec<f64> {
        let n = self.n_nodes;
        let mut lap = vec![0.0; n * n];
        for i in 0..n {
            for j in self.neighbors(i) {
                lap[i * n + j] = -1.0;
                lap[i * n + i] += 1.0;
            }
        }
        lap
    }

    /// `xᵀ L x`, the instantaneous disagreement cost, evaluated as the sum of
    /// squared differences over undirected edges.
    pub fn consensus_energy(&self, x: &[f64]) -> Result<f64, GraphError> {
        if x.len() != self.n_nodes {
            return Err(GraphError::DimensionMismatch {
                expected: self.n_nodes,
                got: x.len(),
            });
        }
        Ok(self.energy_unchecked(x))
    }

    pub(crate) fn energy_unchecked(&self, x: &[f64]) -> f64 {
        self.edges()
            .map(|(i, j)| {
                let d = x[i] - x[j];
                d * d
            })
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quadratic_form(lap: &[f64], x: &[f64]) -> f64 {
        let n = x.len();
        (0..n)
            .map(|i| (0..n).map(|j| x[i] * lap[i * n + j] * x[j]).sum::<f64>())
            .sum()
    }

    #[test]
    fn generated_edge_counts() {
        let k3 = Graph::generate(GraphKind::Complete, 3).unwrap();
        assert_eq!(k3.directed_edge_count(), 6);
        let p3 = Graph::generate(GraphKind::Path, 3).unwrap();
        assert_eq!(p3.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 2)]);
        assert_eq!(p3.directed_edge_count(), 4);
        let s4 = Graph::generate(GraphKind::Star, 4).unwrap();
        assert_eq!(s4.degree(0), 3);
        assert!((1..4).all(|i| s4.degree(i) == 1));
        assert_eq!(
            Graph::generate(GraphKind::Ring, 5)
                .unwrap()
                .directed_edge_count(),
            10
        );
        assert_eq!(
            Graph::generate(GraphKind::Path, 2)
                .unwrap()
                .directed_edge_count(),
            2
        );
        for n in 2..12 {
            let g = Graph::generate(GraphKind::Complete, n).unwrap();
            assert_eq!(g.directed_edge_count(), n * (n - 1));
        }
    }

    #[test]
    fn generate_rejects_small_n() {
        assert!(matches!(
            Graph::generate(GraphKind::Ring, 2),
            Err(GraphError::TooFewNodes { min: 3, .. })
        ));
        assert!(Graph::generate(GraphKind::Complete, 1).is_err());
        assert!(Graph::generate(GraphKind::Star, 0).is_err());
    }

    #[test]
    fn edge_list_parsing() {
        let g = Graph::load_edge_list("0 1\n1 2").unwrap();
        assert_eq!(g, Graph::generate(GraphKind::Path, 3).unwrap());

        let g = Graph::load_edge_list("0 1\n1 0").unwrap();
        assert_eq!(g.n_nodes(), 2);
        assert_eq!(g.directed_edge_count(), 2);

        assert!(matches!(
            Graph::load_edge_list("0 0"),
            Err(GraphError::SelfLoop { line: 1, node: 0 })
        ));
        assert!(matches!(
            Graph::load_edge_list("0 1\n2"),
            Err(GraphError::MalformedLine { line: 2, .. })
        ));
        assert!(Graph::load_edge_list("0 x").is_err());
        assert!(Graph::load_edge_list("0 1 2").is_err());
        assert_eq!(Graph::load_edge_list("# nothing\n\n"), Err(GraphError::Empty));

        let g = Graph::load_edge_list("# header\n\n0 1\n  \n2 3\n").unwrap();
        assert_eq!(g.n_nodes(), 4);
        assert!(!g.is_connected());
    }

    #[test]
    fn connectivity() {
        assert!(Graph::generate(GraphKind::Complete, 3)
            .unwrap()
            .is_connected());
        let split = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert!(!split.is_connected());
        let single = Graph::from_edges(1, []).unwrap();
        assert!(single.is_connected());
    }

    #[test]
    fn energy_examples() {
        let k2 = Graph::generate(GraphKind::Complete, 2).unwrap();
        assert_eq!(k2.consensus_energy(&[1.0, 0.0]).unwrap(), 1.0);
        let k3 = Graph::generate(GraphKind::Complete, 3).unwrap();
        // Half the ordered-pair sum: ½(1 + 1 + 0 + 0 + 1 + 1).
        assert_eq!(k3.consensus_energy(&[1.0, 0.0, 0.0]).unwrap(), 2.0);
        assert_eq!(k3.consensus_energy(&[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(
            k3.consensus_energy(&[1.0, 0.0]),
            Err(GraphError::DimensionMismatch {
                expected: 3,
                got: 2
            })
        );
    }

    #[test]
    fn energy_vanishes_per_component() {
        let split = Graph::from_edges(4, [(0, 1), (2, 3)]).unwrap();
        assert_eq!(split.consensus_energy(&[2.0, 2.0, -1.0, -1.0]).unwrap(), 0.0);
        assert!(split.consensus_energy(&[2.0, 2.0, -1.0, 0.0]).unwrap() > 0.0);
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        for kind in [
            GraphKind::Complete,
            GraphKind::Ring,
            GraphKind::Path,
            GraphKind::Star,
        ] {
            for n in 3..9 {
                let g = Graph::generate(kind, n).unwrap();
                let lap = g.laplacian();
                for i in 0..n {
                    assert_eq!(lap[i * n..(i + 1) * n].iter().sum::<f64>(), 0.0);
                }
                let trace: f64 = (0..n).map(|i| lap[i * n + i]).sum();
                assert_eq!(trace as usize, g.directed_edge_count());
                assert_eq!(g.directed_edge_count() % 2, 0);
                let degree_sum: usize = (0..n).map(|i| g.degree(i)).sum();
                assert_eq!(degree_sum, g.directed_edge_count());
            }
        }
    }

    fn any_graph() -> impl Strategy<Value = Graph> {
        (
            prop_oneof![
                Just(GraphKind::Complete),
                Just(GraphKind::Ring),
                Just(GraphKind::Path),
                Just(GraphKind::Star)
            ],
            3usize..12,
        )
            .prop_map(|(kind, n)| Graph::generate(kind, n).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn energy_matches_laplacian_form(
            g in any_graph(),
            seed in prop::collection::vec(-10.0f64..10.0, 12),
        ) {
            let x = &seed[..g.n_nodes()];
            let energy = g.consensus_energy(x).unwrap();
            let reference = quadratic_form(&g.laplacian(), x);
            prop_assert!(energy >= 0.0);
            prop_assert!((energy - reference).abs() <= 1e-12 * reference.abs().max(1.0));
        }

        #[test]
        fn energy_ignores_common_shift(
            g in any_graph(),
            seed in prop::collection::vec(-10.0f64..10.0, 12),
            shift in -100.0f64..100.0,
        ) {
            let x = &seed[..g.n_nodes()];
            let shifted: Vec<f64> = x.iter().map(|v| v + shift).collect();
            let a = g.consensus_energy(x).unwrap();
            let b = g.consensus_energy(&shifted).unwrap();
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }
    }
}
