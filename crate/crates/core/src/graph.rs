//! Network topology: validation, named shapes, random generators and BFS metrics.

use std::collections::{BTreeSet, VecDeque};

use serde::Serialize;

use crate::error::GraphError;
use crate::rng::SeededStream;

/// Regenerations allowed before a random generator gives up on connectivity.
pub const CONNECTIVITY_RETRIES: usize = 1000;

/// Undirected, simple, connected graph on agents `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkGraph {
    adjacency: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
    diameter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegreeStats {
    pub min: usize,
    pub max: usize,
    pub mean: f64,
}

impl NetworkGraph {
    /// Builds a graph from an explicit edge list.
    ///
    /// Rejects self-loops, repeated edges (in either orientation), ids out of
    /// range and disconnected edge sets.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewAgents(n));
        }
        let mut seen = BTreeSet::new();
        let mut adjacency = vec![Vec::new(); n];
        for &(a, b) in edges {
            for id in [a, b] {
                if id >= n {
                    return Err(GraphError::InvalidAgent { id, n });
                }
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            let key = (a.min(b), a.max(b));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateEdge(key.0, key.1));
            }
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let diameter = bfs_diameter(&adjacency)?;
        Ok(NetworkGraph {
            adjacency,
            edges: seen.into_iter().collect(),
            diameter,
        })
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_edges(n, &edges)
    }

    /// Star with every other agent attached to `center`.
    pub fn star(n: usize, center: usize) -> Result<Self, GraphError> {
        if center >= n {
            return Err(GraphError::InvalidAgent { id: center, n });
        }
        let edges: Vec<_> = (0..n).filter(|&i| i != center).map(|i| (center, i)).collect();
        Self::from_edges(n, &edges)
    }

    /// Cycle `0 - 1 - ... - (n-1) - 0`; needs `n >= 3`.
    pub fn ring(n: usize) -> Result<Self, GraphError> {
        if n < 3 {
            return Err(GraphError::InvalidParameter(format!(
                "a ring needs at least 3 agents, got {n}"
            )));
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Self::from_edges(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
        Self::from_edges(n, &edges)
    }

    /// Random geometric graph: agents uniform on `[0, side]²`, linked when
    /// their Euclidean distance is strictly below `radius`.
    ///
    /// Placements are redrawn from the same seeded stream until the graph is
    /// connected, at most [`CONNECTIVITY_RETRIES`] times.
    pub fn geometric(n: usize, side: f64, radius: f64, seed: u64) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewAgents(n));
        }
        if !(side > 0.0 && side.is_finite()) {
            return Err(GraphError::InvalidParameter(format!(
                "side must be positive, got {side}"
            )));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GraphError::InvalidParameter(format!(
                "radius must be positive, got {radius}"
            )));
        }
        let mut stream = SeededStream::new(seed);
        for _ in 0..CONNECTIVITY_RETRIES {
            let points: Vec<(f64, f64)> = (0..n)
                .map(|_| {
                    let x = stream.uniform_scaled(side);
                    let y = stream.uniform_scaled(side);
                    (x, y)
                })
                .collect();
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    let dx = points[i].0 - points[j].0;
                    let dy = points[i].1 - points[j].1;
                    if dx.hypot(dy) < radius {
                        edges.push((i, j));
                    }
                }
            }
            match Self::from_edges(n, &edges) {
                Ok(g) => return Ok(g),
                Err(GraphError::Disconnected { .. }) => continue,
                Err(other) => return Err(other),
            }
        }
        Err(GraphError::GenerationFailed {
            attempts: CONNECTIVITY_RETRIES,
        })
    }

    /// Erdős–Rényi graph: each pair `i < j` (visited in lexicographic order)
    /// is an edge with probability `p`. Redrawn until connected.
    pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewAgents(n));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(GraphError::InvalidParameter(format!(
                "edge probability must lie in [0, 1], got {p}"
            )));
        }
        let mut stream = SeededStream::new(seed);
        for _ in 0..CONNECTIVITY_RETRIES {
            let mut edges = Vec::new();
            for i in 0..n {
                for j in (i + 1)..n {
                    if stream.uniform() < p {
                        edges.push((i, j));
                    }
                }
            }
            match Self::from_edges(n, &edges) {
                Ok(g) => return Ok(g),
                Err(GraphError::Disconnected { .. }) => continue,
                Err(other) => return Err(other),
            }
        }
        Err(GraphError::GenerationFailed {
            attempts: CONNECTIVITY_RETRIES,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.adjacency.len()
    }

    /// Neighbors of `i` in ascending order.
    pub fn neighbors(&self, i: usize) -> Result<&[usize], GraphError> {
        self.adjacency
            .get(i)
            .map(Vec::as_slice)
            .ok_or(GraphError::InvalidAgent {
                id: i,
                n: self.n_agents(),
            })
    }

    pub fn degree(&self, i: usize) -> Result<usize, GraphError> {
        self.neighbors(i).map(<[usize]>::len)
    }

    /// Edges as `(low, high)` pairs in lexicographic order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn diameter(&self) -> usize {
        self.diameter
    }

    pub fn degree_stats(&self) -> DegreeStats {
        let degrees: Vec<usize> = self.adjacency.iter().map(Vec::len).collect();
        DegreeStats {
            min: degrees.iter().copied().min().unwrap_or(0),
            max: degrees.iter().copied().max().unwrap_or(0),
            mean: degrees.iter().sum::<usize>() as f64 / degrees.len() as f64,
        }
    }

    pub(crate) fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }
}

fn bfs_distances(adjacency: &[Vec<usize>], source: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adjacency.len()];
    let mut queue = VecDeque::new();
    dist[source] = Some(0);
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].expect("queued nodes have a distance");
        for &w in &adjacency[u] {
            if dist[w].is_none() {
                dist[w] = Some(du + 1);
                queue.push_back(w);
            }
        }
    }
    dist
}

/// Longest BFS shortest-path length over all node pairs.
///
/// Fails on a disconnected adjacency list.
pub fn bfs_diameter(adjacency: &[Vec<usize>]) -> Result<usize, GraphError> {
    let n = adjacency.len();
    if n == 0 {
        return Ok(0);
    }
    let mut diameter = 0;
    for source in 0..n {
        let dist = bfs_distances(adjacency, source);
        let reached = dist.iter().filter(|d| d.is_some()).count();
        if reached < n {
            return Err(GraphError::Disconnected { reached, n });
        }
        diameter = diameter.max(dist.into_iter().flatten().max().unwrap_or(0));
    }
    Ok(diameter)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbors_of_named_shapes() {
        let line = NetworkGraph::path(5).unwrap();
        assert_eq!(line.neighbors(1).unwrap(), &[0, 2]);
        let star = NetworkGraph::star(5, 4).unwrap();
        assert_eq!(star.neighbors(4).unwrap(), &[0, 1, 2, 3]);
        let ring = NetworkGraph::ring(10).unwrap();
        assert_eq!(ring.neighbors(0).unwrap(), &[1, 9]);
    }

    #[test]
    fn neighbors_rejects_bad_id() {
        let line = NetworkGraph::path(5).unwrap();
        assert_eq!(line.neighbors(5), Err(GraphError::InvalidAgent { id: 5, n: 5 }));
    }

    #[test]
    fn diameters_of_named_shapes() {
        assert_eq!(NetworkGraph::path(5).unwrap().diameter(), 4);
        assert_eq!(NetworkGraph::star(5, 4).unwrap().diameter(), 2);
        assert_eq!(NetworkGraph::ring(10).unwrap().diameter(), 5);
        for k in 2..=10 {
            assert_eq!(NetworkGraph::path(k).unwrap().diameter(), k - 1);
        }
        for k in 2..=10 {
            assert_eq!(NetworkGraph::ring(2 * k).unwrap().diameter(), k);
        }
    }

    #[test]
    fn disconnected_edges_are_rejected() {
        let err = NetworkGraph::from_edges(4, &[(0, 1), (2, 3)]).unwrap_err();
        assert_eq!(err, GraphError::Disconnected { reached: 2, n: 4 });
        let adjacency = vec![vec![1], vec![0], vec![]];
        assert!(bfs_diameter(&adjacency).is_err());
    }

    #[test]
    fn malformed_edges_are_rejected() {
        assert_eq!(
            NetworkGraph::from_edges(3, &[(0, 0), (1, 2)]),
            Err(GraphError::SelfLoop(0))
        );
        assert_eq!(
            NetworkGraph::from_edges(3, &[(0, 1), (1, 0), (1, 2)]),
            Err(GraphError::DuplicateEdge(0, 1))
        );
        assert_eq!(
            NetworkGraph::from_edges(3, &[(0, 3)]),
            Err(GraphError::InvalidAgent { id: 3, n: 3 })
        );
        assert_eq!(NetworkGraph::from_edges(1, &[]), Err(GraphError::TooFewAgents(1)));
    }

    #[test]
    fn geometric_generator_cases() {
        let g = NetworkGraph::geometric(50, 4.0, 1.0, 7).unwrap();
        assert_eq!(g.n_agents(), 50);
        let pair = NetworkGraph::geometric(2, 1.0, 2.0, 3).unwrap();
        assert_eq!(pair.edges(), &[(0, 1)]);
        assert_eq!(
            NetworkGraph::geometric(50, 4.0, 0.01, 7),
            Err(GraphError::GenerationFailed {
                attempts: CONNECTIVITY_RETRIES
            })
        );
    }

    #[test]
    fn erdos_renyi_generator_cases() {
        let g = NetworkGraph::erdos_renyi(50, 0.1, 3).unwrap();
        assert_eq!(g.n_agents(), 50);
        let tri = NetworkGraph::erdos_renyi(3, 1.0, 0).unwrap();
        assert_eq!(tri.edges(), &[(0, 1), (0, 2), (1, 2)]);
        assert!(matches!(
            NetworkGraph::erdos_renyi(10, 0.0, 0),
            Err(GraphError::GenerationFailed { .. })
        ));
    }

    #[test]
    fn generators_are_reproducible() {
        let a = NetworkGraph::geometric(30, 3.0, 1.0, 99).unwrap();
        let b = NetworkGraph::geometric(30, 3.0, 1.0, 99).unwrap();
        assert_eq!(a, b);
        let c = NetworkGraph::erdos_renyi(30, 0.2, 99).unwrap();
        let d = NetworkGraph::erdos_renyi(30, 0.2, 99).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn degree_stats_of_star() {
        let stats = NetworkGraph::star(5, 4).unwrap().degree_stats();
        assert_eq!((stats.min, stats.max), (1, 4));
        assert!((stats.mean - 1.6).abs() < 1e-15);
    }
}
