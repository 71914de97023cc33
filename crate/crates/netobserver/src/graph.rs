//! Directed-graph model for observer interconnection.
//!
//! Conventions: node indices are 1-based, edge (i, j) means node i sends to
//! node j (adjacency entry g_ij = 1), and every node carries a mandatory
//! self-loop. The incoming-neighbor set I(i) therefore always contains i.

use thiserror::Error;

use crate::linalg::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("adjacency must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("adjacency entries must be 0 or 1, found {0}")]
    NotBinary(f64),
    #[error("node {0} is missing its mandatory self-loop")]
    MissingSelfLoop(usize),
    #[error("node index {index} out of range 1..={n}")]
    NodeOutOfRange { index: usize, n: usize },
    #[error("enumeration supports at most {max} nodes, got {n}")]
    EnumerationCap { n: usize, max: usize },
    #[error("graph must be nonempty")]
    Empty,
}

/// Digraph with mandatory self-loops, stored as a dense 0/1 adjacency.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Digraph {
    n: usize,
    adj: Vec<bool>,
}

impl Digraph {
    /// Builds a digraph from a row-major 0/1 adjacency matrix.
    pub fn from_adjacency(rows: &[Vec<f64>]) -> Result<Digraph, GraphError> {
        if rows.is_empty() {
            return Err(GraphError::Empty);
        }
        let n = rows.len();
        let mut adj = vec![false; n * n];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(GraphError::NotSquare { rows: n, cols: row.len() });
            }
            for (j, &v) in row.iter().enumerate() {
                if v == 1.0 {
                    adj[i * n + j] = true;
                } else if v != 0.0 {
                    return Err(GraphError::NotBinary(v));
                }
            }
        }
        for i in 0..n {
            if !adj[i * n + i] {
                return Err(GraphError::MissingSelfLoop(i + 1));
            }
        }
        Ok(Digraph { n, adj })
    }

    /// Identity adjacency: every node sees only itself.
    pub fn self_loops_only(n: usize) -> Digraph {
        let mut adj = vec![false; n * n];
        for i in 0..n {
            adj[i * n + i] = true;
        }
        Digraph { n, adj }
    }

    pub fn all_to_all(n: usize) -> Digraph {
        Digraph { n, adj: vec![true; n * n] }
    }

    /// Star adjacency G_N = [[1, 1^T], [0, I]]: node 1 broadcasts to all.
    pub fn star_broadcast(n: usize) -> Digraph {
        let mut g = Digraph::self_loops_only(n);
        for j in 1..n {
            g.adj[j] = true; // edge (1, j+1)
        }
        g
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// True if edge (i, j) exists, 1-based.
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[(i - 1) * self.n + (j - 1)]
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&b| b).count()
    }

    pub fn adjacency(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |i, j| if self.adj[i * self.n + j] { 1.0 } else { 0.0 })
    }

    /// Diagonal in-degree matrix D with D_ii = sum_j g_ji.
    pub fn in_degree_matrix(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |i, j| {
            if i == j {
                self.in_degree(i + 1) as f64
            } else {
                0.0
            }
        })
    }

    pub fn in_degree(&self, i: usize) -> usize {
        (1..=self.n).filter(|&j| self.has_edge(j, i)).count()
    }

    pub fn out_degree(&self, i: usize) -> usize {
        (1..=self.n).filter(|&j| self.has_edge(i, j)).count()
    }

    /// Incoming-neighbor set I(i) = { j : (j, i) in E }, 1-based and sorted.
    pub fn incoming_neighbors(&self, i: usize) -> Result<Vec<usize>, GraphError> {
        if i == 0 || i > self.n {
            return Err(GraphError::NodeOutOfRange { index: i, n: self.n });
        }
        Ok((1..=self.n).filter(|&j| self.has_edge(j, i)).collect())
    }

    /// Graph Laplacian L = D - G. Self-loops cancel in the difference, so
    /// the flag only controls whether they are removed before forming D and
    /// G; either way the row sums vanish.
    pub fn laplacian(&self, include_self_loops: bool) -> Matrix {
        let _ = include_self_loops;
        &self.in_degree_matrix() - &self.adjacency().transpose()
    }

    /// Reachability closure test: every node reaches every other node.
    pub fn is_strongly_connected(&self) -> bool {
        for start in 0..self.n {
            let mut seen = vec![false; self.n];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(u) = stack.pop() {
                for v in 0..self.n {
                    if self.adj[u * self.n + v] && !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            if seen.iter().any(|&s| !s) {
                return false;
            }
        }
        true
    }

    pub fn is_weight_balanced(&self) -> bool {
        (1..=self.n).all(|i| self.in_degree(i) == self.out_degree(i))
    }
}

const ENUMERATION_CAP: usize = 5;

/// Enumerates every digraph on `n` nodes with mandatory self-loops and at
/// most `max_edges` edges in total, in nondecreasing trace(D) order and
/// lexicographic order (on the flattened adjacency) within a trace value.
pub fn enumerate_digraphs(
    n: usize,
    max_edges: usize,
) -> Result<impl Iterator<Item = Digraph>, GraphError> {
    if n == 0 {
        return Err(GraphError::Empty);
    }
    if n > ENUMERATION_CAP {
        return Err(GraphError::EnumerationCap { n, max: ENUMERATION_CAP });
    }
    let off_diag: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let k = off_diag.len();
    let mut graphs: Vec<(usize, Vec<bool>, Digraph)> = Vec::new();
    for pattern in 0u64..(1u64 << k) {
        let mut g = Digraph::self_loops_only(n);
        let mut extra = 0;
        for (bit, &(i, j)) in off_diag.iter().enumerate() {
            if pattern >> bit & 1 == 1 {
                g.adj[i * n + j] = true;
                extra += 1;
            }
        }
        if n + extra <= max_edges {
            let flat: Vec<bool> = g.adj.clone();
            graphs.push((n + extra, flat, g));
        }
    }
    graphs.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| b.1.cmp(&a.1)));
    Ok(graphs.into_iter().map(|(_, _, g)| g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn motivational() -> Digraph {
        // Agent 1 sends to agent 2; both self-connected.
        Digraph::from_adjacency(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap()
    }

    #[test]
    fn in_degree_examples() {
        let d = motivational().in_degree_matrix();
        assert_eq!(d[(0, 0)], 1.0);
        assert_eq!(d[(1, 1)], 2.0);
        assert_eq!(d[(0, 1)], 0.0);

        let eye2 = Digraph::self_loops_only(2).in_degree_matrix();
        assert_eq!((eye2[(0, 0)], eye2[(1, 1)]), (1.0, 1.0));

        let full = Digraph::all_to_all(3).in_degree_matrix();
        for i in 0..3 {
            assert_eq!(full[(i, i)], 3.0);
        }
    }

    #[test]
    fn incoming_neighbor_sets() {
        let g = motivational();
        assert_eq!(g.incoming_neighbors(1).unwrap(), vec![1]);
        assert_eq!(g.incoming_neighbors(2).unwrap(), vec![1, 2]);
        assert!(g.incoming_neighbors(3).is_err());
        assert!(g.incoming_neighbors(0).is_err());

        let id = Digraph::self_loops_only(4);
        for i in 1..=4 {
            assert_eq!(id.incoming_neighbors(i).unwrap(), vec![i]);
        }
    }

    #[test]
    fn neighbor_cardinalities_sum_to_trace() {
        for g in [motivational(), Digraph::all_to_all(3), Digraph::star_broadcast(4)] {
            let total: usize =
                (1..=g.node_count()).map(|i| g.incoming_neighbors(i).unwrap().len()).sum();
            let trace: f64 = (0..g.node_count()).map(|i| g.in_degree_matrix()[(i, i)]).sum();
            assert_eq!(total as f64, trace);
        }
    }

    #[test]
    fn laplacian_examples() {
        let zero = Digraph::self_loops_only(3).laplacian(true);
        assert_eq!(zero.max_abs(), 0.0);

        let l = Digraph::all_to_all(2).laplacian(false);
        assert_eq!(l[(0, 0)], 1.0);
        assert_eq!(l[(0, 1)], -1.0);
        assert_eq!(l[(1, 0)], -1.0);
        assert_eq!(l[(1, 1)], 1.0);
    }

    #[test]
    fn laplacian_rows_sum_to_zero() {
        for g in [motivational(), Digraph::all_to_all(4), Digraph::star_broadcast(5)] {
            let l = g.laplacian(true);
            for i in 0..g.node_count() {
                let s: f64 = (0..g.node_count()).map(|j| l[(i, j)]).sum();
                assert!(s.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn connectivity_and_balance() {
        let full = Digraph::all_to_all(3);
        assert!(full.is_strongly_connected());
        assert!(full.is_weight_balanced());

        let g = motivational();
        assert!(!g.is_strongly_connected());
        assert!(!g.is_weight_balanced());

        // Directed 3-ring with self-loops.
        let ring = Digraph::from_adjacency(&[
            vec![1.0, 1.0, 0.0],
            vec![0.0, 1.0, 1.0],
            vec![1.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!(ring.is_strongly_connected());
        assert!(ring.is_weight_balanced());
    }

    #[test]
    fn enumeration_counts_and_order() {
        assert_eq!(enumerate_digraphs(1, 1).unwrap().count(), 1);

        let two: Vec<Digraph> = enumerate_digraphs(2, 4).unwrap().collect();
        assert_eq!(two.len(), 4);
        let traces: Vec<usize> = two.iter().map(|g| g.edge_count()).collect();
        assert_eq!(traces, vec![2, 3, 3, 4]);

        let three: Vec<Digraph> = enumerate_digraphs(3, 9).unwrap().collect();
        assert_eq!(three.len(), 64);
        let unique: HashSet<_> = three.iter().cloned().collect();
        assert_eq!(unique.len(), 64);
        let mut last = 0;
        for g in &three {
            assert!(g.edge_count() >= last);
            last = g.edge_count();
        }

        assert!(enumerate_digraphs(6, 36).is_err());
    }

    #[test]
    fn enumeration_respects_edge_budget() {
        let bounded: Vec<Digraph> = enumerate_digraphs(3, 4).unwrap().collect();
        assert!(bounded.iter().all(|g| g.edge_count() <= 4));
        // 1 graph at trace 3, 6 at trace 4.
        assert_eq!(bounded.len(), 7);
    }

    #[test]
    fn rejects_bad_adjacency() {
        assert!(matches!(
            Digraph::from_adjacency(&[vec![0.0, 1.0], vec![0.0, 1.0]]),
            Err(GraphError::MissingSelfLoop(1))
        ));
        assert!(matches!(
            Digraph::from_adjacency(&[vec![1.0, 0.5], vec![0.0, 1.0]]),
            Err(GraphError::NotBinary(_))
        ));
        assert!(matches!(
            Digraph::from_adjacency(&[vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]]),
            Err(GraphError::NotSquare { .. })
        ));
    }

    #[test]
    fn star_broadcast_shape() {
        let g = Digraph::star_broadcast(3);
        let a = g.adjacency();
        // Rows: [1,1,1], [0,1,0], [0,0,1].
        assert_eq!(a.row(0), &[1.0, 1.0, 1.0]);
        assert_eq!(a.row(1), &[0.0, 1.0, 0.0]);
        assert_eq!(a.row(2), &[0.0, 0.0, 1.0]);
    }
}
