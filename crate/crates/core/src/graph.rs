//! Conditional-independence graphs and the builders used by the experiments.

use crate::error::{Error, Result};
use crate::sparse::{fill_reducing_order, Permutation, SparseSpd};

/// Undirected graph over `0..p` without self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CIGraph {
    adj: Vec<Vec<usize>>,
}

/// Integration scheme whose one-step stencil induces a Lorenz-96 graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Euler,
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighborhood {
    Four,
    Eight,
}

impl CIGraph {
    pub fn empty(p: usize) -> Self {
        Self {
            adj: vec![Vec::new(); p],
        }
    }

    pub fn complete(p: usize) -> Self {
        Self {
            adj: (0..p)
                .map(|i| (0..p).filter(|&j| j != i).collect())
                .collect(),
        }
    }

    /// Builds a graph from an edge list. Self-loops are dropped and
    /// duplicates merged.
    pub fn from_edges<I>(p: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adj = vec![Vec::new(); p];
        for (i, j) in edges {
            if i >= p || j >= p {
                return Err(Error::InvalidInput(format!(
                    "edge ({i}, {j}) outside a graph with {p} vertices"
                )));
            }
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        Ok(Self { adj })
    }

    pub fn p(&self) -> usize {
        self.adj.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn n_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i].binary_search(&j).is_ok()
    }

    /// Edges `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n_edges());
        for (i, a) in self.adj.iter().enumerate() {
            out.extend(a.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    pub fn is_subgraph_of(&self, other: &CIGraph) -> bool {
        self.p() == other.p() && self.edges().iter().all(|&(i, j)| other.has_edge(i, j))
    }

    /// Relabels vertex `order[k]` as `k`.
    pub fn permute(&self, perm: &Permutation) -> Result<Self> {
        if perm.len() != self.p() {
            return Err(Error::DimensionMismatch {
                context: "graph permutation",
                expected: self.p(),
                found: perm.len(),
            });
        }
        let pos = perm.inverse();
        let pos = pos.order();
        Self::from_edges(
            self.p(),
            self.edges().into_iter().map(|(i, j)| (pos[i], pos[j])),
        )
    }

    /// A diagonally dominant matrix with exactly this graph's pattern.
    /// Only the pattern matters to symbolic routines.
    pub fn to_pattern(&self) -> SparseSpd {
        let trip = (0..self.p())
            .map(|i| (i, i, self.degree(i) as f64 + 1.0))
            .chain(self.edges().into_iter().map(|(i, j)| (j, i, -1.0)));
        SparseSpd::from_triplets(self.p(), trip).expect("graph indices are in range")
    }

    pub fn fill_reducing_order(&self) -> Result<Permutation> {
        fill_reducing_order(&self.to_pattern())
    }
}

/// AR-1 chain `t -- t+1`.
pub fn chain_graph(p: usize) -> CIGraph {
    CIGraph::from_edges(p, (1..p).map(|t| (t - 1, t))).expect("chain indices are in range")
}

/// Vertex `j` adjacent to `j±1, …, j±k` modulo `p`.
pub fn circular_markov_graph(p: usize, order: usize) -> Result<CIGraph> {
    if p < 3 || order == 0 || 2 * order >= p {
        return Err(Error::OrderTooLarge { p, order });
    }
    let edges = (0..p).flat_map(|j| (1..=order).map(move |k| (j, (j + k) % p)));
    CIGraph::from_edges(p, edges)
}

/// Undirected graph induced by one integration step of Lorenz-96.
///
/// Euler updates `x_j` from `x_{j-2..j+1}`; RK4 composes four stages and
/// reaches `x_{j-6..j+3}`. Two states are joined when their stencils share
/// an input, which gives circular windows of half-width 3 (Euler, degree 6)
/// and 9 (RK4, degree 18).
pub fn lorenz96_stencil_graph(m: usize, scheme: Scheme) -> Result<CIGraph> {
    let (min, reach, name) = match scheme {
        Scheme::Euler => (4, 3, "euler"),
        Scheme::Rk4 => (13, 9, "rk4"),
    };
    if m < min {
        return Err(Error::TooFewStates {
            m,
            min,
            scheme: name,
        });
    }
    let reach = reach.min(m / 2);
    let edges = (0..m).flat_map(|j| (1..=reach).map(move |k| (j, (j + k) % m)));
    CIGraph::from_edges(m, edges)
}

/// Lattice over a `rows x cols` grid with vertex `r * cols + c`.
pub fn lattice_graph(rows: usize, cols: usize, nb: Neighborhood) -> CIGraph {
    let idx = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((idx(r, c), idx(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((idx(r, c), idx(r + 1, c)));
                if nb == Neighborhood::Eight {
                    if c + 1 < cols {
                        edges.push((idx(r, c), idx(r + 1, c + 1)));
                    }
                    if c > 0 {
                        edges.push((idx(r, c), idx(r + 1, c - 1)));
                    }
                }
            }
        }
    }
    CIGraph::from_edges(rows * cols, edges).expect("lattice indices are in range")
}

/// Edges wherever `m` stores a nonzero off-diagonal entry.
pub fn graph_from_sparsity(m: &SparseSpd) -> CIGraph {
    let edges = m
        .triplets()
        .filter(|&(i, j, v)| i != j && v != 0.0)
        .map(|(i, j, _)| (i, j));
    CIGraph::from_edges(m.dim(), edges).expect("matrix indices are in range")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_basics() {
        assert_eq!(chain_graph(1).n_edges(), 0);
        assert_eq!(chain_graph(4).edges(), vec![(0, 1), (1, 2), (2, 3)]);
        let g = chain_graph(100);
        assert_eq!(g.n_edges(), 99);
        assert_eq!(g.max_degree(), 2);
    }

    #[test]
    fn circular_degrees() {
        let g = circular_markov_graph(40, 1).unwrap();
        assert_eq!(g.n_edges(), 40);
        assert!((0..40).all(|j| g.degree(j) == 2));
        assert_eq!(circular_markov_graph(5, 2).unwrap(), CIGraph::complete(5));
        let g = circular_markov_graph(40, 7).unwrap();
        assert!((0..40).all(|j| g.degree(j) == 14));
        assert!(matches!(
            circular_markov_graph(10, 5),
            Err(Error::OrderTooLarge { .. })
        ));
    }

    #[test]
    fn circular_edges_grow_with_order() {
        let mut prev = 0;
        for k in 1..20 {
            let e = circular_markov_graph(40, k).unwrap().n_edges();
            assert!(e > prev);
            prev = e;
        }
    }

    #[test]
    fn lorenz_stencils() {
        let eu = lorenz96_stencil_graph(40, Scheme::Euler).unwrap();
        let rk = lorenz96_stencil_graph(40, Scheme::Rk4).unwrap();
        assert!((0..40).all(|j| eu.degree(j) == 6));
        assert!((0..40).all(|j| rk.degree(j) == 18));
        assert!(eu.is_subgraph_of(&rk));
        assert!(lorenz96_stencil_graph(12, Scheme::Rk4).is_err());
        assert!(lorenz96_stencil_graph(3, Scheme::Euler).is_err());
    }

    #[test]
    fn lattice_edge_counts() {
        assert_eq!(lattice_graph(1, 1, Neighborhood::Eight).n_edges(), 0);
        assert_eq!(lattice_graph(3, 3, Neighborhood::Four).n_edges(), 12);
        let (r, c) = (10, 10);
        assert_eq!(
            lattice_graph(r, c, Neighborhood::Eight).n_edges(),
            4 * r * c - 3 * r - 3 * c + 2
        );
    }

    #[test]
    fn sparsity_round_trip() {
        assert_eq!(graph_from_sparsity(&SparseSpd::identity(4)).n_edges(), 0);
        let g = lattice_graph(4, 5, Neighborhood::Eight);
        assert_eq!(graph_from_sparsity(&g.to_pattern()), g);
    }

    #[test]
    fn relabelling_is_equivariant() {
        let g = chain_graph(4);
        let perm = Permutation::reverse(4);
        let h = g.permute(&perm).unwrap();
        assert_eq!(h, g);
        let perm =
            Permutation::new(vec![2, 0, 3, 1], crate::sparse::PermutationKind::Composite).unwrap();
        let h = g.permute(&perm).unwrap();
        // Vertex order[k] became k, so edge (a, b) maps to (pos[a], pos[b]).
        assert!(h.has_edge(1, 3) && h.has_edge(3, 0) && h.has_edge(0, 2));
        assert_eq!(h.n_edges(), 3);
    }

    #[test]
    fn lattice_fill_reducing_beats_row_major() {
        let g = lattice_graph(8, 8, Neighborhood::Four);
        let m = g.to_pattern();
        let perm = g.fill_reducing_order().unwrap();
        let f = crate::sparse::fill_in(&m, &perm).unwrap();
        let f0 = crate::sparse::fill_in(&m, &Permutation::identity(64)).unwrap();
        assert!(f < f0, "fill {f} vs natural {f0}");
    }
}
