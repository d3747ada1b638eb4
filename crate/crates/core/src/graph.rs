//! Tree communication graphs with a leader/follower partition.
//!
//! Vertices are numbered `1..=n` at the public surface. The first `n_f`
//! vertices are followers, the remaining `n_l = n - n_f` are leaders. Every
//! edge `(head, tail)` is oriented as given, so the k-th relative state is
//! `xbar_k = x_head - x_tail` and the incidence matrix carries `+1` at the head
//! row and `-1` at the tail row of column k.
//!
//! ```text
//! L   = D Dᵀ        (n × n graph Laplacian)
//! L_e = Dᵀ D        (m × m edge Laplacian, positive definite on trees)
//! D   = [D_f; D_i]  (follower rows over leader rows)
//! ```

use std::collections::{BTreeSet, HashSet, VecDeque};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("vertex {vertex} is outside 1..={n}")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("duplicate edge between {0} and {1}")]
    DuplicateEdge(usize, usize),
    #[error("not a tree: {0}")]
    NotATree(String),
    #[error("bad leader/follower partition: {0}")]
    BadPartition(String),
}

/// A validated tree with the followers-first partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    edges: Vec<(usize, usize)>,
    n_followers: usize,
}

impl Topology {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of edges, always `n - 1`.
    pub fn m(&self) -> usize {
        self.edges.len()
    }

    /// Oriented edges `(head, tail)`, 1-based.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_followers(&self) -> usize {
        self.n_followers
    }

    pub fn n_leaders(&self) -> usize {
        self.n - self.n_followers
    }

    /// Leader vertices, 1-based and ascending.
    pub fn leaders(&self) -> Vec<usize> {
        (self.n_followers + 1..=self.n).collect()
    }

    pub fn is_leader(&self, vertex: usize) -> bool {
        vertex > self.n_followers && vertex <= self.n
    }

    /// Relative states `xbar = Dᵀ x`.
    pub fn edge_states(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        self.edges.iter().map(|&(h, t)| x[h - 1] - x[t - 1]).collect()
    }

    /// Absolute positions reproducing the relative states `xbar` exactly.
    ///
    /// Vertex `n` (the highest-index leader) is pinned at 0 and the rest is
    /// filled in by a breadth-first walk; on a tree the answer is unique.
    pub fn positions_from_relative(&self, xbar: &[f64]) -> Vec<f64> {
        assert_eq!(xbar.len(), self.m(), "xbar length must equal edge count");
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); self.n];
        for (k, &(h, t)) in self.edges.iter().enumerate() {
            incident[h - 1].push(k);
            incident[t - 1].push(k);
        }
        let mut x = vec![f64::NAN; self.n];
        let mut seen = vec![false; self.n];
        let root = self.n - 1;
        x[root] = 0.0;
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &k in &incident[v] {
                let (h, t) = (self.edges[k].0 - 1, self.edges[k].1 - 1);
                let (other, value) = if h == v {
                    (t, x[v] - xbar[k])
                } else {
                    (h, x[v] + xbar[k])
                };
                if !seen[other] {
                    seen[other] = true;
                    x[other] = value;
                    queue.push_back(other);
                }
            }
        }
        x
    }

    /// True when the undirected edge set is the path `1 - 2 - ... - n` with
    /// edge k joining vertices k and k+1.
    pub fn is_chain(&self) -> bool {
        self.edges
            .iter()
            .enumerate()
            .all(|(k, &(h, t))| (h.min(t), h.max(t)) == (k + 1, k + 2))
    }

    /// True when every edge touches vertex `n` (the centre), with `n >= 3`.
    pub fn is_star(&self) -> bool {
        self.n >= 3 && self.edges.iter().all(|&(h, t)| h == self.n || t == self.n)
    }
}

/// Validates and builds a [`Topology`].
///
/// `edges` are 1-based `(head, tail)` pairs; `leaders` must be exactly the
/// trailing block `n_f+1..=n` of the vertex range.
pub fn build_topology(n: usize, edges: &[(usize, usize)], leaders: &[usize]) -> Result<Topology, GraphError> {
    if n < 2 {
        return Err(GraphError::NotATree(format!("need at least 2 vertices, got {n}")));
    }
    if edges.is_empty() {
        return Err(GraphError::NotATree("edge list is empty".into()));
    }
    let mut seen = HashSet::with_capacity(edges.len());
    for &(h, t) in edges {
        for v in [h, t] {
            if v == 0 || v > n {
                return Err(GraphError::VertexOutOfRange { vertex: v, n });
            }
        }
        if h == t {
            return Err(GraphError::NotATree(format!("self-loop at vertex {h}")));
        }
        if !seen.insert((h.min(t), h.max(t))) {
            return Err(GraphError::DuplicateEdge(h, t));
        }
    }

    let leader_set: BTreeSet<usize> = leaders.iter().copied().collect();
    if leader_set.is_empty() {
        return Err(GraphError::BadPartition("leader set is empty".into()));
    }
    if let Some(&v) = leader_set.iter().find(|&&v| v == 0 || v > n) {
        return Err(GraphError::VertexOutOfRange { vertex: v, n });
    }
    let n_followers = n - leader_set.len();
    if leader_set.iter().copied().ne(n_followers + 1..=n) {
        return Err(GraphError::BadPartition(format!(
            "leaders {leader_set:?} are not the trailing block {}..={n}",
            n_followers + 1
        )));
    }

    if edges.len() != n - 1 {
        return Err(GraphError::NotATree(format!(
            "{} edges for {n} vertices, a tree has {}",
            edges.len(),
            n - 1
        )));
    }
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut v: usize) -> usize {
        while parent[v] != v {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        v
    }
    for &(h, t) in edges {
        let (a, b) = (find(&mut parent, h - 1), find(&mut parent, t - 1));
        if a == b {
            return Err(GraphError::NotATree(format!("edge ({h}, {t}) closes a cycle")));
        }
        parent[a] = b;
    }

    Ok(Topology {
        n,
        edges: edges.to_vec(),
        n_followers,
    })
}

/// Chain `1 - 2 - ... - n` with edges `(i, i+1)` and followers `1..=n_f`.
pub fn make_chain(n: usize, n_followers: usize) -> Result<Topology, GraphError> {
    if n_followers >= n {
        return Err(GraphError::BadPartition(format!(
            "{n_followers} followers leave no leader among {n} agents"
        )));
    }
    let edges: Vec<_> = (1..n).map(|i| (i, i + 1)).collect();
    let leaders: Vec<_> = (n_followers + 1..=n).collect();
    build_topology(n, &edges, &leaders)
}

/// Star centred on vertex `n` with edges `(i, n)`, heads at the leaves.
pub fn make_star(n: usize, leaders: &[usize]) -> Result<Topology, GraphError> {
    let edges: Vec<_> = (1..n).map(|i| (i, n)).collect();
    build_topology(n, &edges, leaders)
}

/// Dense matrices derived from a [`Topology`].
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedMatrices {
    /// Incidence matrix, n × m.
    pub d: DMatrix<f64>,
    /// Graph Laplacian `D Dᵀ`.
    pub laplacian: DMatrix<f64>,
    /// Edge Laplacian `Dᵀ D`.
    pub edge_laplacian: DMatrix<f64>,
    /// Follower rows of `D`, n_f × m.
    pub d_f: DMatrix<f64>,
    /// Leader rows of `D`, n_l × m.
    pub d_i: DMatrix<f64>,
    /// `D_iᵀ D_i`, m × m.
    pub di_t_di: DMatrix<f64>,
    /// Input matrix, n × n_l: zero over followers, identity over leaders.
    pub b: DMatrix<f64>,
}

/// Node-space blocks of the partitioned Laplacian,
/// `L = [[A_f, B_f], [B_fᵀ, A_i]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePartition {
    pub a_f: DMatrix<f64>,
    pub b_f: DMatrix<f64>,
    pub a_i: DMatrix<f64>,
}

pub fn derive_matrices(t: &Topology) -> DerivedMatrices {
    let (n, m, nf) = (t.n(), t.m(), t.n_followers());
    let mut d = DMatrix::zeros(n, m);
    for (k, &(h, tail)) in t.edges().iter().enumerate() {
        d[(h - 1, k)] = 1.0;
        d[(tail - 1, k)] = -1.0;
    }
    let laplacian = &d * d.transpose();
    let edge_laplacian = d.transpose() * &d;
    let d_f = d.rows(0, nf).into_owned();
    let d_i = d.rows(nf, n - nf).into_owned();
    let di_t_di = d_i.transpose() * &d_i;
    let mut b = DMatrix::zeros(n, n - nf);
    for j in 0..n - nf {
        b[(nf + j, j)] = 1.0;
    }
    DerivedMatrices {
        d,
        laplacian,
        edge_laplacian,
        d_f,
        d_i,
        di_t_di,
        b,
    }
}

impl DerivedMatrices {
    pub fn n(&self) -> usize {
        self.d.nrows()
    }

    pub fn m(&self) -> usize {
        self.d.ncols()
    }

    pub fn n_followers(&self) -> usize {
        self.d_f.nrows()
    }

    pub fn n_leaders(&self) -> usize {
        self.d_i.nrows()
    }

    pub fn node_partition(&self) -> NodePartition {
        NodePartition {
            a_f: &self.d_f * self.d_f.transpose(),
            b_f: &self.d_f * self.d_i.transpose(),
            a_i: &self.d_i * self.d_i.transpose(),
        }
    }

    /// `Dᵀ x`.
    pub fn edge_states(&self, x: &DVector<f64>) -> DVector<f64> {
        self.d.tr_mul(x)
    }
}
