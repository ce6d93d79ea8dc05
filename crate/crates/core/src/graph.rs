//! Undirected weighted graphs in CSR form and the Laplacian-family operators
//! built on top of them.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::linalg::{dot, CsrMatrix, DenseMatrix};

/// Undirected pair stored as `(min, max)`.
pub type EdgePair = (usize, usize);

#[inline]
pub fn canonical(p: usize, q: usize) -> EdgePair {
    if p <= q {
        (p, q)
    } else {
        (q, p)
    }
}

/// Symmetric adjacency in compressed sparse row form.
///
/// Both `(p, q)` and `(q, p)` are stored so a Laplacian product is a single
/// sweep over the rows. Self-loops are never stored and weights are strictly
/// positive.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseGraph {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    column_indices: Vec<usize>,
    weights: Vec<f64>,
}

impl SparseGraph {
    pub fn empty(num_nodes: usize) -> Self {
        Self {
            num_nodes,
            row_offsets: vec![0; num_nodes + 1],
            column_indices: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// Builds a graph from undirected weighted edges, each listed once in
    /// either orientation.
    pub fn new(num_nodes: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        let mut degree = vec![0usize; num_nodes];
        for &(p, q, w) in edges {
            if p >= num_nodes || q >= num_nodes {
                return Err(Error::Validation(format!(
                    "edge ({p}, {q}) references a node outside 0..{num_nodes}"
                )));
            }
            if p == q {
                return Err(Error::Validation(format!("self-loop at node {p}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Validation(format!(
                    "edge ({p}, {q}) has non-positive weight {w}"
                )));
            }
            if !seen.insert(canonical(p, q)) {
                let (a, b) = canonical(p, q);
                return Err(Error::Validation(format!("duplicate edge ({a}, {b})")));
            }
            degree[p] += 1;
            degree[q] += 1;
        }

        let mut row_offsets = Vec::with_capacity(num_nodes + 1);
        row_offsets.push(0);
        for d in &degree {
            row_offsets.push(row_offsets.last().unwrap() + d);
        }
        let nnz = *row_offsets.last().unwrap();
        let mut cursor = row_offsets[..num_nodes].to_vec();
        let mut column_indices = vec![0; nnz];
        let mut weights = vec![0.0; nnz];
        for &(p, q, w) in edges {
            for (a, b) in [(p, q), (q, p)] {
                column_indices[cursor[a]] = b;
                weights[cursor[a]] = w;
                cursor[a] += 1;
            }
        }
        for i in 0..num_nodes {
            let span = row_offsets[i]..row_offsets[i + 1];
            let mut row: Vec<(usize, f64)> = column_indices[span.clone()]
                .iter()
                .copied()
                .zip(weights[span.clone()].iter().copied())
                .collect();
            row.sort_unstable_by_key(|&(c, _)| c);
            for (k, (c, w)) in span.zip(row) {
                column_indices[k] = c;
                weights[k] = w;
            }
        }
        Ok(Self {
            num_nodes,
            row_offsets,
            column_indices,
            weights,
        })
    }

    /// Unit-weight graph from undirected pairs.
    pub fn from_pairs(num_nodes: usize, pairs: &[EdgePair]) -> Result<Self> {
        let edges: Vec<_> = pairs.iter().map(|&(p, q)| (p, q, 1.0)).collect();
        Self::new(num_nodes, &edges)
    }

    #[inline]
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of undirected edges.
    #[inline]
    pub fn num_edges(&self) -> usize {
        self.column_indices.len() / 2
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn column_indices(&self) -> &[usize] {
        &self.column_indices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Neighbors of `p` and the connecting weights, in increasing node order.
    #[inline]
    pub fn neighbors(&self, p: usize) -> (&[usize], &[f64]) {
        let span = self.row_offsets[p]..self.row_offsets[p + 1];
        (&self.column_indices[span.clone()], &self.weights[span])
    }

    pub fn degree(&self, p: usize) -> usize {
        self.row_offsets[p + 1] - self.row_offsets[p]
    }

    pub fn weighted_degree(&self, p: usize) -> f64 {
        self.neighbors(p).1.iter().sum()
    }

    pub fn edge_weight(&self, p: usize, q: usize) -> Option<f64> {
        if p >= self.num_nodes || q >= self.num_nodes {
            return None;
        }
        let (cols, w) = self.neighbors(p);
        cols.binary_search(&q).ok().map(|k| w[k])
    }

    pub fn contains_edge(&self, p: usize, q: usize) -> bool {
        self.edge_weight(p, q).is_some()
    }

    /// Canonical edge list: each undirected edge once as `(p, q, w)` with
    /// `p < q`, sorted lexicographically. Positions in this list are the
    /// canonical edge indices used by scoring and pruning.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for p in 0..self.num_nodes {
            let (cols, w) = self.neighbors(p);
            for (&q, &wq) in cols.iter().zip(w) {
                if q > p {
                    out.push((p, q, wq));
                }
            }
        }
        out
    }

    pub fn edge_pairs(&self) -> Vec<EdgePair> {
        self.edges().into_iter().map(|(p, q, _)| (p, q)).collect()
    }

    /// Copy of the graph without the listed undirected edges.
    pub fn remove_edges(&self, pairs: &[EdgePair]) -> Result<Self> {
        let mut drop = HashSet::with_capacity(pairs.len());
        for &(p, q) in pairs {
            if !self.contains_edge(p, q) {
                return Err(Error::MissingEdge(p, q));
            }
            drop.insert(canonical(p, q));
        }
        let kept: Vec<_> = self
            .edges()
            .into_iter()
            .filter(|&(p, q, _)| !drop.contains(&(p, q)))
            .collect();
        Self::new(self.num_nodes, &kept)
    }

    /// Copy of the graph with the listed undirected edges added at `weight`.
    pub fn add_edges(&self, pairs: &[EdgePair], weight: f64) -> Result<Self> {
        for &(p, q) in pairs {
            if self.contains_edge(p, q) {
                let (a, b) = canonical(p, q);
                return Err(Error::Validation(format!("duplicate edge ({a}, {b})")));
            }
        }
        let mut edges = self.edges();
        edges.extend(pairs.iter().map(|&(p, q)| (p, q, weight)));
        Self::new(self.num_nodes, &edges)
    }

    /// Component count and a component id per node (ids in order of first
    /// appearance by node index).
    pub fn connected_components(&self) -> (usize, Vec<usize>) {
        let mut label = vec![usize::MAX; self.num_nodes];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.num_nodes {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            stack.push(start);
            while let Some(p) = stack.pop() {
                for &q in self.neighbors(p).0 {
                    if label[q] == usize::MAX {
                        label[q] = count;
                        stack.push(q);
                    }
                }
            }
            count += 1;
        }
        (count, label)
    }

    /// Relabels nodes so that old node `p` becomes `perm[p]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.num_nodes {
            return Err(Error::Dimension(format!(
                "permutation of length {} for {} nodes",
                perm.len(),
                self.num_nodes
            )));
        }
        let edges: Vec<_> = self
            .edges()
            .into_iter()
            .map(|(p, q, w)| (perm[p], perm[q], w))
            .collect();
        Self::new(self.num_nodes, &edges)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LaplacianKind {
    /// `L = D - W`
    Combinatorial,
    /// `D^{-1/2} L D^{-1/2}`; rows of isolated nodes are zero.
    Normalized,
}

/// Matrix-free Laplacian of a graph, optionally shifted by `εI`.
#[derive(Clone, Debug)]
pub struct LaplacianOperator<'g> {
    graph: &'g SparseGraph,
    kind: LaplacianKind,
    shift: f64,
    degree: Vec<f64>,
    inv_sqrt_degree: Vec<f64>,
}

impl<'g> LaplacianOperator<'g> {
    pub fn new(graph: &'g SparseGraph, kind: LaplacianKind) -> Self {
        let degree: Vec<f64> = (0..graph.num_nodes())
            .map(|p| graph.weighted_degree(p))
            .collect();
        let inv_sqrt_degree = match kind {
            LaplacianKind::Combinatorial => Vec::new(),
            LaplacianKind::Normalized => degree
                .iter()
                .map(|&d| if d > 0.0 { d.sqrt().recip() } else { 0.0 })
                .collect(),
        };
        Self {
            graph,
            kind,
            shift: 0.0,
            degree,
            inv_sqrt_degree,
        }
    }

    pub fn combinatorial(graph: &'g SparseGraph) -> Self {
        Self::new(graph, LaplacianKind::Combinatorial)
    }

    pub fn normalized(graph: &'g SparseGraph) -> Self {
        Self::new(graph, LaplacianKind::Normalized)
    }

    /// Adds `epsilon * I` to the operator.
    pub fn with_shift(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::Parameter(format!(
                "diagonal regularization must be finite and >= 0, got {epsilon}"
            )));
        }
        self.shift = epsilon;
        Ok(self)
    }

    pub fn graph(&self) -> &'g SparseGraph {
        self.graph
    }

    pub fn kind(&self) -> LaplacianKind {
        self.kind
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.graph.num_nodes()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        match self.kind {
            LaplacianKind::Combinatorial => self.degree.iter().map(|d| d + self.shift).collect(),
            LaplacianKind::Normalized => self
                .degree
                .iter()
                .map(|&d| if d > 0.0 { 1.0 } else { 0.0 } + self.shift)
                .collect(),
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::Dimension(format!(
                "vector of length {len} for a Laplacian on {} nodes",
                self.dim()
            )));
        }
        Ok(())
    }

    /// `(L + εI) x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.matvec_into(x, &mut out)?;
        Ok(out)
    }

    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        self.check_len(x.len())?;
        self.check_len(out.len())?;
        self.apply(x, out);
        Ok(())
    }

    /// Unchecked product used in the solver hot loops.
    #[inline]
    pub(crate) fn apply(&self, x: &[f64], out: &mut [f64]) {
        let g = self.graph;
        match self.kind {
            LaplacianKind::Combinatorial => {
                for p in 0..g.num_nodes() {
                    let (cols, w) = g.neighbors(p);
                    let mut acc = (self.degree[p] + self.shift) * x[p];
                    for (&q, &wq) in cols.iter().zip(w) {
                        acc -= wq * x[q];
                    }
                    out[p] = acc;
                }
            }
            LaplacianKind::Normalized => {
                let s = &self.inv_sqrt_degree;
                for p in 0..g.num_nodes() {
                    let (cols, w) = g.neighbors(p);
                    let diag = if self.degree[p] > 0.0 { 1.0 } else { 0.0 };
                    let mut acc = (diag + self.shift) * x[p];
                    for (&q, &wq) in cols.iter().zip(w) {
                        acc -= s[p] * wq * s[q] * x[q];
                    }
                    out[p] = acc;
                }
            }
        }
    }

    /// `xᵀ(L + εI)x`, accumulated edge by edge so the result is a sum of
    /// nonnegative terms.
    pub fn quadratic_form(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x.len())?;
        let mut total = 0.0;
        for (p, q, w) in self.graph.edges() {
            let d = match self.kind {
                LaplacianKind::Combinatorial => x[p] - x[q],
                LaplacianKind::Normalized => {
                    x[p] * self.inv_sqrt_degree[p] - x[q] * self.inv_sqrt_degree[q]
                }
            };
            total += w * d * d;
        }
        Ok(total + self.shift * dot(x, x))
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.dim();
        let mut m = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            m.set_column(j, &col);
            e[j] = 0.0;
        }
        m
    }
}

/// `D̃^{-1/2}(A + I)D̃^{-1/2}` where `D̃` is the weighted degree matrix of
/// `A + I`.
pub fn gcn_normalized_adjacency(g: &SparseGraph) -> CsrMatrix {
    let n = g.num_nodes();
    let deg: Vec<f64> = (0..n).map(|p| 1.0 + g.weighted_degree(p)).collect();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(g.column_indices().len() + n);
    let mut values = Vec::with_capacity(g.column_indices().len() + n);
    offsets.push(0);
    for p in 0..n {
        let (cols, w) = g.neighbors(p);
        let mut diag_done = false;
        for (&q, &wq) in cols.iter().zip(w) {
            if !diag_done && q > p {
                indices.push(p);
                values.push(deg[p].recip());
                diag_done = true;
            }
            indices.push(q);
            values.push(wq / (deg[p] * deg[q]).sqrt());
        }
        if !diag_done {
            indices.push(p);
            values.push(deg[p].recip());
        }
        offsets.push(indices.len());
    }
    CsrMatrix::from_parts(n, n, offsets, indices, values)
        .expect("graph invariants guarantee a well-formed normalized adjacency")
}
