//! Model-aware edge injection: every correctly classified test node is wired
//! to its nearest embedding-space neighbor of another class.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{canonical, EdgePair, SparseGraph};
use crate::linalg::{squared_distance, DenseMatrix};
use crate::prune::budget;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AttackConfig {
    /// Budget as a fraction of `reference_edge_count`.
    pub rho: f64,
    /// Undirected edge count of the original graph.
    pub reference_edge_count: usize,
}

impl AttackConfig {
    pub fn budget(&self) -> usize {
        budget(self.rho, self.reference_edge_count)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttackResult {
    pub rho: f64,
    /// `(t, j)` with `t` the attacked test node, in generation order.
    pub added_edges: Vec<EdgePair>,
    /// True when the candidates ran out before the budget was met.
    pub saturated: bool,
    /// Edges a single pass produces with an unlimited budget.
    pub valid_candidate_count: usize,
}

impl AttackResult {
    /// Text layout: `rho=<r> saturated=<bool> count=<m>`, then one `t j`
    /// line per added edge.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = format!(
            "rho={} saturated={} count={}\n",
            self.rho,
            self.saturated,
            self.added_edges.len()
        );
        for (t, j) in &self.added_edges {
            writeln!(out, "{t} {j}").unwrap();
        }
        fs::write(path, out)?;
        Ok(())
    }

    /// Reads a file written by [`AttackResult::save`].
    /// `valid_candidate_count` is not stored and is left at the edge count.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Load {
            path: path.to_path_buf(),
            source,
        })?;
        let mut lines = text.lines().enumerate();
        let header = lines.next().map(|(_, l)| l).unwrap_or_default();
        let bad_header = || Error::parse(path, 1, "expected `rho=<r> saturated=<bool> count=<m>`");
        let mut fields = header.split_whitespace().map(|f| f.split_once('='));
        let (rho, saturated, count) = match (fields.next(), fields.next(), fields.next()) {
            (Some(Some(("rho", r))), Some(Some(("saturated", s))), Some(Some(("count", c)))) => (
                r.parse::<f64>().map_err(|_| bad_header())?,
                s.parse::<bool>().map_err(|_| bad_header())?,
                c.parse::<usize>().map_err(|_| bad_header())?,
            ),
            _ => return Err(bad_header()),
        };
        let mut added_edges = Vec::with_capacity(count);
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let pair: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(path, i + 1, "expected `t j`"))?;
            match pair[..] {
                [t, j] => added_edges.push((t, j)),
                _ => return Err(Error::parse(path, i + 1, "expected `t j`")),
            }
        }
        if added_edges.len() != count {
            return Err(Error::parse(
                path,
                0,
                format!("header declares {count} edges, file lists {}", added_edges.len()),
            ));
        }
        Ok(Self {
            rho,
            valid_candidate_count: count,
            added_edges,
            saturated,
        })
    }
}

/// Builds the adversarial edge set against `graph`.
///
/// Sources are the nodes flagged in both `test_mask` and `correct_mask`, in
/// ascending order, one edge each. The target of `t` is the Euclidean-nearest
/// node of a different label that is neither adjacent to `t` nor already
/// wired to it (ties to the lower index).
pub fn generate_attack(
    embeddings: &DenseMatrix,
    labels: &[usize],
    test_mask: &[bool],
    correct_mask: &[bool],
    graph: &SparseGraph,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    if !(cfg.rho.is_finite() && cfg.rho >= 0.0) {
        return Err(Error::Parameter(format!("rho {} must be finite and >= 0", cfg.rho)));
    }
    let n = graph.num_nodes();
    if embeddings.rows() != n || labels.len() != n || test_mask.len() != n || correct_mask.len() != n {
        return Err(Error::Dimension(format!(
            "attack inputs disagree on the node count (graph has {n})"
        )));
    }
    if !correct_mask.iter().any(|&c| c) {
        return Err(Error::Parameter("no correctly classified nodes to attack from".into()));
    }
    if !embeddings.all_finite() {
        return Err(Error::Numeric("embedding contains non-finite entries".into()));
    }
    let limit = cfg.budget();
    let mut added: Vec<EdgePair> = Vec::new();
    let mut taken: HashSet<EdgePair> = HashSet::new();
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n);
    for t in (0..n).filter(|&t| test_mask[t] && correct_mask[t]) {
        let x = embeddings.row(t);
        order.clear();
        order.extend(
            (0..n)
                .filter(|&j| j != t && labels[j] != labels[t])
                .map(|j| (squared_distance(x, embeddings.row(j)), j)),
        );
        order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let target = order
            .iter()
            .map(|&(_, j)| j)
            .find(|&j| !graph.contains_edge(t, j) && !taken.contains(&canonical(t, j)));
        if let Some(j) = target {
            taken.insert(canonical(t, j));
            added.push((t, j));
        }
    }
    let valid_candidate_count = added.len();
    let saturated = valid_candidate_count < limit;
    added.truncate(limit);
    Ok(AttackResult {
        rho: cfg.rho,
        added_edges: added,
        saturated,
        valid_candidate_count,
    })
}

/// Injects the edges with unit weight, skipping those already present in this
/// victim. Returns the attacked graph and the number of skipped edges.
pub fn apply_attack(graph: &SparseGraph, result: &AttackResult) -> Result<(SparseGraph, usize)> {
    let mut fresh = Vec::with_capacity(result.added_edges.len());
    let mut seen = HashSet::new();
    let mut skipped = 0;
    for &(t, j) in &result.added_edges {
        let e = canonical(t, j);
        if graph.contains_edge(t, j) || !seen.insert(e) {
            skipped += 1;
        } else {
            fresh.push(e);
        }
    }
    Ok((graph.add_edges(&fresh, 1.0)?, skipped))
}
