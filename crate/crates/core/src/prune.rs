//! Removal of the highest-scoring (least robust) edges.

use crate::error::{Error, Result};
use crate::graph::{EdgePair, SparseGraph};
use crate::spectral::EdgeScoreTable;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PruneConfig {
    /// Fraction of undirected edges to delete.
    pub fraction: f64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self { fraction: 0.2 }
    }
}

impl PruneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(Error::Parameter(format!(
                "prune fraction {} is outside [0, 1]",
                self.fraction
            )));
        }
        Ok(())
    }
}

/// `floor(fraction * count)`, except that products within rounding noise of
/// an integer snap to it (`0.29 * 100` is 29, not 28).
pub fn budget(fraction: f64, count: usize) -> usize {
    let x = fraction * count as f64;
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest as usize
    } else {
        x.floor() as usize
    }
}

/// Drops the first `floor(fraction · |E|)` edges of the score ranking.
/// Returns the pruned graph and the removed edges in ranked order.
pub fn prune_graph(
    graph: &SparseGraph,
    scores: &EdgeScoreTable,
    cfg: &PruneConfig,
) -> Result<(SparseGraph, Vec<EdgePair>)> {
    cfg.validate()?;
    let edges = graph.edge_pairs();
    if scores.edges() != edges.as_slice() {
        return Err(Error::Validation(format!(
            "score table lists {} edges that do not match the graph's {} canonical edges",
            scores.len(),
            edges.len()
        )));
    }
    let m = budget(cfg.fraction, edges.len());
    let removed: Vec<EdgePair> = scores.ranked_edges().take(m).map(|(e, _)| e).collect();
    Ok((graph.remove_edges(&removed)?, removed))
}
