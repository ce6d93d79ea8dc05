//! k-nearest-neighbor graphs over node embeddings.
//!
//! Both builders return an undirected unit-weight graph: every node picks its
//! `k` nearest other nodes (Euclidean, ties to the lower index) and the picks
//! are symmetrized by union. The approximate builder is a small hierarchical
//! navigable small-world index, built single-threaded in node order from a
//! seeded level generator so its output is reproducible.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::linalg::{squared_distance, DenseMatrix};

/// Up to this many nodes [`KnnMethod::Auto`] uses the exact builder.
pub const EXACT_NODE_LIMIT: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KnnMethod {
    Exact,
    Approximate,
    Auto,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KnnConfig {
    pub k: usize,
    pub method: KnnMethod,
    /// Links per node on the upper layers; layer 0 allows twice as many.
    pub max_links: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    /// Seeds the level assignment of the approximate index.
    pub seed: u64,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self {
            k: 10,
            method: KnnMethod::Auto,
            max_links: 16,
            ef_construction: 200,
            ef_search: 128,
            seed: 0,
        }
    }
}

impl KnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Parameter("k must be at least 1".into()));
        }
        if self.max_links < 2 {
            return Err(Error::Parameter("max_links must be at least 2".into()));
        }
        if self.ef_construction < self.k || self.ef_search < self.k {
            return Err(Error::Parameter(format!(
                "search beams ({}, {}) must be at least k = {}",
                self.ef_construction, self.ef_search, self.k
            )));
        }
        Ok(())
    }
}

/// Candidate ordered by distance, then node index.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Near(f64, usize);

impl Eq for Near {}

impl PartialOrd for Near {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Near {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

fn check_input(embeddings: &DenseMatrix, cfg: &KnnConfig) -> Result<()> {
    cfg.validate()?;
    let n = embeddings.rows();
    if n <= cfg.k {
        return Err(Error::Parameter(format!(
            "k = {} needs more than {n} nodes",
            cfg.k
        )));
    }
    if !embeddings.all_finite() {
        return Err(Error::Numeric("embedding contains non-finite entries".into()));
    }
    Ok(())
}

/// Exact per-node neighbor lists, nearest first.
pub fn exact_knn_lists(embeddings: &DenseMatrix, cfg: &KnnConfig) -> Result<Vec<Vec<usize>>> {
    check_input(embeddings, cfg)?;
    let n = embeddings.rows();
    let k = cfg.k;
    let mut scratch = Vec::with_capacity(n);
    Ok((0..n)
        .map(|i| {
            let xi = embeddings.row(i);
            scratch.clear();
            scratch.extend(
                (0..n)
                    .filter(|&j| j != i)
                    .map(|j| Near(squared_distance(xi, embeddings.row(j)), j)),
            );
            scratch.select_nth_unstable(k - 1);
            let mut best = scratch[..k].to_vec();
            best.sort_unstable();
            best.into_iter().map(|c| c.1).collect()
        })
        .collect())
}

/// Approximate per-node neighbor lists, nearest first.
pub fn approx_knn_lists(embeddings: &DenseMatrix, cfg: &KnnConfig) -> Result<Vec<Vec<usize>>> {
    check_input(embeddings, cfg)?;
    let index = Hnsw::build(embeddings, cfg);
    let ef = cfg.ef_search.max(cfg.k + 1);
    Ok((0..embeddings.rows())
        .map(|i| {
            index
                .search(embeddings.row(i), ef)
                .into_iter()
                .filter(|c| c.1 != i)
                .take(cfg.k)
                .map(|c| c.1)
                .collect()
        })
        .collect())
}

/// Union symmetrization of directed pick lists into a unit-weight graph.
pub fn symmetrize(num_nodes: usize, lists: &[Vec<usize>]) -> Result<SparseGraph> {
    let mut pairs: Vec<(usize, usize)> = lists
        .iter()
        .enumerate()
        .flat_map(|(p, l)| l.iter().map(move |&q| (p.min(q), p.max(q))))
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    SparseGraph::from_pairs(num_nodes, &pairs)
}

pub fn exact_knn_graph(embeddings: &DenseMatrix, cfg: &KnnConfig) -> Result<SparseGraph> {
    symmetrize(embeddings.rows(), &exact_knn_lists(embeddings, cfg)?)
}

pub fn approx_knn_graph(embeddings: &DenseMatrix, cfg: &KnnConfig) -> Result<SparseGraph> {
    symmetrize(embeddings.rows(), &approx_knn_lists(embeddings, cfg)?)
}

/// Dispatches on `cfg.method`; `Auto` is exact up to [`EXACT_NODE_LIMIT`]
/// nodes.
pub fn knn_graph(embeddings: &DenseMatrix, cfg: &KnnConfig) -> Result<SparseGraph> {
    match cfg.method {
        KnnMethod::Exact => exact_knn_graph(embeddings, cfg),
        KnnMethod::Approximate => approx_knn_graph(embeddings, cfg),
        KnnMethod::Auto if embeddings.rows() <= EXACT_NODE_LIMIT => exact_knn_graph(embeddings, cfg),
        KnnMethod::Auto => approx_knn_graph(embeddings, cfg),
    }
}

/// Fraction of exact picks recovered by `approx`, over all nodes.
pub fn recall(exact: &[Vec<usize>], approx: &[Vec<usize>]) -> f64 {
    let total: usize = exact.iter().map(Vec::len).sum();
    if total == 0 {
        return 1.0;
    }
    let hits: usize = exact
        .iter()
        .zip(approx)
        .map(|(e, a)| e.iter().filter(|q| a.contains(q)).count())
        .sum();
    hits as f64 / total as f64
}

struct Hnsw<'a> {
    points: &'a DenseMatrix,
    // links[node][layer]
    links: Vec<Vec<Vec<usize>>>,
    entry: usize,
    top_layer: usize,
    max_links: usize,
    visited: std::cell::RefCell<Visited>,
}

struct Visited {
    stamp: Vec<u32>,
    epoch: u32,
}

impl Visited {
    fn next(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    /// Marks `i`; returns false if it was already marked this round.
    fn insert(&mut self, i: usize) -> bool {
        if self.stamp[i] == self.epoch {
            false
        } else {
            self.stamp[i] = self.epoch;
            true
        }
    }
}

impl<'a> Hnsw<'a> {
    fn build(points: &'a DenseMatrix, cfg: &KnnConfig) -> Self {
        let n = points.rows();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let level_scale = 1.0 / (cfg.max_links as f64).ln();
        let mut index = Hnsw {
            points,
            links: Vec::with_capacity(n),
            entry: 0,
            top_layer: 0,
            max_links: cfg.max_links,
            visited: std::cell::RefCell::new(Visited {
                stamp: vec![0; n],
                epoch: 0,
            }),
        };
        for i in 0..n {
            let u: f64 = 1.0 - rng.random::<f64>();
            let level = (-u.ln() * level_scale).floor() as usize;
            index.insert(i, level, cfg.ef_construction);
        }
        index
    }

    fn dist(&self, q: &[f64], i: usize) -> f64 {
        squared_distance(q, self.points.row(i))
    }

    fn capacity(&self, layer: usize) -> usize {
        if layer == 0 {
            2 * self.max_links
        } else {
            self.max_links
        }
    }

    fn insert(&mut self, i: usize, level: usize, ef: usize) {
        self.links.push(vec![Vec::new(); level + 1]);
        if i == 0 {
            self.top_layer = level;
            return;
        }
        let q = self.points.row(i);
        let mut entry = vec![Near(self.dist(q, self.entry), self.entry)];
        for layer in (level + 1..=self.top_layer).rev() {
            entry = self.search_layer(q, &entry, 1, layer);
        }
        for layer in (0..=level.min(self.top_layer)).rev() {
            let found = self.search_layer(q, &entry, ef, layer);
            let picks: Vec<usize> = found.iter().take(self.max_links).map(|c| c.1).collect();
            for &j in &picks {
                self.links[j][layer].push(i);
                if self.links[j][layer].len() > self.capacity(layer) {
                    self.shrink(j, layer);
                }
            }
            self.links[i][layer] = picks;
            entry = found;
        }
        if level > self.top_layer {
            self.top_layer = level;
            self.entry = i;
        }
    }

    fn shrink(&mut self, j: usize, layer: usize) {
        let p = self.points.row(j);
        let mut scored: Vec<Near> = self.links[j][layer]
            .iter()
            .map(|&t| Near(squared_distance(p, self.points.row(t)), t))
            .collect();
        scored.sort_unstable();
        scored.truncate(self.capacity(layer));
        self.links[j][layer] = scored.into_iter().map(|c| c.1).collect();
    }

    /// Beam search on one layer; result sorted nearest first.
    fn search_layer(&self, q: &[f64], entry: &[Near], ef: usize, layer: usize) -> Vec<Near> {
        let mut visited = self.visited.borrow_mut();
        visited.next();
        let mut candidates: BinaryHeap<Reverse<Near>> = BinaryHeap::new();
        let mut best: BinaryHeap<Near> = BinaryHeap::new();
        for &e in entry {
            if visited.insert(e.1) {
                candidates.push(Reverse(e));
                best.push(e);
            }
        }
        while best.len() > ef {
            best.pop();
        }
        while let Some(Reverse(c)) = candidates.pop() {
            if best.len() >= ef && c > *best.peek().expect("nonempty") {
                break;
            }
            for &t in &self.links[c.1][layer] {
                if !visited.insert(t) {
                    continue;
                }
                let cand = Near(self.dist(q, t), t);
                if best.len() < ef || cand < *best.peek().expect("nonempty") {
                    candidates.push(Reverse(cand));
                    best.push(cand);
                    if best.len() > ef {
                        best.pop();
                    }
                }
            }
        }
        best.into_sorted_vec()
    }

    fn search(&self, q: &[f64], ef: usize) -> Vec<Near> {
        let mut entry = vec![Near(self.dist(q, self.entry), self.entry)];
        for layer in (1..=self.top_layer).rev() {
            entry = self.search_layer(q, &entry, 1, layer);
        }
        self.search_layer(q, &entry, ef, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> DenseMatrix {
        DenseMatrix::from_vec(xs.len(), 1, xs.to_vec()).unwrap()
    }

    #[test]
    fn collinear_points() {
        let cfg = KnnConfig {
            k: 1,
            ..KnnConfig::default()
        };
        let x = line(&[0.0, 1.0, 10.0]);
        assert_eq!(exact_knn_lists(&x, &cfg).unwrap(), vec![vec![1], vec![0], vec![1]]);
        assert_eq!(exact_knn_graph(&x, &cfg).unwrap().edge_pairs(), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn too_few_nodes_and_bad_values() {
        let cfg = KnnConfig {
            k: 3,
            ..KnnConfig::default()
        };
        assert!(matches!(
            exact_knn_graph(&line(&[0.0, 1.0, 2.0]), &cfg),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            approx_knn_graph(&line(&[0.0, 1.0, f64::NAN, 3.0, 4.0]), &cfg),
            Err(Error::Numeric(_))
        ));
    }
}
