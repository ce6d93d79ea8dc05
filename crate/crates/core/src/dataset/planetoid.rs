//! One-time conversion of the public Planetoid distribution
//! (`ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index}`) into a
//! [`DatasetBundle`].
//!
//! The assembly mirrors the widely used reference loaders: training rows come
//! first, test rows are re-placed at the node ids listed in `test.index`, and
//! gaps in the test id range (CiteSeer has isolated nodes missing from `tx`)
//! become all-zero feature rows with label 0 that belong to no split. The
//! public split is kept: the first `|y|` nodes train, the next 500 validate,
//! and the `test.index` nodes test. Self-loops and duplicate pairs in the
//! adjacency dictionary are dropped.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use super::pickle::{self, csr_matrix, ndarray, Value};
use super::{DatasetBundle, DatasetParts};
use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

const VALIDATION_SIZE: usize = 500;

fn load_pickle(dir: &Path, name: &str, part: &str) -> Result<Value> {
    let path = dir.join(format!("ind.{name}.{part}"));
    let bytes = fs::read(&path).map_err(|source| Error::Load {
        path: path.clone(),
        source,
    })?;
    pickle::unpickle(&bytes).map_err(|e| Error::parse(&path, 0, e.to_string()))
}

fn bad(dir: &Path, name: &str, part: &str, message: impl Into<String>) -> Error {
    Error::parse(dir.join(format!("ind.{name}.{part}")), 0, message)
}

type SparseRows = Vec<Vec<(usize, f64)>>;

/// Dense-ifies rows of a pickled CSR matrix into `(col, value)` lists.
fn sparse_rows(dir: &Path, name: &str, part: &str) -> Result<(usize, SparseRows)> {
    let m = csr_matrix(&load_pickle(dir, name, part)?).map_err(|e| bad(dir, name, part, e))?;
    if m.indptr.len() != m.rows + 1 {
        return Err(bad(dir, name, part, "indptr length does not match the shape"));
    }
    let mut rows = Vec::with_capacity(m.rows);
    for i in 0..m.rows {
        let mut row: Vec<(usize, f64)> = (m.indptr[i]..m.indptr[i + 1])
            .map(|k| (m.indices[k], m.data[k]))
            .filter(|&(_, v)| v != 0.0)
            .collect();
        row.sort_unstable_by_key(|&(j, _)| j);
        if row.iter().any(|&(j, _)| j >= m.cols) {
            return Err(bad(dir, name, part, "column index out of range"));
        }
        rows.push(row);
    }
    Ok((m.cols, rows))
}

fn one_hot_labels(dir: &Path, name: &str, part: &str) -> Result<(usize, Vec<usize>)> {
    let a = ndarray(&load_pickle(dir, name, part)?).map_err(|e| bad(dir, name, part, e))?;
    let [rows, classes] = a.shape[..] else {
        return Err(bad(dir, name, part, "label array is not two-dimensional"));
    };
    let labels = (0..rows)
        .map(|i| {
            let row = &a.values[i * classes..(i + 1) * classes];
            // first maximum, so an all-zero row maps to class 0
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect();
    Ok((classes, labels))
}

/// Reads the Planetoid files for dataset `name` (e.g. `"citeseer"`) from
/// `dir`.
pub fn convert_planetoid(dir: impl AsRef<Path>, name: &str) -> Result<DatasetBundle> {
    let dir = dir.as_ref();
    let (d, x) = sparse_rows(dir, name, "x")?;
    let (_, allx) = sparse_rows(dir, name, "allx")?;
    let (dt, tx) = sparse_rows(dir, name, "tx")?;
    if dt != d {
        return Err(bad(dir, name, "tx", "feature width differs from x"));
    }
    let (num_classes, y) = one_hot_labels(dir, name, "y")?;
    let (_, ally) = one_hot_labels(dir, name, "ally")?;
    let (_, ty) = one_hot_labels(dir, name, "ty")?;
    if allx.len() != ally.len() || tx.len() != ty.len() {
        return Err(bad(dir, name, "ally", "feature and label row counts differ"));
    }

    let index_path = dir.join(format!("ind.{name}.test.index"));
    let index_text = fs::read_to_string(&index_path).map_err(|source| Error::Load {
        path: index_path.clone(),
        source,
    })?;
    let test_index = index_text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<usize>()
                .map_err(|_| Error::parse(&index_path, i + 1, "expected a node index"))
        })
        .collect::<Result<Vec<_>>>()?;
    if test_index.len() != tx.len() {
        return Err(Error::parse(
            &index_path,
            0,
            format!("{} test ids for {} test rows", test_index.len(), tx.len()),
        ));
    }
    let mut sorted = test_index.clone();
    sorted.sort_unstable();
    let (lo, hi) = match (sorted.first(), sorted.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => return Err(Error::parse(&index_path, 0, "no test ids")),
    };
    if lo != allx.len() {
        return Err(Error::parse(
            &index_path,
            0,
            format!("test ids start at {lo}, expected {}", allx.len()),
        ));
    }
    let n = hi + 1;

    let mut rows: Vec<Vec<(usize, f64)>> = allx;
    rows.resize(n, Vec::new());
    let mut labels = ally;
    labels.resize(n, 0);
    // tx[i] describes node test_index[i]
    for (i, &node) in test_index.iter().enumerate() {
        rows[node] = tx[i].clone();
        labels[node] = ty[i];
    }

    let graph = load_pickle(dir, name, "graph")?;
    let Value::Dict(adjacency) = graph else {
        return Err(bad(dir, name, "graph", "adjacency is not a dictionary"));
    };
    let mut edges = BTreeSet::new();
    for (k, v) in &adjacency {
        let p = k
            .as_int()
            .ok_or_else(|| bad(dir, name, "graph", "non-integer node key"))? as usize;
        let neighbors = v
            .items()
            .ok_or_else(|| bad(dir, name, "graph", "neighbor list is not a list"))?;
        for q in neighbors {
            let q = q
                .as_int()
                .ok_or_else(|| bad(dir, name, "graph", "non-integer neighbor"))?
                as usize;
            if p == q {
                continue;
            }
            if p >= n || q >= n {
                return Err(bad(
                    dir,
                    name,
                    "graph",
                    format!("edge ({p}, {q}) references a node outside 0..{n}"),
                ));
            }
            edges.insert((p.min(q), p.max(q)));
        }
    }

    let mut offsets = Vec::with_capacity(n + 1);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    offsets.push(0);
    for row in &rows {
        for &(j, v) in row {
            indices.push(j);
            values.push(v);
        }
        offsets.push(indices.len());
    }
    let features = CsrMatrix::from_parts(n, d, offsets, indices, values)?;

    let num_train = y.len();
    if x.len() != num_train {
        return Err(bad(dir, name, "x", "row count differs from y"));
    }
    let mut train_mask = vec![false; n];
    let mut val_mask = vec![false; n];
    let mut test_mask = vec![false; n];
    train_mask[..num_train].iter_mut().for_each(|b| *b = true);
    let val_end = (num_train + VALIDATION_SIZE).min(n);
    val_mask[num_train..val_end].iter_mut().for_each(|b| *b = true);
    for &i in &test_index {
        test_mask[i] = true;
    }

    DatasetBundle::new(DatasetParts {
        features,
        labels,
        num_classes,
        edges: edges.into_iter().collect(),
        train_mask,
        val_mask,
        test_mask,
    })
}
