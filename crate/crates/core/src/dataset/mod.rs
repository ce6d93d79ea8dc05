//! Citation-network datasets: the portable on-disk layout, validation, and
//! graph/edge-list persistence.
//!
//! A dataset directory holds five UTF-8 text files:
//!
//! ```text
//! meta.txt       nodes=N / features=d / classes=C, one per line
//! features.csv   N rows of d comma-separated values
//! labels.txt     N lines, one class index each
//! edges.txt      one "p q" line per undirected edge, p < q, zero-based
//! masks.txt      N lines of train|val|test|none
//! ```

pub mod pickle;
pub mod planetoid;

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{EdgePair, SparseGraph};
use crate::linalg::{CsrMatrix, DenseMatrix};

pub const META_FILE: &str = "meta.txt";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.txt";
pub const EDGES_FILE: &str = "edges.txt";
pub const MASKS_FILE: &str = "masks.txt";

/// Which transductive split a node belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
    None,
}

impl Split {
    fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::None => "none",
        }
    }
}

/// Features, labels, edges and split masks for one transductive dataset.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetBundle {
    features: CsrMatrix,
    labels: Vec<usize>,
    num_classes: usize,
    edges: Vec<EdgePair>,
    train_mask: Vec<bool>,
    val_mask: Vec<bool>,
    test_mask: Vec<bool>,
}

/// Raw parts of a [`DatasetBundle`], before validation.
#[derive(Clone, Debug)]
pub struct DatasetParts {
    pub features: CsrMatrix,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub edges: Vec<EdgePair>,
    pub train_mask: Vec<bool>,
    pub val_mask: Vec<bool>,
    pub test_mask: Vec<bool>,
}

impl DatasetBundle {
    /// Validates the parts and canonicalizes the edge list to sorted
    /// `(min, max)` pairs.
    pub fn new(parts: DatasetParts) -> Result<Self> {
        let n = parts.features.rows();
        if parts.labels.len() != n {
            return Err(Error::Validation(format!(
                "{} labels for {n} nodes",
                parts.labels.len()
            )));
        }
        for (name, mask) in [
            ("train", &parts.train_mask),
            ("val", &parts.val_mask),
            ("test", &parts.test_mask),
        ] {
            if mask.len() != n {
                return Err(Error::Validation(format!(
                    "{name} mask has {} entries for {n} nodes",
                    mask.len()
                )));
            }
        }
        for (i, &y) in parts.labels.iter().enumerate() {
            if y >= parts.num_classes {
                return Err(Error::Validation(format!(
                    "label {y} at node {i} is outside 0..{}",
                    parts.num_classes
                )));
            }
        }
        for i in 0..n {
            let hits = [parts.train_mask[i], parts.val_mask[i], parts.test_mask[i]]
                .iter()
                .filter(|&&b| b)
                .count();
            if hits > 1 {
                return Err(Error::Validation(format!(
                    "node {i} belongs to more than one split"
                )));
            }
        }
        let mut seen = vec![false; parts.num_classes];
        for i in (0..n).filter(|&i| parts.train_mask[i]) {
            seen[parts.labels[i]] = true;
        }
        if let Some(c) = seen.iter().position(|&s| !s) {
            return Err(Error::Validation(format!(
                "class {c} has no training node"
            )));
        }

        let mut set = HashSet::with_capacity(parts.edges.len());
        let mut edges = Vec::with_capacity(parts.edges.len());
        for &(p, q) in &parts.edges {
            if p == q {
                return Err(Error::Validation(format!("self-loop at node {p}")));
            }
            if p >= n || q >= n {
                return Err(Error::Validation(format!(
                    "edge ({p}, {q}) references a node outside 0..{n}"
                )));
            }
            let e = (p.min(q), p.max(q));
            if !set.insert(e) {
                return Err(Error::Validation(format!(
                    "duplicate edge ({}, {})",
                    e.0, e.1
                )));
            }
            edges.push(e);
        }
        edges.sort_unstable();

        if parts.features.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("non-finite feature value".into()));
        }

        Ok(Self {
            features: parts.features,
            labels: parts.labels,
            num_classes: parts.num_classes,
            edges,
            train_mask: parts.train_mask,
            val_mask: parts.val_mask,
            test_mask: parts.test_mask,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_features(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &CsrMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Canonical, sorted undirected edges.
    pub fn edges(&self) -> &[EdgePair] {
        &self.edges
    }

    pub fn train_mask(&self) -> &[bool] {
        &self.train_mask
    }

    pub fn val_mask(&self) -> &[bool] {
        &self.val_mask
    }

    pub fn test_mask(&self) -> &[bool] {
        &self.test_mask
    }

    pub fn split(&self, i: usize) -> Split {
        if self.train_mask[i] {
            Split::Train
        } else if self.val_mask[i] {
            Split::Val
        } else if self.test_mask[i] {
            Split::Test
        } else {
            Split::None
        }
    }

    /// Unit-weight input graph.
    pub fn graph(&self) -> SparseGraph {
        SparseGraph::from_pairs(self.num_nodes(), &self.edges)
            .expect("edges were validated at construction")
    }

    /// Copy with every feature row scaled to sum to one (all-zero rows are
    /// left untouched).
    pub fn with_row_normalized_features(&self) -> Self {
        let f = &self.features;
        let mut values = f.values().to_vec();
        for i in 0..f.rows() {
            let span = f.offsets()[i]..f.offsets()[i + 1];
            let sum: f64 = values[span.clone()].iter().sum();
            if sum != 0.0 {
                for v in &mut values[span] {
                    *v /= sum;
                }
            }
        }
        let features = CsrMatrix::from_parts(
            f.rows(),
            f.cols(),
            f.offsets().to_vec(),
            f.indices().to_vec(),
            values,
        )
        .expect("same sparsity pattern");
        Self {
            features,
            ..self.clone()
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Load {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_key_value(path: &Path, line_no: usize, line: &str, key: &str) -> Result<usize> {
    let value = line
        .strip_prefix(key)
        .and_then(|rest| rest.strip_prefix('='))
        .ok_or_else(|| Error::parse(path, line_no, format!("expected `{key}=<count>`")))?;
    value
        .trim()
        .parse()
        .map_err(|_| Error::parse(path, line_no, format!("`{key}` is not a count")))
}

fn parse_index(path: &Path, line_no: usize, token: Option<&str>) -> Result<usize> {
    token
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(path, line_no, "expected a node index"))
}

/// Reads a dataset directory in the portable layout.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<DatasetBundle> {
    let dir = dir.as_ref();

    let meta_path = dir.join(META_FILE);
    let meta = read(&meta_path)?;
    let mut meta_lines = meta.lines().filter(|l| !l.trim().is_empty());
    let mut next_meta = |key: &str, line_no: usize| -> Result<usize> {
        let line = meta_lines
            .next()
            .ok_or_else(|| Error::parse(&meta_path, line_no, format!("missing `{key}`")))?;
        parse_key_value(&meta_path, line_no, line.trim(), key)
    };
    let n = next_meta("nodes", 1)?;
    let d = next_meta("features", 2)?;
    let num_classes = next_meta("classes", 3)?;

    let features = read_features(&dir.join(FEATURES_FILE), n, d)?;

    let labels_path = dir.join(LABELS_FILE);
    let labels_text = read(&labels_path)?;
    let labels = labels_text
        .lines()
        .enumerate()
        .map(|(i, l)| {
            l.trim()
                .parse::<usize>()
                .map_err(|_| Error::parse(&labels_path, i + 1, "expected a class index"))
        })
        .collect::<Result<Vec<_>>>()?;
    if labels.len() != n {
        return Err(Error::Validation(format!(
            "{} has {} labels for {n} nodes",
            LABELS_FILE,
            labels.len()
        )));
    }

    let edges = read_edge_list(dir.join(EDGES_FILE))?;
    for &(p, q) in &edges {
        if p > q {
            return Err(Error::Validation(format!(
                "edge ({p}, {q}) is not stored as (min, max)"
            )));
        }
    }

    let masks_path = dir.join(MASKS_FILE);
    let masks_text = read(&masks_path)?;
    let mut train_mask = Vec::with_capacity(n);
    let mut val_mask = Vec::with_capacity(n);
    let mut test_mask = Vec::with_capacity(n);
    for (i, line) in masks_text.lines().enumerate() {
        let split = match line.trim() {
            "train" => Split::Train,
            "val" => Split::Val,
            "test" => Split::Test,
            "none" => Split::None,
            other => {
                return Err(Error::parse(
                    &masks_path,
                    i + 1,
                    format!("unknown split `{other}`"),
                ))
            }
        };
        train_mask.push(split == Split::Train);
        val_mask.push(split == Split::Val);
        test_mask.push(split == Split::Test);
    }

    DatasetBundle::new(DatasetParts {
        features,
        labels,
        num_classes,
        edges,
        train_mask,
        val_mask,
        test_mask,
    })
}

fn read_features(path: &Path, n: usize, d: usize) -> Result<CsrMatrix> {
    let text = read(path)?;
    let mut offsets = Vec::with_capacity(n + 1);
    let mut indices = Vec::new();
    let mut values = Vec::new();
    offsets.push(0);
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        if rows == n {
            return Err(Error::parse(path, i + 1, format!("more than {n} rows")));
        }
        let mut cols = 0;
        for (j, tok) in line.split(',').enumerate() {
            let v: f64 = tok
                .trim()
                .parse()
                .map_err(|_| Error::parse(path, i + 1, format!("bad value in column {j}")))?;
            if v != 0.0 {
                indices.push(j);
                values.push(v);
            }
            cols += 1;
        }
        if cols != d {
            return Err(Error::parse(
                path,
                i + 1,
                format!("{cols} values, expected {d}"),
            ));
        }
        offsets.push(indices.len());
        rows += 1;
    }
    if rows != n {
        return Err(Error::parse(path, rows, format!("{rows} rows, expected {n}")));
    }
    CsrMatrix::from_parts(n, d, offsets, indices, values)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, contents)?;
    Ok(())
}

/// Writes a bundle in the portable layout, creating `dir` if needed.
pub fn save_dataset(bundle: &DatasetBundle, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_file(
        &dir.join(META_FILE),
        &format!(
            "nodes={}\nfeatures={}\nclasses={}\n",
            bundle.num_nodes(),
            bundle.num_features(),
            bundle.num_classes()
        ),
    )?;

    let f = bundle.features();
    let mut out = String::with_capacity(f.rows() * f.cols() * 2);
    let mut dense_row = vec![0.0; f.cols()];
    for i in 0..f.rows() {
        dense_row.iter_mut().for_each(|v| *v = 0.0);
        let (cols, vals) = f.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            dense_row[j] = v;
        }
        for (j, v) in dense_row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            if *v == 0.0 {
                out.push('0');
            } else {
                write!(out, "{v}").unwrap();
            }
        }
        out.push('\n');
    }
    write_file(&dir.join(FEATURES_FILE), &out)?;

    let labels: String = bundle.labels().iter().map(|y| format!("{y}\n")).collect();
    write_file(&dir.join(LABELS_FILE), &labels)?;
    write_edge_list(dir.join(EDGES_FILE), bundle.edges(), None)?;
    let masks: String = (0..bundle.num_nodes())
        .map(|i| format!("{}\n", bundle.split(i).as_str()))
        .collect();
    write_file(&dir.join(MASKS_FILE), &masks)?;
    Ok(())
}

/// Writes `p q` lines, optionally preceded by a header line.
pub fn write_edge_list(
    path: impl AsRef<Path>,
    edges: &[EdgePair],
    header: Option<&str>,
) -> Result<()> {
    let mut out = String::with_capacity(edges.len() * 12);
    if let Some(h) = header {
        out.push_str(h);
        out.push('\n');
    }
    for (p, q) in edges {
        writeln!(out, "{p} {q}").unwrap();
    }
    write_file(path.as_ref(), &out)
}

/// Reads `p q` lines; blank lines are ignored.
pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Vec<EdgePair>> {
    let path = path.as_ref();
    let text = read(path)?;
    parse_edge_lines(path, text.lines().enumerate())
}

fn parse_edge_lines<'a>(
    path: &Path,
    lines: impl Iterator<Item = (usize, &'a str)>,
) -> Result<Vec<EdgePair>> {
    let mut edges = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut tok = line.split_whitespace();
        let p = parse_index(path, i + 1, tok.next())?;
        let q = parse_index(path, i + 1, tok.next())?;
        if tok.next().is_some() {
            return Err(Error::parse(path, i + 1, "expected exactly two indices"));
        }
        edges.push((p, q));
    }
    Ok(edges)
}

/// Writes the weighted graph format: a `nodes=N edges=M` header followed by
/// one canonical `p q w` line per undirected edge.
pub fn save_graph(graph: &SparseGraph, path: impl AsRef<Path>) -> Result<()> {
    let edges = graph.edges();
    let mut out = String::with_capacity(edges.len() * 16 + 32);
    writeln!(
        out,
        "nodes={} edges={}",
        graph.num_nodes(),
        graph.num_edges()
    )
    .unwrap();
    for (p, q, w) in edges {
        // `{}` on f64 prints the shortest string that parses back to the same bits.
        let w = if w.fract() == 0.0 && w.abs() < 1e15 {
            format!("{w:.1}")
        } else {
            format!("{w}")
        };
        writeln!(out, "{p} {q} {w}").unwrap();
    }
    write_file(path.as_ref(), &out)
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<SparseGraph> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing header"))?;
    let mut parts = header.split_whitespace();
    let n = parse_key_value(path, 1, parts.next().unwrap_or(""), "nodes")?;
    let m = parse_key_value(path, 1, parts.next().unwrap_or(""), "edges")?;
    let mut edges = Vec::with_capacity(m);
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut tok = line.split_whitespace();
        let p = parse_index(path, i + 1, tok.next())?;
        let q = parse_index(path, i + 1, tok.next())?;
        let w = match tok.next() {
            None => 1.0,
            Some(t) => t
                .parse::<f64>()
                .map_err(|_| Error::parse(path, i + 1, "bad edge weight"))?,
        };
        edges.push((p, q, w));
    }
    if edges.len() != m {
        return Err(Error::Validation(format!(
            "{} declares {m} edges but lists {}",
            path.display(),
            edges.len()
        )));
    }
    SparseGraph::new(n, &edges)
}

/// Writes a dense matrix as a `rows=R cols=C` header followed by one
/// space-separated row per line, in shortest round-trip decimal form.
pub fn save_matrix(m: &DenseMatrix, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::with_capacity(m.rows() * m.cols() * 20 + 32);
    writeln!(out, "rows={} cols={}", m.rows(), m.cols()).unwrap();
    for i in 0..m.rows() {
        for (j, v) in m.row(i).iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    write_file(path.as_ref(), &out)
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let path = path.as_ref();
    let text = read(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "missing header"))?;
    let mut parts = header.split_whitespace();
    let rows = parse_key_value(path, 1, parts.next().unwrap_or(""), "rows")?;
    let cols = parse_key_value(path, 1, parts.next().unwrap_or(""), "cols")?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            data.push(
                tok.parse::<f64>()
                    .map_err(|_| Error::parse(path, i + 1, format!("bad number {tok:?}")))?,
            );
        }
        if data.len() - before != cols {
            return Err(Error::parse(path, i + 1, format!("expected {cols} values")));
        }
        seen += 1;
    }
    if seen != rows {
        return Err(Error::parse(path, 0, format!("expected {rows} rows, found {seen}")));
    }
    DenseMatrix::from_vec(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn toy_parts() -> DatasetParts {
        let features = CsrMatrix::from_dense(
            &DenseMatrix::from_rows(&[
                vec![1.0, 0.0],
                vec![0.0, 1.0],
                vec![0.5, 0.5],
                vec![0.0, 0.0],
            ])
            .unwrap(),
        );
        DatasetParts {
            features,
            labels: vec![0, 1, 0, 1],
            num_classes: 2,
            edges: vec![(1, 0), (2, 3)],
            train_mask: vec![true, true, false, false],
            val_mask: vec![false, false, true, false],
            test_mask: vec![false, false, false, true],
        }
    }

    #[test]
    fn canonicalizes_edges() {
        let b = DatasetBundle::new(toy_parts()).unwrap();
        assert_eq!(b.edges(), &[(0, 1), (2, 3)]);
        assert_eq!(b.graph().num_edges(), 2);
    }

    #[test]
    fn validation_errors_name_the_record() {
        let mut p = toy_parts();
        p.edges.push((3, 3));
        let err = DatasetBundle::new(p).unwrap_err();
        assert_eq!(err.to_string(), "validation error: self-loop at node 3");

        let mut p = toy_parts();
        p.labels[2] = 7;
        assert!(DatasetBundle::new(p).is_err());

        let mut p = toy_parts();
        p.test_mask[0] = true;
        assert!(DatasetBundle::new(p)
            .unwrap_err()
            .to_string()
            .contains("node 0"));

        let mut p = toy_parts();
        p.train_mask[1] = false;
        assert!(DatasetBundle::new(p)
            .unwrap_err()
            .to_string()
            .contains("class 1"));
    }

    #[test]
    fn graph_file_layout() {
        let dir = tempfile::tempdir().unwrap();
        let tri = SparseGraph::from_pairs(3, &[(1, 2), (0, 1), (2, 0)]).unwrap();
        let path = dir.path().join("g.txt");
        save_graph(&tri, &path).unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            "nodes=3 edges=3\n0 1 1.0\n0 2 1.0\n1 2 1.0\n"
        );
        save_graph(&SparseGraph::empty(4), &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "nodes=4 edges=0\n");
        assert_eq!(load_graph(&path).unwrap(), SparseGraph::empty(4));
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let err = save_graph(&SparseGraph::empty(1), blocker.join("g.txt")).unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }

    #[test]
    fn matrix_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.txt");
        let m = DenseMatrix::from_rows(&[vec![0.1, -2.0, 1e-300], vec![3.5, 0.0, f64::MAX]]).unwrap();
        save_matrix(&m, &path).unwrap();
        assert!(fs::read_to_string(&path).unwrap().starts_with("rows=2 cols=3\n0.1 -2 "));
        assert_eq!(load_matrix(&path).unwrap(), m);
    }

    #[test]
    fn row_normalization() {
        let b = DatasetBundle::new(toy_parts())
            .unwrap()
            .with_row_normalized_features();
        assert_eq!(b.features().get(2, 0), 0.5);
        assert_eq!(b.features().get(0, 0), 1.0);
        assert_eq!(b.features().row(3).0.len(), 0);
    }
}
