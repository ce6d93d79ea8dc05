//! Generalized eigenpairs of the pencil `(L_X, L_Y + εI)` and the edge scores
//! built from them.
//!
//! The solver works on the subspace orthogonal to the null vectors of `L_Y`
//! (one per connected component of the `L_Y` graph), which stands in for the
//! pseudoinverse of `L_Y`. Each sweep applies `x ↦ (L_Y + εI)⁻¹ L_X x` to an
//! oversampled block with Jacobi-preconditioned CG, `B`-orthonormalizes the
//! result (`B = L_Y + εI`) and extracts Ritz pairs. A pair counts as
//! converged once `‖P(L_X v − ζ B v)‖ ≤ tol · ζ · ‖B v‖`, `P` being the
//! deflation projector.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{EdgePair, LaplacianKind, LaplacianOperator, SparseGraph};
use crate::linalg::{axpy, dot, norm2, DenseMatrix};

/// Largest problem the dense oracle accepts.
pub const DENSE_ORACLE_LIMIT: usize = 500;

#[derive(Clone, Debug, PartialEq)]
pub struct EigenSolverConfig {
    /// Relative eigen-residual at which a pair is accepted.
    pub tol: f64,
    /// Relative residual of the inner CG solves.
    pub cg_tol: f64,
    pub max_sweeps: usize,
    /// Seeds the random starting block.
    pub seed: u64,
    /// Extra block columns beyond `s`; `None` means `max(10, s/2)`.
    pub oversample: Option<usize>,
}

impl Default for EigenSolverConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            cg_tol: 1e-8,
            max_sweeps: 500,
            seed: 0,
            oversample: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolverDiagnostics {
    pub sweeps: usize,
    pub block_size: usize,
    pub seed: u64,
    /// The `ε` carried by the `L_Y` operator.
    pub shift: f64,
    pub deflated_components: usize,
    pub cg_iterations: usize,
    /// Largest relative residual over the wanted pairs, per sweep.
    pub residual_history: Vec<f64>,
    /// Final relative residual of each returned pair.
    pub residuals: Vec<f64>,
}

/// Top generalized eigenpairs: `vectors` holds `v_i` (B-orthonormal
/// columns), `vs` holds `v_i √ζ_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralEmbedding {
    pub zetas: Vec<f64>,
    pub vectors: DenseMatrix,
    pub vs: DenseMatrix,
    pub diagnostics: SolverDiagnostics,
}

impl SpectralEmbedding {
    /// Sign-normalizes the columns and forms `vs`.
    pub fn from_pairs(zetas: Vec<f64>, mut vectors: DenseMatrix, diagnostics: SolverDiagnostics) -> Result<Self> {
        if zetas.len() != vectors.cols() {
            return Err(Error::Dimension(format!(
                "{} eigenvalues for {} vectors",
                zetas.len(),
                vectors.cols()
            )));
        }
        if zetas.iter().any(|z| !z.is_finite()) || !vectors.all_finite() {
            return Err(Error::Numeric("eigenpairs contain non-finite values".into()));
        }
        let n = vectors.rows();
        for j in 0..vectors.cols() {
            let mut col = vectors.column(j);
            normalize_sign(&mut col);
            vectors.set_column(j, &col);
        }
        let mut vs = DenseMatrix::zeros(n, zetas.len());
        for (j, &z) in zetas.iter().enumerate() {
            let w = z.max(0.0).sqrt();
            for i in 0..n {
                vs[(i, j)] = vectors[(i, j)] * w;
            }
        }
        Ok(Self {
            zetas,
            vectors,
            vs,
            diagnostics,
        })
    }

    pub fn s(&self) -> usize {
        self.zetas.len()
    }

    /// Text layout: `nodes=N s=S`, a `zetas` line, then one row of `v` per
    /// node, all in shortest round-trip decimal form.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "nodes={} s={}", self.vectors.rows(), self.s()).unwrap();
        out.push_str("zetas");
        for z in &self.zetas {
            write!(out, " {z}").unwrap();
        }
        out.push('\n');
        for i in 0..self.vectors.rows() {
            let row: Vec<String> = self.vectors.row(i).iter().map(f64::to_string).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    /// Reads a file written by [`SpectralEmbedding::save`]. Diagnostics are
    /// not persisted.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Load {
            path: path.to_path_buf(),
            source,
        })?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or_default();
        let mut dims = header.split_whitespace().map(|f| {
            f.split_once('=')
                .and_then(|(_, v)| v.parse::<usize>().ok())
                .ok_or_else(|| Error::parse(path, 1, "expected `nodes=N s=S`"))
        });
        let (n, s) = match (dims.next(), dims.next()) {
            (Some(n), Some(s)) => (n?, s?),
            _ => return Err(Error::parse(path, 1, "expected `nodes=N s=S`")),
        };
        let zeta_line = lines.next().unwrap_or_default();
        let zetas = parse_reals(zeta_line.strip_prefix("zetas").unwrap_or(""), path, 2)?;
        if zetas.len() != s {
            return Err(Error::parse(path, 2, format!("expected {s} eigenvalues")));
        }
        let mut data = Vec::with_capacity(n * s);
        for (i, line) in lines.enumerate() {
            let row = parse_reals(line, path, i + 3)?;
            if row.len() != s {
                return Err(Error::parse(path, i + 3, format!("expected {s} values")));
            }
            data.extend(row);
        }
        if data.len() != n * s {
            return Err(Error::parse(path, 0, format!("expected {n} vector rows")));
        }
        Self::from_pairs(zetas, DenseMatrix::from_vec(n, s, data)?, SolverDiagnostics::default())
    }
}

fn parse_reals(line: &str, path: &Path, lineno: usize) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::parse(path, lineno, format!("bad number {t:?}")))
        })
        .collect()
}

/// Flips `v` so its largest-magnitude entry (first on ties) is positive.
fn normalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// `ε = 1e-6 ·` mean diagonal of the combinatorial Laplacian of `g`.
pub fn default_regularization(g: &SparseGraph) -> f64 {
    if g.num_nodes() == 0 {
        return 0.0;
    }
    let total: f64 = (0..g.num_nodes()).map(|p| g.weighted_degree(p)).sum();
    1e-6 * total / g.num_nodes() as f64
}

/// Unit null vectors of an unshifted Laplacian, one per connected component,
/// stored as (component label per node, per-node weight).
struct Deflation {
    labels: Vec<usize>,
    weights: Vec<f64>,
    count: usize,
}

impl Deflation {
    fn new(op: &LaplacianOperator) -> Self {
        let g = op.graph();
        let (count, labels) = g.connected_components();
        let mut weights: Vec<f64> = (0..g.num_nodes())
            .map(|p| match op.kind() {
                LaplacianKind::Combinatorial => 1.0,
                LaplacianKind::Normalized => {
                    let d = g.weighted_degree(p);
                    if d > 0.0 {
                        d.sqrt()
                    } else {
                        1.0
                    }
                }
            })
            .collect();
        let mut norms = vec![0.0; count];
        for (p, &w) in weights.iter().enumerate() {
            norms[labels[p]] += w * w;
        }
        for (p, w) in weights.iter_mut().enumerate() {
            *w /= norms[labels[p]].sqrt();
        }
        Self {
            labels,
            weights,
            count,
        }
    }

    fn project(&self, x: &mut [f64], scratch: &mut Vec<f64>) {
        scratch.clear();
        scratch.resize(self.count, 0.0);
        for (p, &v) in x.iter().enumerate() {
            scratch[self.labels[p]] += self.weights[p] * v;
        }
        for (p, v) in x.iter_mut().enumerate() {
            *v -= scratch[self.labels[p]] * self.weights[p];
        }
    }
}

/// Jacobi-preconditioned conjugate gradients on `op x = rhs`, starting from
/// the value already in `x`. Returns the iteration count.
fn pcg(
    op: &LaplacianOperator,
    inv_diag: &[f64],
    rhs: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<usize> {
    let n = rhs.len();
    let b_norm = norm2(rhs);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let mut r = vec![0.0; n];
    op.apply(x, &mut r);
    for i in 0..n {
        r[i] = rhs[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut history = Vec::new();
    let target = rel_tol * b_norm;
    for iter in 0..=max_iter {
        let r_norm = norm2(&r);
        history.push(r_norm / b_norm);
        if r_norm <= target {
            return Ok(iter);
        }
        if iter == max_iter {
            break;
        }
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap.is_nan() || pap <= 0.0 {
            return Err(Error::Convergence {
                message: format!("CG breakdown after {iter} iterations (pᵀAp = {pap:e})"),
                residual_history: history,
            });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Convergence {
        message: format!("CG did not converge within {max_iter} iterations"),
        residual_history: history,
    })
}

/// Column-stored block of vectors.
type Block = Vec<Vec<f64>>;

/// `Σ_k block[k] * coeffs[(k, j)]` for every `j`.
fn combine(block: &Block, coeffs: &DMatrix<f64>) -> Block {
    let n = block.first().map_or(0, Vec::len);
    (0..coeffs.ncols())
        .map(|j| {
            let mut out = vec![0.0; n];
            for (k, col) in block.iter().enumerate() {
                let c = coeffs[(k, j)];
                if c != 0.0 {
                    axpy(c, col, &mut out);
                }
            }
            out
        })
        .collect()
}

fn gram(a: &Block, b: &Block) -> DMatrix<f64> {
    let m = a.len();
    let mut g = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = 0.5 * (dot(&a[i], &b[j]) + dot(&a[j], &b[i]));
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    g
}

/// Makes `z` B-orthonormal in place (`bz` tracks `B z`), by two rounds of
/// Cholesky orthogonalization.
fn b_orthonormalize(z: &mut Block, bz: &mut Block) -> Result<()> {
    for _ in 0..2 {
        let g = gram(z, bz);
        let chol = g.cholesky().ok_or_else(|| {
            Error::Numeric("search block lost rank during B-orthonormalization".into())
        })?;
        let l_inv_t = chol
            .l()
            .try_inverse()
            .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?
            .transpose();
        *z = combine(z, &l_inv_t);
        *bz = combine(bz, &l_inv_t);
    }
    Ok(())
}

/// Top-`s` eigenpairs of `(L_X, L_Y + εI)` restricted to the complement of
/// the `L_Y` null space; `ε` is `ly`'s own shift.
pub fn top_generalized_eigenpairs(
    lx: &LaplacianOperator,
    ly: &LaplacianOperator,
    s: usize,
    cfg: &EigenSolverConfig,
) -> Result<SpectralEmbedding> {
    let n = lx.dim();
    if ly.dim() != n {
        return Err(Error::Dimension(format!(
            "L_X has {n} nodes, L_Y has {}",
            ly.dim()
        )));
    }
    if !(cfg.tol > 0.0 && cfg.cg_tol > 0.0) || cfg.max_sweeps == 0 {
        return Err(Error::Parameter(
            "tolerances must be positive and max_sweeps at least 1".into(),
        ));
    }
    let deflation = Deflation::new(ly);
    let dim = n - deflation.count;
    if s == 0 || s > dim {
        return Err(Error::Parameter(format!(
            "s = {s} must lie in 1..={dim} (N = {n}, {} components in the L_Y graph)",
            deflation.count
        )));
    }
    let block_size = (s + cfg.oversample.unwrap_or((s / 2).max(10))).min(dim);
    let inv_diag: Vec<f64> = ly
        .diagonal()
        .into_iter()
        .map(|d| if d > 0.0 { d.recip() } else { 1.0 })
        .collect();
    let cg_cap = 10 * n;
    let mut scratch = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut x: Block = (0..block_size)
        .map(|_| {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            deflation.project(&mut v, &mut scratch);
            v
        })
        .collect();
    let mut lx_x: Block = x.iter().map(|v| apply(lx, v)).collect();
    let mut theta: Option<Vec<f64>> = None;
    let mut diagnostics = SolverDiagnostics {
        block_size,
        seed: cfg.seed,
        shift: ly.shift(),
        deflated_components: deflation.count,
        ..SolverDiagnostics::default()
    };

    for sweep in 1..=cfg.max_sweeps {
        // z_j = B⁻¹ P L_X x_j, warm-started at θ_j x_j
        let mut z: Block = Vec::with_capacity(block_size);
        for j in 0..block_size {
            let mut rhs = lx_x[j].clone();
            deflation.project(&mut rhs, &mut scratch);
            let mut zj = match &theta {
                Some(t) => x[j].iter().map(|v| v * t[j]).collect(),
                None => vec![0.0; n],
            };
            diagnostics.cg_iterations += pcg(ly, &inv_diag, &rhs, &mut zj, cfg.cg_tol, cg_cap)?;
            deflation.project(&mut zj, &mut scratch);
            z.push(zj);
        }
        let mut bz: Block = z.iter().map(|v| apply(ly, v)).collect();
        b_orthonormalize(&mut z, &mut bz)?;

        let lz: Block = z.iter().map(|v| apply(lx, v)).collect();
        let eig = SymmetricEigen::new(gram(&z, &lz));
        let mut order: Vec<usize> = (0..block_size).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let ritz: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let u = DMatrix::from_fn(block_size, block_size, |r, c| eig.eigenvectors[(r, order[c])]);
        x = combine(&z, &u);
        lx_x = combine(&lz, &u);
        let bx = combine(&bz, &u);

        let residuals: Vec<f64> = (0..s)
            .map(|j| {
                let mut r = lx_x[j].clone();
                axpy(-ritz[j], &bx[j], &mut r);
                deflation.project(&mut r, &mut scratch);
                let scale = ritz[j].abs() * norm2(&bx[j]);
                if scale > 0.0 {
                    norm2(&r) / scale
                } else {
                    norm2(&r)
                }
            })
            .collect();
        let worst = residuals.iter().copied().fold(0.0, f64::max);
        if !worst.is_finite() {
            return Err(Error::Numeric(format!("non-finite eigen-residual in sweep {sweep}")));
        }
        diagnostics.residual_history.push(worst);
        diagnostics.sweeps = sweep;
        theta = Some(ritz.clone());
        if worst <= cfg.tol {
            diagnostics.residuals = residuals;
            let mut vectors = DenseMatrix::zeros(n, s);
            for (j, col) in x.iter().take(s).enumerate() {
                vectors.set_column(j, col);
            }
            let zetas = ritz[..s].iter().map(|&z| z.max(0.0)).collect();
            return SpectralEmbedding::from_pairs(zetas, vectors, diagnostics);
        }
    }
    Err(Error::Convergence {
        message: format!(
            "eigensolver did not reach tolerance {:e} within {} sweeps",
            cfg.tol, cfg.max_sweeps
        ),
        residual_history: diagnostics.residual_history,
    })
}

fn apply(op: &LaplacianOperator, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    op.apply(x, &mut out);
    out
}

/// Dense reference solve of the same deflated pencil. `ly` must already carry
/// the regularization; the deflated directions are the per-component
/// constants of its off-diagonal pattern.
pub fn dense_generalized_eig_oracle(
    lx: &DenseMatrix,
    ly: &DenseMatrix,
    s: usize,
) -> Result<(Vec<f64>, DenseMatrix)> {
    let n = lx.rows();
    if n > DENSE_ORACLE_LIMIT {
        return Err(Error::Parameter(format!(
            "dense oracle is limited to {DENSE_ORACLE_LIMIT} nodes, got {n}"
        )));
    }
    if lx.shape() != (n, n) || ly.shape() != (n, n) {
        return Err(Error::Dimension("oracle needs two square matrices of equal size".into()));
    }
    let edges: Vec<EdgePair> = (0..n)
        .flat_map(|p| (p + 1..n).map(move |q| (p, q)))
        .filter(|&(p, q)| ly[(p, q)] != 0.0)
        .collect();
    let (count, labels) = SparseGraph::from_pairs(n, &edges)?.connected_components();
    if s == 0 || s > n - count {
        return Err(Error::Parameter(format!("s = {s} must lie in 1..={}", n - count)));
    }
    let mut q = DMatrix::<f64>::zeros(n, count);
    let mut sizes = vec![0.0; count];
    labels.iter().for_each(|&c| sizes[c] += 1.0);
    for (p, &c) in labels.iter().enumerate() {
        q[(p, c)] = 1.0 / f64::sqrt(sizes[c]);
    }
    let proj = DMatrix::<f64>::identity(n, n) - &q * q.transpose();
    let a_x = DMatrix::from_row_slice(n, n, lx.as_slice());
    let b_y = DMatrix::from_row_slice(n, n, ly.as_slice());
    let a = &proj * a_x * &proj;
    let m = &proj * b_y * &proj + &q * q.transpose();
    let a = 0.5 * (&a + a.transpose());
    let m = 0.5 * (&m + m.transpose());
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::Numeric("regularized L_Y is not positive definite".into()))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
    let c = &l_inv * a * l_inv.transpose();
    let eig = SymmetricEigen::new(0.5 * (&c + c.transpose()));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut vectors = DenseMatrix::zeros(n, s);
    let mut zetas = Vec::with_capacity(s);
    let l_inv_t = l_inv.transpose();
    for (col, &k) in order.iter().take(s).enumerate() {
        let mut v: Vec<f64> = (l_inv_t.clone() * eig.eigenvectors.column(k)).iter().copied().collect();
        normalize_sign(&mut v);
        vectors.set_column(col, &v);
        zetas.push(eig.eigenvalues[k].max(0.0));
    }
    Ok((zetas, vectors))
}

/// Per-edge scores with a deterministic ranking.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeScoreTable {
    edges: Vec<EdgePair>,
    scores: Vec<f64>,
    ranking: Vec<usize>,
}

impl EdgeScoreTable {
    /// `edges` must be canonical; the ranking orders scores nonincreasing with
    /// ties by edge position.
    pub fn new(edges: Vec<EdgePair>, scores: Vec<f64>) -> Result<Self> {
        if edges.len() != scores.len() {
            return Err(Error::Validation(format!(
                "{} scores for {} edges",
                scores.len(),
                edges.len()
            )));
        }
        if let Some(i) = scores.iter().position(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::Validation(format!(
                "score {} of edge ({}, {}) is not a finite nonnegative number",
                scores[i], edges[i].0, edges[i].1
            )));
        }
        if let Some(&(p, q)) = edges.iter().find(|&&(p, q)| p >= q) {
            return Err(Error::Validation(format!("edge ({p}, {q}) is not stored as (min, max)")));
        }
        let mut ranking: Vec<usize> = (0..edges.len()).collect();
        ranking.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        Ok(Self {
            edges,
            scores,
            ranking,
        })
    }

    pub fn edges(&self) -> &[EdgePair] {
        &self.edges
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn ranking(&self) -> &[usize] {
        &self.ranking
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Edges from most to least unstable.
    pub fn ranked_edges(&self) -> impl Iterator<Item = (EdgePair, f64)> + '_ {
        self.ranking.iter().map(|&i| (self.edges[i], self.scores[i]))
    }

    /// Writes `p q score` lines in edge order.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("p q score\n");
        for (&(p, q), s) in self.edges.iter().zip(&self.scores) {
            writeln!(out, "{p} {q} {s}").unwrap();
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Load {
            path: path.to_path_buf(),
            source,
        })?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, "p q score")) => {}
            _ => return Err(Error::parse(path, 1, "expected header `p q score`")),
        }
        let mut edges = Vec::new();
        let mut scores = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let parsed = match f[..] {
                [p, q, s] => p.parse::<usize>().ok().zip(q.parse::<usize>().ok()).zip(s.parse::<f64>().ok()),
                _ => None,
            };
            let ((p, q), s) = parsed.ok_or_else(|| Error::parse(path, i + 1, "expected `p q score`"))?;
            edges.push((p, q));
            scores.push(s);
        }
        Self::new(edges, scores)
    }
}

/// `score(p, q) = Σ_i (vs[p, i] − vs[q, i])²` for every edge of `graph`.
pub fn spade_scores(emb: &SpectralEmbedding, graph: &SparseGraph) -> Result<EdgeScoreTable> {
    if emb.vs.rows() != graph.num_nodes() {
        return Err(Error::Dimension(format!(
            "embedding has {} rows, graph has {} nodes",
            emb.vs.rows(),
            graph.num_nodes()
        )));
    }
    let edges = graph.edge_pairs();
    let scores = edges
        .iter()
        .map(|&(p, q)| {
            emb.vs
                .row(p)
                .iter()
                .zip(emb.vs.row(q))
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        })
        .collect();
    EdgeScoreTable::new(edges, scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_column_scores() {
        let g = SparseGraph::from_pairs(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let v = DenseMatrix::from_vec(3, 1, vec![1.0, -2.0, 0.5]).unwrap();
        let emb = SpectralEmbedding::from_pairs(vec![1.0], v, SolverDiagnostics::default()).unwrap();
        let t = spade_scores(&emb, &g).unwrap();
        assert_eq!(t.edges(), &[(0, 1), (0, 2), (1, 2)]);
        // the largest entry of the column is -2, so the sign is flipped
        assert_eq!(t.scores(), &[9.0, 0.25, 6.25]);
        assert_eq!(t.ranking(), &[0, 2, 1]);
    }

    #[test]
    fn zero_embedding_ranks_by_index() {
        let g = SparseGraph::from_pairs(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let emb = SpectralEmbedding::from_pairs(
            vec![0.0, 0.0],
            DenseMatrix::zeros(4, 2),
            SolverDiagnostics::default(),
        )
        .unwrap();
        let t = spade_scores(&emb, &g).unwrap();
        assert!(t.scores().iter().all(|&s| s == 0.0));
        assert_eq!(t.ranking(), &[0, 1, 2]);
    }

    #[test]
    fn two_node_pencil() {
        let g = SparseGraph::from_pairs(2, &[(0, 1)]).unwrap();
        let l = LaplacianOperator::combinatorial(&g).to_dense();
        let (z, v) = dense_generalized_eig_oracle(&l, &l, 1).unwrap();
        assert!((z[0] - 1.0).abs() < 1e-12);
        // vᵀLv = 1 with v ∝ (1, -1) gives entries ±1/2
        assert!((v[(0, 0)].abs() - 0.5).abs() < 1e-12);
        assert!((v[(0, 0)] + v[(1, 0)]).abs() < 1e-12);
    }

    #[test]
    fn oracle_guard_rail() {
        let big = DenseMatrix::zeros(DENSE_ORACLE_LIMIT + 1, DENSE_ORACLE_LIMIT + 1);
        assert!(matches!(
            dense_generalized_eig_oracle(&big, &big, 1),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn misaligned_table_is_rejected() {
        assert!(matches!(
            EdgeScoreTable::new(vec![(0, 1)], vec![]),
            Err(Error::Validation(_))
        ));
    }
}
