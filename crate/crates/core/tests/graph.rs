use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spadeprune::dataset::planetoid::convert_planetoid;
use spadeprune::{gcn_normalized_adjacency, DenseMatrix, LaplacianOperator, SparseGraph};

/// Dense combinatorial Laplacian assembled entry by entry from its definition.
fn dense_laplacian(g: &SparseGraph) -> DenseMatrix {
    let n = g.num_nodes();
    let mut l = DenseMatrix::zeros(n, n);
    for p in 0..n {
        for q in 0..n {
            l[(p, q)] = if p == q {
                g.neighbors(p).1.iter().sum()
            } else {
                g.edge_weight(p, q).map_or(0.0, |w| -w)
            };
        }
    }
    l
}

fn random_graph(n: usize, p: f64, weighted: bool, rng: &mut ChaCha8Rng) -> SparseGraph {
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random::<f64>() < p {
                let w = if weighted { rng.random_range(0.1..5.0) } else { 1.0 };
                edges.push((a, b, w));
            }
        }
    }
    SparseGraph::new(n, &edges).unwrap()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1.0);
    diff / scale
}

#[test]
fn matvec_and_quadratic_form_match_dense_assembly() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for (n, p) in [(20, 0.2), (50, 0.1), (120, 0.05), (200, 0.03)] {
        let g = random_graph(n, p, true, &mut rng);
        let dense = dense_laplacian(&g);
        let op = LaplacianOperator::combinatorial(&g);
        assert_eq!(op.to_dense(), dense);
        for _ in 0..5 {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let want = dense.matvec_dense(&x);
            assert!(rel_err(&op.matvec(&x).unwrap(), &want) < 1e-10);
            let quad: f64 = x.iter().zip(&want).map(|(a, b)| a * b).sum();
            let got = op.quadratic_form(&x).unwrap();
            assert!((got - quad).abs() <= 1e-10 * quad.abs().max(1.0));
        }
    }
}

trait DenseMatvec {
    fn matvec_dense(&self, x: &[f64]) -> Vec<f64>;
}

impl DenseMatvec for DenseMatrix {
    fn matvec_dense(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows())
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

#[test]
fn quadratic_form_is_nonnegative_on_probes() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut probes = 0;
    for n in [5, 30, 90, 200] {
        let g = random_graph(n, 0.1, true, &mut rng);
        for kind_normalized in [false, true] {
            let op = if kind_normalized {
                LaplacianOperator::normalized(&g)
            } else {
                LaplacianOperator::combinatorial(&g)
            };
            for _ in 0..125 {
                let x: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
                assert!(op.quadratic_form(&x).unwrap() >= 0.0);
                probes += 1;
            }
        }
    }
    assert_eq!(probes, 1000);
}

#[test]
fn constant_vector_is_in_the_null_space() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for n in [1, 10, 77, 200] {
        let g = random_graph(n, 0.08, true, &mut rng);
        let op = LaplacianOperator::combinatorial(&g);
        let y = op.matvec(&vec![1.0; n]).unwrap();
        assert!(y.iter().all(|v| v.abs() <= 1e-12 * n as f64));
        assert_eq!(op.quadratic_form(&vec![1.0; n]).unwrap(), 0.0);
    }
}

#[test]
fn normalized_adjacency_matches_dense_construction_on_citeseer_subgraph() {
    let dir = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/planetoid/citeseer");
    let bundle = convert_planetoid(dir, "citeseer").unwrap();
    // induced subgraph on the 100 lowest-numbered endpoints of the edge list
    let mut nodes: Vec<usize> = bundle.edges().iter().flat_map(|&(p, q)| [p, q]).collect();
    nodes.sort_unstable();
    nodes.dedup();
    nodes.truncate(100);
    let index = |v: usize| nodes.iter().position(|&u| u == v);
    let pairs: Vec<(usize, usize)> = bundle
        .edges()
        .iter()
        .filter_map(|&(p, q)| Some((index(p)?, index(q)?)))
        .collect();
    let g = SparseGraph::from_pairs(100, &pairs).unwrap();
    assert!(g.num_edges() > 0);

    let mut a = DenseMatrix::identity(100);
    for &(p, q) in &pairs {
        a[(p, q)] = 1.0;
        a[(q, p)] = 1.0;
    }
    let deg: Vec<f64> = (0..100).map(|i| a.row(i).iter().sum()).collect();
    let sparse = gcn_normalized_adjacency(&g).to_dense();
    for p in 0..100 {
        for q in 0..100 {
            let want = a[(p, q)] / (deg[p] * deg[q]).sqrt();
            assert!((sparse[(p, q)] - want).abs() < 1e-10);
        }
    }
}

#[test]
fn citeseer_pruning_arithmetic() {
    let dir = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/planetoid/citeseer");
    let g = convert_planetoid(dir, "citeseer").unwrap().graph();
    let drop: Vec<_> = g.edge_pairs().into_iter().step_by(5).take(910).collect();
    assert_eq!(g.remove_edges(&drop).unwrap().num_edges(), 3642);
}

fn arb_graph_and_additions() -> impl Strategy<Value = (SparseGraph, Vec<(usize, usize)>)> {
    (3usize..25).prop_flat_map(|n| {
        let all: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        let len = all.len();
        (
            Just(n),
            Just(all),
            proptest::collection::vec(0u8..3, len),
        )
            .prop_map(|(n, all, tags)| {
                let mut base = Vec::new();
                let mut extra = Vec::new();
                for (pair, tag) in all.into_iter().zip(tags) {
                    match tag {
                        0 => base.push((pair.0, pair.1, 1.0 + (pair.0 * 3 + pair.1) as f64 * 0.25)),
                        1 => extra.push(pair),
                        _ => {}
                    }
                }
                (SparseGraph::new(n, &base).unwrap(), extra)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn add_then_remove_restores_graph((g, extra) in arb_graph_and_additions()) {
        let grown = g.add_edges(&extra, 1.0).unwrap();
        prop_assert_eq!(grown.num_edges(), g.num_edges() + extra.len());
        let back = grown.remove_edges(&extra).unwrap();
        prop_assert_eq!(back, g);
    }
}
