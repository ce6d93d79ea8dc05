//! Acceptance run: prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Criteria 1-4 and 8 run the full pipeline on CiteSeer (five seeds plus a
//! repeat of the first), so this target takes a few minutes.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use spadeprune::dataset::planetoid::convert_planetoid;
use spadeprune::dataset::save_dataset;
use spadeprune::gcn::{GcnHyper, GcnModel, Mode};
use spadeprune::manifold::{approx_knn_lists, exact_knn_lists, recall, KnnConfig, KnnMethod};
use spadeprune::pipeline::{run_pipeline, ExperimentConfig, RobustnessReport, Variant};
use spadeprune::prune::budget;
use spadeprune::spectral::{
    dense_generalized_eig_oracle, default_regularization, spade_scores, top_generalized_eigenpairs,
    EigenSolverConfig, SolverDiagnostics, SpectralEmbedding,
};
use spadeprune::{gcn_normalized_adjacency, CsrMatrix, DenseMatrix, LaplacianOperator, SparseGraph};

const SEEDS: u64 = 5;

struct Outcome {
    id: usize,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn rows(report: &RobustnessReport, variant: Variant) -> BTreeMap<u64, (f64, f64)> {
    // keyed by rho in basis points
    report
        .rows_for(variant)
        .map(|r| (((r.rho * 10000.0).round()) as u64, (r.attacked, r.delta)))
        .collect()
}

struct CiteseerRuns {
    reports: Vec<RobustnessReport>,
    wall: Vec<f64>,
    train_secs: Vec<f64>,
    repeat_identical: bool,
}

fn citeseer_runs(work: &Path) -> CiteseerRuns {
    let raw = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/planetoid/citeseer");
    let data = work.join("citeseer");
    let bundle = convert_planetoid(&raw, "citeseer").expect("convert CiteSeer");
    save_dataset(&bundle, &data).expect("save CiteSeer");

    let base = |seed: u64, out: PathBuf| {
        let mut cfg = ExperimentConfig {
            dataset: data.clone(),
            out,
            ..ExperimentConfig::default()
        };
        cfg.set("seed", &seed.to_string()).unwrap();
        cfg
    };
    let mut reports = Vec::new();
    let mut wall = Vec::new();
    let mut train_secs = Vec::new();
    for seed in 0..SEEDS {
        let cfg = base(seed, work.join(format!("seed_{seed}")));
        let start = Instant::now();
        let report = run_pipeline(&cfg).expect("pipeline run");
        wall.push(start.elapsed().as_secs_f64());
        let train = report
            .provenance
            .timings
            .iter()
            .find(|(p, _)| p == "train")
            .map_or(f64::NAN, |t| t.1);
        train_secs.push(train);
        eprintln!(
            "  seed {seed}: clean {} / pruned {} in {:.1}s",
            pct(report.clean_original),
            pct(report.clean_pruned),
            wall.last().unwrap()
        );
        reports.push(report);
    }
    let again = base(0, work.join("repeat_seed_0"));
    run_pipeline(&again).expect("repeat run");
    let csv = |dir: &Path| std::fs::read(dir.join("eval/report.csv")).unwrap();
    let repeat_identical = csv(&work.join("seed_0")) == csv(&again.out);
    CiteseerRuns {
        reports,
        wall,
        train_secs,
        repeat_identical,
    }
}

fn criterion_1(runs: &CiteseerRuns) -> Outcome {
    let acc = mean(runs.reports.iter().map(|r| r.clean_original));
    let slowest = runs.wall.iter().copied().fold(0.0, f64::max);
    let train = runs.train_secs.iter().copied().fold(0.0, f64::max);
    Outcome {
        id: 1,
        title: "clean accuracy, original graph",
        pass: (acc - 0.684).abs() <= 0.020 && slowest <= 120.0,
        detail: format!(
            "mean {}% over {SEEDS} seeds (target 68.4 +/- 2.0), slowest full run {slowest:.1}s, slowest training {train:.1}s",
            pct(acc)
        ),
    }
}

fn criterion_2(runs: &CiteseerRuns) -> Outcome {
    let acc = mean(runs.reports.iter().map(|r| r.clean_pruned));
    let drops: Vec<f64> = runs
        .reports
        .iter()
        .map(|r| r.clean_original - r.clean_pruned)
        .collect();
    let nonneg = drops.iter().filter(|&&d| d >= 0.0).count();
    let drops_txt: Vec<String> = drops.iter().map(|d| pct(*d)).collect();
    Outcome {
        id: 2,
        title: "clean accuracy, pruned graph",
        pass: (acc - 0.662).abs() <= 0.025 && nonneg >= 4,
        detail: format!(
            "mean {}% (target 66.2 +/- 2.5), drop nonnegative in {nonneg}/{SEEDS} seeds [{}]",
            pct(acc),
            drops_txt.join(", ")
        ),
    }
}

fn mean_deltas(runs: &CiteseerRuns, variant: Variant) -> BTreeMap<u64, f64> {
    let per_seed: Vec<_> = runs.reports.iter().map(|r| rows(r, variant)).collect();
    per_seed[0]
        .keys()
        .map(|&rho| (rho, mean(per_seed.iter().map(|m| m[&rho].1))))
        .collect()
}

fn criterion_3(runs: &CiteseerRuns) -> Outcome {
    let orig = mean_deltas(runs, Variant::Original);
    let pruned = mean_deltas(runs, Variant::Pruned);
    let early: Vec<f64> = [500, 1000, 1500].iter().map(|r| orig[r]).collect();
    let negative = early.iter().all(|&d| d < 0.0);
    let monotone = early.windows(2).all(|w| w[1].abs() >= w[0].abs());
    let worst_pruned = pruned.values().map(|d| d.abs()).fold(0.0, f64::max);
    let fmt = |m: &BTreeMap<u64, f64>| {
        m.iter()
            .map(|(r, d)| format!("{}%:{}", r / 100, pct(*d)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    Outcome {
        id: 3,
        title: "robustness trend",
        pass: negative && monotone && worst_pruned <= 0.005,
        detail: format!(
            "original mean deltas [{}] (negative {negative}, nondecreasing {monotone}); pruned [{}] (max |delta| {} vs 0.5)",
            fmt(&orig),
            fmt(&pruned),
            pct(worst_pruned)
        ),
    }
}

fn criterion_4(runs: &CiteseerRuns) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (seed, r) in runs.reports.iter().enumerate() {
        let limit = budget(0.155, r.reference_edge_count);
        let count = r.valid_candidate_count;
        let below = count < limit;
        let in_band = (550..=800).contains(&count);
        let identical = [Variant::Original, Variant::Pruned].iter().all(|&v| {
            let m = rows(r, v);
            [2000, 2500, 3000].iter().all(|rho| m[rho].0 == m[&1500].0)
        });
        pass &= below && in_band && identical;
        parts.push(format!(
            "seed {seed}: {count} edges (saturates below 15.5% budget {limit}: {below}, rows 15-30% identical: {identical})"
        ));
    }
    Outcome {
        id: 4,
        title: "attack saturation",
        pass,
        detail: parts.join("; "),
    }
}

/// Ring plus random chords with random weights.
fn connected_graph(n: usize, extra: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize, f64)> {
    let mut edges = BTreeMap::new();
    for i in 0..n {
        let (p, q) = (i, (i + 1) % n);
        if p != q {
            edges.insert((p.min(q), p.max(q)), rng.random_range(0.5..2.0));
        }
    }
    let max_edges = n * (n - 1) / 2;
    while edges.len() < (n + extra).min(max_edges) {
        let p = rng.random_range(0..n);
        let q = rng.random_range(0..n);
        if p != q {
            edges.entry((p.min(q), p.max(q))).or_insert(rng.random_range(0.5..2.0));
        }
    }
    edges.into_iter().map(|((p, q), w)| (p, q, w)).collect()
}

fn criterion_5() -> Outcome {
    // Scores inherit the eigenvector error, which scales with the residual
    // tolerance, so compare at a tight one.
    let cfg = EigenSolverConfig {
        tol: 1e-10,
        cg_tol: 1e-13,
        ..EigenSolverConfig::default()
    };
    let mut worst_zeta = 0.0f64;
    let mut worst_score = 0.0f64;
    let mut instances = 0;
    let mut disconnected = 0;
    let mut failures = Vec::new();
    for seed in 0..60u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let n = rng.random_range(20..=200);
        let gx = SparseGraph::new(n, &connected_graph(n, n / 2, &mut rng)).unwrap();
        // every other instance splits the manifold graph into 2-3 pieces
        let pieces = if seed % 2 == 0 { 1 } else { rng.random_range(2..=3) };
        let mut ly_edges = Vec::new();
        let mut start = 0;
        for k in 0..pieces {
            let size = if k + 1 == pieces { n - start } else { n / pieces };
            ly_edges.extend(
                connected_graph(size, size, &mut rng)
                    .into_iter()
                    .map(|(p, q, w)| (p + start, q + start, w)),
            );
            start += size;
        }
        let gy = SparseGraph::new(n, &ly_edges).unwrap();
        let s = rng.random_range(1..=10);
        let lx = LaplacianOperator::combinatorial(&gx);
        let ly = LaplacianOperator::combinatorial(&gy)
            .with_shift(default_regularization(&gy))
            .unwrap();
        let cfg = EigenSolverConfig { seed, ..cfg };
        let emb = top_generalized_eigenpairs(&lx, &ly, s, &cfg).unwrap();
        let (zetas, vectors) = dense_generalized_eig_oracle(&lx.to_dense(), &ly.to_dense(), s).unwrap();
        let reference = SpectralEmbedding::from_pairs(zetas.clone(), vectors, SolverDiagnostics::default()).unwrap();
        let rel = emb
            .zetas
            .iter()
            .zip(&zetas)
            .map(|(a, b)| (a - b).abs() / b.abs())
            .fold(0.0, f64::max);
        let got = spade_scores(&emb, &gx).unwrap();
        let want = spade_scores(&reference, &gx).unwrap();
        let scale = want.scores().iter().copied().fold(0.0, f64::max);
        let score_err = got
            .scores()
            .iter()
            .zip(want.scores())
            .map(|(a, b)| (a - b).abs() / scale)
            .fold(0.0, f64::max);
        if rel > 1e-6 || score_err > 1e-8 {
            failures.push(format!("seed {seed} (n={n}, s={s}): zeta {rel:.1e}, score {score_err:.1e}"));
        }
        worst_zeta = worst_zeta.max(rel);
        worst_score = worst_score.max(score_err);
        instances += 1;
        disconnected += usize::from(gy.connected_components().0 > 1);
    }

    // trivial pencils
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let g = SparseGraph::new(60, &connected_graph(60, 50, &mut rng)).unwrap();
    let doubled: Vec<_> = g.edges().into_iter().map(|(p, q, w)| (p, q, 2.0 * w)).collect();
    let g2 = SparseGraph::new(60, &doubled).unwrap();
    let l = LaplacianOperator::combinatorial(&g);
    let l2 = LaplacianOperator::combinatorial(&g2);
    let same = top_generalized_eigenpairs(&l, &l, 8, &cfg).unwrap();
    let twice = top_generalized_eigenpairs(&l2, &l, 8, &cfg).unwrap();
    let unit_err = same.zetas.iter().map(|z| (z - 1.0).abs()).fold(0.0, f64::max);
    let two_err = twice.zetas.iter().map(|z| (z - 2.0).abs()).fold(0.0, f64::max);

    let pass = failures.is_empty() && instances >= 50 && disconnected > 0 && unit_err <= 1e-8 && two_err <= 1e-8;
    Outcome {
        id: 5,
        title: "eigensolver oracle equivalence",
        pass,
        detail: format!(
            "solver tol {:.0e}, {instances} pairs ({disconnected} with disconnected L_Y), worst eigenvalue rel err {worst_zeta:.2e}, worst normalized score err {worst_score:.2e}, L_X=L_Y err {unit_err:.1e}, L_X=2L_Y err {two_err:.1e}{}",
            cfg.tol,
            if failures.is_empty() { String::new() } else { format!("; failing: {}", failures.join(", ")) }
        ),
    }
}

fn random_dense(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
        .unwrap()
}

fn criterion_6() -> Outcome {
    let step = 1e-5;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(5000 + seed);
        let n = rng.random_range(5..=20);
        let (d, h, c) = (rng.random_range(2..=6), rng.random_range(2..=6), rng.random_range(2..=4));
        let mut pairs = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.random::<f64>() < 0.3 {
                    pairs.push((a, b));
                }
            }
        }
        let g = SparseGraph::from_pairs(n, &pairs).unwrap();
        let x = CsrMatrix::from_dense(&random_dense(n, d, &mut rng));
        let hyper = GcnHyper {
            hidden_dim: h,
            dropout_rate: 0.0,
            ..GcnHyper::default()
        };
        let model = GcnModel::new(random_dense(d, h, &mut rng), random_dense(h, c, &mut rng), hyper).unwrap();
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        let mut mask: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.6).collect();
        mask[0] = true;
        let adj = gcn_normalized_adjacency(&g);
        let (_, g0, g1) = model
            .loss_and_gradients(&adj, &x, &labels, &mask, Mode::Train, None)
            .unwrap();
        let loss = |m: &GcnModel| m.loss_and_gradients(&adj, &x, &labels, &mask, Mode::Eval, None).unwrap().0;
        for (layer, grad) in [(0, &g0), (1, &g1)] {
            for (idx, &analytic) in grad.as_slice().iter().enumerate() {
                let shifted = |delta: f64| {
                    let (mut w0, mut w1) = (model.w0().clone(), model.w1().clone());
                    let w = if layer == 0 { &mut w0 } else { &mut w1 };
                    w.as_mut_slice()[idx] += delta;
                    GcnModel::new(w0, w1, model.hyper().clone()).unwrap()
                };
                let numeric = (loss(&shifted(step)) - loss(&shifted(-step))) / (2.0 * step);
                let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(err);
                checked += 1;
            }
        }
    }
    Outcome {
        id: 6,
        title: "gradient correctness",
        pass: worst <= 1e-4,
        detail: format!("100 instances, {checked} weight entries, worst relative error {worst:.2e}"),
    }
}

fn gaussian(n: usize, h: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_vec(n, h, (0..n * h).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

fn brute_force(x: &DenseMatrix, k: usize) -> Vec<Vec<usize>> {
    (0..x.rows())
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..x.rows())
                .filter(|&j| j != i)
                .map(|j| {
                    let dist = x.row(i).iter().zip(x.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                    (dist, j)
                })
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

fn criterion_7() -> Outcome {
    let cfg = KnnConfig::default();
    let mut exact_ok = true;
    for (n, h, seed) in [(500, 64, 1), (300, 8, 2), (120, 3, 3)] {
        let x = gaussian(n, h, seed);
        exact_ok &= exact_knn_lists(&x, &cfg).unwrap() == brute_force(&x, cfg.k);
    }
    let x = gaussian(2000, 64, 4);
    let approx_cfg = KnnConfig {
        method: KnnMethod::Approximate,
        ..cfg
    };
    let r = recall(
        &exact_knn_lists(&x, &approx_cfg).unwrap(),
        &approx_knn_lists(&x, &approx_cfg).unwrap(),
    );
    Outcome {
        id: 7,
        title: "k-NN fidelity",
        pass: exact_ok && r >= 0.9,
        detail: format!("exact equals brute force on 3 sets up to N=500: {exact_ok}; recall@10 at N=2000, h=64: {r:.4}"),
    }
}

fn criterion_8(runs: &CiteseerRuns) -> Outcome {
    Outcome {
        id: 8,
        title: "determinism",
        pass: runs.repeat_identical,
        detail: format!("two seed-0 runs give byte-identical CSV: {}", runs.repeat_identical),
    }
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters are harness conventions; honour the listing.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let work = tempfile::tempdir().expect("temp dir");
    eprintln!("running {SEEDS} CiteSeer seeds and one repeat");
    let runs = citeseer_runs(work.path());
    let outcomes = [
        criterion_1(&runs),
        criterion_2(&runs),
        criterion_3(&runs),
        criterion_4(&runs),
        criterion_5(),
        criterion_6(),
        criterion_7(),
        criterion_8(&runs),
    ];
    for o in &outcomes {
        println!(
            "{} criterion {} ({}): {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.id,
            o.title,
            o.detail
        );
    }
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
