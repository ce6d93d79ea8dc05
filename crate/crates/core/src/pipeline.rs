//! End-to-end experiment: train, embed, build the manifold graph, score and
//! prune edges, retrain, attack both graphs, and report.
//!
//! Every phase writes its outputs under `<out>/<phase>/` and reads only what
//! earlier phases wrote there, so any phase can be rerun on cached inputs.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::attack::{apply_attack, generate_attack, AttackConfig, AttackResult};
use crate::dataset::{
    load_dataset, load_graph, load_matrix, save_graph, save_matrix, write_edge_list,
    DatasetBundle,
};
use crate::error::{Error, Result};
use crate::gcn::{train, GcnHyper, GcnModel, TrainReport};
use crate::graph::{LaplacianOperator, SparseGraph};
use crate::manifold::{knn_graph, KnnConfig, KnnMethod};
use crate::prune::{prune_graph, PruneConfig};
use crate::spectral::{
    default_regularization, spade_scores, top_generalized_eigenpairs, EdgeScoreTable,
    EigenSolverConfig, SpectralEmbedding,
};

/// Phase names, in execution order; each is also its artifact directory.
pub const PHASES: [&str; 9] = [
    "train", "embed", "knn", "eigs", "score", "prune", "retrain", "attack", "eval",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    /// Dataset directory in the portable layout.
    pub dataset: PathBuf,
    pub out: PathBuf,
    /// Row-normalize features before training.
    pub normalize_features: bool,
    pub gcn: GcnHyper,
    pub knn: KnnConfig,
    pub s: usize,
    pub eigen: EigenSolverConfig,
    pub prune: PruneConfig,
    pub rhos: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("data/citeseer"),
            out: PathBuf::from("out"),
            normalize_features: false,
            gcn: GcnHyper::default(),
            knn: KnnConfig::default(),
            s: 50,
            eigen: EigenSolverConfig::default(),
            prune: PruneConfig::default(),
            rhos: vec![0.05, 0.10, 0.15, 0.20, 0.25, 0.30],
        }
    }
}

/// Keys accepted by [`ExperimentConfig::set`], in canonical order.
pub const CONFIG_KEYS: [&str; 20] = [
    "dataset",
    "out",
    "seed",
    "normalize_features",
    "hidden_dim",
    "dropout_rate",
    "learning_rate",
    "weight_decay",
    "max_epochs",
    "k",
    "knn_method",
    "max_links",
    "ef_construction",
    "ef_search",
    "s",
    "eig_tol",
    "cg_tol",
    "max_sweeps",
    "prune_fraction",
    "rhos",
];

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Parameter(format!("cannot parse {key} = {value:?}")))
}

impl ExperimentConfig {
    /// Sets one key from its text form. The seed drives the GCN, the
    /// approximate k-NN index and the eigensolver's start block alike.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "dataset" => self.dataset = PathBuf::from(value.trim()),
            "out" => self.out = PathBuf::from(value.trim()),
            "seed" => {
                let seed = parse_value(key, value)?;
                self.gcn.seed = seed;
                self.knn.seed = seed;
                self.eigen.seed = seed;
            }
            "normalize_features" => self.normalize_features = parse_value(key, value)?,
            "hidden_dim" => self.gcn.hidden_dim = parse_value(key, value)?,
            "dropout_rate" => self.gcn.dropout_rate = parse_value(key, value)?,
            "learning_rate" => self.gcn.learning_rate = parse_value(key, value)?,
            "weight_decay" => self.gcn.weight_decay = parse_value(key, value)?,
            "max_epochs" => self.gcn.max_epochs = parse_value(key, value)?,
            "k" => self.knn.k = parse_value(key, value)?,
            "knn_method" => {
                self.knn.method = match value.trim() {
                    "exact" => KnnMethod::Exact,
                    "approximate" => KnnMethod::Approximate,
                    "auto" => KnnMethod::Auto,
                    other => {
                        return Err(Error::Parameter(format!(
                            "knn_method must be exact, approximate or auto, got {other:?}"
                        )))
                    }
                }
            }
            "max_links" => self.knn.max_links = parse_value(key, value)?,
            "ef_construction" => self.knn.ef_construction = parse_value(key, value)?,
            "ef_search" => self.knn.ef_search = parse_value(key, value)?,
            "s" => self.s = parse_value(key, value)?,
            "eig_tol" => self.eigen.tol = parse_value(key, value)?,
            "cg_tol" => self.eigen.cg_tol = parse_value(key, value)?,
            "max_sweeps" => self.eigen.max_sweeps = parse_value(key, value)?,
            "prune_fraction" => self.prune.fraction = parse_value(key, value)?,
            "rhos" => {
                self.rhos = value
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(|t| parse_value::<f64>(key, t))
                    .collect::<Result<_>>()?
            }
            other => return Err(Error::Parameter(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` text file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, i + 1, "expected `key=value`"))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Load {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::default();
        cfg.apply_text(&text, path)?;
        Ok(cfg)
    }

    pub fn seed(&self) -> u64 {
        self.gcn.seed
    }

    fn knn_method_name(&self) -> &'static str {
        match self.knn.method {
            KnnMethod::Exact => "exact",
            KnnMethod::Approximate => "approximate",
            KnnMethod::Auto => "auto",
        }
    }

    /// Canonical `key=value` form, one line per key in [`CONFIG_KEYS`] order.
    /// `from_file` of this text reproduces the config.
    pub fn to_text(&self) -> String {
        let rhos: Vec<String> = self.rhos.iter().map(f64::to_string).collect();
        let values = [
            self.dataset.display().to_string(),
            self.out.display().to_string(),
            self.seed().to_string(),
            self.normalize_features.to_string(),
            self.gcn.hidden_dim.to_string(),
            self.gcn.dropout_rate.to_string(),
            self.gcn.learning_rate.to_string(),
            self.gcn.weight_decay.to_string(),
            self.gcn.max_epochs.to_string(),
            self.knn.k.to_string(),
            self.knn_method_name().to_string(),
            self.knn.max_links.to_string(),
            self.knn.ef_construction.to_string(),
            self.knn.ef_search.to_string(),
            self.s.to_string(),
            self.eigen.tol.to_string(),
            self.eigen.cg_tol.to_string(),
            self.eigen.max_sweeps.to_string(),
            self.prune.fraction.to_string(),
            rhos.join(","),
        ];
        CONFIG_KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    /// SHA-256 of the canonical text minus the output directory, hex encoded.
    pub fn hash(&self) -> String {
        let text: String = self
            .to_text()
            .lines()
            .filter(|l| !l.starts_with("out="))
            .map(|l| format!("{l}\n"))
            .collect();
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.gcn.validate()?;
        self.knn.validate()?;
        self.prune.validate()?;
        if self.s == 0 {
            return Err(Error::Parameter("s must be at least 1".into()));
        }
        if let Some(r) = self.rhos.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
            return Err(Error::Parameter(format!("rho {r} must be finite and >= 0")));
        }
        Ok(())
    }

    pub fn phase_dir(&self, phase: &str) -> PathBuf {
        self.out.join(phase)
    }
}

/// Attaches the phase name to any error from `f`.
fn in_phase<T>(phase: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| match e {
        already @ Error::Phase { .. } => already,
        other => Error::Phase {
            phase,
            source: Box::new(other),
        },
    })
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Load {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads `key=value` lines into pairs.
fn read_summary(path: &Path) -> Result<Vec<(String, String)>> {
    Ok(read_text(path)?
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect())
}

fn summary_value<T: std::str::FromStr>(pairs: &[(String, String)], key: &str, path: &Path) -> Result<T> {
    pairs
        .iter()
        .find(|(k, _)| k == key)
        .and_then(|(_, v)| v.parse().ok())
        .ok_or_else(|| Error::parse(path, 0, format!("missing or malformed `{key}`")))
}

/// Loads the dataset named by the config, applying feature normalization if
/// requested.
pub fn load_inputs(cfg: &ExperimentConfig) -> Result<DatasetBundle> {
    let bundle = load_dataset(&cfg.dataset)?;
    Ok(if cfg.normalize_features {
        bundle.with_row_normalized_features()
    } else {
        bundle
    })
}

fn write_training(dir: &Path, name: &str, report: &TrainReport) -> Result<()> {
    report.best_model.save(dir.join(format!("{name}.gcn")))?;
    let mut trace = String::from("epoch,loss,test_accuracy\n");
    for r in &report.trace {
        writeln!(trace, "{},{},{}", r.epoch, r.loss, r.test_accuracy).unwrap();
    }
    fs::write(dir.join(format!("{name}_trace.csv")), trace)?;
    fs::write(
        dir.join(format!("{name}_summary.txt")),
        format!(
            "best_test_accuracy={}\nbest_epoch={}\n",
            report.best_test_accuracy, report.best_epoch
        ),
    )?;
    Ok(())
}

/// Phase 1: GCN on the original graph. Writes `train/original.gcn` (the
/// best-epoch model), its trace and summary.
pub fn phase_train(cfg: &ExperimentConfig, bundle: &DatasetBundle) -> Result<TrainReport> {
    in_phase("train", || {
        let dir = cfg.phase_dir("train");
        create_dir(&dir)?;
        let report = train(bundle, &bundle.graph(), &cfg.gcn)?;
        write_training(&dir, "original", &report)?;
        Ok(report)
    })
}

fn original_model_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.phase_dir("train").join("original.gcn")
}

/// Phase 2: eval-mode hidden activations of the original-graph model.
pub fn phase_embed(cfg: &ExperimentConfig, bundle: &DatasetBundle) -> Result<()> {
    in_phase("embed", || {
        let model = GcnModel::load(original_model_path(cfg), cfg.gcn.clone())?;
        let hidden = model.embed(&bundle.graph(), bundle.features())?;
        save_matrix(&hidden, cfg.phase_dir("embed").join("hidden.txt"))
    })
}

/// Phase 3: k-NN manifold graph over the embeddings.
pub fn phase_knn(cfg: &ExperimentConfig) -> Result<SparseGraph> {
    in_phase("knn", || {
        let hidden = load_matrix(cfg.phase_dir("embed").join("hidden.txt"))?;
        let g = knn_graph(&hidden, &cfg.knn)?;
        create_dir(&cfg.phase_dir("knn"))?;
        save_graph(&g, cfg.phase_dir("knn").join("manifold.txt"))?;
        Ok(g)
    })
}

/// Phase 4: top-`s` eigenpairs of `(L_X, L_Y + εI)`.
pub fn phase_eigs(cfg: &ExperimentConfig, bundle: &DatasetBundle) -> Result<SpectralEmbedding> {
    in_phase("eigs", || {
        let manifold = load_graph(cfg.phase_dir("knn").join("manifold.txt"))?;
        let graph = bundle.graph();
        let lx = LaplacianOperator::combinatorial(&graph);
        let ly = LaplacianOperator::combinatorial(&manifold)
            .with_shift(default_regularization(&manifold))?;
        let emb = top_generalized_eigenpairs(&lx, &ly, cfg.s, &cfg.eigen)?;
        let dir = cfg.phase_dir("eigs");
        create_dir(&dir)?;
        emb.save(dir.join("embedding.txt"))?;
        let d = &emb.diagnostics;
        let history: Vec<String> = d.residual_history.iter().map(|r| format!("{r:e}")).collect();
        fs::write(
            dir.join("diagnostics.txt"),
            format!(
                "sweeps={}\nblock_size={}\nseed={}\nshift={}\ncomponents={}\ncg_iterations={}\nresidual_history={}\n",
                d.sweeps,
                d.block_size,
                d.seed,
                d.shift,
                d.deflated_components,
                d.cg_iterations,
                history.join(",")
            ),
        )?;
        Ok(emb)
    })
}

/// Phase 5: Spade scores of the original edges.
pub fn phase_score(cfg: &ExperimentConfig, bundle: &DatasetBundle) -> Result<EdgeScoreTable> {
    in_phase("score", || {
        let emb = SpectralEmbedding::load(cfg.phase_dir("eigs").join("embedding.txt"))?;
        let table = spade_scores(&emb, &bundle.graph())?;
        create_dir(&cfg.phase_dir("score"))?;
        table.save(cfg.phase_dir("score").join("scores.txt"))?;
        Ok(table)
    })
}

/// Phase 6: remove the top-ranked edges.
pub fn phase_prune(cfg: &ExperimentConfig, bundle: &DatasetBundle) -> Result<SparseGraph> {
    in_phase("prune", || {
        let table = EdgeScoreTable::load(cfg.phase_dir("score").join("scores.txt"))?;
        let (pruned, removed) = prune_graph(&bundle.graph(), &table, &cfg.prune)?;
        let dir = cfg.phase_dir("prune");
        create_dir(&dir)?;
        save_graph(&pruned, dir.join("pruned_graph.txt"))?;
        write_edge_list(dir.join("removed.txt"), &removed, None)?;
        Ok(pruned)
    })
}

/// Phase 7: a fresh GCN on the pruned graph, same hyperparameters and seed.
pub fn phase_retrain(cfg: &ExperimentConfig, bundle: &DatasetBundle) -> Result<TrainReport> {
    in_phase("retrain", || {
        let pruned = load_graph(cfg.phase_dir("prune").join("pruned_graph.txt"))?;
        let report = train(bundle, &pruned, &cfg.gcn)?;
        let dir = cfg.phase_dir("retrain");
        create_dir(&dir)?;
        write_training(&dir, "pruned", &report)?;
        Ok(report)
    })
}

fn attack_path(cfg: &ExperimentConfig, rho: f64) -> PathBuf {
    cfg.phase_dir("attack").join(format!("rho_{rho}.txt"))
}

/// Phase 8: one adversarial edge set per rho, generated from the
/// original-graph model against the original graph.
pub fn phase_attack(cfg: &ExperimentConfig, bundle: &DatasetBundle) -> Result<Vec<AttackResult>> {
    in_phase("attack", || {
        let model = GcnModel::load(original_model_path(cfg), cfg.gcn.clone())?;
        let hidden = load_matrix(cfg.phase_dir("embed").join("hidden.txt"))?;
        let graph = bundle.graph();
        let (_, correct) = model.evaluate(&graph, bundle, bundle.test_mask())?;
        let dir = cfg.phase_dir("attack");
        create_dir(&dir)?;
        let mut results = Vec::with_capacity(cfg.rhos.len());
        let mut candidates = 0;
        for &rho in &cfg.rhos {
            let attack_cfg = AttackConfig {
                rho,
                reference_edge_count: graph.num_edges(),
            };
            let r = generate_attack(
                &hidden,
                bundle.labels(),
                bundle.test_mask(),
                &correct,
                &graph,
                &attack_cfg,
            )?;
            r.save(attack_path(cfg, rho))?;
            candidates = r.valid_candidate_count;
            results.push(r);
        }
        fs::write(
            dir.join("summary.txt"),
            format!(
                "valid_candidate_count={candidates}\nreference_edge_count={}\n",
                graph.num_edges()
            ),
        )?;
        Ok(results)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Original,
    Pruned,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Pruned => "pruned",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub variant: Variant,
    pub rho: f64,
    pub clean: f64,
    pub attacked: f64,
    pub delta: f64,
    pub saturated: bool,
    /// Adversarial edges actually inserted into this victim.
    pub inserted: usize,
    /// Adversarial edges already present in this victim.
    pub skipped: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    /// Wall-clock seconds per phase.
    pub timings: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobustnessReport {
    pub clean_original: f64,
    pub clean_pruned: f64,
    pub reference_edge_count: usize,
    pub removed_edge_count: usize,
    /// Edges the attack produces with an unlimited budget.
    pub valid_candidate_count: usize,
    /// Original rows first, then pruned, each in config rho order.
    pub rows: Vec<ReportRow>,
    pub provenance: Provenance,
}

impl RobustnessReport {
    pub fn rows_for(&self, variant: Variant) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(move |r| r.variant == variant)
    }
}

pub fn compute_delta(attacked: f64, clean: f64) -> f64 {
    attacked - clean
}

/// Phase 9: evaluate both frozen models on their clean and attacked graphs.
pub fn phase_eval(cfg: &ExperimentConfig, bundle: &DatasetBundle) -> Result<RobustnessReport> {
    in_phase("eval", || {
        let original = bundle.graph();
        let pruned = load_graph(cfg.phase_dir("prune").join("pruned_graph.txt"))?;
        let removed = original.num_edges() - pruned.num_edges();
        let victims = [
            (
                Variant::Original,
                original,
                GcnModel::load(original_model_path(cfg), cfg.gcn.clone())?,
            ),
            (
                Variant::Pruned,
                pruned,
                GcnModel::load(cfg.phase_dir("retrain").join("pruned.gcn"), cfg.gcn.clone())?,
            ),
        ];
        let attacks = cfg
            .rhos
            .iter()
            .map(|&rho| AttackResult::load(attack_path(cfg, rho)))
            .collect::<Result<Vec<_>>>()?;
        let summary_path = cfg.phase_dir("attack").join("summary.txt");
        let summary = read_summary(&summary_path)?;

        let mut rows = Vec::new();
        let mut clean_acc = [0.0; 2];
        for (v, (variant, graph, model)) in victims.iter().enumerate() {
            let (clean, _) = model.evaluate(graph, bundle, bundle.test_mask())?;
            clean_acc[v] = clean;
            for attack in &attacks {
                let (attacked_graph, skipped) = apply_attack(graph, attack)?;
                let (attacked, _) = model.evaluate(&attacked_graph, bundle, bundle.test_mask())?;
                rows.push(ReportRow {
                    variant: *variant,
                    rho: attack.rho,
                    clean,
                    attacked,
                    delta: compute_delta(attacked, clean),
                    saturated: attack.saturated,
                    inserted: attack.added_edges.len() - skipped,
                    skipped,
                });
            }
        }
        let report = RobustnessReport {
            clean_original: clean_acc[0],
            clean_pruned: clean_acc[1],
            reference_edge_count: summary_value(&summary, "reference_edge_count", &summary_path)?,
            removed_edge_count: removed,
            valid_candidate_count: summary_value(&summary, "valid_candidate_count", &summary_path)?,
            rows,
            provenance: Provenance {
                seed: cfg.seed(),
                config_hash: cfg.hash(),
                timings: Vec::new(),
            },
        };
        let dir = cfg.phase_dir("eval");
        create_dir(&dir)?;
        emit_report(&report, ReportFormat::Csv, dir.join("report.csv"))?;
        emit_report(&report, ReportFormat::Markdown, dir.join("report.md"))?;
        Ok(report)
    })
}

/// Runs every phase in order and writes `<out>/config.txt` and
/// `<out>/eval/provenance.txt` next to the reports.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<RobustnessReport> {
    cfg.validate()?;
    create_dir(&cfg.out)?;
    fs::write(cfg.out.join("config.txt"), cfg.to_text())?;
    let bundle = in_phase("load", || load_inputs(cfg))?;
    let mut timings = Vec::new();
    let mut timed = |name: &str, f: &mut dyn FnMut() -> Result<()>| -> Result<()> {
        let start = Instant::now();
        f()?;
        timings.push((name.to_string(), start.elapsed().as_secs_f64()));
        Ok(())
    };
    timed("train", &mut || phase_train(cfg, &bundle).map(drop))?;
    timed("embed", &mut || phase_embed(cfg, &bundle))?;
    timed("knn", &mut || phase_knn(cfg).map(drop))?;
    timed("eigs", &mut || phase_eigs(cfg, &bundle).map(drop))?;
    timed("score", &mut || phase_score(cfg, &bundle).map(drop))?;
    timed("prune", &mut || phase_prune(cfg, &bundle).map(drop))?;
    timed("retrain", &mut || phase_retrain(cfg, &bundle).map(drop))?;
    timed("attack", &mut || phase_attack(cfg, &bundle).map(drop))?;
    let mut report = None;
    timed("eval", &mut || {
        report = Some(phase_eval(cfg, &bundle)?);
        Ok(())
    })?;
    let mut report = report.expect("eval ran");
    report.provenance.timings = timings;
    fs::write(
        cfg.phase_dir("eval").join("provenance.txt"),
        provenance_text(&report.provenance),
    )?;
    Ok(report)
}

fn provenance_text(p: &Provenance) -> String {
    let mut out = format!("seed={}\nconfig_hash={}\n", p.seed, p.config_hash);
    for (phase, secs) in &p.timings {
        writeln!(out, "time_{phase}={secs:.3}").unwrap();
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

fn pct(x: f64) -> String {
    format!("{:.1}", 100.0 * x)
}

fn signed_pct(x: f64) -> String {
    let s = pct(x);
    if s.starts_with('-') {
        // "-0.0" reads better as "0.0"
        if s == "-0.0" {
            "0.0".into()
        } else {
            s
        }
    } else if s == "0.0" {
        s
    } else {
        format!("+{s}")
    }
}

/// Renders the report. CSV carries raw fractions at full precision;
/// markdown shows percentages with one decimal. Timings are left out of
/// both so the output depends only on the results.
pub fn render_report(report: &RobustnessReport, format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str("variant,rho,clean,attacked,delta,saturated\n");
            for r in &report.rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    r.variant.as_str(),
                    r.rho,
                    r.clean,
                    r.attacked,
                    r.delta,
                    r.saturated
                )
                .unwrap();
            }
        }
        ReportFormat::Markdown => {
            writeln!(out, "| Graph | Clean accuracy (%) |").unwrap();
            writeln!(out, "|---|---|").unwrap();
            writeln!(out, "| Original | {} |", pct(report.clean_original)).unwrap();
            writeln!(
                out,
                "| Pruned ({} of {} edges removed) | {} |",
                report.removed_edge_count,
                report.reference_edge_count,
                pct(report.clean_pruned)
            )
            .unwrap();
            out.push('\n');
            writeln!(
                out,
                "| rho | Original clean | Original attacked | Original Δ | Pruned clean | Pruned attacked | Pruned Δ |"
            )
            .unwrap();
            writeln!(out, "|---|---|---|---|---|---|---|").unwrap();
            let pruned: Vec<&ReportRow> = report.rows_for(Variant::Pruned).collect();
            for o in report.rows_for(Variant::Original) {
                let p = pruned.iter().find(|p| p.rho == o.rho);
                let cells = p.map_or_else(
                    || "| - | - | - |".to_string(),
                    |p| format!("| {} | {} | {} |", pct(p.clean), pct(p.attacked), signed_pct(p.delta)),
                );
                writeln!(
                    out,
                    "| {}% | {} | {} | {} {}",
                    pct(o.rho).trim_end_matches(".0"),
                    pct(o.clean),
                    pct(o.attacked),
                    signed_pct(o.delta),
                    cells
                )
                .unwrap();
            }
            out.push('\n');
            writeln!(
                out,
                "Attack candidates: {} ({}% of {} edges).",
                report.valid_candidate_count,
                if report.reference_edge_count > 0 {
                    pct(report.valid_candidate_count as f64 / report.reference_edge_count as f64)
                } else {
                    "-".into()
                },
                report.reference_edge_count
            )
            .unwrap();
        }
    }
    out
}

pub fn emit_report(report: &RobustnessReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, render_report(report, format))?;
    Ok(())
}

/// Mean, minimum and maximum of one report cell across seeds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spread {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Self {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Self { mean, min, max }
    }
}

/// Runs the pipeline for `count` consecutive seeds starting at the config's
/// seed, each under `<out>/seed_<seed>/`, and writes `<out>/summary.csv` and
/// `<out>/summary.md`.
pub fn run_seeds(cfg: &ExperimentConfig, count: usize) -> Result<Vec<RobustnessReport>> {
    if count == 0 {
        return Err(Error::Parameter("seed count must be at least 1".into()));
    }
    let mut reports = Vec::with_capacity(count);
    for offset in 0..count as u64 {
        let mut c = cfg.clone();
        c.set("seed", &(cfg.seed() + offset).to_string())?;
        c.out = cfg.out.join(format!("seed_{}", c.seed()));
        reports.push(run_pipeline(&c)?);
    }
    fs::write(cfg.out.join("summary.csv"), render_summary(&reports, ReportFormat::Csv))?;
    fs::write(cfg.out.join("summary.md"), render_summary(&reports, ReportFormat::Markdown))?;
    Ok(reports)
}

/// Aggregates per-seed reports row by row (all reports must share a layout).
pub fn render_summary(reports: &[RobustnessReport], format: ReportFormat) -> String {
    let mut out = String::new();
    let Some(first) = reports.first() else {
        return out;
    };
    let cell = |i: usize, f: fn(&ReportRow) -> f64| {
        Spread::of(&reports.iter().map(|r| f(&r.rows[i])).collect::<Vec<_>>())
    };
    match format {
        ReportFormat::Csv => {
            out.push_str(
                "variant,rho,seeds,clean_mean,clean_min,clean_max,attacked_mean,attacked_min,attacked_max,delta_mean,delta_min,delta_max,saturated_seeds\n",
            );
            for (i, row) in first.rows.iter().enumerate() {
                let (c, a, d) = (cell(i, |r| r.clean), cell(i, |r| r.attacked), cell(i, |r| r.delta));
                let saturated = reports.iter().filter(|r| r.rows[i].saturated).count();
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    row.variant.as_str(),
                    row.rho,
                    reports.len(),
                    c.mean,
                    c.min,
                    c.max,
                    a.mean,
                    a.min,
                    a.max,
                    d.mean,
                    d.min,
                    d.max,
                    saturated
                )
                .unwrap();
            }
        }
        ReportFormat::Markdown => {
            let fmt = |s: Spread| format!("{} [{}, {}]", pct(s.mean), pct(s.min), pct(s.max));
            writeln!(out, "Mean [min, max] over {} seeds, in %.\n", reports.len()).unwrap();
            writeln!(out, "| Variant | rho | Clean | Attacked | Δ |").unwrap();
            writeln!(out, "|---|---|---|---|---|").unwrap();
            for (i, row) in first.rows.iter().enumerate() {
                writeln!(
                    out,
                    "| {} | {}% | {} | {} | {} |",
                    row.variant.as_str(),
                    pct(row.rho).trim_end_matches(".0"),
                    fmt(cell(i, |r| r.clean)),
                    fmt(cell(i, |r| r.attacked)),
                    fmt(cell(i, |r| r.delta))
                )
                .unwrap();
            }
        }
    }
    out
}
