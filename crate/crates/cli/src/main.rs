use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use spadeprune::dataset::planetoid::convert_planetoid;
use spadeprune::dataset::save_dataset;
use spadeprune::pipeline::{self, ExperimentConfig, ReportFormat};

#[derive(Parser)]
#[command(name = "spadeprune", version, about = "Spectral edge pruning and robustness evaluation for GCNs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// `key=value` config file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Config overrides as `--<key> <value>` or `--<key>=<value>`
    #[arg(value_name = "--KEY VALUE", trailing_var_arg = true, allow_hyphen_values = true)]
    overrides: Vec<String>,
}

/// Splits `--key value` / `--key=value` tokens into pairs. Dashes inside a
/// key map to underscores.
fn override_pairs(tokens: &[String]) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    let mut it = tokens.iter();
    while let Some(tok) = it.next() {
        let key = tok
            .strip_prefix("--")
            .with_context(|| format!("expected `--key value`, found {tok:?}"))?;
        let (key, value) = match key.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it.next().with_context(|| format!("missing value for --{key}"))?;
                (key.to_string(), v.clone())
            }
        };
        pairs.push((key.replace('-', "_"), value));
    }
    Ok(pairs)
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        Ok(self.resolve_with_seeds()?.0)
    }

    /// Also returns a `--seeds n` found among the overrides, which clap
    /// cannot see once trailing capture has started.
    fn resolve_with_seeds(&self) -> Result<(ExperimentConfig, Option<usize>)> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        let mut seeds = None;
        for (k, v) in override_pairs(&self.overrides)? {
            if k == "seeds" {
                seeds = Some(v.parse().with_context(|| format!("bad --seeds {v:?}"))?);
            } else {
                cfg.set(&k, &v)?;
            }
        }
        cfg.validate()?;
        Ok((cfg, seeds))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Convert raw Planetoid pickles into the portable text layout
    Convert {
        /// Directory holding the ind.<name>.* files
        #[arg(long)]
        raw: PathBuf,
        #[arg(long, default_value = "citeseer")]
        name: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the GCN on the original graph
    Train(ConfigArgs),
    /// Export hidden-layer embeddings
    Embed(ConfigArgs),
    /// Build the k-NN manifold graph
    Knn(ConfigArgs),
    /// Solve the generalized eigenproblem
    Eigs(ConfigArgs),
    /// Score the original edges
    Score(ConfigArgs),
    /// Remove the top-scoring edges
    Prune(ConfigArgs),
    /// Train a GCN on the pruned graph
    Retrain(ConfigArgs),
    /// Generate adversarial edge sets
    Attack(ConfigArgs),
    /// Evaluate both models on clean and attacked graphs
    Eval(ConfigArgs),
    /// Run every phase
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Number of consecutive seeds, starting at the configured one
        #[arg(long, default_value_t = 1)]
        seeds: usize,
    },
}

fn run(cli: Cli) -> Result<()> {
    let phase = |args: &ConfigArgs| -> Result<(ExperimentConfig, spadeprune::dataset::DatasetBundle)> {
        let cfg = args.resolve()?;
        let bundle = pipeline::load_inputs(&cfg)
            .with_context(|| format!("loading dataset {}", cfg.dataset.display()))?;
        Ok((cfg, bundle))
    };
    match cli.command {
        Command::Convert { raw, name, out } => {
            let bundle = convert_planetoid(&raw, &name)?;
            save_dataset(&bundle, &out)?;
            println!(
                "{name}: {} nodes, {} edges, {} features, {} classes -> {}",
                bundle.num_nodes(),
                bundle.edges().len(),
                bundle.num_features(),
                bundle.num_classes(),
                out.display()
            );
        }
        Command::Train(a) => {
            let (cfg, b) = phase(&a)?;
            let r = pipeline::phase_train(&cfg, &b)?;
            println!("best test accuracy {:.4} at epoch {}", r.best_test_accuracy, r.best_epoch);
        }
        Command::Embed(a) => {
            let (cfg, b) = phase(&a)?;
            pipeline::phase_embed(&cfg, &b)?;
        }
        Command::Knn(a) => {
            let g = pipeline::phase_knn(&a.resolve()?)?;
            println!("manifold graph: {} nodes, {} edges", g.num_nodes(), g.num_edges());
        }
        Command::Eigs(a) => {
            let (cfg, b) = phase(&a)?;
            let e = pipeline::phase_eigs(&cfg, &b)?;
            println!(
                "{} eigenpairs, largest {:.6e}, {} sweeps",
                e.s(),
                e.zetas.first().copied().unwrap_or(f64::NAN),
                e.diagnostics.sweeps
            );
        }
        Command::Score(a) => {
            let (cfg, b) = phase(&a)?;
            pipeline::phase_score(&cfg, &b)?;
        }
        Command::Prune(a) => {
            let (cfg, b) = phase(&a)?;
            let g = pipeline::phase_prune(&cfg, &b)?;
            println!("pruned graph keeps {} edges", g.num_edges());
        }
        Command::Retrain(a) => {
            let (cfg, b) = phase(&a)?;
            let r = pipeline::phase_retrain(&cfg, &b)?;
            println!("best test accuracy {:.4} at epoch {}", r.best_test_accuracy, r.best_epoch);
        }
        Command::Attack(a) => {
            let (cfg, b) = phase(&a)?;
            for r in pipeline::phase_attack(&cfg, &b)? {
                println!("rho={} edges={} saturated={}", r.rho, r.added_edges.len(), r.saturated);
            }
        }
        Command::Eval(a) => {
            let (cfg, b) = phase(&a)?;
            let report = pipeline::phase_eval(&cfg, &b)?;
            print!("{}", pipeline::render_report(&report, ReportFormat::Markdown));
        }
        Command::Run { config, seeds } => {
            let (cfg, trailing) = config.resolve_with_seeds()?;
            let seeds = trailing.unwrap_or(seeds);
            if seeds == 1 {
                let report = pipeline::run_pipeline(&cfg)?;
                print!("{}", pipeline::render_report(&report, ReportFormat::Markdown));
            } else {
                let reports = pipeline::run_seeds(&cfg, seeds)?;
                print!("{}", pipeline::render_summary(&reports, ReportFormat::Markdown));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap's own usage errors would exit 2, which is reserved for numeric failures
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let numeric = e
                .downcast_ref::<spadeprune::Error>()
                .is_some_and(spadeprune::Error::is_numeric);
            ExitCode::from(if numeric { 2 } else { 1 })
        }
    }
}
