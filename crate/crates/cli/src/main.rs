//! `faultnet`: generate corpora, train bundles, evaluate, diagnose and report.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use faultnet_core::bundle::{Bundle, TrainMode};
use faultnet_core::classifiers::{ModelKind, ModelParams};
use faultnet_core::eval::{benchmark, evaluate_predictor, EvalSide, Report};
use faultnet_core::store::{generate_corpus, read_record, Corpus, SplitConfig};
use faultnet_core::{Error, Result};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "faultnet",
    version,
    about = "Inverter fault and FDI anomaly diagnosis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the grid seed (generate) or the split and training seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the experiment grid and write records, features and a manifest.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the staged pipeline, or a single flat model with --model.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        /// dt, knn, svm, nn or ann.
        #[arg(long)]
        model: Option<ModelKind>,
        /// Bundle directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a bundle on a corpus; writes report.txt and report.json.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Which records to score: test, train or all.
        #[arg(long, default_value = "test")]
        split: EvalSide,
        #[arg(long)]
        out: PathBuf,
    },
    /// Diagnose one record CSV.
    Diagnose {
        #[arg(long)]
        bundle: PathBuf,
        #[arg(long)]
        record: PathBuf,
    },
    /// Train and compare every learner per scenario; writes report.txt and report.json.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        /// Restrict to these learners (repeatable).
        #[arg(long)]
        model: Vec<ModelKind>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parameter(_) | Error::Scenario(_) => 2,
        Error::Coverage(_) => 3,
        Error::Compatibility(_) => 4,
        Error::Schema { .. } => 5,
        _ => 1,
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn training_setup(common: &Common) -> Result<(RunConfig, ModelParams, SplitConfig)> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let mut split = cfg.split.clone();
    let mut params = cfg.models.clone();
    if let Some(s) = common.seed {
        split.seed = s;
        params = params.with_seed(s);
    }
    Ok((cfg, params, split))
}

fn write_report(report: &Report, out: &Path) -> Result<String> {
    create_dir(out)?;
    let text = report.render_text();
    write(&out.join("report.txt"), &text)?;
    write(&out.join("report.json"), &report.to_json())?;
    Ok(text)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { common, out } => {
            let mut cfg = RunConfig::load(common.config.as_deref())?;
            if let Some(s) = common.seed {
                cfg.grid.seed = s;
            }
            let cells = cfg.grid.cells()?;
            create_dir(&out)?;
            let corpus = generate_corpus(&cfg.sim, &cfg.grid, &cfg.feature_spec(), Some(&out))?;
            println!("{}", cfg.grid.summary(&cells));
            println!("manifest: {}", out.join("manifest.json").display());
            println!("manifest hash: {}", corpus.manifest_hash());
        }
        Command::Train {
            common,
            manifest,
            model,
            out,
        } => {
            let (cfg, params, split) = training_setup(&common)?;
            let corpus = Corpus::load(&manifest)?;
            let mode = match model {
                Some(kind) => TrainMode::Single(kind),
                None => TrainMode::Pipeline(cfg.pipeline),
            };
            let bundle = Bundle::train(&corpus, &mode, &params, &split)?;
            let hash = bundle.save(&out)?;
            let fit = evaluate_predictor(&bundle.predictor, &corpus, &split, EvalSide::Train)?;
            println!("bundle: {}", out.display());
            println!("bundle hash: {hash}");
            println!("predictor: {}", bundle.header.predictor);
            if let Some(all) = fit.sections.last() {
                let row = &all.rows[0];
                println!(
                    "training fit on {} records: accuracy {:.4}, precision {:.4}, recall {:.4}, F1 {:.4}",
                    all.n_test, row.accuracy, row.precision, row.recall, row.f1
                );
            }
        }
        Command::Evaluate {
            common,
            bundle,
            manifest,
            split,
            out,
        } => {
            let b = Bundle::load(&bundle)?;
            let corpus = Corpus::load(&manifest)?;
            b.check_corpus(&corpus)?;
            let mut split_cfg = b.header.split.clone();
            if let Some(s) = common.seed {
                split_cfg.seed = s;
            }
            let report = evaluate_predictor(&b.predictor, &corpus, &split_cfg, split)?;
            print!("{}", write_report(&report, &out)?);
        }
        Command::Diagnose { bundle, record } => {
            let b = Bundle::load(&bundle)?;
            let rec = read_record(&record, &b.header.sim)?;
            println!("{}", b.diagnose(&rec)?);
        }
        Command::Report {
            common,
            manifest,
            model,
            out,
        } => {
            let (_, params, split) = training_setup(&common)?;
            let corpus = Corpus::load(&manifest)?;
            let kinds = if model.is_empty() {
                ModelKind::ALL.to_vec()
            } else {
                model
            };
            let report = benchmark(&corpus, &kinds, &params, &split)?;
            print!("{}", write_report(&report, &out)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
