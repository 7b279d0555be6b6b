use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mvae::experiment::{
    emit_results, run_single, run_sweep, EvalSplit, ExperimentConfig, OutputFormat, ResultRow,
};
use mvae::model::MVaeModel;
use mvae::objective::{dataset_total, PsiMode};
use mvae::trainer::Objective;

/// Train and evaluate a semi-supervised generative classifier with an
/// explicit label-noise channel, and sweep corruption levels.
#[derive(Parser)]
#[command(name = "mvae", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Mvae,
    M1m2,
}

#[derive(Clone, Copy, ValueEnum)]
enum PsiModeArg {
    Standard,
    Literal,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// One training run from a config file; writes a result row, history,
    /// checkpoint, and manifest under the output directory.
    Run {
        /// JSON experiment config
        #[arg(long)]
        config: PathBuf,
        /// Override the config's output directory
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config's first seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the training objective
        #[arg(long, value_enum)]
        objective: Option<ObjectiveArg>,
        /// Override the classification-term form
        #[arg(long, value_enum)]
        psi_mode: Option<PsiModeArg>,
        /// Override the penalty weight (m1m2)
        #[arg(long)]
        alpha: Option<f64>,
        /// Results file format
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Corruption sweep: both objectives over every (p1, seed) cell.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Concurrent cells (0 = all cores)
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Evaluate a checkpoint against the config's dataset.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Override the config's first seed (dataset reconstruction)
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            objective,
            psi_mode,
            alpha,
            format,
        } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            if let Some(seed) = seed {
                cfg.seeds = vec![seed];
            }
            if let Some(objective) = objective {
                cfg.train.objective = match objective {
                    ObjectiveArg::Mvae => Objective::Mvae,
                    ObjectiveArg::M1m2 => Objective::M1m2,
                };
            }
            if let Some(mode) = psi_mode {
                cfg.train.psi_mode = match mode {
                    PsiModeArg::Standard => PsiMode::Standard,
                    PsiModeArg::Literal => PsiMode::Literal,
                };
            }
            if let Some(alpha) = alpha {
                cfg.train.alpha = Some(alpha);
            }
            let row = run_single(&cfg)?;
            print_rows(std::slice::from_ref(&row));
            let path = cfg.out_dir.join(match format {
                FormatArg::Csv => "results.csv",
                FormatArg::Json => "results.json",
            });
            emit_results(std::slice::from_ref(&row), &path, emit_format(format))?;
            println!("results written to {}", path.display());
            Ok(())
        }
        Command::Sweep {
            config,
            out,
            jobs,
            format,
        } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(out) = out {
                cfg.out_dir = out;
            }
            let rows = run_sweep(&cfg, jobs)?;
            print_rows(&rows);
            let path = cfg.out_dir.join(match format {
                FormatArg::Csv => "results.csv",
                FormatArg::Json => "results.json",
            });
            emit_results(&rows, &path, emit_format(format))?;
            println!("results written to {}", path.display());
            let failed = rows.iter().filter(|r| r.status != "ok").count();
            if failed > 0 {
                eprintln!("warning: {failed} of {} cells failed", rows.len());
            }
            Ok(())
        }
        Command::Eval {
            checkpoint,
            config,
            seed,
        } => {
            let mut cfg = ExperimentConfig::from_file(&config)?;
            if let Some(seed) = seed {
                cfg.seeds = vec![seed];
            }
            let model = MVaeModel::load_checkpoint(&checkpoint)?;
            let ds = mvae::experiment::rebuild_dataset(&cfg, cfg.seeds[0])?;
            let all = mvae::experiment::accuracy_of(&model, &ds, EvalSplit::All)?;
            let heldout = mvae::experiment::accuracy_of(&model, &ds, EvalSplit::Heldout)?;
            let elbo = dataset_total(
                &model,
                &ds.x,
                &ds.y_obs,
                mvae::experiment::REPORT_N_MC,
                cfg.seeds[0],
                cfg.train.objective_kind()?,
            )?;
            println!("accuracy (all rows):     {all:.4}");
            println!("accuracy (heldout rows): {heldout:.4}");
            println!("objective (full data):   {elbo:.4}");
            Ok(())
        }
    }
}

fn emit_format(f: FormatArg) -> OutputFormat {
    match f {
        FormatArg::Csv => OutputFormat::Csv,
        FormatArg::Json => OutputFormat::Json,
    }
}

fn print_rows(rows: &[ResultRow]) {
    println!(
        "{:>6} {:>6} {:>6} {:>6} {:>9} {:>9} {:>12} {:>8}",
        "p0", "p1", "seed", "obj", "alpha", "accuracy", "objective", "status"
    );
    for r in rows {
        println!(
            "{:>6} {:>6} {:>6} {:>6} {:>9} {:>9} {:>12} {:>8}",
            r.p0,
            r.p1,
            r.seed,
            r.objective,
            r.alpha.map(|a| format!("{a:.3}")).unwrap_or_else(|| "-".into()),
            r.accuracy
                .map(|a| format!("{a:.4}"))
                .unwrap_or_else(|| "-".into()),
            r.final_elbo
                .map(|e| format!("{e:.1}"))
                .unwrap_or_else(|| "-".into()),
            if r.status == "ok" { "ok" } else { "FAILED" }
        );
    }
}
