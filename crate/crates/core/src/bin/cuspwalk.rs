use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use cuspwalk::cli::plot::{plot, PlotRequest};
use cuspwalk::cli::runner::{evaluate, run, RunSummary};
use cuspwalk::cli::{ExperimentConfig, ExperimentKind};
use cuspwalk::Result;

#[derive(Parser)]
#[command(name = "cuspwalk", version, about = "Ball-step random walks on a cusped surface")]
struct Cli {
    /// Overrides every Monte Carlo seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Selection {
    /// TOML config; every key is optional.
    config: Option<PathBuf>,

    /// Run only these experiments (comma separated).
    #[arg(long, value_delimiter = ',')]
    only: Vec<ExperimentKind>,
}

#[derive(Subcommand)]
enum Command {
    /// Run experiments and write CSVs and manifest.json.
    Run {
        #[command(flatten)]
        sel: Selection,

        /// Output directory, overriding the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run experiments and print one PASS/FAIL line per check.
    Check {
        #[command(flatten)]
        sel: Selection,
    },
    /// Convert a result CSV into whitespace-separated columns.
    Plot {
        input: PathBuf,

        #[arg(long)]
        x: String,

        #[arg(long, required = true)]
        y: Vec<String>,

        #[arg(long)]
        group: Option<String>,

        /// Also write log x / log y columns and fitted slopes.
        #[arg(long)]
        loglog: bool,

        /// Also write x / log y columns.
        #[arg(long)]
        logy: bool,

        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn load(sel: &Selection, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = match &sel.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if !sel.only.is_empty() {
        cfg.experiments = sel.only.clone();
    }
    if let Some(s) = seed {
        cfg.tv_decay.seed = s;
        cfg.escape.seed = s;
    }
    Ok(cfg)
}

fn report(summary: &RunSummary) -> ExitCode {
    for line in summary.report_lines() {
        println!("{line}");
    }
    if summary.all_passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { sel, out } => {
            let mut cfg = load(&sel, cli.seed)?;
            if let Some(o) = out {
                cfg.output_dir = o;
            }
            let summary = run(&cfg)?;
            if let Some(dir) = &summary.output_dir {
                println!("wrote {}", dir.display());
            }
            Ok(report(&summary))
        }
        Command::Check { sel } => {
            let cfg = load(&sel, cli.seed)?;
            Ok(report(&evaluate(&cfg)))
        }
        Command::Plot {
            input,
            x,
            y,
            group,
            loglog,
            logy,
            output,
        } => {
            let out = plot(&PlotRequest {
                input,
                x,
                y,
                group,
                loglog,
                logy,
                output,
            })?;
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            for (g, c, s, r2) in &out.slopes {
                println!("{g} {c}: slope {s:.4} (r2 {r2:.4})");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            error!("thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            ExitCode::from(2)
        }
    }
}
