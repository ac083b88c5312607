use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use nmmc_cli::commands::{self, WorkingSetSpec};
use nmmc_cli::config::{ExperimentConfig, TargetKind, WorkingSet};

#[derive(Parser)]
#[command(name = "nmmc", version, about = "Sample target distributions on directed graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Clean an edge list and cut out its working set.
    Prepare {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "lscc")]
        mode: Mode,
        /// Seed count for the reachable working set.
        #[arg(long, default_value_t = 300)]
        seeds: usize,
        /// Random seed used to choose those seeds.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Directory for graph.txt (and seeds.txt).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute the reference distribution of a prepared graph.
    Oracle {
        graph: PathBuf,
        #[arg(long, value_enum, default_value = "uniform")]
        target: Target,
        /// node,probability file for the custom target.
        #[arg(long)]
        custom: Option<PathBuf>,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the sampler as described by a configuration file.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the baseline of a configuration file.
    Baseline {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the log-log slope of TVD over the tail of a metrics CSV.
    Slope {
        metrics: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        tail: f64,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Mode {
    Lscc,
    Reachable,
    AsIs,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Target {
    Uniform,
    Indegree,
    Evc,
    Custom,
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare {
            input,
            mode,
            seeds,
            seed,
            out,
        } => {
            let spec = WorkingSetSpec {
                mode: match mode {
                    Mode::Lscc => WorkingSet::Lscc,
                    Mode::Reachable => WorkingSet::Reachable,
                    Mode::AsIs => WorkingSet::AsIs,
                },
                seeds,
                seed_choice: seed,
                ..WorkingSetSpec::lscc()
            };
            println!("{}", commands::cmd_prepare(&input, &spec, out.as_deref())?);
        }
        Command::Oracle {
            graph,
            target,
            custom,
            out,
        } => {
            let kind = match target {
                Target::Uniform => TargetKind::Uniform,
                Target::Indegree => TargetKind::Indegree,
                Target::Evc => TargetKind::Evc,
                Target::Custom => TargetKind::Custom,
            };
            match out {
                Some(path) => {
                    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                    let mut w = BufWriter::new(file);
                    let summary = commands::cmd_oracle(&graph, kind, custom.as_deref(), &mut w)?;
                    w.flush()?;
                    eprintln!("{summary}");
                }
                None => {
                    let stdout = io::stdout();
                    let mut lock = stdout.lock();
                    let summary = commands::cmd_oracle(&graph, kind, custom.as_deref(), &mut lock)?;
                    eprintln!("{summary}");
                }
            }
        }
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            for s in commands::cmd_run(&cfg, out.as_deref())? {
                println!("{}", s.line());
            }
        }
        Command::Baseline { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            for line in commands::cmd_baseline(&cfg, out.as_deref())?.lines() {
                println!("{line}");
            }
        }
        Command::Slope { metrics, tail } => {
            let fit = commands::cmd_slope(&metrics, tail)?;
            if fit.clamped > 0 {
                eprintln!("warning: {} zero TVD values clamped before taking logs", fit.clamped);
            }
            println!("slope {:.4} over {} checkpoints", fit.slope, fit.points);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            eprintln!("{}", text.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
