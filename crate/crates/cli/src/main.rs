//! `stofrac`: run, post-process and reproduce stochastic fracture ensembles.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stochastic_fracture::app::{
    cmd_mesh_export, cmd_reproduce, cmd_run, cmd_stats, realization_line, AppError, Condition, Experiment,
    StatsOptions,
};
use stochastic_fracture::config::RunConfig;

#[derive(Parser)]
#[command(name = "stofrac", version, about = "Stochastic phase-field brittle fracture")]
struct Cli {
    /// Worker threads (0: all cores); overrides the config file.
    #[arg(long, global = true, env = "STOFRAC_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the ensemble described by a TOML config.
    Run {
        config: PathBuf,
        /// Run directory; defaults to `output_dir` of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute statistics from a run manifest.
    Stats {
        manifest: PathBuf,
        /// Condition crack-type probabilities on an observed position:
        /// `s=<value>` or `realization=<i>,step=<n>`.
        #[arg(long)]
        condition: Option<Condition>,
        /// Kernel bandwidth of the density estimates.
        #[arg(long)]
        bandwidth: Option<f64>,
    },
    /// Run a pinned experiment and compare with the expected values.
    Reproduce {
        /// fig4, double-u, fig6, table5-row(k), double-well, fig11-coarse,
        /// probs-2d-coarse, fig5-qualitative
        experiment: String,
        #[arg(long, default_value = "runs/reproduce")]
        out: PathBuf,
    },
    /// Write the nominal 2D mesh of a config as legacy VTK.
    MeshExport { config: PathBuf, out: PathBuf },
}

fn load(path: &PathBuf, workers: Option<usize>) -> Result<RunConfig, AppError> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(w) = workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), AppError> {
    let mut out = std::io::stdout().lock();
    let mut say = |line: String| {
        let _ = writeln!(out, "{line}");
    };
    match cli.command {
        Command::Run { config, out: dir } => {
            let cfg = load(&config, cli.workers)?;
            let dir = dir.unwrap_or_else(|| cfg.output_dir());
            let outcome = cmd_run(&cfg, &dir)?;
            for rec in outcome.manifest.records() {
                say(realization_line(rec));
            }
            for p in &outcome.statistics.probabilities {
                say(format!("p({}) = {:.4} +- {:.4} ({} of {})", p.label, p.p, p.delta95, p.count, outcome.statistics.samples));
            }
            say(format!("artifacts in {}", outcome.dir.display()));
        }
        Command::Stats {
            manifest,
            condition,
            bandwidth,
        } => {
            let report = cmd_stats(&manifest, &StatsOptions { condition, bandwidth })?;
            for p in &report.statistics.probabilities {
                say(format!("p({}) = {:.4} +- {:.4}", p.label, p.p, p.delta95));
            }
            if let Some(post) = &report.posterior {
                for (label, p) in post.labels.iter().zip(&post.posteriors) {
                    say(format!("P({label} | y = {:.4}) = {p:.4}", post.x_c));
                }
            }
        }
        Command::Reproduce { experiment, out: root } => {
            let experiment: Experiment = experiment.parse()?;
            let report = cmd_reproduce(experiment, &root, cli.workers.unwrap_or(1))?;
            for check in &report.checks {
                say(check.to_string());
            }
            let failed = report.checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(AppError::Mismatch {
                    failed,
                    total: report.checks.len(),
                });
            }
        }
        Command::MeshExport { config, out: path } => {
            let mesh = cmd_mesh_export(&load(&config, cli.workers)?, &path)?;
            say(format!(
                "{} nodes, {} triangles written to {}",
                mesh.n_nodes(),
                mesh.triangles().len(),
                path.display()
            ));
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
            let _ = e.print();
            return ExitCode::from(2);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
