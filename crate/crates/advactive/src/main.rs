//! Command-line front end: run experiments and plot their curves.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use advactive::data::{build_mnist_source, parse_idx_images, parse_idx_labels, TaskKind};
use advactive::harness::output::{format_run_label, read_curve_csv, read_run_label, write_run};
use advactive::harness::{
    build_oracle_for, run_experiment_with_source, ExperimentConfig, ExperimentRun,
};
use advactive::plot::{write_plot, PlotSeries};
use advactive::selection::{Companion, StrategyConfig, StrategyKind};
use advactive::{Error, Result};

/// Active-learning experiments with an adversarial pool.
#[derive(Debug, Parser)]
#[command(name = "advactive", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write curves, logs, and metadata.
    Run(RunArgs),
    /// Render one or more result directories into an SVG plot.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Task: synthetic2d or mnist56.
    #[arg(long, value_parser = parse_task)]
    task: TaskKind,
    /// Strategy: uncertainty, meu, random, or mixed.
    #[arg(long, default_value = "uncertainty", value_parser = parse_strategy)]
    strategy: StrategyKind,
    /// Probability of the companion strategy in a mixed draw.
    #[arg(long)]
    p: Option<f64>,
    /// Companion of the mixed strategy: meu or random.
    #[arg(long, value_parser = parse_companion)]
    mix_with: Option<Companion>,
    /// Attacker switch: on or off.
    #[arg(long, default_value = "off", value_parser = parse_switch, action = clap::ArgAction::Set)]
    attack: bool,
    /// Number of independent trials.
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Queries per trial; defaults to 50 (synthetic2d) or 100 (mnist56).
    #[arg(long)]
    budget: Option<usize>,
    /// Master seed; everything else derives from it.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Soft-margin parameter of the learner.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Directory for curve.csv, trial logs, and meta.json.
    #[arg(long)]
    out: PathBuf,
    /// IDX image file (required for mnist56).
    #[arg(long)]
    mnist_images: Option<PathBuf>,
    /// IDX label file (required for mnist56).
    #[arg(long)]
    mnist_labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlotArgs {
    /// Result directory to plot; repeat to overlay several runs.
    #[arg(long = "in", required = true)]
    inputs: Vec<PathBuf>,
    /// Output SVG path.
    #[arg(long)]
    out: PathBuf,
}

fn parse_task(s: &str) -> std::result::Result<TaskKind, String> {
    match s {
        "synthetic2d" => Ok(TaskKind::Synthetic2d),
        "mnist56" => Ok(TaskKind::Mnist56),
        other => Err(format!(
            "unknown task '{other}' (expected synthetic2d or mnist56)"
        )),
    }
}

fn parse_strategy(s: &str) -> std::result::Result<StrategyKind, String> {
    StrategyKind::from_str(s).map_err(|e| e.to_string())
}

fn parse_companion(s: &str) -> std::result::Result<Companion, String> {
    Companion::from_str(s).map_err(|e| e.to_string())
}

fn parse_switch(s: &str) -> std::result::Result<bool, String> {
    match s {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(format!("expected 'on' or 'off', got '{other}'")),
    }
}

fn build_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::for_task(args.task, args.seed, args.out.clone());
    config.trials = args.trials;
    if let Some(budget) = args.budget {
        config.budget = budget;
    }
    config.strategy = match args.strategy {
        StrategyKind::Mixed => {
            let p = args.p.ok_or_else(|| {
                Error::Config("the mixed strategy needs --p <probability>".into())
            })?;
            StrategyConfig::mixed(p, args.mix_with.unwrap_or(Companion::Meu))
        }
        kind => {
            if args.p.is_some() || args.mix_with.is_some() {
                return Err(Error::Config(format!(
                    "--p and --mix-with only apply to --strategy mixed, not {kind}"
                )));
            }
            StrategyConfig::pure(kind)
        }
    };
    config.attack.enabled = args.attack;
    config.solver.c = args.c;
    config.validate()?;
    Ok(config)
}

fn run(args: &RunArgs) -> Result<ExperimentRun> {
    let config = build_config(args)?;
    let source = match args.task {
        TaskKind::Synthetic2d => advactive::data::generate_synthetic_source(&config.dataset)?,
        TaskKind::Mnist56 => {
            let (Some(images_path), Some(labels_path)) = (&args.mnist_images, &args.mnist_labels)
            else {
                return Err(Error::Config(
                    "mnist56 needs --mnist-images and --mnist-labels IDX files".into(),
                ));
            };
            let image_bytes = std::fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
            let label_bytes = std::fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
            let images = parse_idx_images(&image_bytes)?;
            let labels = parse_idx_labels(&label_bytes)?;
            build_mnist_source(&images, &labels, &config.dataset)?
        }
    };
    let oracle = build_oracle_for(&source)?;
    log::info!("running: {}", format_run_label(&config));
    let run = run_experiment_with_source(&config, &source, &oracle)?;
    write_run(&run, &config.output_dir)?;
    Ok(run)
}

fn plot(args: &PlotArgs) -> Result<()> {
    let mut series = Vec::with_capacity(args.inputs.len());
    for dir in &args.inputs {
        let curve = read_curve_csv(&dir.join("curve.csv"))?;
        let label = read_run_label(dir).unwrap_or_else(|_| dir.display().to_string());
        series.push(PlotSeries::new(label, curve.mean));
    }
    write_plot(&series, &args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => match run(&args) {
            Ok(result) => {
                if let Some(failure) = &result.failure {
                    eprintln!("experiment aborted: {failure}");
                    eprintln!(
                        "partial results for {} trials written to {}",
                        result.records.len(),
                        args.out.display()
                    );
                    return ExitCode::from(1);
                }
                let final_mean = result.curve.final_mean().unwrap_or(f64::NAN);
                println!(
                    "{}: {} trials, final mean test error {final_mean:.4}",
                    format_run_label(&result.config),
                    result.records.len()
                );
                println!("results written to {}", args.out.display());
                ExitCode::SUCCESS
            }
            Err(err) => {
                eprintln!("error: {err}");
                ExitCode::from(2)
            }
        },
        Command::Plot(args) => match plot(&args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(err) => {
                eprintln!("error: {err}");
                ExitCode::from(2)
            }
        },
    }
}
