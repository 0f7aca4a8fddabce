use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use poseparse::pipeline::{render_compare, PipelineConfig, PoolMode, Run, Stage, CONFIG_ENV};
use poseparse::{eval, Error, Result};

/// Pose-guided human parsing pipeline on synthetic scenes.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Config JSON; falls back to $POSEPARSE_CONFIG, then built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory holding every stage output.
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    /// Master seed; every stage derives its own from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Recompute even when outputs are up to date, and overwrite outputs
    /// produced under other settings.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render the synthetic train/test scenes.
    Synth {
        #[arg(long)]
        n_train: Option<usize>,
        #[arg(long)]
        n_test: Option<usize>,
    },
    /// Grow segment pools.
    Propose {
        /// Eight increasing color thresholds, comma separated.
        #[arg(long, value_delimiter = ',', value_name = "T1,..,T8")]
        thresholds: Option<Vec<f64>>,
        /// Seed from a uniform grid instead of the pose joints.
        #[arg(long)]
        unguided: bool,
        /// Add ground-truth part segments to the working pools.
        #[arg(long)]
        inject_gt: bool,
    },
    /// Learn dictionaries and dump segment features.
    Features {
        /// Coding sharpness in exp(-lambda d).
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Fit the per-part SVR rankers.
    TrainRanker {
        /// Hinge-loss weight.
        #[arg(long, visible_alias = "C")]
        c: Option<f64>,
        /// Width of the insensitive tube.
        #[arg(long)]
        epsilon: Option<f64>,
    },
    /// Keep the top-n segments per part.
    Rank {
        /// Segments kept per part.
        #[arg(long)]
        top: Option<usize>,
    },
    /// Learn the AOG weights by cutting-plane training.
    TrainAog(AogArgs),
    /// Parse the test scenes.
    Parse {
        /// AOG model to use instead of the trained one.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Entries kept per vertex during inference.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Write metric reports.
    Eval {
        /// Pool modes to report side by side.
        #[arg(long, num_args = 1..)]
        compare: Option<Vec<String>>,
        /// Also write parse overlays.
        #[arg(long)]
        overlay: bool,
    },
    /// Run every stage, reusing complete ones.
    RunAll,
    /// Print the effective config as JSON.
    ShowConfig,
}

#[derive(Args)]
struct AogArgs {
    /// Slack weight.
    #[arg(long, visible_alias = "C")]
    c: Option<f64>,
    /// Beam width of the loss-augmented inference.
    #[arg(long)]
    k: Option<usize>,
    /// Cutting-plane iteration cap.
    #[arg(long)]
    max_iters: Option<usize>,
    /// One side-way weight vector per part-type pair.
    #[arg(long)]
    type_specific_pairs: bool,
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let path = cli.config.clone().or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let mut c = match path {
        Some(p) => PipelineConfig::load(&p)?,
        None => PipelineConfig::default(),
    };
    if let Some(w) = &cli.workdir {
        c.workdir = w.clone();
    }
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    match &cli.command {
        Command::Synth { n_train, n_test } => {
            c.dataset.n_train = n_train.unwrap_or(c.dataset.n_train);
            c.dataset.n_test = n_test.unwrap_or(c.dataset.n_test);
        }
        Command::Propose { thresholds, unguided, inject_gt } => {
            if let Some(t) = thresholds {
                c.proposal.thresholds = t.clone();
            }
            if *unguided {
                c.proposal.mode = PoolMode::Unguided;
            }
            c.proposal.inject_gt |= inject_gt;
        }
        Command::Features { lambda } => c.features.lambda = lambda.unwrap_or(c.features.lambda),
        Command::TrainRanker { c: svr_c, epsilon } => {
            c.ranker.svr.c = svr_c.unwrap_or(c.ranker.svr.c);
            c.ranker.svr.epsilon = epsilon.unwrap_or(c.ranker.svr.epsilon);
        }
        Command::Rank { top } => c.ranker.top_n = top.unwrap_or(c.ranker.top_n),
        Command::TrainAog(a) => {
            c.aog.learn.c = a.c.unwrap_or(c.aog.learn.c);
            c.aog.learn.k = a.k.unwrap_or(c.aog.learn.k);
            c.aog.learn.max_iters = a.max_iters.unwrap_or(c.aog.learn.max_iters);
            c.aog.type_specific_pairs |= a.type_specific_pairs;
        }
        Command::Parse { model, k } => {
            if model.is_some() {
                c.aog_model = model.clone();
            }
            c.aog.parse_k = k.unwrap_or(c.aog.parse_k);
        }
        Command::Eval { compare, overlay } => {
            if let Some(modes) = compare {
                c.eval.compare = modes.iter().map(|m| m.parse()).collect::<Result<_>>()?;
            }
            c.eval.overlay |= overlay;
        }
        Command::RunAll | Command::ShowConfig => {}
    }
    Ok(c)
}

fn stage_of(cmd: &Command) -> Option<Stage> {
    Some(match cmd {
        Command::Synth { .. } => Stage::Synth,
        Command::Propose { .. } => Stage::Propose,
        Command::Features { .. } => Stage::Features,
        Command::TrainRanker { .. } => Stage::TrainRanker,
        Command::Rank { .. } => Stage::Rank,
        Command::TrainAog(_) => Stage::TrainAog,
        Command::Parse { .. } => Stage::Parse,
        Command::Eval { .. } => Stage::Eval,
        Command::RunAll | Command::ShowConfig => return None,
    })
}

fn run(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    if let Command::ShowConfig = cli.command {
        println!("{}", serde_json::to_string_pretty(&config)?);
        return Ok(());
    }
    let run = Run::new(config)?.with_force(cli.force);
    if let Some(stage) = stage_of(&cli.command) {
        let out = run.run_stage(stage)?;
        let m = &out.manifest;
        let verb = if out.skipped { "up to date" } else { "done" };
        println!("{}: {verb} ({} outputs, {} ms, config {})", m.stage, m.outputs.len(), m.elapsed_ms, &m.config_hash[..12]);
        if stage == Stage::Eval {
            print_reports(&run)?;
        }
        return Ok(());
    }
    run.run_all()?;
    print_reports(&run)
}

fn print_reports(run: &Run) -> Result<()> {
    let summary = run.eval_summary()?;
    let refs: Vec<&eval::MetricReport> = summary.reports.iter().collect();
    print!("{}", eval::render_table(&refs));
    if !run.config.eval.compare.is_empty() {
        println!();
        print!("{}", render_compare(&run.compare_report()?));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> ExitCode {
    ExitCode::from(e.exit_code() as u8)
}
