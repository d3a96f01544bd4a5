//! `verify` — runs the certification experiments and writes
//! `report.json` plus per-run trajectory CSVs.
//!
//! Exit codes: 0 all cells pass, 1 a cell failed or diverged, 2 bad
//! configuration.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ortho_harness::{
    experiments, DepthConstruction, ExperimentConfig, ExperimentKind, LossKind, LossSpec,
    RetractionKind,
};

#[derive(Parser)]
#[command(
    name = "verify",
    about = "Certify Riemannian-descent equivalence for deep orthogonal linear networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deep-vs-shallow trajectory equivalence over a (p, depth) grid.
    Equivalence(CommonArgs),
    /// Two depths with equal initial products follow the same trajectory.
    Depth(CommonArgs),
    /// Discrete descent converges to the gradient flow at first order.
    Flow(CommonArgs),
    /// Descent reaches the known minimizer of the configured loss.
    Convergence(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the fixed certification grid for this experiment.
    #[arg(long, value_parser = ["paper"])]
    preset: Option<String>,
    /// Comma-separated matrix dimensions, e.g. 2,4,16.
    #[arg(long, value_delimiter = ',')]
    p: Option<Vec<usize>>,
    /// Comma-separated depths (equivalence grid) or the two depths to
    /// compare (depth experiment).
    #[arg(long, value_delimiter = ',')]
    depth: Option<Vec<usize>>,
    /// Step size; for `flow` a decreasing comma-separated sequence.
    #[arg(long, value_delimiter = ',')]
    eta: Option<Vec<f64>>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    loss: Option<LossKind>,
    #[arg(long)]
    retraction: Option<RetractionKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.json and trajectory CSVs.
    #[arg(long, default_value = "verify-out")]
    out: PathBuf,
    /// Trajectory-deviation pass threshold.
    #[arg(long)]
    threshold: Option<f64>,
    /// Flow horizon.
    #[arg(long)]
    t_end: Option<f64>,
    /// Reference integrator step for the flow comparison.
    #[arg(long)]
    dt: Option<f64>,
    /// Record every Nth trajectory row in the CSVs.
    #[arg(long)]
    stride: Option<usize>,
    /// Negative control: sequential (non-simultaneous) deep updates.
    #[arg(long)]
    sequential: bool,
    /// Negative control: mismatched initial products in the depth pair.
    #[arg(long)]
    mismatched: bool,
    /// Equal-product construction for the depth experiment.
    #[arg(long)]
    construction: Option<DepthConstruction>,
}

fn build_config(kind: ExperimentKind, args: &CommonArgs) -> anyhow::Result<ExperimentConfig> {
    let mut config = match (&args.preset, &args.config) {
        (Some(_), _) => ExperimentConfig::paper_preset(kind),
        (None, Some(path)) => ExperimentConfig::load(path)?,
        (None, None) => ExperimentConfig::default(),
    };
    config.experiment = kind;
    if let Some(path) = &args.config {
        if args.preset.is_some() {
            let file = ExperimentConfig::load(path)?;
            // Preset provides the base, file refines it only where the
            // default differs; simplest rule: file wins over preset.
            config = file;
            config.experiment = kind;
        }
    }

    if let Some(p) = &args.p {
        config.p = p.clone();
    }
    if let Some(depth) = &args.depth {
        config.depth = depth.clone();
    }
    if let Some(eta) = &args.eta {
        match kind {
            ExperimentKind::Flow => config.eta_sequence = eta.clone(),
            _ => {
                anyhow::ensure!(eta.len() == 1, "expected a single --eta value");
                config.eta = Some(eta[0]);
            }
        }
    }
    if let Some(steps) = args.steps {
        config.steps = steps;
    }
    if let Some(loss) = args.loss {
        config.loss = LossSpec { kind: Some(loss), ..config.loss };
    }
    if let Some(retraction) = args.retraction {
        config.retraction = retraction;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(threshold) = args.threshold {
        config.threshold = threshold;
    }
    if let Some(t_end) = args.t_end {
        config.t_end = t_end;
    }
    if let Some(dt) = args.dt {
        config.dt = dt;
    }
    if let Some(stride) = args.stride {
        config.record_stride = stride;
    }
    if args.sequential {
        config.sequential = true;
    }
    if args.mismatched {
        config.mismatched_products = true;
    }
    if let Some(construction) = args.construction {
        config.depth_construction = construction;
    }
    config.out = Some(args.out.clone());
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Equivalence(args) => (ExperimentKind::Equivalence, args),
        Command::Depth(args) => (ExperimentKind::Depth, args),
        Command::Flow(args) => (ExperimentKind::Flow, args),
        Command::Convergence(args) => (ExperimentKind::Convergence, args),
    };

    let config = match build_config(kind, args) {
        Ok(config) => config,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = config.validate() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }

    let report = match experiments::run(&config) {
        Ok(report) => report,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };

    for cell in &report.cells {
        println!("{}", cell.summary_line());
    }
    if let Some(flow) = &report.flow {
        println!(
            "flow: gaps {:?} ratios {:?} (band {:?}) rk4_ratio {:?}",
            flow.endpoint_gaps, flow.ratios, flow.ratio_band, flow.rk4_ratio
        );
    }

    if let Some(out) = &config.out {
        if let Err(e) = report.write_json(out) {
            eprintln!("error writing report: {e:#}");
            return ExitCode::from(1);
        }
        println!("report: {}", out.join("report.json").display());
    }

    if report.any_error {
        ExitCode::from(1)
    } else if report.all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
