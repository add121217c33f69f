use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use dpma_core::orchestrator::Scheme;
use dpma_core::scene::SystemConfig;
use dpma_experiments::output::{emit_csv, git_describe, write_manifest, Manifest};
use dpma_experiments::{run_experiment, ExperimentKind, ExperimentSpec};

#[derive(Parser)]
#[command(name = "dpma", version, about = "Monte-Carlo experiments for the D-PMA AirComp optimizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write `<name>.csv`, `<name>_drops.csv` and
    /// `<name>_manifest.json` into the output directory.
    Run(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Dpma,
    Ma,
    Fpa,
    All,
}

#[derive(clap::Args)]
struct RunArgs {
    /// System configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    experiment: ExperimentKind,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Use the full-size network (B=3, K=8, M=4, L=3) and longer sweeps.
    #[arg(long)]
    full_scale: bool,
    /// Restrict the schemes; defaults to the experiment's own set.
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    /// Drops per sweep point.
    #[arg(long)]
    drops: Option<usize>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let Command::Run(args) = Cli::parse().command;
    run(args)
}

fn run(args: RunArgs) -> ExitCode {
    let start = Instant::now();
    let text = match fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => return fail(EXIT_CONFIG, format!("cannot read {}: {e}", args.config.display())),
    };
    let mut cfg: SystemConfig = match serde_json::from_str(&text) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, format!("invalid config {}: {e}", args.config.display())),
    };
    let mut spec = ExperimentSpec::new(args.experiment, args.seed);
    if args.full_scale {
        let full = SystemConfig::full_scale();
        cfg.cells = full.cells;
        cfg.users_per_cell = full.users_per_cell;
        cfg.antennas = full.antennas;
        cfg.paths = full.paths;
        spec = spec.full_scale();
    }
    cfg.rng_seed = args.seed;
    if let Some(s) = args.scheme {
        spec.schemes = match s {
            SchemeArg::Dpma => vec![Scheme::Dpma],
            SchemeArg::Ma => vec![Scheme::Ma],
            SchemeArg::Fpa => vec![Scheme::Fpa],
            SchemeArg::All => vec![Scheme::Dpma, Scheme::Ma, Scheme::Fpa],
        };
    }
    if let Some(n) = args.drops {
        spec.n_drops = n;
    }
    spec.out_dir = args.out.clone();
    if let Err(e) = cfg.validate().and_then(|_| spec.validate()) {
        return fail(EXIT_CONFIG, format!("invalid configuration: {e}"));
    }
    let result = match run_experiment(&spec, &cfg) {
        Ok(r) => r,
        Err(e) => return fail(EXIT_CONFIG, format!("invalid configuration: {e}")),
    };
    if let Err(e) = fs::create_dir_all(&args.out) {
        return fail(1, format!("cannot create {}: {e}", args.out.display()));
    }
    let name = spec.kind.name();
    let summary = args.out.join(format!("{name}.csv"));
    let drops = args.out.join(format!("{name}_drops.csv"));
    let manifest_path = args.out.join(format!("{name}_manifest.json"));
    let manifest = Manifest {
        experiment: name.to_string(),
        seed: args.seed,
        config: cfg,
        spec: spec.clone(),
        full_scale: args.full_scale,
        git_describe: git_describe(),
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: start.elapsed().as_secs_f64(),
        point_wall_time_s: result.point_seconds.clone(),
        failed_records: result.failed_records(),
        outputs: [&summary, &drops].iter().map(|p| p.display().to_string()).collect(),
    };
    let written = emit_csv(&result.rows, &summary)
        .and_then(|_| emit_csv(&result.records, &drops))
        .and_then(|_| write_manifest(&manifest, &manifest_path));
    if let Err(e) = written {
        return fail(1, e.to_string());
    }
    if result.failed_records() > 0 {
        return fail(
            EXIT_SOLVER,
            format!("{} drop evaluations failed; see {}", result.failed_records(), drops.display()),
        );
    }
    ExitCode::SUCCESS
}

fn fail(code: u8, msg: String) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}
