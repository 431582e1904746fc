use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use planarfft::planner::{MonotonicTimer, PlannerConfig, WisdomStore};
use planarfft::{Planner, PlanningMode, StrategyId};
use planarfft_bench::{
    emit_csv, enforce, mode_output_path, run_strong_scaling, verify_mode, BenchConfig, BenchError,
    Target,
};

#[derive(Parser)]
#[command(
    name = "planarfft",
    version,
    about = "Parallel 2D r2c FFT benchmark harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a strong-scaling sweep and write CSV.
    Bench(BenchArgs),
    /// Check the configured engine against the brute-force transform.
    Verify(EngineArgs),
    /// Print the plan chosen for one configuration.
    Plan(PlanArgs),
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long, default_value_t = 4096)]
    rows: usize,
    #[arg(long, default_value_t = 4096)]
    cols: usize,
    /// seq, naive, opt, sync, for_loop or dist
    #[arg(long, default_value = "for_loop")]
    strategy: String,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    workers: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    ranks: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    threads: Vec<usize>,
    /// Report success even when verification fails.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    engine: EngineArgs,
    /// Planning modes; each gets its own output file.
    #[arg(long, value_delimiter = ',', default_value = "estimate")]
    plan: Vec<String>,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    #[arg(long, default_value_t = 3)]
    plan_reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "scaling.csv")]
    out: PathBuf,
    #[arg(long)]
    wisdom: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long, default_value_t = 4096)]
    rows: usize,
    #[arg(long, default_value_t = 4096)]
    cols: usize,
    #[arg(long, default_value = "for_loop")]
    strategy: String,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value = "estimate")]
    plan: String,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    #[arg(long)]
    wisdom: Option<PathBuf>,
}

fn config_from(args: &EngineArgs) -> Result<BenchConfig, BenchError> {
    Ok(BenchConfig {
        rows: args.rows,
        cols: args.cols,
        target: args.strategy.parse()?,
        workers: args.workers.clone(),
        ranks: args.ranks.clone(),
        threads: args.threads.clone(),
        force: args.force,
        ..BenchConfig::default()
    })
}

fn parse_mode(s: &str) -> Result<PlanningMode, BenchError> {
    s.parse().map_err(|_| BenchError::Config {
        field: "plan",
        message: format!("`{s}` is not estimate or measure"),
    })
}

fn verify(args: &EngineArgs) -> Result<(), BenchError> {
    let cfg = config_from(args)?;
    cfg.validate()?;
    let report = verify_mode(&cfg)?;
    for (point, error) in &report.points {
        println!("{point}: max abs error {error:.3e}");
    }
    enforce(&report, args.force)
}

fn bench(args: &BenchArgs) -> Result<(), BenchError> {
    let mut modes = Vec::new();
    for m in &args.plan {
        let mode = parse_mode(m)?;
        if !modes.contains(&mode) {
            modes.push(mode);
        }
    }
    let base = BenchConfig {
        reps: args.reps,
        plan_reps: args.plan_reps,
        seed: args.seed,
        out: args.out.clone(),
        wisdom: args.wisdom.clone(),
        ..config_from(&args.engine)?
    };
    base.validate()?;

    let report = verify_mode(&base)?;
    info!("verification error {:.3e}", report.max_abs_error);
    enforce(&report, base.force)?;

    for &mode in &modes {
        let out = if modes.len() > 1 {
            mode_output_path(&base.out, mode)
        } else {
            base.out.clone()
        };
        let cfg = BenchConfig {
            plan: mode,
            out: out.clone(),
            ..base.clone()
        };
        let records = run_strong_scaling(&cfg)?;
        emit_csv(&records, &out)?;
        for r in &records {
            match &r.error {
                Some(e) => warn!("{} threads={} ranks={}: {e}", r.strategy, r.threads, r.ranks),
                None => println!(
                    "{:<8} ranks={:<3} threads={:<3} median {:.4e}s [{:.4e}, {:.4e}] fft {:.1}% transpose {:.1}%",
                    r.strategy,
                    r.ranks,
                    r.threads,
                    r.median_s,
                    r.min_s,
                    r.max_s,
                    100.0 * r.fft_frac,
                    100.0 * r.transpose_frac
                ),
            }
        }
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn plan(args: &PlanArgs) -> Result<(), BenchError> {
    let strategy = match args.strategy.parse()? {
        Target::Engine(s) => s,
        Target::Distributed => StrategyId::ForLoop,
    };
    let mode = parse_mode(&args.plan)?;
    let mut planner = Planner::new(PlannerConfig::from_env()?);
    if let Some(path) = &args.wisdom {
        let (store, diags) = WisdomStore::load_with_diagnostics(path)?;
        for d in diags {
            warn!("{}: {d}", path.display());
        }
        planner = planner.with_wisdom(store);
    }
    let plan = match mode {
        PlanningMode::Estimate => planner.estimate(args.rows, args.cols, args.workers, strategy)?,
        PlanningMode::Measure => planner.measure(
            args.rows,
            args.cols,
            args.workers,
            strategy,
            args.reps,
            &MonotonicTimer::new(),
        )?,
    };
    println!(
        "rows={} cols={} workers={} strategy={} mode={} base_case={} transpose_block={} second_pass={}",
        plan.rows,
        plan.cols,
        plan.workers,
        plan.strategy,
        plan.mode,
        plan.base_case,
        plan.transpose_block,
        plan.second_pass
    );
    for m in &plan.measurements {
        println!("  {}: median {:.4e}s", m.candidate, m.median_seconds);
    }
    if let (Some(path), PlanningMode::Measure) = (&args.wisdom, mode) {
        planner.wisdom().save(path)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Bench(a) => bench(a),
        Command::Verify(a) => verify(a),
        Command::Plan(a) => plan(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
