use std::sync::Arc;

use log::{info, warn};
use planarfft::planner::{PlannerConfig, WisdomStore};
use planarfft::stats;
use planarfft::testing::random_real_grid;
use planarfft::{
    fft2d_distributed_local, fft2d_distributed_local_timed, timer_source, ComplexGrid, ExecOptions,
    Plan, Planner, PlanningMode, RealGrid, Runner, StrategyId, TimerSource, TimingBreakdown,
};

use crate::config::{BenchConfig, Point, Target};
use crate::Result;

/// Aggregate of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRecord {
    pub strategy: String,
    pub ranks: usize,
    pub threads: usize,
    pub median_s: f64,
    pub min_s: f64,
    pub max_s: f64,
    pub fft_frac: f64,
    pub transpose_frac: f64,
    /// Set on failed points, whose numeric fields are NaN.
    pub error: Option<String>,
}

impl ScalingRecord {
    fn failed(point: &Point, error: String) -> Self {
        ScalingRecord {
            strategy: point.target.name().to_string(),
            ranks: point.ranks,
            threads: point.threads,
            median_s: f64::NAN,
            min_s: f64::NAN,
            max_s: f64::NAN,
            fft_frac: f64::NAN,
            transpose_frac: f64::NAN,
            error: Some(error),
        }
    }

    pub fn is_failed(&self) -> bool {
        self.error.is_some()
    }
}

/// FNV-1a over the bit patterns of every output sample.
pub fn output_checksum(grid: &ComplexGrid) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in grid.as_slice() {
        for x in [v.re, v.im] {
            for b in x.to_bits().to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }
    h
}

/// FFT and transpose shares of one run. Overlapping phase spans (NAIVE,
/// OPT) are normalized by their sum so the pair never exceeds 1.
fn split(b: &TimingBreakdown) -> (f64, f64) {
    let denom = b.total_seconds.max(b.phase_sum());
    if denom > 0.0 {
        (b.fft_seconds() / denom, b.transpose_seconds() / denom)
    } else {
        (0.0, 0.0)
    }
}

enum Executor {
    Shared(Runner),
    Distributed { ranks: usize, threads: usize },
}

impl Executor {
    fn run(
        &self,
        input: &RealGrid,
        plan: &Plan,
        timer: &Arc<dyn TimerSource>,
    ) -> planarfft::Result<(ComplexGrid, TimingBreakdown)> {
        match self {
            Executor::Shared(runner) => {
                let opts = ExecOptions::default().with_timer(timer.clone());
                let exec = runner.execute(input, plan, &opts)?;
                Ok((exec.output, exec.breakdown))
            }
            Executor::Distributed { ranks, threads } => {
                fft2d_distributed_local_timed(input, plan, *ranks, *threads, timer.as_ref())
            }
        }
    }

    fn warm_up(&self, input: &RealGrid, plan: &Plan) -> planarfft::Result<()> {
        match self {
            Executor::Shared(runner) => runner
                .execute(input, plan, &ExecOptions::default())
                .map(drop),
            Executor::Distributed { ranks, threads } => {
                fft2d_distributed_local(input, plan, *ranks, *threads).map(drop)
            }
        }
    }
}

/// Sweep driver. `timer` brackets each engine call and yields the reported
/// run times; `engine_timer` feeds the engine's phase breakdown.
pub struct Harness {
    timer: Arc<dyn TimerSource>,
    engine_timer: Arc<dyn TimerSource>,
    planner: Planner,
    available: usize,
    checksums: Vec<(Point, u64)>,
    warnings: Vec<String>,
}

impl Harness {
    pub fn new(planner: Planner) -> Self {
        Harness {
            timer: timer_source(),
            engine_timer: timer_source(),
            planner,
            available: std::thread::available_parallelism().map_or(1, |n| n.get()),
            checksums: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn with_timer(mut self, timer: Arc<dyn TimerSource>) -> Self {
        self.timer = timer;
        self
    }

    pub fn with_engine_timer(mut self, timer: Arc<dyn TimerSource>) -> Self {
        self.engine_timer = timer;
        self
    }

    /// Overrides the detected hardware parallelism used for oversubscription
    /// warnings.
    pub fn with_available_parallelism(mut self, n: usize) -> Self {
        self.available = n;
        self
    }

    pub fn planner(&self) -> &Planner {
        &self.planner
    }

    pub fn into_planner(self) -> Planner {
        self.planner
    }

    /// Output checksum of the last timed run of each completed point.
    pub fn checksums(&self) -> &[(Point, u64)] {
        &self.checksums
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    fn warn(&mut self, msg: String) {
        warn!("{msg}");
        self.warnings.push(msg);
    }

    /// Runs every point of `cfg`. Engine failures become failed records; only
    /// an invalid configuration aborts the sweep.
    pub fn run(&mut self, cfg: &BenchConfig) -> Result<Vec<ScalingRecord>> {
        cfg.validate()?;
        let input = random_real_grid(cfg.rows, cfg.cols, cfg.seed);
        let mut records = Vec::new();
        for point in cfg.points() {
            if point.parallelism() > self.available {
                self.warn(format!(
                    "{point}: {} threads exceed the {} available on this host",
                    point.parallelism(),
                    self.available
                ));
            }
            let record = match self.run_point(cfg, &point, &input) {
                Ok(r) => r,
                Err(e) => {
                    self.warn(format!("{point}: {e}"));
                    ScalingRecord::failed(&point, e.to_string())
                }
            };
            records.push(record);
        }
        Ok(records)
    }

    fn plan_point(&mut self, cfg: &BenchConfig, point: &Point) -> planarfft::Result<Plan> {
        let strategy = match point.target {
            Target::Engine(s) => s,
            Target::Distributed if point.threads > 1 => StrategyId::ForLoop,
            Target::Distributed => StrategyId::Sequential,
        };
        match cfg.plan {
            PlanningMode::Estimate => {
                self.planner
                    .estimate(cfg.rows, cfg.cols, point.threads, strategy)
            }
            PlanningMode::Measure => self.planner.measure(
                cfg.rows,
                cfg.cols,
                point.threads,
                strategy,
                cfg.plan_reps,
                self.timer.as_ref(),
            ),
        }
    }

    fn run_point(
        &mut self,
        cfg: &BenchConfig,
        point: &Point,
        input: &RealGrid,
    ) -> planarfft::Result<ScalingRecord> {
        let plan = self.plan_point(cfg, point)?;
        info!("{point}: plan {}", plan.candidate());
        let exec = match point.target {
            Target::Engine(s) => Executor::Shared(Runner::new(s, point.threads)?),
            Target::Distributed => Executor::Distributed {
                ranks: point.ranks,
                threads: point.threads,
            },
        };
        exec.warm_up(input, &plan)?;

        let mut times = Vec::with_capacity(cfg.reps);
        let (mut fft, mut transpose) = (0.0, 0.0);
        let mut checksum = None;
        for rep in 0..cfg.reps {
            let start = self.timer.now()?;
            let (output, breakdown) = exec.run(input, &plan, &self.engine_timer)?;
            let stop = self.timer.now()?;
            times.push(stop.saturating_sub(start).as_secs_f64());
            let (f, t) = split(&breakdown);
            fft += f;
            transpose += t;
            let sum = output_checksum(&output);
            if checksum.is_some_and(|c| c != sum) {
                self.warn(format!("{point}: output of run {rep} differs from run 0"));
            }
            checksum.get_or_insert(sum);
        }
        let sum = checksum.expect("reps >= 1");
        info!("{point}: output checksum {sum:016x}");
        self.checksums.push((*point, sum));

        let s = stats::summarize(&times).expect("reps >= 1");
        let n = cfg.reps as f64;
        Ok(ScalingRecord {
            strategy: point.target.name().to_string(),
            ranks: point.ranks,
            threads: point.threads,
            median_s: s.median,
            min_s: s.min,
            max_s: s.max,
            fft_frac: fft / n,
            transpose_frac: transpose / n,
            error: None,
        })
    }
}

/// Runs a sweep with monotonic timers, loading and (for measured plans)
/// saving the wisdom file named in `cfg`.
pub fn run_strong_scaling(cfg: &BenchConfig) -> Result<Vec<ScalingRecord>> {
    cfg.validate()?;
    let mut planner = Planner::new(PlannerConfig::from_env()?);
    if let Some(path) = &cfg.wisdom {
        let (store, diags) = WisdomStore::load_with_diagnostics(path)?;
        for d in diags {
            warn!("{}: {d}", path.display());
        }
        planner = planner.with_wisdom(store);
    }
    let mut harness = Harness::new(planner);
    let records = harness.run(cfg)?;
    if let (Some(path), PlanningMode::Measure) = (&cfg.wisdom, cfg.plan) {
        harness.into_planner().wisdom().save(path)?;
    }
    Ok(records)
}
