//! Plan construction.
//!
//! `ESTIMATE` picks parameters from a cache-size heuristic without running
//! anything. `MEASURE` times every candidate of a reduced search space and
//! keeps the fastest; winners can be persisted as wisdom so later planning for
//! the same shape skips the search.

mod plan;
mod timer;
mod wisdom;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use plan::{
    Candidate, Measurement, Plan, PlanningMode, SecondPass, BASE_CASE_CANDIDATES,
    TRANSPOSE_BLOCK_CANDIDATES,
};
pub use timer::{
    resolution_warning, timer_source, MonotonicTimer, ScriptedTimer, TimerSource, RESOLUTION_FACTOR,
};
pub use wisdom::{wisdom_load, wisdom_save, WisdomEntry, WisdomKey, WisdomStore, WISDOM_VERSION};

use crate::engine::{self, ExecOptions, StrategyId};
use crate::error::{FftError, Result};
use crate::kernel::DEFAULT_BASE_CASE;
use crate::layout::{RealGrid, DEFAULT_TRANSPOSE_BLOCK};
use crate::stats;

pub const CACHE_BUDGET_ENV: &str = "PLANARFFT_CACHE_KB";
pub const DEFAULT_CACHE_BUDGET_BYTES: usize = 32 * 1024;
/// Grids larger than this are timed on a row-clamped proxy.
pub const MEASURE_PROXY_ELEMENTS: usize = 1 << 22;

const BYTES_PER_SAMPLE: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannerConfig {
    pub cache_budget_bytes: usize,
    pub proxy_elements: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            cache_budget_bytes: DEFAULT_CACHE_BUDGET_BYTES,
            proxy_elements: MEASURE_PROXY_ELEMENTS,
        }
    }
}

impl PlannerConfig {
    /// Default config with the cache budget taken from `PLANARFFT_CACHE_KB`
    /// when set.
    pub fn from_env() -> Result<Self> {
        let mut cfg = Self::default();
        if let Ok(v) = std::env::var(CACHE_BUDGET_ENV) {
            let kb: usize = v.trim().parse().map_err(|_| {
                FftError::invalid(format!(
                    "{CACHE_BUDGET_ENV}={v:?} is not a whole number of KiB"
                ))
            })?;
            cfg.cache_budget_bytes = kb * 1024;
        }
        Ok(cfg)
    }

    fn row_fits(&self, cols: usize) -> bool {
        cols * BYTES_PER_SAMPLE <= self.cache_budget_bytes
    }
}

#[derive(Debug, Default)]
pub struct Planner {
    config: PlannerConfig,
    wisdom: WisdomStore,
    measurements_run: usize,
    warnings: Vec<String>,
}

impl Planner {
    pub fn new(config: PlannerConfig) -> Self {
        Planner {
            config,
            ..Default::default()
        }
    }

    pub fn with_wisdom(mut self, wisdom: WisdomStore) -> Self {
        self.wisdom = wisdom;
        self
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.config
    }

    pub fn wisdom(&self) -> &WisdomStore {
        &self.wisdom
    }

    pub fn into_wisdom(self) -> WisdomStore {
        self.wisdom
    }

    /// Number of timed candidate executions performed so far.
    pub fn measurements_run(&self) -> usize {
        self.measurements_run
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Heuristic plan; performs no timing.
    pub fn estimate(
        &self,
        rows: usize,
        cols: usize,
        workers: usize,
        strategy: StrategyId,
    ) -> Result<Plan> {
        plan::validate_dims(rows, cols, workers)?;
        let second_pass = if self.config.row_fits(cols) {
            SecondPass::Strided
        } else {
            SecondPass::Transpose
        };
        let candidate = Candidate {
            base_case: DEFAULT_BASE_CASE,
            transpose_block: DEFAULT_TRANSPOSE_BLOCK,
            second_pass,
        };
        Ok(Plan::from_candidate(
            rows, cols, workers, strategy, candidate,
        ))
    }

    /// The reduced search space for a row length. Strided candidates are
    /// dropped once a row exceeds four times the cache budget, and since the
    /// strided pass never transposes they are enumerated once per base case.
    pub fn candidates(&self, cols: usize) -> Vec<Candidate> {
        let strided = cols * BYTES_PER_SAMPLE <= 4 * self.config.cache_budget_bytes;
        let mut out = Vec::new();
        for base_case in BASE_CASE_CANDIDATES {
            for transpose_block in TRANSPOSE_BLOCK_CANDIDATES {
                out.push(Candidate {
                    base_case,
                    transpose_block,
                    second_pass: SecondPass::Transpose,
                });
            }
            if strided {
                out.push(Candidate {
                    base_case,
                    transpose_block: DEFAULT_TRANSPOSE_BLOCK,
                    second_pass: SecondPass::Strided,
                });
            }
        }
        out
    }

    /// Timed plan search. A wisdom hit returns immediately without running
    /// any candidate; otherwise the winner is recorded in the wisdom store.
    pub fn measure(
        &mut self,
        rows: usize,
        cols: usize,
        workers: usize,
        strategy: StrategyId,
        reps: usize,
        timer: &dyn TimerSource,
    ) -> Result<Plan> {
        plan::validate_dims(rows, cols, workers)?;
        let key = WisdomKey {
            rows,
            cols,
            workers,
            strategy,
        };
        if let Some(hit) = self.wisdom.get(&key) {
            let mut plan = Plan::from_candidate(rows, cols, workers, strategy, hit.candidate);
            plan.mode = PlanningMode::Measure;
            plan.measurements = vec![Measurement {
                candidate: hit.candidate,
                median_seconds: hit.median_ns as f64 * 1e-9,
            }];
            return Ok(plan);
        }
        let candidates = self.candidates(cols);
        let plan =
            self.measure_candidates(rows, cols, workers, strategy, &candidates, reps, timer)?;
        let best = plan.chosen_measurement().expect("winner is measured");
        self.wisdom.insert(
            key,
            WisdomEntry {
                candidate: best.candidate,
                median_ns: (best.median_seconds * 1e9).round() as u64,
            },
        );
        Ok(plan)
    }

    /// Times each candidate `reps` times and returns the argmin plan. Ties go
    /// to the earlier candidate.
    #[allow(clippy::too_many_arguments)]
    pub fn measure_candidates(
        &mut self,
        rows: usize,
        cols: usize,
        workers: usize,
        strategy: StrategyId,
        candidates: &[Candidate],
        reps: usize,
        timer: &dyn TimerSource,
    ) -> Result<Plan> {
        plan::validate_dims(rows, cols, workers)?;
        if reps == 0 {
            return Err(FftError::invalid("reps must be at least 1"));
        }
        if candidates.is_empty() {
            return Err(FftError::invalid("empty candidate set"));
        }

        let proxy_rows = if rows * cols <= self.config.proxy_elements {
            rows
        } else {
            (self.config.proxy_elements / cols).clamp(1, rows)
        };
        let scale = rows as f64 / proxy_rows as f64;
        let input = scratch_grid(proxy_rows, cols);
        let options = ExecOptions::default();
        let runner = engine::Runner::new(strategy, workers)?;

        let mut measurements = Vec::with_capacity(candidates.len());
        for &candidate in candidates {
            let failed = |e: FftError| FftError::PlanningFailed {
                candidate: candidate.to_string(),
                reason: e.to_string(),
            };
            let plan = Plan::from_candidate(proxy_rows, cols, workers, strategy, candidate);
            plan.validate().map_err(failed)?;
            let mut times = Vec::with_capacity(reps);
            for _ in 0..reps {
                let start = timer.now().map_err(failed)?;
                runner.execute(&input, &plan, &options).map_err(failed)?;
                let stop = timer.now().map_err(failed)?;
                self.measurements_run += 1;
                let elapsed = stop.saturating_sub(start);
                if let Some(w) = resolution_warning(elapsed, timer.resolution()) {
                    warn!("candidate {candidate}: {w}");
                    self.warnings.push(format!("candidate {candidate}: {w}"));
                }
                times.push(elapsed.as_secs_f64());
            }
            let median = stats::median(&times).expect("reps >= 1");
            measurements.push(Measurement {
                candidate,
                median_seconds: median * scale,
            });
        }

        let best = measurements.iter().enumerate().fold(0, |best, (i, m)| {
            if m.median_seconds < measurements[best].median_seconds {
                i
            } else {
                best
            }
        });
        let mut plan =
            Plan::from_candidate(rows, cols, workers, strategy, measurements[best].candidate);
        plan.mode = PlanningMode::Measure;
        plan.measurements = measurements;
        Ok(plan)
    }
}

fn scratch_grid(rows: usize, cols: usize) -> RealGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    RealGrid::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// Estimated plan with the default planner configuration.
pub fn plan_estimate(
    rows: usize,
    cols: usize,
    workers: usize,
    strategy: StrategyId,
) -> Result<Plan> {
    Planner::default().estimate(rows, cols, workers, strategy)
}

/// Measured plan with the default planner configuration and no wisdom.
pub fn plan_measure(
    rows: usize,
    cols: usize,
    workers: usize,
    strategy: StrategyId,
    reps: usize,
    timer: &dyn TimerSource,
) -> Result<Plan> {
    Planner::default().measure(rows, cols, workers, strategy, reps, timer)
}
