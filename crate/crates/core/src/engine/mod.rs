//! The 2D real-to-complex pipeline.
//!
//! Every strategy runs the same four steps: r2c transforms of the input rows,
//! a transpose, c2c transforms of the transposed rows, and a transpose back.
//! With [`SecondPass::Strided`] the middle steps collapse into one strided
//! column pass and no transposes happen. Strategies differ only in how the
//! per-row work is scheduled; each output element is produced by exactly one
//! task with a fixed operation order, so all strategies agree bit for bit.

mod parallel;
pub(crate) mod shared;
mod trace;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use parallel::Engine;
pub use trace::{Phase, TaskGraphTrace, TaskHook, TraceEvent};

pub(crate) use trace::Recorder;

use crate::error::{FftError, Result};
use crate::kernel::{ComplexSample, Direction, Fft1d};
use crate::layout::{strided_column_apply, transpose_blocked, ComplexGrid, RealGrid};
use crate::planner::{timer_source, Plan, SecondPass, TimerSource};
use shared::with_scratch;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyId {
    Sequential,
    /// Per-row futures; tasks wait only on the tasks that produce their input.
    Naive,
    /// Row-chunk futures, r2c fused with the first transpose, tiled transposes.
    Opt,
    /// Per-row tasks with a global barrier after every step.
    Sync,
    /// Static fork-join loop over contiguous row chunks for every step.
    ForLoop,
}

impl StrategyId {
    pub const ALL: [StrategyId; 5] = [
        StrategyId::Sequential,
        StrategyId::Naive,
        StrategyId::Opt,
        StrategyId::Sync,
        StrategyId::ForLoop,
    ];

    pub const PARALLEL: [StrategyId; 4] = [
        StrategyId::Naive,
        StrategyId::Opt,
        StrategyId::Sync,
        StrategyId::ForLoop,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyId::Sequential => "seq",
            StrategyId::Naive => "naive",
            StrategyId::Opt => "opt",
            StrategyId::Sync => "sync",
            StrategyId::ForLoop => "for_loop",
        }
    }

    /// Strategies that separate every step with a barrier, so their phase
    /// times add up to the total.
    pub fn is_barriered(self) -> bool {
        matches!(
            self,
            StrategyId::Sequential | StrategyId::Sync | StrategyId::ForLoop
        )
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyId {
    type Err = FftError;

    fn from_str(s: &str) -> Result<Self> {
        StrategyId::ALL
            .into_iter()
            .find(|id| id.name() == s)
            .ok_or_else(|| FftError::invalid(format!("unknown strategy `{s}`")))
    }
}

/// Seconds spent in each step of one execution.
///
/// For barriered strategies the phases are consecutive intervals and add up
/// to the total. For NAIVE and OPT each phase is the wall-clock span of its
/// tasks; spans can overlap.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingBreakdown {
    pub r2c_seconds: f64,
    pub first_transpose_seconds: f64,
    pub c2c_seconds: f64,
    pub second_transpose_seconds: f64,
    pub total_seconds: f64,
}

impl TimingBreakdown {
    pub fn phase_sum(&self) -> f64 {
        self.fft_seconds() + self.transpose_seconds()
    }

    pub fn fft_seconds(&self) -> f64 {
        self.r2c_seconds + self.c2c_seconds
    }

    pub fn transpose_seconds(&self) -> f64 {
        self.first_transpose_seconds + self.second_transpose_seconds
    }

    pub fn fft_fraction(&self) -> f64 {
        fraction(self.fft_seconds(), self.total_seconds)
    }

    pub fn transpose_fraction(&self) -> f64 {
        fraction(self.transpose_seconds(), self.total_seconds)
    }

    pub(crate) fn from_marks(marks: &[std::time::Duration; 5]) -> Self {
        let d = |a: usize, b: usize| marks[b].saturating_sub(marks[a]).as_secs_f64();
        TimingBreakdown {
            r2c_seconds: d(0, 1),
            first_transpose_seconds: d(1, 2),
            c2c_seconds: d(2, 3),
            second_transpose_seconds: d(3, 4),
            total_seconds: d(0, 4),
        }
    }
}

fn fraction(part: f64, total: f64) -> f64 {
    if total > 0.0 {
        part / total
    } else {
        0.0
    }
}

/// Per-call knobs that do not belong in a [`Plan`].
#[derive(Clone)]
pub struct ExecOptions {
    pub timer: Arc<dyn TimerSource>,
    pub trace: bool,
    pub hook: Option<TaskHook>,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            timer: timer_source(),
            trace: false,
            hook: None,
        }
    }
}

impl fmt::Debug for ExecOptions {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ExecOptions")
            .field("trace", &self.trace)
            .field("hook", &self.hook.is_some())
            .finish()
    }
}

impl ExecOptions {
    pub fn with_timer(mut self, timer: Arc<dyn TimerSource>) -> Self {
        self.timer = timer;
        self
    }

    pub fn with_trace(mut self) -> Self {
        self.trace = true;
        self
    }

    pub fn with_hook(mut self, hook: TaskHook) -> Self {
        self.hook = Some(hook);
        self
    }
}

#[derive(Debug, Clone)]
pub struct Execution {
    pub output: ComplexGrid,
    pub breakdown: TimingBreakdown,
    pub trace: Option<TaskGraphTrace>,
}

/// Row transforms and shape for one plan.
pub(crate) struct Pipeline {
    pub rows: usize,
    pub cols: usize,
    pub half: usize,
    pub r2c: Fft1d,
    pub c2c: Fft1d,
    pub block: usize,
    pub second_pass: SecondPass,
}

impl Pipeline {
    pub(crate) fn new(input: &RealGrid, plan: &Plan) -> Result<Self> {
        plan.validate()?;
        if input.dims() != (plan.rows, plan.cols) {
            return Err(FftError::invalid(format!(
                "input is {}x{} but the plan is for {}x{}",
                input.rows(),
                input.cols(),
                plan.rows,
                plan.cols
            )));
        }
        Self::for_dims(plan.rows, plan.cols, plan)
    }

    pub(crate) fn for_dims(rows: usize, cols: usize, plan: &Plan) -> Result<Self> {
        Ok(Pipeline {
            rows,
            cols,
            half: cols / 2 + 1,
            r2c: Fft1d::clamped(cols, Direction::Forward, plan.base_case)?,
            c2c: Fft1d::clamped(rows, Direction::Forward, plan.base_case)?,
            block: plan.transpose_block,
            second_pass: plan.second_pass,
        })
    }

    pub(crate) fn r2c_row(&self, input: &[f64], out: &mut [ComplexSample]) {
        with_scratch(self.cols, |buf, scratch| {
            self.r2c.r2c_into(input, out, buf, scratch)
        });
    }

    pub(crate) fn c2c_row(&self, row: &mut [ComplexSample]) {
        with_scratch(self.rows, |_, scratch| self.c2c.process(row, scratch));
    }
}

fn run_sequential(p: &Pipeline, input: &RealGrid, opts: &ExecOptions) -> Result<Execution> {
    let rec = Recorder::new(opts.trace, opts.hook.clone());
    let timer = &*opts.timer;
    let t0 = timer.now()?;

    let mut a = ComplexGrid::zeros(p.rows, p.half);
    rec.task(Phase::R2c, 0..p.rows, || {
        for i in 0..p.rows {
            p.r2c_row(input.row(i), a.row_mut(i));
        }
    });
    let t1 = timer.now()?;

    let (output, breakdown) = match p.second_pass {
        SecondPass::Transpose => {
            let mut b = rec.task(Phase::FirstTranspose, 0..p.half, || {
                transpose_blocked(&a, p.block)
            })?;
            let t2 = timer.now()?;
            rec.task(Phase::C2c, 0..p.half, || {
                for r in 0..p.half {
                    p.c2c_row(b.row_mut(r));
                }
            });
            let t3 = timer.now()?;
            let c = rec.task(Phase::SecondTranspose, 0..p.rows, || {
                transpose_blocked(&b, p.block)
            })?;
            let t4 = timer.now()?;
            (c, TimingBreakdown::from_marks(&[t0, t1, t2, t3, t4]))
        }
        SecondPass::Strided => {
            rec.task(Phase::C2c, 0..p.half, || {
                let stride = a.row_stride();
                let data = a.as_mut_slice();
                with_scratch(p.rows, |column, scratch| {
                    for j in 0..p.half {
                        strided_column_apply(&p.c2c, data, stride, j, column, scratch);
                    }
                });
            });
            let t3 = timer.now()?;
            (a, TimingBreakdown::from_marks(&[t0, t1, t1, t3, t3]))
        }
    };
    Ok(Execution {
        output,
        breakdown,
        trace: rec.into_trace(),
    })
}

/// Sequential baseline: `N1 x (N2/2 + 1)` spectrum plus phase timings.
pub fn fft2d_sequential(input: &RealGrid, plan: &Plan) -> Result<(ComplexGrid, TimingBreakdown)> {
    let p = Pipeline::new(input, plan)?;
    let exec = run_sequential(&p, input, &ExecOptions::default())?;
    Ok((exec.output, exec.breakdown))
}

/// Runs `plan.strategy` on a pool of exactly `workers` threads.
pub fn fft2d_parallel(
    input: &RealGrid,
    plan: &Plan,
    workers: usize,
) -> Result<(ComplexGrid, TimingBreakdown)> {
    if plan.strategy == StrategyId::Sequential {
        return Err(FftError::invalid(
            "fft2d_parallel needs a parallel strategy, got seq",
        ));
    }
    let exec = Engine::new(workers)?.execute(input, plan, &ExecOptions::default())?;
    Ok((exec.output, exec.breakdown))
}

/// Runs any strategy, sequential included, with explicit options.
pub fn execute(
    input: &RealGrid,
    plan: &Plan,
    workers: usize,
    opts: &ExecOptions,
) -> Result<Execution> {
    if plan.strategy == StrategyId::Sequential {
        let p = Pipeline::new(input, plan)?;
        return run_sequential(&p, input, opts);
    }
    Engine::new(workers)?.execute(input, plan, opts)
}

/// Reusable executor for repeated runs: the worker pool is built once.
pub struct Runner {
    engine: Engine,
}

impl Runner {
    pub fn new(strategy: StrategyId, workers: usize) -> Result<Self> {
        let workers = if strategy == StrategyId::Sequential {
            1
        } else {
            workers
        };
        Ok(Runner {
            engine: Engine::new(workers)?,
        })
    }

    pub fn execute(&self, input: &RealGrid, plan: &Plan, opts: &ExecOptions) -> Result<Execution> {
        self.engine.execute(input, plan, opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::ScriptedTimer;

    fn plan(rows: usize, cols: usize) -> Plan {
        Plan::new(rows, cols, 1, StrategyId::Sequential)
    }

    #[test]
    fn constant_grid() {
        let g = RealGrid::from_fn(4, 4, |_, _| 1.0);
        let (out, _) = fft2d_sequential(&g, &plan(4, 4)).unwrap();
        assert_eq!(out.dims(), (4, 3));
        for i in 0..4 {
            for j in 0..3 {
                let expect = if (i, j) == (0, 0) { 16.0 } else { 0.0 };
                assert!((out.get(i, j) - ComplexSample::new(expect, 0.0)).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn impulse_grid() {
        let g = RealGrid::from_fn(4, 4, |i, j| if i == 0 && j == 0 { 1.0 } else { 0.0 });
        for pass in [SecondPass::Transpose, SecondPass::Strided] {
            let (out, _) = fft2d_sequential(&g, &plan(4, 4).with_second_pass(pass)).unwrap();
            for v in out.as_slice() {
                assert!((v - ComplexSample::new(1.0, 0.0)).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let g = RealGrid::zeros(4, 8);
        assert!(matches!(
            fft2d_sequential(&g, &plan(4, 4)),
            Err(FftError::InvalidArgument(_))
        ));
    }

    #[test]
    fn scripted_breakdown_is_exact() {
        let g = RealGrid::from_fn(8, 8, |i, j| (i * j) as f64);
        let timer = Arc::new(ScriptedTimer::from_secs(&[0.0, 3.0, 5.0, 8.0, 10.0]));
        let opts = ExecOptions::default().with_timer(timer);
        let exec = execute(&g, &plan(8, 8), 1, &opts).unwrap();
        let b = exec.breakdown;
        assert_eq!(
            (
                b.r2c_seconds,
                b.first_transpose_seconds,
                b.c2c_seconds,
                b.second_transpose_seconds
            ),
            (3.0, 2.0, 3.0, 2.0)
        );
        assert_eq!(b.total_seconds, 10.0);
        assert_eq!(b.fft_fraction(), 0.6);
        assert_eq!(b.transpose_fraction(), 0.4);
    }

    #[test]
    fn strided_logs_no_transpose_time() {
        let g = RealGrid::from_fn(8, 8, |i, j| (i + 2 * j) as f64);
        let timer = Arc::new(ScriptedTimer::from_secs(&[0.0, 1.0, 4.0]));
        let opts = ExecOptions::default().with_timer(timer);
        let p = plan(8, 8).with_second_pass(SecondPass::Strided);
        let b = execute(&g, &p, 1, &opts).unwrap().breakdown;
        assert_eq!(b.transpose_seconds(), 0.0);
        assert_eq!(
            (b.r2c_seconds, b.c2c_seconds, b.total_seconds),
            (1.0, 3.0, 4.0)
        );
    }

    #[test]
    fn parallel_rejects_sequential_strategy() {
        let g = RealGrid::zeros(4, 4);
        assert!(fft2d_parallel(&g, &plan(4, 4), 2).is_err());
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in StrategyId::ALL {
            assert_eq!(s.name().parse::<StrategyId>().unwrap(), s);
        }
        assert!("dist".parse::<StrategyId>().is_err());
    }
}
