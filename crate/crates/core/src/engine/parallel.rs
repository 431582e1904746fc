use std::ops::Range;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::{Scope, ThreadPool, ThreadPoolBuilder};

use super::shared::{with_scratch, SharedBuf};
use super::{
    run_sequential, ExecOptions, Execution, Phase, Pipeline, Recorder, StrategyId, TimingBreakdown,
};
use crate::error::{FftError, Result};
use crate::kernel::ComplexSample;
use crate::layout::{block_range, blocked_tile_copy, blocked_tile_copy_raw, ComplexGrid, RealGrid};
use crate::planner::{Plan, SecondPass};

/// A pool of exactly `workers` threads executing 2D transforms.
pub struct Engine {
    workers: usize,
    pool: ThreadPool,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("workers", &self.workers)
            .finish()
    }
}

impl Engine {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(FftError::invalid("workers must be at least 1"));
        }
        let pool = ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("planarfft-{i}"))
            .build()
            .map_err(|e| FftError::invalid(format!("cannot start worker pool: {e}")))?;
        Ok(Engine { workers, pool })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn execute(&self, input: &RealGrid, plan: &Plan, opts: &ExecOptions) -> Result<Execution> {
        let p = Pipeline::new(input, plan)?;
        match plan.strategy {
            StrategyId::Sequential => run_sequential(&p, input, opts),
            StrategyId::Naive => self.run_dataflow(&p, input, opts, Dataflow::Naive),
            StrategyId::Opt => self.run_dataflow(&p, input, opts, Dataflow::Opt),
            StrategyId::Sync | StrategyId::ForLoop => {
                self.run_barriered(&p, input, opts, plan.strategy)
            }
        }
    }

    /// Static fork-join: item range `k` of `n` goes to worker `k`, then join.
    pub(crate) fn for_loop(&self, n: usize, f: &(dyn Fn(Range<usize>) + Sync)) {
        let workers = self.workers;
        self.pool.broadcast(|ctx| {
            let range = block_range(n, workers, ctx.index());
            if !range.is_empty() {
                f(range);
            }
        });
    }

    fn run_phase(
        &self,
        strategy: StrategyId,
        rec: &Recorder,
        phase: Phase,
        n: usize,
        f: &(dyn Fn(Range<usize>) + Sync),
    ) {
        match strategy {
            StrategyId::Sync => self.pool.scope(|s| {
                for i in 0..n {
                    s.spawn(move |_| rec.task(phase, i..i + 1, || f(i..i + 1)));
                }
            }),
            _ => self.for_loop(n, &|range| rec.task(phase, range.clone(), || f(range))),
        }
    }

    fn run_barriered(
        &self,
        p: &Pipeline,
        input: &RealGrid,
        opts: &ExecOptions,
        strategy: StrategyId,
    ) -> Result<Execution> {
        let mut bufs = Buffers::new(p, false);
        let rec = Recorder::new(opts.trace, opts.hook.clone());
        let ctx = Ctx::new(p, input, &mut bufs, &rec);
        let timer = &*opts.timer;

        let t0 = timer.now()?;
        self.run_phase(strategy, &rec, Phase::R2c, p.rows, &|r| ctx.r2c_rows(r));
        let t1 = timer.now()?;
        let breakdown = match p.second_pass {
            SecondPass::Transpose => {
                self.run_phase(strategy, &rec, Phase::FirstTranspose, p.half, &|r| {
                    ctx.transpose_into_b(r)
                });
                let t2 = timer.now()?;
                self.run_phase(strategy, &rec, Phase::C2c, p.half, &|r| ctx.c2c_b_rows(r));
                let t3 = timer.now()?;
                self.run_phase(strategy, &rec, Phase::SecondTranspose, p.rows, &|r| {
                    ctx.transpose_into_c(r)
                });
                let t4 = timer.now()?;
                TimingBreakdown::from_marks(&[t0, t1, t2, t3, t4])
            }
            SecondPass::Strided => {
                self.run_phase(strategy, &rec, Phase::C2c, p.half, &|r| {
                    ctx.strided_columns(r)
                });
                let t3 = timer.now()?;
                TimingBreakdown::from_marks(&[t0, t1, t1, t3, t3])
            }
        };
        Ok(Execution {
            output: bufs.into_output(p),
            breakdown,
            trace: rec.into_trace(),
        })
    }

    fn run_dataflow(
        &self,
        p: &Pipeline,
        input: &RealGrid,
        opts: &ExecOptions,
        flavour: Dataflow,
    ) -> Result<Execution> {
        let mut bufs = Buffers::new(p, matches!(flavour, Dataflow::Opt));
        let rec = Recorder::new(opts.trace, opts.hook.clone());
        let mut ctx = Ctx::new(p, input, &mut bufs, &rec);
        let timer = &*opts.timer;

        let t0 = timer.now()?;
        match flavour {
            Dataflow::Naive => {
                ctx.pending_first.store(p.rows, Ordering::Relaxed);
                ctx.pending_third.store(p.half, Ordering::Relaxed);
                let ctx = &ctx;
                self.pool.scope(|s| {
                    for i in 0..p.rows {
                        s.spawn(move |s| naive_r2c(s, ctx, i));
                    }
                });
            }
            Dataflow::Opt => {
                let chunk = p.rows.div_ceil(self.workers);
                let col_chunk = p.half.div_ceil(self.workers);
                ctx.chunk = chunk;
                ctx.col_chunk = col_chunk;
                ctx.pending_first
                    .store(p.rows.div_ceil(chunk), Ordering::Relaxed);
                ctx.pending_third
                    .store(p.half.div_ceil(col_chunk), Ordering::Relaxed);
                let ctx = &ctx;
                self.pool.scope(|s| {
                    for start in (0..p.rows).step_by(chunk) {
                        let range = start..(start + chunk).min(p.rows);
                        s.spawn(move |s| opt_first(s, ctx, range));
                    }
                });
            }
        }
        let t1 = timer.now()?;

        let breakdown = TimingBreakdown {
            r2c_seconds: rec.span_seconds(Phase::R2c),
            first_transpose_seconds: rec.span_seconds(Phase::FirstTranspose),
            c2c_seconds: rec.span_seconds(Phase::C2c),
            second_transpose_seconds: rec.span_seconds(Phase::SecondTranspose),
            total_seconds: t1.saturating_sub(t0).as_secs_f64(),
        };
        Ok(Execution {
            output: bufs.into_output(p),
            breakdown,
            trace: rec.into_trace(),
        })
    }
}

#[derive(Clone, Copy)]
enum Dataflow {
    Naive,
    Opt,
}

/// `a`: r2c output, `rows x half`. `b`: transposed, `half x rows`.
/// `c`: final, `rows x half`. The strided pass works on `a` in place.
struct Buffers {
    a: Vec<ComplexSample>,
    b: Vec<ComplexSample>,
    c: Vec<ComplexSample>,
}

impl Buffers {
    fn new(p: &Pipeline, fused_first_step: bool) -> Self {
        let n = p.rows * p.half;
        let zero = ComplexSample::default();
        match p.second_pass {
            SecondPass::Transpose => Buffers {
                // OPT keeps r2c output in per-task buffers.
                a: if fused_first_step {
                    Vec::new()
                } else {
                    vec![zero; n]
                },
                b: vec![zero; n],
                c: vec![zero; n],
            },
            SecondPass::Strided => Buffers {
                a: vec![zero; n],
                b: Vec::new(),
                c: Vec::new(),
            },
        }
    }

    fn into_output(self, p: &Pipeline) -> ComplexGrid {
        let data = match p.second_pass {
            SecondPass::Transpose => self.c,
            SecondPass::Strided => self.a,
        };
        ComplexGrid::from_vec(p.rows, p.half, data).expect("buffer sized from pipeline")
    }
}

/// State shared by every task of one execution.
///
/// Write discipline: the r2c step writes disjoint rows of `a`; the first
/// transpose writes disjoint rows of `b` (OPT: disjoint column blocks) and
/// reads `a` only after every r2c task finished; the c2c step rewrites
/// disjoint rows of `b` (strided: disjoint columns of `a`); the second
/// transpose writes disjoint rows of `c` and reads `b` only after every c2c
/// task finished. Those orderings come from barriers or from the pending
/// counters below.
struct Ctx<'a> {
    p: &'a Pipeline,
    input: &'a RealGrid,
    a: SharedBuf<'a, ComplexSample>,
    b: SharedBuf<'a, ComplexSample>,
    c: SharedBuf<'a, ComplexSample>,
    rec: &'a Recorder,
    pending_first: AtomicUsize,
    pending_third: AtomicUsize,
    chunk: usize,
    col_chunk: usize,
}

impl<'a> Ctx<'a> {
    fn new(p: &'a Pipeline, input: &'a RealGrid, bufs: &'a mut Buffers, rec: &'a Recorder) -> Self {
        Ctx {
            p,
            input,
            a: SharedBuf::new(&mut bufs.a),
            b: SharedBuf::new(&mut bufs.b),
            c: SharedBuf::new(&mut bufs.c),
            rec,
            pending_first: AtomicUsize::new(0),
            pending_third: AtomicUsize::new(0),
            chunk: 1,
            col_chunk: 1,
        }
    }

    fn r2c_rows(&self, rows: Range<usize>) {
        let half = self.p.half;
        for i in rows {
            // SAFETY: row i of `a` belongs to this task alone.
            let out = unsafe { self.a.slice_mut(i * half..(i + 1) * half) };
            self.p.r2c_row(self.input.row(i), out);
        }
    }

    fn transpose_into_b(&self, b_rows: Range<usize>) {
        let (rows, half) = (self.p.rows, self.p.half);
        // SAFETY: every r2c task has finished; nothing writes `a` any more.
        let a = unsafe { self.a.slice(0..rows * half) };
        for r in b_rows {
            // SAFETY: row r of `b` belongs to this task alone.
            let out = unsafe { self.b.slice_mut(r * rows..(r + 1) * rows) };
            for (i, slot) in out.iter_mut().enumerate() {
                *slot = a[i * half + r];
            }
        }
    }

    fn c2c_b_rows(&self, b_rows: Range<usize>) {
        let rows = self.p.rows;
        for r in b_rows {
            // SAFETY: row r of `b` belongs to this task alone.
            let row = unsafe { self.b.slice_mut(r * rows..(r + 1) * rows) };
            self.p.c2c_row(row);
        }
    }

    fn transpose_into_c(&self, c_rows: Range<usize>) {
        let (rows, half) = (self.p.rows, self.p.half);
        // SAFETY: every c2c task has finished; nothing writes `b` any more.
        let b = unsafe { self.b.slice(0..rows * half) };
        for i in c_rows {
            // SAFETY: row i of `c` belongs to this task alone.
            let out = unsafe { self.c.slice_mut(i * half..(i + 1) * half) };
            for (r, slot) in out.iter_mut().enumerate() {
                *slot = b[r * rows + i];
            }
        }
    }

    fn transpose_into_c_blocked(&self, c_rows: Range<usize>) {
        let (rows, half) = (self.p.rows, self.p.half);
        // SAFETY: as in `transpose_into_c`.
        let b = unsafe { self.b.slice(0..rows * half) };
        let out = unsafe { self.c.slice_mut(c_rows.start * half..c_rows.end * half) };
        blocked_tile_copy(
            b,
            rows,
            0..half,
            c_rows.clone(),
            out,
            half,
            c_rows.start,
            self.p.block,
        );
    }

    fn strided_columns(&self, cols: Range<usize>) {
        let (rows, half) = (self.p.rows, self.p.half);
        with_scratch(rows, |column, scratch| {
            for j in cols {
                // SAFETY: column j of `a` belongs to this task alone, and all
                // r2c tasks have finished.
                for (i, slot) in column.iter_mut().enumerate() {
                    *slot = unsafe { self.a.read(i * half + j) };
                }
                self.p.c2c.process(column, scratch);
                for (i, v) in column.iter().enumerate() {
                    unsafe { self.a.write(i * half + j, *v) };
                }
            }
        });
    }

    /// OPT's fused task: r2c a chunk of rows into a private buffer, then
    /// scatter it transposed into the matching columns of `b`.
    fn opt_r2c_scatter(&self, rows: Range<usize>) {
        let (n, half) = (self.p.rows, self.p.half);
        let mut local = vec![ComplexSample::default(); rows.len() * half];
        self.rec.task(Phase::R2c, rows.clone(), || {
            for (i, out) in rows.clone().zip(local.chunks_exact_mut(half)) {
                self.p.r2c_row(self.input.row(i), out);
            }
        });
        self.rec.task(Phase::FirstTranspose, rows.clone(), || {
            assert!(self.b.len() >= half * n);
            // SAFETY: writes b[r][rows.start + i'] for r < half, i' < chunk;
            // those columns of `b` belong to this task alone.
            unsafe {
                blocked_tile_copy_raw(
                    &local,
                    half,
                    0..rows.len(),
                    0..half,
                    self.b.as_ptr().add(rows.start),
                    n,
                    0,
                    self.p.block,
                );
            }
        });
    }
}

fn naive_r2c<'s>(s: &Scope<'s>, ctx: &'s Ctx<'_>, i: usize) {
    ctx.rec
        .task(Phase::R2c, i..i + 1, || ctx.r2c_rows(i..i + 1));
    if ctx.pending_first.fetch_sub(1, Ordering::AcqRel) != 1 {
        return;
    }
    // Last producer: every transposed row (or column) may now start.
    for r in 0..ctx.p.half {
        match ctx.p.second_pass {
            SecondPass::Transpose => s.spawn(move |s| naive_transpose(s, ctx, r)),
            SecondPass::Strided => s.spawn(move |_| {
                ctx.rec
                    .task(Phase::C2c, r..r + 1, || ctx.strided_columns(r..r + 1))
            }),
        }
    }
}

fn naive_transpose<'s>(s: &Scope<'s>, ctx: &'s Ctx<'_>, r: usize) {
    ctx.rec.task(Phase::FirstTranspose, r..r + 1, || {
        ctx.transpose_into_b(r..r + 1)
    });
    s.spawn(move |s| naive_c2c(s, ctx, r));
}

fn naive_c2c<'s>(s: &Scope<'s>, ctx: &'s Ctx<'_>, r: usize) {
    ctx.rec
        .task(Phase::C2c, r..r + 1, || ctx.c2c_b_rows(r..r + 1));
    if ctx.pending_third.fetch_sub(1, Ordering::AcqRel) != 1 {
        return;
    }
    for i in 0..ctx.p.rows {
        s.spawn(move |_| {
            ctx.rec.task(Phase::SecondTranspose, i..i + 1, || {
                ctx.transpose_into_c(i..i + 1)
            })
        });
    }
}

fn opt_first<'s>(s: &Scope<'s>, ctx: &'s Ctx<'_>, rows: Range<usize>) {
    match ctx.p.second_pass {
        SecondPass::Transpose => ctx.opt_r2c_scatter(rows),
        SecondPass::Strided => ctx
            .rec
            .task(Phase::R2c, rows.clone(), || ctx.r2c_rows(rows)),
    }
    if ctx.pending_first.fetch_sub(1, Ordering::AcqRel) != 1 {
        return;
    }
    let (half, step) = (ctx.p.half, ctx.col_chunk);
    for start in (0..half).step_by(step) {
        let range = start..(start + step).min(half);
        s.spawn(move |s| opt_third(s, ctx, range));
    }
}

fn opt_third<'s>(s: &Scope<'s>, ctx: &'s Ctx<'_>, range: Range<usize>) {
    match ctx.p.second_pass {
        SecondPass::Transpose => {
            ctx.rec
                .task(Phase::C2c, range.clone(), || ctx.c2c_b_rows(range));
        }
        SecondPass::Strided => {
            ctx.rec
                .task(Phase::C2c, range.clone(), || ctx.strided_columns(range));
            return;
        }
    }
    if ctx.pending_third.fetch_sub(1, Ordering::AcqRel) != 1 {
        return;
    }
    let (rows, step) = (ctx.p.rows, ctx.chunk);
    for start in (0..rows).step_by(step) {
        let range = start..(start + step).min(rows);
        s.spawn(move |_| {
            ctx.rec.task(Phase::SecondTranspose, range.clone(), || {
                ctx.transpose_into_c_blocked(range)
            })
        });
    }
}
