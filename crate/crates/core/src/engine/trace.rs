use std::fmt;
use std::ops::Range;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

/// The four steps of the 2D pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    R2c,
    FirstTranspose,
    C2c,
    SecondTranspose,
}

impl Phase {
    pub const ALL: [Phase; 4] = [
        Phase::R2c,
        Phase::FirstTranspose,
        Phase::C2c,
        Phase::SecondTranspose,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::R2c => "r2c",
            Phase::FirstTranspose => "transpose-1",
            Phase::C2c => "c2c",
            Phase::SecondTranspose => "transpose-2",
        })
    }
}

/// Called at the start of every task, before its start timestamp is taken.
/// Tests use it to stall chosen tasks and force a particular interleaving.
pub type TaskHook = Arc<dyn Fn(Phase, &Range<usize>) + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub task_id: usize,
    pub phase: Phase,
    /// Rows (or columns, for a strided pass) of the grid the task writes.
    pub rows: Range<usize>,
    pub worker: usize,
    pub start: Duration,
    pub end: Duration,
}

/// Log of every task an execution ran, ordered by start time.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TaskGraphTrace {
    pub events: Vec<TraceEvent>,
}

impl TaskGraphTrace {
    pub fn phase_events(&self, phase: Phase) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.phase == phase)
    }

    /// Earliest start and latest end of a phase's tasks.
    pub fn phase_span(&self, phase: Phase) -> Option<(Duration, Duration)> {
        self.phase_events(phase).fold(None, |acc, e| match acc {
            None => Some((e.start, e.end)),
            Some((s, t)) => Some((s.min(e.start), t.max(e.end))),
        })
    }

    /// True when no task of a later phase starts before every task of an
    /// earlier phase has finished.
    pub fn is_phase_monotone(&self) -> bool {
        let spans: Vec<_> = Phase::ALL
            .iter()
            .filter_map(|&p| self.phase_span(p))
            .collect();
        spans.windows(2).all(|w| w[0].1 <= w[1].0)
    }

    /// Pairs `(earlier, later)` where a later-phase task started before an
    /// earlier-phase task ended.
    pub fn cross_phase_overlaps(&self) -> Vec<(&TraceEvent, &TraceEvent)> {
        let mut out = Vec::new();
        for a in &self.events {
            for b in &self.events {
                if b.phase > a.phase && b.start < a.end {
                    out.push((a, b));
                }
            }
        }
        out
    }
}

struct PhaseSpan {
    start_ns: AtomicU64,
    end_ns: AtomicU64,
}

impl PhaseSpan {
    fn new() -> Self {
        PhaseSpan {
            start_ns: AtomicU64::new(u64::MAX),
            end_ns: AtomicU64::new(0),
        }
    }
}

pub(crate) struct Recorder {
    origin: Instant,
    keep_events: bool,
    hook: Option<TaskHook>,
    next_id: AtomicUsize,
    events: Mutex<Vec<TraceEvent>>,
    spans: [PhaseSpan; 4],
}

impl Recorder {
    pub(crate) fn new(keep_events: bool, hook: Option<TaskHook>) -> Self {
        Recorder {
            origin: Instant::now(),
            keep_events,
            hook,
            next_id: AtomicUsize::new(0),
            events: Mutex::new(Vec::new()),
            spans: [
                PhaseSpan::new(),
                PhaseSpan::new(),
                PhaseSpan::new(),
                PhaseSpan::new(),
            ],
        }
    }

    pub(crate) fn task<R>(&self, phase: Phase, rows: Range<usize>, f: impl FnOnce() -> R) -> R {
        if let Some(hook) = &self.hook {
            hook(phase, &rows);
        }
        let task_id = self.next_id.fetch_add(1, Ordering::Relaxed);
        let start = self.origin.elapsed();
        let out = f();
        let end = self.origin.elapsed();

        let span = &self.spans[phase.index()];
        span.start_ns
            .fetch_min(start.as_nanos() as u64, Ordering::Relaxed);
        span.end_ns
            .fetch_max(end.as_nanos() as u64, Ordering::Relaxed);
        if self.keep_events {
            self.events.lock().unwrap().push(TraceEvent {
                task_id,
                phase,
                rows,
                worker: rayon::current_thread_index().unwrap_or(0),
                start,
                end,
            });
        }
        out
    }

    /// Wall-clock span of a phase in seconds; zero if it never ran.
    pub(crate) fn span_seconds(&self, phase: Phase) -> f64 {
        let span = &self.spans[phase.index()];
        let start = span.start_ns.load(Ordering::Relaxed);
        let end = span.end_ns.load(Ordering::Relaxed);
        if start == u64::MAX || end < start {
            0.0
        } else {
            (end - start) as f64 * 1e-9
        }
    }

    pub(crate) fn into_trace(self) -> Option<TaskGraphTrace> {
        if !self.keep_events {
            return None;
        }
        let mut events = self.events.into_inner().unwrap();
        events.sort_by_key(|e| (e.start, e.task_id));
        Some(TaskGraphTrace { events })
    }
}
