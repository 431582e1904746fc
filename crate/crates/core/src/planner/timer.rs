use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use crate::error::{FftError, Result};

/// Candidate runtimes below this multiple of the timer resolution are flagged.
pub const RESOLUTION_FACTOR: u32 = 100;

/// A clock the planner and engines read through, so tests can script time.
pub trait TimerSource: Send + Sync {
    /// Time since an arbitrary fixed origin.
    fn now(&self) -> Result<Duration>;

    /// Smallest observable tick.
    fn resolution(&self) -> Duration;
}

/// The default source: a monotonic wall clock.
pub fn timer_source() -> Arc<dyn TimerSource> {
    Arc::new(MonotonicTimer::new())
}

#[derive(Debug, Clone)]
pub struct MonotonicTimer {
    origin: Instant,
    resolution: Duration,
}

impl MonotonicTimer {
    pub fn new() -> Self {
        MonotonicTimer {
            origin: Instant::now(),
            resolution: probe_resolution(),
        }
    }
}

impl Default for MonotonicTimer {
    fn default() -> Self {
        Self::new()
    }
}

impl TimerSource for MonotonicTimer {
    fn now(&self) -> Result<Duration> {
        Ok(self.origin.elapsed())
    }

    fn resolution(&self) -> Duration {
        self.resolution
    }
}

fn probe_resolution() -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..16 {
        let a = Instant::now();
        let mut b = Instant::now();
        while b == a {
            b = Instant::now();
        }
        best = best.min(b - a);
    }
    best.max(Duration::from_nanos(1))
}

/// Replays a fixed sequence of readings; running out is a timer failure.
#[derive(Debug)]
pub struct ScriptedTimer {
    readings: Mutex<VecDeque<Duration>>,
    resolution: Duration,
}

impl ScriptedTimer {
    pub fn new(readings: impl IntoIterator<Item = Duration>) -> Self {
        ScriptedTimer {
            readings: Mutex::new(readings.into_iter().collect()),
            resolution: Duration::from_nanos(1),
        }
    }

    pub fn from_secs(readings: &[f64]) -> Self {
        Self::new(readings.iter().map(|&s| Duration::from_secs_f64(s)))
    }

    /// Builds readings `0, d0, d0, d0 + d1, ...` so consecutive start/stop
    /// pairs observe the given elapsed times.
    pub fn from_elapsed_secs(elapsed: &[f64]) -> Self {
        let mut readings = Vec::with_capacity(elapsed.len() * 2);
        let mut t = Duration::ZERO;
        for &e in elapsed {
            readings.push(t);
            t += Duration::from_secs_f64(e);
            readings.push(t);
        }
        Self::new(readings)
    }

    pub fn with_resolution(mut self, resolution: Duration) -> Self {
        self.resolution = resolution;
        self
    }

    pub fn remaining(&self) -> usize {
        self.readings.lock().unwrap().len()
    }
}

impl TimerSource for ScriptedTimer {
    fn now(&self) -> Result<Duration> {
        self.readings
            .lock()
            .unwrap()
            .pop_front()
            .ok_or_else(|| FftError::Timer("scripted timer exhausted".into()))
    }

    fn resolution(&self) -> Duration {
        self.resolution
    }
}

/// Returns a diagnostic when `elapsed` is too short for the timer to resolve.
pub fn resolution_warning(elapsed: Duration, resolution: Duration) -> Option<String> {
    let floor = resolution * RESOLUTION_FACTOR;
    (elapsed < floor).then(|| {
        format!(
            "measured {elapsed:?} is below {RESOLUTION_FACTOR}x the timer resolution ({resolution:?}); timings are unreliable"
        )
    })
}
