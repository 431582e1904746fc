use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use planarfft::{PlanningMode, StrategyId};

use crate::{BenchError, Result};

/// What a sweep runs: one shared-memory strategy, or the slab-distributed
/// engine over in-process ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Engine(StrategyId),
    Distributed,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Engine(s) => s.name(),
            Target::Distributed => "dist",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Target {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self> {
        if s == "dist" {
            return Ok(Target::Distributed);
        }
        s.parse().map(Target::Engine).map_err(|_| {
            BenchError::config(
                "strategy",
                format!("`{s}` is not one of seq, naive, opt, sync, for_loop, dist"),
            )
        })
    }
}

/// One measured configuration of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Point {
    pub target: Target,
    pub ranks: usize,
    pub threads: usize,
}

impl Point {
    /// Hardware threads the point keeps busy.
    pub fn parallelism(&self) -> usize {
        self.ranks * self.threads
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ranks={} threads={}",
            self.target, self.ranks, self.threads
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub rows: usize,
    pub cols: usize,
    pub target: Target,
    /// Worker counts swept for shared-memory targets.
    pub workers: Vec<usize>,
    /// Rank and per-rank thread counts swept for the distributed target.
    pub ranks: Vec<usize>,
    pub threads: Vec<usize>,
    pub reps: usize,
    pub plan: PlanningMode,
    /// Timed runs per candidate when planning by measurement.
    pub plan_reps: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub wisdom: Option<PathBuf>,
    pub force: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            rows: 4096,
            cols: 4096,
            target: Target::Engine(StrategyId::ForLoop),
            workers: vec![1, 2, 4, 8],
            ranks: vec![1],
            threads: vec![1],
            reps: 10,
            plan: PlanningMode::Estimate,
            plan_reps: 3,
            seed: 0,
            out: PathBuf::from("scaling.csv"),
            wisdom: None,
            force: false,
        }
    }
}

fn check_counts(field: &'static str, values: &[usize]) -> Result<()> {
    if values.is_empty() {
        return Err(BenchError::config(field, "list is empty"));
    }
    if values.contains(&0) {
        return Err(BenchError::config(field, "counts must be at least 1"));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(BenchError::config(
            field,
            format!("{values:?} is not strictly ascending"),
        ));
    }
    Ok(())
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.rows.is_power_of_two() {
            return Err(BenchError::config(
                "rows",
                format!("{} is not a power of two", self.rows),
            ));
        }
        if !self.cols.is_power_of_two() || self.cols < 2 {
            return Err(BenchError::config(
                "cols",
                format!("{} is not a power of two >= 2", self.cols),
            ));
        }
        if self.reps == 0 {
            return Err(BenchError::config("reps", "must be at least 1"));
        }
        if self.plan_reps == 0 {
            return Err(BenchError::config("plan-reps", "must be at least 1"));
        }
        match self.target {
            Target::Engine(_) => check_counts("workers", &self.workers),
            Target::Distributed => {
                check_counts("ranks", &self.ranks)?;
                check_counts("threads", &self.threads)?;
                let limit = self.rows.min(self.cols / 2 + 1);
                match self.ranks.last() {
                    Some(&r) if r > limit => Err(BenchError::config(
                        "ranks",
                        format!(
                            "{r} ranks cannot split a {}x{} grid and its {}-wide spectrum",
                            self.rows,
                            self.cols,
                            self.cols / 2 + 1
                        ),
                    )),
                    _ => Ok(()),
                }
            }
        }
    }

    /// Sweep points in output order. SEQUENTIAL has a single point
    /// regardless of the worker list.
    pub fn points(&self) -> Vec<Point> {
        match self.target {
            Target::Engine(StrategyId::Sequential) => vec![Point {
                target: self.target,
                ranks: 1,
                threads: 1,
            }],
            Target::Engine(_) => self
                .workers
                .iter()
                .map(|&w| Point {
                    target: self.target,
                    ranks: 1,
                    threads: w,
                })
                .collect(),
            Target::Distributed => self
                .ranks
                .iter()
                .flat_map(|&r| {
                    self.threads.iter().map(move |&t| Point {
                        target: Target::Distributed,
                        ranks: r,
                        threads: t,
                    })
                })
                .collect(),
        }
    }
}

/// Output file for one planning mode when a sweep covers several:
/// `out.csv` becomes `out.estimate.csv`.
pub fn mode_output_path(out: &Path, mode: PlanningMode) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    let name = match out.extension() {
        Some(ext) => format!("{stem}.{mode}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{mode}"),
    };
    out.with_file_name(name)
}
