use log::warn;
use planarfft::testing::{dft2d_oracle, max_abs_error, random_real_grid};
use planarfft::{
    fft2d_distributed_local, plan_estimate, ComplexGrid, RealGrid, Runner, StrategyId,
};

use crate::config::{BenchConfig, Point, Target};
use crate::{BenchError, Result};

pub const VERIFY_SIZE: usize = 32;
pub const VERIFY_TOLERANCE: f64 = 1e-9;
const VERIFY_SEED: u64 = 0x7e57;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    /// Max absolute error against the oracle for each verified point.
    pub points: Vec<(Point, f64)>,
    pub max_abs_error: f64,
    pub tolerance: f64,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.max_abs_error <= self.tolerance
    }
}

/// Max absolute error of `engine` against the brute-force 2D transform of a
/// seeded 32x32 grid.
pub fn verify_with<F>(engine: F) -> planarfft::Result<f64>
where
    F: FnOnce(&RealGrid) -> planarfft::Result<ComplexGrid>,
{
    let input = random_real_grid(VERIFY_SIZE, VERIFY_SIZE, VERIFY_SEED);
    let oracle = dft2d_oracle(&input);
    let out = engine(&input)?;
    if out.dims() != oracle.dims() {
        return Ok(f64::INFINITY);
    }
    Ok(max_abs_error(out.as_slice(), oracle.as_slice()))
}

/// Verifies every point of `cfg` at 32x32. Rank counts are capped at what a
/// 32x32 grid can be split into.
pub fn verify_mode(cfg: &BenchConfig) -> Result<VerifyReport> {
    let n = VERIFY_SIZE;
    let mut points = Vec::new();
    for point in cfg.points() {
        let error = match point.target {
            Target::Engine(s) => verify_with(|g| {
                let plan = plan_estimate(n, n, point.threads, s)?;
                Ok(Runner::new(s, point.threads)?
                    .execute(g, &plan, &Default::default())?
                    .output)
            })?,
            Target::Distributed => verify_with(|g| {
                let plan = plan_estimate(n, n, point.threads, StrategyId::ForLoop)?;
                fft2d_distributed_local(g, &plan, point.ranks.min(n / 2), point.threads)
            })?,
        };
        points.push((point, error));
    }
    let max_abs_error = points.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(VerifyReport {
        points,
        max_abs_error,
        tolerance: VERIFY_TOLERANCE,
    })
}

/// Refuses a failed report unless `force` is set.
pub fn enforce(report: &VerifyReport, force: bool) -> Result<()> {
    if report.passed() {
        return Ok(());
    }
    if force {
        warn!(
            "verification error {:.3e} exceeds {:.0e}; continuing because of --force",
            report.max_abs_error, report.tolerance
        );
        return Ok(());
    }
    Err(BenchError::VerificationRefused {
        error: report.max_abs_error,
        tolerance: report.tolerance,
    })
}
