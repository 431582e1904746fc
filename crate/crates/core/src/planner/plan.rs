use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::engine::StrategyId;
use crate::error::{require_pow2, FftError, Result};
use crate::kernel::DEFAULT_BASE_CASE;
use crate::layout::DEFAULT_TRANSPOSE_BLOCK;

pub const BASE_CASE_CANDIDATES: [usize; 5] = [4, 8, 16, 32, 64];
pub const TRANSPOSE_BLOCK_CANDIDATES: [usize; 4] = [16, 32, 64, 128];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanningMode {
    Estimate,
    Measure,
}

impl PlanningMode {
    pub fn name(self) -> &'static str {
        match self {
            PlanningMode::Estimate => "estimate",
            PlanningMode::Measure => "measure",
        }
    }
}

impl fmt::Display for PlanningMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlanningMode {
    type Err = FftError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "estimate" => Ok(PlanningMode::Estimate),
            "measure" => Ok(PlanningMode::Measure),
            other => Err(FftError::invalid(format!(
                "unknown planning mode `{other}`"
            ))),
        }
    }
}

/// How the column transforms are reached after the row pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondPass {
    /// Transpose, transform rows, transpose back.
    Transpose,
    /// Transform columns in place through strided offsets.
    Strided,
}

impl SecondPass {
    pub fn name(self) -> &'static str {
        match self {
            SecondPass::Transpose => "transpose",
            SecondPass::Strided => "strided",
        }
    }
}

impl fmt::Display for SecondPass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SecondPass {
    type Err = FftError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transpose" => Ok(SecondPass::Transpose),
            "strided" => Ok(SecondPass::Strided),
            other => Err(FftError::invalid(format!("unknown second pass `{other}`"))),
        }
    }
}

/// One point of the tuning space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Candidate {
    pub base_case: usize,
    pub transpose_block: usize,
    pub second_pass: SecondPass,
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "base={} block={} pass={}",
            self.base_case, self.transpose_block, self.second_pass
        )
    }
}

impl Default for Candidate {
    fn default() -> Self {
        Candidate {
            base_case: DEFAULT_BASE_CASE,
            transpose_block: DEFAULT_TRANSPOSE_BLOCK,
            second_pass: SecondPass::Transpose,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub candidate: Candidate,
    pub median_seconds: f64,
}

/// A frozen execution recipe for one transform shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub rows: usize,
    pub cols: usize,
    pub workers: usize,
    pub strategy: StrategyId,
    pub base_case: usize,
    pub transpose_block: usize,
    pub second_pass: SecondPass,
    pub mode: PlanningMode,
    /// Timed candidates; empty for estimated plans.
    pub measurements: Vec<Measurement>,
}

impl Plan {
    /// Default parameters, no planning performed.
    pub fn new(rows: usize, cols: usize, workers: usize, strategy: StrategyId) -> Self {
        Self::from_candidate(rows, cols, workers, strategy, Candidate::default())
    }

    pub fn from_candidate(
        rows: usize,
        cols: usize,
        workers: usize,
        strategy: StrategyId,
        candidate: Candidate,
    ) -> Self {
        Plan {
            rows,
            cols,
            workers,
            strategy,
            base_case: candidate.base_case,
            transpose_block: candidate.transpose_block,
            second_pass: candidate.second_pass,
            mode: PlanningMode::Estimate,
            measurements: Vec::new(),
        }
    }

    pub fn candidate(&self) -> Candidate {
        Candidate {
            base_case: self.base_case,
            transpose_block: self.transpose_block,
            second_pass: self.second_pass,
        }
    }

    pub fn with_strategy(mut self, strategy: StrategyId) -> Self {
        self.strategy = strategy;
        self
    }

    pub fn with_second_pass(mut self, second_pass: SecondPass) -> Self {
        self.second_pass = second_pass;
        self
    }

    pub fn validate(&self) -> Result<()> {
        validate_dims(self.rows, self.cols, self.workers)?;
        let (lo, hi) = (BASE_CASE_CANDIDATES[0], BASE_CASE_CANDIDATES[4]);
        if !self.base_case.is_power_of_two() || !(lo..=hi).contains(&self.base_case) {
            return Err(FftError::invalid(format!(
                "base case {} outside power-of-two range [{lo}, {hi}]",
                self.base_case
            )));
        }
        let (lo, hi) = (TRANSPOSE_BLOCK_CANDIDATES[0], TRANSPOSE_BLOCK_CANDIDATES[3]);
        if !(lo..=hi).contains(&self.transpose_block) {
            return Err(FftError::invalid(format!(
                "transpose block {} outside [{lo}, {hi}]",
                self.transpose_block
            )));
        }
        Ok(())
    }

    /// The measurement whose candidate this plan selected.
    pub fn chosen_measurement(&self) -> Option<&Measurement> {
        let chosen = self.candidate();
        self.measurements.iter().find(|m| m.candidate == chosen)
    }
}

pub(crate) fn validate_dims(rows: usize, cols: usize, workers: usize) -> Result<()> {
    require_pow2("rows", rows)?;
    require_pow2("cols", cols)?;
    if cols < 2 {
        return Err(FftError::UnsupportedSize {
            what: "cols",
            size: cols,
        });
    }
    if workers == 0 {
        return Err(FftError::invalid("workers must be at least 1"));
    }
    Ok(())
}
