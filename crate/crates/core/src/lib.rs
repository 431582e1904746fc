//! Parallel 2D real-to-complex FFT.
//!
//! The crate is layered bottom-up:
//!
//! * [`kernel`]: 1D radix-2 transforms and the brute-force DFT reference.
//! * [`layout`]: row-major grids, naive and tiled transposes, strided column
//!   transforms.
//! * [`planner`]: estimated and measured plans, timers, wisdom files.
//! * [`engine`]: the four-step 2D pipeline, sequential and under four
//!   shared-memory scheduling strategies.
//! * [`dist`]: the same pipeline over slab-distributed in-process ranks with
//!   all-to-all transposes.

pub mod dist;
pub mod engine;
pub mod error;
pub mod kernel;
pub mod layout;
pub mod planner;
pub mod stats;
pub mod testing;

pub use dist::{
    distributed_transpose, fft2d_distributed, fft2d_distributed_local,
    fft2d_distributed_local_timed, fft2d_distributed_timed, local_slab, run_ranks, Communicator,
    LocalCommunicator, Slab,
};
pub use engine::{
    execute, fft2d_parallel, fft2d_sequential, Engine, ExecOptions, Execution, Phase, Runner,
    StrategyId, TaskGraphTrace, TimingBreakdown,
};
pub use error::{FftError, Result};
pub use kernel::{dft_oracle, fft_c2c, fft_r2c, twiddle_table, ComplexSample, Direction, Fft1d};
pub use layout::{
    strided_column_fft, transpose_blocked, transpose_naive, ComplexGrid, Grid, RealGrid,
};
pub use planner::{
    plan_estimate, plan_measure, timer_source, Plan, Planner, PlannerConfig, PlanningMode,
    SecondPass, TimerSource, WisdomStore,
};
