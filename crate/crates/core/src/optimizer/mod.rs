//! Recloser settings, DG dispatch, and the alternation between them.

pub mod alternate;
pub mod dispatch;
pub mod settings;
pub mod timeseries;

pub use settings::{apply_settings, baseline_settings, current_settings, solve_settings, solve_settings_held, SettingsSolution};
pub use dispatch::{solve_dispatch, DispatchLimits, DispatchSolution};
pub use alternate::{alternate, alternate_from, AlternateConfig, Iterate, OptimizationTrace, StopReason};
pub use timeseries::{run_timeseries, Step, StepStatus, TimeSeries};
