//! Multi-step operation: dispatch follows the renewable profile every
//! `dispatch_every` steps while settings are re-optimized only every
//! `settings_every` steps.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::alternate::{alternate_from, realize, total_clearing_time, AlternateConfig, StopReason};
use super::dispatch::{evaluate, solve_dispatch, DispatchLimits};
use super::settings::{baseline_settings, current_settings};
use crate::curves::RecloserSettings;
use crate::error::{Error, Result};
use crate::format::Cadence;
use crate::study::Study;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    /// Settings and dispatch both re-solved.
    Settings,
    /// Dispatch re-solved under frozen settings.
    Dispatch,
    /// Nothing scheduled; previous state carried.
    Hold,
    /// The scheduled solve failed; previous feasible state carried.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub step: usize,
    pub available: BTreeMap<usize, f64>,
    pub output: BTreeMap<usize, f64>,
    pub settings: BTreeMap<String, RecloserSettings>,
    pub total_clearing_time: f64,
    pub worst_slack: f64,
    pub status: StepStatus,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub steps: Vec<Step>,
}

impl TimeSeries {
    pub fn degraded(&self) -> bool {
        self.steps.iter().any(|s| s.status == StepStatus::Infeasible)
    }
}

/// Runs the profile. Units missing from a profile row keep the network's
/// output as their availability.
pub fn run_timeseries(
    study: &Study,
    profile: &[BTreeMap<usize, f64>],
    cadence: Cadence,
    cfg: &AlternateConfig,
) -> Result<TimeSeries> {
    if profile.is_empty() {
        return Err(Error::InvalidArgument("profile has no steps".into()));
    }
    if cadence.dispatch_every == 0 || cadence.settings_every % cadence.dispatch_every != 0 {
        return Err(Error::InvalidArgument(format!(
            "settings_every ({}) must be a positive multiple of dispatch_every ({})",
            cadence.settings_every, cadence.dispatch_every
        )));
    }
    let base_limits = DispatchLimits::from_network(&study.network);
    let mut settings = if cfg.baseline_start {
        baseline_settings(study)?.settings
    } else {
        current_settings(&study.network)
    };
    let mut output: BTreeMap<usize, f64> = BTreeMap::new();
    let mut steps = Vec::with_capacity(profile.len());

    for (t, row) in profile.iter().enumerate() {
        let mut limits = base_limits.with_available(row);
        // Settings solved now hold until the next settings step, so they
        // must tolerate the least non-curtailable output in that window.
        if t % cadence.settings_every == 0 {
            for later in &profile[t..profile.len().min(t + cadence.settings_every)] {
                for (id, p) in later {
                    if let Some(f) = limits.floor.get_mut(id) {
                        *f = f.min(*p);
                    }
                }
            }
        }
        let mut status = StepStatus::Hold;
        let mut diagnostic = None;
        if t % cadence.settings_every == 0 {
            let start = if output.is_empty() { limits.available.clone() } else { output.clone() };
            match alternate_from(study, &limits, cfg, settings.clone(), start) {
                Ok(trace) if trace.stop_reason != StopReason::Infeasible => {
                    let last = trace.last_feasible().unwrap_or(trace.last());
                    settings = last.settings.clone();
                    output = last.output.clone();
                    status = StepStatus::Settings;
                    if !trace.converged {
                        diagnostic = trace.diagnostic.clone();
                    }
                }
                Ok(trace) => {
                    status = StepStatus::Infeasible;
                    diagnostic = trace.diagnostic;
                }
                Err(e @ Error::Infeasible(_)) => {
                    status = StepStatus::Infeasible;
                    diagnostic = Some(e.to_string());
                }
                Err(e) => return Err(e),
            }
        } else if t % cadence.dispatch_every == 0 {
            let under = realize(study, &limits, &settings, &output)?;
            match solve_dispatch(&under, &limits, cfg.dispatch_tolerance) {
                Ok(d) => {
                    output = d.output;
                    status = StepStatus::Dispatch;
                }
                Err(e @ Error::Infeasible(_)) => {
                    status = StepStatus::Infeasible;
                    diagnostic = Some(e.to_string());
                }
                Err(e) => return Err(e),
            }
        }
        if output.is_empty() {
            output = study.network.dg_units.iter().map(|g| (g.id, 0.0)).collect();
        }

        let s = realize(study, &limits, &settings, &output)?;
        let eval = evaluate(&s, &limits, &output)?;
        let (total_clearing_time, worst_slack) = match &eval.state {
            Some(state) => (
                total_clearing_time(&s.network, state),
                eval.constraints.iter().map(|c| c.slack).fold(f64::INFINITY, f64::min),
            ),
            None => (f64::NAN, f64::NAN),
        };
        steps.push(Step {
            step: t,
            available: limits.available.clone(),
            output: output.clone(),
            settings: settings.clone(),
            total_clearing_time,
            worst_slack,
            status,
            diagnostic,
        });
    }
    Ok(TimeSeries { steps })
}
