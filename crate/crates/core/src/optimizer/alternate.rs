//! Alternating optimization: dispatch under the latest settings, then
//! settings under the resulting fault state, until neither moves.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::dispatch::{evaluate, solve_dispatch, with_outputs, DispatchLimits, DEFAULT_DISPATCH_TOLERANCE};
use super::settings::{apply_settings, baseline_settings, current_settings, solve_settings_held};
use crate::curves::RecloserSettings;
use crate::error::{Error, Result};
use crate::grid::Network;
use crate::study::{FaultState, Study};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlternateConfig {
    /// Stopping tolerance on both objectives and on every slack.
    pub tolerance: f64,
    pub max_iters: usize,
    pub dispatch_tolerance: f64,
    /// Start from settings coordinated without DG instead of the
    /// network's stored settings.
    pub baseline_start: bool,
}

impl Default for AlternateConfig {
    fn default() -> Self {
        AlternateConfig { tolerance: 1e-4, max_iters: 20, dispatch_tolerance: DEFAULT_DISPATCH_TOLERANCE, baseline_start: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    SlackFixedPoint,
    MaxIters,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultSummary {
    /// Largest fault current per recloser, per-unit.
    pub recloser_max: BTreeMap<String, f64>,
    /// DG fault current per coordination pair, per-unit.
    pub disparity: BTreeMap<String, f64>,
}

impl FaultSummary {
    fn new(study: &Study, state: &FaultState) -> Result<Self> {
        Ok(FaultSummary {
            recloser_max: state.recloser_ranges.iter().map(|(id, r)| (id.clone(), r.max)).collect(),
            disparity: study.pairs(state)?.into_iter().map(|p| (p.name, p.disparity)).collect(),
        })
    }
}

/// State after iteration `k`: dispatch solved under settings `k − 1`, then
/// settings solved under that dispatch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub k: usize,
    pub output: BTreeMap<usize, f64>,
    pub settings: BTreeMap<String, RecloserSettings>,
    pub obj_clearing_time: f64,
    pub obj_dg_output: f64,
    pub slacks: BTreeMap<String, f64>,
    pub feasible: bool,
    pub fault_summary: FaultSummary,
}

impl Iterate {
    pub fn worst_slack(&self) -> f64 {
        self.slacks.values().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub iterations: Vec<Iterate>,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub diagnostic: Option<String>,
}

impl OptimizationTrace {
    pub fn last(&self) -> &Iterate {
        self.iterations.last().expect("trace holds the starting point")
    }

    /// Last iterate that satisfies every constraint.
    pub fn last_feasible(&self) -> Option<&Iterate> {
        self.iterations.iter().rev().find(|it| it.feasible)
    }
}

/// Sum over reclosers of the first-curve time at the largest zone fault.
pub fn total_clearing_time(network: &Network, state: &FaultState) -> f64 {
    network
        .reclosers
        .iter()
        .filter_map(|r| {
            let c = r.sequence.first_curve()?;
            Some(c.time(state.recloser_ranges[&r.id].max).or_infinite())
        })
        .sum()
}

/// The network with both settings and outputs written in.
pub fn realize(
    study: &Study,
    limits: &DispatchLimits,
    settings: &BTreeMap<String, RecloserSettings>,
    output: &BTreeMap<usize, f64>,
) -> Result<Study> {
    let mut net = with_outputs(&study.network, limits, output);
    apply_settings(&mut net, settings)?;
    Ok(study.with_network(net))
}

fn record(
    k: usize,
    study: &Study,
    limits: &DispatchLimits,
    settings: &BTreeMap<String, RecloserSettings>,
    output: &BTreeMap<usize, f64>,
) -> Result<Iterate> {
    let s = realize(study, limits, settings, output)?;
    let eval = evaluate(&s, limits, output)?;
    let state = eval.state.ok_or(Error::NotConverged)?;
    Ok(Iterate {
        k,
        output: output.clone(),
        settings: settings.clone(),
        obj_clearing_time: total_clearing_time(&s.network, &state),
        obj_dg_output: output.values().fold(0.0, |a, b| a + b),
        slacks: eval.constraints.iter().map(|c| (c.pair.clone(), c.slack)).collect(),
        feasible: eval.feasible,
        fault_summary: FaultSummary::new(&s, &state)?,
    })
}

fn close(a: &Iterate, b: &Iterate, tol: f64) -> bool {
    (a.obj_clearing_time - b.obj_clearing_time).abs() < tol
        && (a.obj_dg_output - b.obj_dg_output).abs() < tol
        && a.slacks.len() == b.slacks.len()
        && a.slacks.iter().all(|(name, s)| b.slacks.get(name).is_some_and(|t| (s - t).abs() < tol || s == t))
}

/// Runs the alternation from the starting point `(·)⁰`: baseline or
/// stored settings, and every unit at its availability.
pub fn alternate(study: &Study, limits: &DispatchLimits, cfg: &AlternateConfig) -> Result<OptimizationTrace> {
    let settings0 = if cfg.baseline_start {
        baseline_settings(study)?.settings
    } else {
        current_settings(&study.network)
    };
    let output0: BTreeMap<usize, f64> =
        study.network.dg_units.iter().map(|g| (g.id, limits.available.get(&g.id).copied().unwrap_or(0.0))).collect();
    alternate_from(study, limits, cfg, settings0, output0)
}

pub fn alternate_from(
    study: &Study,
    limits: &DispatchLimits,
    cfg: &AlternateConfig,
    settings0: BTreeMap<String, RecloserSettings>,
    output0: BTreeMap<usize, f64>,
) -> Result<OptimizationTrace> {
    let baseline = baseline_settings(study)?;
    let mut restarted = false;
    let mut iterations = vec![record(0, study, limits, &settings0, &output0)?];
    let stop = |iterations, reason, diagnostic: Option<String>| {
        Ok(OptimizationTrace { iterations, converged: reason == StopReason::SlackFixedPoint, stop_reason: reason, diagnostic })
    };

    let mut start = None;
    for k in 1..=cfg.max_iters {
        let prev = iterations.last().expect("nonempty");
        let (settings_in, output_in) = start.take().unwrap_or_else(|| (prev.settings.clone(), prev.output.clone()));
        let under = realize(study, limits, &settings_in, &output_in)?;
        let dispatch = match solve_dispatch(&under, limits, cfg.dispatch_tolerance) {
            Ok(d) => d,
            Err(Error::Infeasible(why)) => return stop(iterations, StopReason::Infeasible, Some(format!("dispatch: {why}"))),
            Err(e) => return Err(e),
        };
        let dispatched = realize(study, limits, &settings_in, &dispatch.output)?;
        let state = dispatched.fault_state()?;
        let settings = match solve_settings_held(&dispatched, &state, &limits.held(&study.network)) {
            Ok(s) => s.settings,
            // Settings carried in from elsewhere may rely on more DG than
            // the limits guarantee; the baseline never does.
            Err(Error::Infeasible(_)) if !restarted && settings_in != baseline.settings => {
                restarted = true;
                start = Some((baseline.settings.clone(), output_in));
                continue;
            }
            Err(Error::Infeasible(why)) => return stop(iterations, StopReason::Infeasible, Some(format!("settings: {why}"))),
            Err(e) => return Err(e),
        };
        let it = record(k, study, limits, &settings, &dispatch.output)?;
        let done = close(&it, iterations.last().expect("nonempty"), cfg.tolerance);
        let cycle = iterations[..iterations.len() - 1].iter().find(|old| close(&it, old, cfg.tolerance)).map(|old| old.k);
        iterations.push(it);
        if done {
            return stop(iterations, StopReason::SlackFixedPoint, None);
        }
        if let Some(j) = cycle {
            return stop(iterations, StopReason::MaxIters, Some(format!("iterate {k} repeats iterate {j}")));
        }
    }
    let n = cfg.max_iters;
    stop(iterations, StopReason::MaxIters, Some(format!("no fixed point within {n} iterations")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn zero_dg_converges_at_once_to_baseline() {
        let mut study = fixtures::five_node().unwrap();
        study.network.dg_units.clear();
        let limits = DispatchLimits::from_network(&study.network);
        let trace = alternate(&study, &limits, &AlternateConfig::default()).unwrap();
        assert_eq!(trace.stop_reason, StopReason::SlackFixedPoint);
        assert_eq!(trace.iterations.len(), 2);
        let base = baseline_settings(&study).unwrap();
        for (id, s) in &trace.last().settings {
            assert!((s.time_dial - base.settings[id].time_dial).abs() < 1e-7);
        }
        assert!(trace.last().output.is_empty());
    }

    #[test]
    fn five_node_iterates_stay_feasible() {
        let study = fixtures::five_node().unwrap();
        let limits = DispatchLimits::from_network(&study.network);
        let trace = alternate(&study, &limits, &AlternateConfig::default()).unwrap();
        assert!(trace.converged, "{:?}", trace.diagnostic);
        for it in &trace.iterations[1..] {
            assert!(it.feasible, "iterate {}", it.k);
        }
        for w in trace.iterations[1..].windows(2) {
            assert!(w[1].obj_dg_output >= w[0].obj_dg_output - 1e-9);
        }
    }
}
