//! DG output dispatch under fixed recloser settings.
//!
//! Every fuse-saving pair bounds the DG fault current fed in below its
//! recloser; every other pair must keep its margin. Each unit's
//! contribution grows with its output, so feasibility is monotone along
//! any ray from zero output and bisection finds the boundary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::coordination::{check_pair, disparity_limit};
use crate::error::{Error, Result};
use crate::grid::Network;
use crate::study::{FaultState, Study};

pub const DEFAULT_DISPATCH_TOLERANCE: f64 = 1e-6;

/// Per-unit output ceilings and the fixed reactive-to-real ratio of each
/// DG unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchLimits {
    pub available: BTreeMap<usize, f64>,
    pub q_ratio: BTreeMap<usize, f64>,
    /// Lowest output each non-curtailable unit keeps while the settings
    /// solved against these limits stay in force.
    pub floor: BTreeMap<usize, f64>,
}

impl DispatchLimits {
    /// Ceilings equal to the network's present outputs.
    pub fn from_network(network: &Network) -> Self {
        DispatchLimits {
            available: network.dg_units.iter().map(|g| (g.id, g.p_out)).collect(),
            q_ratio: network.dg_units.iter().map(|g| (g.id, g.q_ratio())).collect(),
            floor: network.dg_units.iter().map(|g| (g.id, g.p_out)).collect(),
        }
    }

    /// New ceilings; floors follow them.
    pub fn with_available(&self, available: &BTreeMap<usize, f64>) -> Self {
        let mut out = self.clone();
        for (id, p) in available {
            out.available.insert(*id, *p);
            out.floor.insert(*id, *p);
        }
        out
    }

    /// Outputs recloser pairs are checked at when settings are solved:
    /// curtailable units idle, the rest at their floor.
    pub fn held(&self, network: &Network) -> BTreeMap<usize, f64> {
        network
            .dg_units
            .iter()
            .map(|g| {
                let p = if g.curtailable { 0.0 } else { self.floor.get(&g.id).copied().unwrap_or(g.p_out) };
                (g.id, p)
            })
            .collect()
    }
}

/// Writes outputs into a copy of the network, holding each unit's power
/// factor.
pub fn with_outputs(network: &Network, limits: &DispatchLimits, output: &BTreeMap<usize, f64>) -> Network {
    let mut net = network.clone();
    for g in &mut net.dg_units {
        if let Some(&p) = output.get(&g.id) {
            g.p_out = p;
            g.q_out = p * limits.q_ratio.get(&g.id).copied().unwrap_or(0.0);
        }
    }
    net
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConstraintKind {
    /// DG fault current below the recloser against its limit, in per-unit.
    Disparity,
    /// Worst coordination margin against the required margin, in seconds.
    Margin,
}

/// One dispatch constraint at a trial output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchConstraint {
    pub pair: String,
    pub kind: ConstraintKind,
    pub slack: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub feasible: bool,
    pub constraints: Vec<DispatchConstraint>,
    pub state: Option<FaultState>,
}

fn infeasible() -> Evaluation {
    Evaluation { feasible: false, constraints: Vec::new(), state: None }
}

/// Checks one trial output. A power flow that fails to converge, or a
/// pair whose range collapses, counts as infeasible.
pub fn evaluate(study: &Study, limits: &DispatchLimits, output: &BTreeMap<usize, f64>) -> Result<Evaluation> {
    let trial = study.with_network(with_outputs(&study.network, limits, output));
    let state = match trial.fault_state() {
        Ok(s) => s,
        Err(Error::NotConverged | Error::Diverged { .. } | Error::NonPositiveVoltage(_)) => return Ok(infeasible()),
        Err(e) => return Err(e),
    };
    let cfg = &trial.config.sweep;
    let mut constraints = Vec::new();
    for pair in trial.pairs(&state)? {
        let c = if pair.primary_downstream {
            let r = match check_pair(&pair, cfg) {
                Ok(r) => r,
                Err(Error::DegenerateRange { .. }) => return Ok(infeasible()),
                Err(e) => return Err(e),
            };
            DispatchConstraint {
                pair: pair.name.clone(),
                kind: ConstraintKind::Margin,
                slack: r.worst_margin - pair.margin_required,
                satisfied: r.failure_mode.is_none(),
            }
        } else {
            let limit = match disparity_limit(&pair, pair.margin_required, cfg) {
                Ok(l) => l,
                Err(Error::UnreachableMargin { .. }) => f64::NEG_INFINITY,
                Err(Error::DegenerateRange { .. }) => return Ok(infeasible()),
                Err(e) => return Err(e),
            };
            let slack = limit - pair.disparity;
            DispatchConstraint { pair: pair.name.clone(), kind: ConstraintKind::Disparity, slack, satisfied: slack >= 0.0 }
        };
        constraints.push(c);
    }
    let feasible = constraints.iter().all(|c| c.satisfied);
    Ok(Evaluation { feasible, constraints, state: Some(state) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution {
    pub output: BTreeMap<usize, f64>,
    pub total: f64,
    /// Common curtailment factor before per-unit restoration.
    pub scale: f64,
    pub constraints: Vec<DispatchConstraint>,
}

fn bisect(mut lo: f64, mut hi: f64, tolerance: f64, mut ok: impl FnMut(f64) -> Result<bool>) -> Result<f64> {
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Maximizes total DG output at the study's settings. Curtailable units
/// move in `[0, available]`; the rest stay at their availability.
///
/// Disparity constraints tighten as output grows while margin-held pairs
/// (recloser pairs, fuse-primary pairs) only gain from it. A common
/// curtailment factor is bisected against the disparity constraints, the
/// margin-held pairs are checked at that point, and units are then
/// restored one at a time from the feeder tail.
pub fn solve_dispatch(study: &Study, limits: &DispatchLimits, tolerance: f64) -> Result<DispatchSolution> {
    let net = &study.network;
    let avail = |id: usize| limits.available.get(&id).copied().unwrap_or(0.0);
    let curtailable: Vec<usize> = net.dg_units.iter().filter(|g| g.curtailable).map(|g| g.id).collect();
    let scaled = |lambda: f64| -> BTreeMap<usize, f64> {
        net.dg_units
            .iter()
            .map(|g| (g.id, if g.curtailable { lambda * avail(g.id) } else { avail(g.id) }))
            .collect()
    };
    let eval = |out: &BTreeMap<usize, f64>| evaluate(study, limits, out);
    let disparity_ok = |e: &Evaluation| {
        e.state.is_some() && e.constraints.iter().filter(|c| c.kind == ConstraintKind::Disparity).all(|c| c.satisfied)
    };
    let first_violation = |e: &Evaluation, kind: ConstraintKind| {
        e.constraints
            .iter()
            .find(|c| c.kind == kind && !c.satisfied)
            .map(|c| format!("{} (slack {:.6})", c.pair, c.slack))
            .unwrap_or_else(|| "power flow does not converge".into())
    };

    let (scale, mut output) = if disparity_ok(&eval(&scaled(1.0))?) {
        (1.0, scaled(1.0))
    } else {
        let at_floor = eval(&scaled(0.0))?;
        if !disparity_ok(&at_floor) {
            return Err(Error::Infeasible(format!(
                "infeasible with all curtailable DG at zero output: {}",
                first_violation(&at_floor, ConstraintKind::Disparity)
            )));
        }
        let peak = curtailable.iter().map(|&id| avail(id)).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let lambda = bisect(0.0, 1.0, tolerance / peak, |l| Ok(disparity_ok(&eval(&scaled(l))?)))?;
        (lambda, scaled(lambda))
    };
    let at_scale = eval(&output)?;
    if !at_scale.feasible {
        return Err(Error::Infeasible(format!(
            "largest output the fuse pairs allow still violates {}",
            first_violation(&at_scale, ConstraintKind::Margin)
        )));
    }
    let feasible = |out: &BTreeMap<usize, f64>| -> Result<bool> { Ok(eval(out)?.feasible) };

    // Restore units one at a time, feeder tail first.
    let mut order: Vec<_> = net.dg_units.iter().filter(|g| g.curtailable).map(|g| (g.tap, g.id)).collect();
    order.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    if scale < 1.0 {
        for (_, id) in order {
            let (lo, hi) = (output[&id], avail(id));
            if hi - lo <= tolerance {
                continue;
            }
            let mut trial = output.clone();
            trial.insert(id, hi);
            if feasible(&trial)? {
                output = trial;
                continue;
            }
            let p = bisect(lo, hi, tolerance, |p| {
                let mut t = output.clone();
                t.insert(id, p);
                feasible(&t)
            })?;
            output.insert(id, p);
        }
    }
    let constraints = evaluate(study, limits, &output)?.constraints;
    Ok(DispatchSolution { total: output.values().fold(0.0, |a, b| a + b), output, scale, constraints })
}
