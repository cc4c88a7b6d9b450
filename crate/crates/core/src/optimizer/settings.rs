//! Recloser settings as a linear program in the time dials.
//!
//! With pickups chosen by rule and the fault state frozen, every trip time
//! `T = α(I)·D + K` is affine in the dial `D`, so each coordination check at
//! a sampled current becomes a linear inequality. Constraints touching one
//! dial collapse into bounds; recloser pairs give two-dial rows.

use std::collections::BTreeMap;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use crate::coordination::{pair_grid, Characteristic, PairKind};
use crate::curves::{RecloserSettings, ShotKind, TciCurve, TIME_DIAL_MAX, TIME_DIAL_MIN};
use crate::error::{Error, Result};
use crate::fault::DeviceRef;
use crate::grid::Network;
use crate::study::{FaultState, Study};

/// `D_backup·a_b − D_primary·a_p ≥ rhs`, over dial indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub pair: String,
    pub backup: (usize, f64),
    pub primary: (usize, f64),
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub value: f64,
    /// Pair or rule that sets the bound.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingsProblem {
    /// Recloser ids, feeder head first.
    pub reclosers: Vec<String>,
    pub pickups: Vec<f64>,
    /// Objective `Σ c_j D_j + constant`: first-curve times at each
    /// recloser's largest fault current.
    pub cost: Vec<f64>,
    pub constant: f64,
    pub lower: Vec<Bound>,
    pub upper: Vec<Bound>,
    pub rows: Vec<Row>,
    /// Checks with no dial involved that already fail.
    pub fixed_violations: Vec<String>,
}

impl SettingsProblem {
    pub fn objective(&self, dials: &[f64]) -> f64 {
        self.constant + self.cost.iter().zip(dials).map(|(c, d)| c * d).sum::<f64>()
    }

    /// Largest violation of any bound or row at `dials`; zero when feasible.
    pub fn violation(&self, dials: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &d) in dials.iter().enumerate() {
            worst = worst.max(self.lower[j].value - d).max(d - self.upper[j].value);
        }
        for r in &self.rows {
            let lhs = r.backup.1 * dials[r.backup.0] - r.primary.1 * dials[r.primary.0];
            worst = worst.max(r.rhs - lhs);
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingsSolution {
    pub settings: BTreeMap<String, RecloserSettings>,
    pub objective: f64,
    /// Whether the pickups had to move to the top of their rule interval.
    pub fallback_pickups: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PickupChoice {
    /// Twice the largest load current.
    Lower,
    /// Half the smallest line-to-line fault current.
    Upper,
}

fn first_curve<'a>(net: &'a Network, id: &str) -> Result<&'a TciCurve> {
    net.recloser(id)?
        .sequence
        .first_curve()
        .ok_or_else(|| Error::InvalidArgument(format!("recloser {id} has no first curve")))
}

/// Chosen pickup per recloser under the rule.
pub fn rule_pickups(study: &Study, state: &FaultState, choice: PickupChoice) -> BTreeMap<String, f64> {
    study
        .pickup_limits(state)
        .into_iter()
        .map(|(id, (lo, hi))| {
            let p = match choice {
                PickupChoice::Lower => lo,
                PickupChoice::Upper => hi.max(lo),
            };
            (id, p)
        })
        .collect()
}

/// Writes pickups and dials into every curve of each recloser.
pub fn apply_settings(network: &mut Network, settings: &BTreeMap<String, RecloserSettings>) -> Result<()> {
    for (id, s) in settings {
        let idx = network.recloser_index(id)?;
        let seq = &mut network.reclosers[idx].sequence;
        let first = seq.first_kind();
        for (kind, curve) in [(ShotKind::Fast, seq.fast.as_mut()), (ShotKind::Slow, seq.slow.as_mut())] {
            if let Some(c) = curve {
                c.settings.pickup = s.pickup;
                if Some(kind) == first {
                    c.settings.time_dial = s.time_dial;
                }
            }
        }
    }
    Ok(())
}

pub fn current_settings(network: &Network) -> BTreeMap<String, RecloserSettings> {
    network
        .reclosers
        .iter()
        .filter_map(|r| r.sequence.first_curve().map(|c| (r.id.clone(), c.settings)))
        .collect()
}

/// Outputs recloser pairs are held at by default: curtailable units idle,
/// the rest at their present output.
pub fn held_outputs(network: &Network) -> BTreeMap<usize, f64> {
    network.dg_units.iter().map(|g| (g.id, if g.curtailable { 0.0 } else { g.p_out })).collect()
}

/// Builds the linear program at the given pickups. Recloser pairs are
/// checked with the DG units at `held` output rather than at the fault
/// state: DG fault current only delays an upstream backup, so settings
/// that coordinate there stay coordinated for any larger dispatch.
pub fn build_problem(
    study: &Study,
    state: &FaultState,
    pickups: &BTreeMap<String, f64>,
    held: &BTreeMap<usize, f64>,
) -> Result<SettingsProblem> {
    let mut net = study.network.clone();
    let with_pickups: BTreeMap<String, RecloserSettings> = net
        .reclosers
        .iter()
        .map(|r| {
            let d = r.sequence.first_curve().map(|c| c.settings.time_dial).unwrap_or(TIME_DIAL_MIN);
            (r.id.clone(), RecloserSettings { pickup: pickups[&r.id], time_dial: d })
        })
        .collect();
    apply_settings(&mut net, &with_pickups)?;
    let study = study.with_network(net);
    let net = &study.network;

    let reclosers: Vec<String> = net.reclosers.iter().map(|r| r.id.clone()).collect();
    let index = |id: &str| reclosers.iter().position(|r| r == id);
    let n = reclosers.len();
    let mut lower: Vec<Bound> = (0..n).map(|_| Bound { value: TIME_DIAL_MIN, source: "dial range".into() }).collect();
    let mut upper: Vec<Bound> = (0..n).map(|_| Bound { value: TIME_DIAL_MAX, source: "dial range".into() }).collect();
    let mut rows = Vec::new();
    let mut fixed_violations = Vec::new();

    let mut cost = vec![0.0; n];
    let mut constant = 0.0;
    for (j, id) in reclosers.iter().enumerate() {
        let c = first_curve(net, id)?;
        let i_max = state.recloser_ranges[id].max;
        let alpha = c.constants.dial_coefficient(i_max / c.settings.pickup).ok_or_else(|| {
            Error::Infeasible(format!("recloser {id} does not operate at its largest fault current {i_max}"))
        })?;
        cost[j] = alpha;
        constant += c.constants.k;
    }

    let tighten_lower = |lower: &mut Vec<Bound>, j: usize, v: f64, src: &str| {
        if v > lower[j].value {
            lower[j] = Bound { value: v, source: src.to_string() };
        }
    };
    let tighten_upper = |upper: &mut Vec<Bound>, j: usize, v: f64, src: &str| {
        if v < upper[j].value {
            upper[j] = Bound { value: v, source: src.to_string() };
        }
    };

    // Affine form of one side at a current: Ok((dial index, α, K)) or a fixed time.
    enum Side {
        Dial(usize, f64, f64),
        Fixed(Option<f64>),
    }
    let side = |curve: &Characteristic, device: &DeviceRef, tunable: bool, i: f64| -> Side {
        match (tunable, device, curve) {
            (true, DeviceRef::Recloser(id), Characteristic::Tci(c)) => match index(id) {
                Some(j) => match c.constants.dial_coefficient(i / c.settings.pickup) {
                    Some(a) => Side::Dial(j, a, c.constants.k),
                    None => Side::Fixed(None),
                },
                None => Side::Fixed(curve.time(i)),
            },
            _ => Side::Fixed(curve.time(i)),
        }
    };

    let mut low = net.clone();
    for g in &mut low.dg_units {
        let p = held.get(&g.id).copied().unwrap_or(g.p_out);
        g.q_out = p * g.q_ratio();
        g.p_out = p;
    }
    let low = study.with_network(low);
    let low_pairs = low.pairs(&low.fault_state()?)?;
    let mut pairs = Vec::new();
    for pair in study.pairs(state)? {
        pairs.push(match pair.kind {
            PairKind::FuseRecloser => pair,
            PairKind::RecloserRecloser => {
                low_pairs.iter().find(|p| p.name == pair.name).cloned().expect("same reclosers at held output")
            }
        });
    }

    for pair in pairs {
        let grid = pair_grid(&pair, &study.config.sweep)?;
        let dt = pair.margin_required;
        let mut fixed_failed = false;
        for u in grid {
            let b = side(&pair.backup_curve, &pair.backup, pair.tunable.1, pair.backup_current(u));
            let p = side(&pair.primary_curve, &pair.primary, pair.tunable.0, pair.primary_current(u));
            match (b, p) {
                // Backup never operates: nothing to coordinate.
                (Side::Fixed(None), _) => {}
                (_, Side::Fixed(None)) => fixed_failed = true,
                (Side::Fixed(Some(tb)), Side::Fixed(Some(tp))) => {
                    if tb - tp < dt - study.config.sweep.margin_tolerance {
                        fixed_failed = true;
                    }
                }
                (Side::Fixed(Some(tb)), Side::Dial(j, a, k)) => {
                    tighten_upper(&mut upper, j, (tb - dt - k) / a, &pair.name);
                }
                (Side::Dial(j, a, k), Side::Fixed(Some(tp))) => {
                    tighten_lower(&mut lower, j, (dt + tp - k) / a, &pair.name);
                }
                (Side::Dial(jb, ab, kb), Side::Dial(jp, ap, kp)) => rows.push(Row {
                    pair: pair.name.clone(),
                    backup: (jb, ab),
                    primary: (jp, ap),
                    rhs: dt + kp - kb,
                }),
            }
        }
        if fixed_failed {
            fixed_violations.push(pair.name.clone());
        }
    }

    // A fast first curve must stay at or below the slow curve.
    for (j, id) in reclosers.iter().enumerate() {
        let r = net.recloser(id)?;
        if r.sequence.first_kind() != Some(ShotKind::Fast) {
            continue;
        }
        let (Some(fast), Some(slow)) = (&r.sequence.fast, &r.sequence.slow) else { continue };
        let range = state.recloser_ranges[id];
        if !(range.min < range.max) {
            continue;
        }
        let grid = crate::coordination::sweep_grid((range.min, range.max), &study.config.sweep, &[])?;
        for u in grid {
            if let (Some(a), Some(ts)) =
                (fast.constants.dial_coefficient(u / fast.settings.pickup), slow.time(u).seconds())
            {
                tighten_upper(&mut upper, j, (ts - fast.constants.k) / a, &format!("{id} fast below slow"));
            }
        }
    }

    Ok(SettingsProblem {
        reclosers,
        pickups: net.reclosers.iter().map(|r| pickups[&r.id]).collect(),
        cost,
        constant,
        lower,
        upper,
        rows,
        fixed_violations,
    })
}

/// Sequential pairwise procedure: from the feeder end upstream, each dial
/// takes the smallest value its checks allow given the dials below it.
/// Exact for chains, where every row couples a recloser to the one below.
pub fn greedy_dials(problem: &SettingsProblem) -> std::result::Result<Vec<f64>, String> {
    if let Some(p) = problem.fixed_violations.first() {
        return Err(format!("{p}: check fails independent of any time dial"));
    }
    let n = problem.reclosers.len();
    let mut dials = vec![f64::NAN; n];
    for j in (0..n).rev() {
        let mut lo = problem.lower[j].clone();
        for r in problem.rows.iter().filter(|r| r.backup.0 == j) {
            let dp = dials[r.primary.0];
            if dp.is_nan() {
                continue;
            }
            let need = (r.rhs + r.primary.1 * dp) / r.backup.1;
            if need > lo.value {
                lo = Bound { value: need, source: r.pair.clone() };
            }
        }
        let up = &problem.upper[j];
        if lo.value > up.value + 1e-12 {
            return Err(format!(
                "{} needs D >= {:.6} ({}) but D <= {:.6} ({})",
                problem.reclosers[j], lo.value, lo.source, up.value, up.source
            ));
        }
        dials[j] = lo.value;
    }
    if problem.violation(&dials) > 1e-9 {
        return Err("checks couple reclosers outside a chain".into());
    }
    Ok(dials)
}

/// Solves the program; ties broken toward the smallest downstream dials.
pub fn solve_problem(problem: &SettingsProblem) -> Result<Vec<f64>> {
    if problem.fixed_violations.is_empty() && problem.rows.is_empty() && problem.reclosers.is_empty() {
        return Ok(Vec::new());
    }
    let diagnose = || match greedy_dials(problem) {
        Err(why) => Error::Infeasible(why),
        Ok(_) => Error::Infeasible("settings program has no solution".into()),
    };
    if !problem.fixed_violations.is_empty() {
        return Err(diagnose());
    }
    let n = problem.reclosers.len();
    for j in 0..n {
        if problem.lower[j].value > problem.upper[j].value + 1e-12 {
            return Err(diagnose());
        }
    }

    let solve = |objective: &[f64], caps: &[(Vec<f64>, f64)]| -> Option<Vec<f64>> {
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = (0..n)
            .map(|j| {
                let lo = problem.lower[j].value;
                lp.add_var(objective[j], (lo, problem.upper[j].value.max(lo)))
            })
            .collect();
        for r in &problem.rows {
            lp.add_constraint(&[(vars[r.backup.0], r.backup.1), (vars[r.primary.0], -r.primary.1)], ComparisonOp::Ge, r.rhs);
        }
        for (coef, cap) in caps {
            let terms: Vec<_> = vars.iter().zip(coef).map(|(&v, &c)| (v, c)).collect();
            lp.add_constraint(&terms[..], ComparisonOp::Le, *cap);
        }
        let sol = lp.solve().ok()?;
        Some(vars.iter().map(|&v| sol[v]).collect())
    };

    let mut dials = solve(&problem.cost, &[]).ok_or_else(diagnose)?;
    let best = problem.objective(&dials) - problem.constant;
    let mut caps = vec![(problem.cost.clone(), best + 1e-9 * best.abs().max(1.0))];
    for j in (0..n).rev() {
        let mut unit = vec![0.0; n];
        unit[j] = 1.0;
        if let Some(d) = solve(&unit, &caps) {
            dials = d;
            caps.push((unit, dials[j] + 1e-12));
        }
    }
    for (j, d) in dials.iter_mut().enumerate() {
        *d = d.clamp(problem.lower[j].value, problem.upper[j].value.max(problem.lower[j].value));
    }
    Ok(dials)
}

fn solution(problem: &SettingsProblem, dials: &[f64], fallback: bool) -> SettingsSolution {
    let settings = problem
        .reclosers
        .iter()
        .enumerate()
        .map(|(j, id)| (id.clone(), RecloserSettings { pickup: problem.pickups[j], time_dial: dials[j] }))
        .collect();
    SettingsSolution { settings, objective: problem.objective(dials), fallback_pickups: fallback }
}

/// Minimum total clearing time settings for a frozen fault state. Pickups
/// follow the rule; if no dials fit, one more pass with pickups at the top
/// of their interval is tried before reporting the failing check.
pub fn solve_settings(study: &Study, state: &FaultState) -> Result<SettingsSolution> {
    solve_settings_held(study, state, &held_outputs(&study.network))
}

/// As [`solve_settings`], with recloser pairs checked at `held` outputs.
pub fn solve_settings_held(study: &Study, state: &FaultState, held: &BTreeMap<usize, f64>) -> Result<SettingsSolution> {
    let lower = rule_pickups(study, state, PickupChoice::Lower);
    let problem = build_problem(study, state, &lower, held)?;
    match solve_problem(&problem) {
        Ok(dials) => Ok(solution(&problem, &dials, false)),
        Err(Error::Infeasible(first)) => {
            let upper = rule_pickups(study, state, PickupChoice::Upper);
            if upper == lower {
                return Err(Error::Infeasible(first));
            }
            let retry = build_problem(study, state, &upper, held)?;
            match solve_problem(&retry) {
                Ok(dials) => Ok(solution(&retry, &dials, true)),
                Err(Error::Infeasible(_)) => Err(Error::Infeasible(first)),
                Err(e) => Err(e),
            }
        }
        Err(e) => Err(e),
    }
}

/// Settings for the network without DG, built pair by pair from the
/// feeder end.
pub fn baseline_settings(study: &Study) -> Result<SettingsSolution> {
    let mut passive = study.network.clone();
    passive.dg_units.clear();
    let study = study.with_network(passive);
    let state = study.fault_state()?;
    let pickups = rule_pickups(&study, &state, PickupChoice::Lower);
    let problem = build_problem(&study, &state, &pickups, &BTreeMap::new())?;
    let dials = greedy_dials(&problem).map_err(Error::Infeasible)?;
    Ok(solution(&problem, &dials, false))
}
