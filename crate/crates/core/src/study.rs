//! A network together with its fuse curves and study options, and the
//! fault state and coordination pairs derived from it.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coordination::{
    check_pair, Characteristic, CoordinationPair, CoordinationReport, PairKind, SweepConfig, DEFAULT_MARGIN_FR,
    DEFAULT_MARGIN_RR,
};
use crate::curves::{FuseCharacteristic, FuseCurve, ShotKind};
use crate::error::{Error, Result};
use crate::fault::{max_min_fault_currents, solve_fault, DeviceRef, FaultLocation, FaultOptions, FaultRange, FaultStudy};
use crate::grid::{validated, Network, NodeId};
use crate::powerflow::{solve_distflow, through_current, PowerFlowSolution, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Margins {
    pub fuse_recloser: f64,
    pub recloser_recloser: f64,
}

impl Default for Margins {
    fn default() -> Self {
        Margins { fuse_recloser: DEFAULT_MARGIN_FR, recloser_recloser: DEFAULT_MARGIN_RR }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FuseScheme {
    /// The recloser's fast curve clears first and the fuse is spared.
    Saving,
    /// The fuse clears first and the recloser backs it up.
    Sacrificing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub margins: Margins,
    pub sweep: SweepConfig,
    /// Fault impedance used for minimum fault currents.
    pub min_fault_impedance: Complex64,
    /// DG disconnects after the first recloser trip, so only the first
    /// curve coordinates against the fuse.
    pub anti_islanding: bool,
    pub scheme: FuseScheme,
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            margins: Margins::default(),
            sweep: SweepConfig::default(),
            min_fault_impedance: Complex64::new(0.0, 0.0),
            anti_islanding: true,
            scheme: FuseScheme::Saving,
            tolerance: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub network: Network,
    /// Fuse curves in per-unit current, keyed by fuse id.
    pub fuses: BTreeMap<String, FuseCurve>,
    pub config: StudyConfig,
}

/// Fault-current data for one recloser pair: the backup's current for a
/// bolted fault at the primary's node and at the far end of its zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecloserPairFaults {
    pub backup: String,
    pub primary: String,
    pub backup_max: f64,
    pub backup_min: f64,
    pub primary_max: f64,
    pub disparity: f64,
}

/// Everything the coordination checks need from one pre-fault state.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultState {
    pub solution: PowerFlowSolution,
    pub recloser_ranges: BTreeMap<String, FaultRange>,
    /// Bolted fault on each fused lateral, keyed by fuse id.
    pub lateral_faults: BTreeMap<String, FaultStudy>,
    pub recloser_pairs: Vec<RecloserPairFaults>,
    /// Largest pre-fault current through each recloser, with and without DG.
    pub max_load_current: BTreeMap<String, f64>,
}

impl FaultState {
    /// Sum of the DG contributions each recloser sees fed in below it, for
    /// the bolted lateral faults it coordinates with.
    pub fn worst_disparity(&self, recloser: &str) -> f64 {
        self.lateral_faults
            .values()
            .filter_map(|s| s.delta_fr.get(recloser).copied())
            .fold(0.0, f64::max)
    }
}

impl Study {
    pub fn new(network: Network, fuses: BTreeMap<String, FuseCurve>, config: StudyConfig) -> Result<Self> {
        let network = validated(network)?;
        for l in &network.laterals {
            if let Some(f) = &l.fuse {
                if !fuses.contains_key(f) {
                    return Err(Error::UnknownFuse(f.clone()));
                }
            }
        }
        Ok(Study { network, fuses, config })
    }

    pub fn power_flow(&self) -> Result<PowerFlowSolution> {
        let sol = solve_distflow(&self.network, self.config.tolerance, self.config.max_iter)?;
        if !sol.converged {
            return Err(Error::NotConverged);
        }
        Ok(sol)
    }

    pub fn with_network(&self, network: Network) -> Study {
        Study { network, fuses: self.fuses.clone(), config: self.config }
    }

    pub fn fault_state(&self) -> Result<FaultState> {
        let net = &self.network;
        let sol = self.power_flow()?;
        let bolted = FaultOptions::default();
        let floor = FaultOptions { fault_impedance: self.config.min_fault_impedance, dg_connected: true };

        let mut recloser_ranges = BTreeMap::new();
        for r in &net.reclosers {
            let range = max_min_fault_currents(
                net,
                &sol,
                &DeviceRef::Recloser(r.id.clone()),
                self.config.min_fault_impedance,
                true,
            )?;
            recloser_ranges.insert(r.id.clone(), range);
        }

        let mut lateral_faults = BTreeMap::new();
        for l in &net.laterals {
            if let Some(f) = &l.fuse {
                lateral_faults.insert(f.clone(), solve_fault(net, &sol, FaultLocation::Lateral(l.id), &bolted)?);
            }
        }

        let mut recloser_pairs = Vec::new();
        for w in net.reclosers.windows(2) {
            let (b, p) = (&w[0], &w[1]);
            let at_primary = solve_fault(net, &sol, FaultLocation::Node(p.node), &bolted)?;
            let (_, far) = net.recloser_zone(&p.id)?;
            let at_far = solve_fault(net, &sol, FaultLocation::Node(far), &floor)?;
            recloser_pairs.push(RecloserPairFaults {
                backup: b.id.clone(),
                primary: p.id.clone(),
                backup_max: at_primary.i_recloser[&b.id],
                backup_min: at_far.i_recloser[&b.id],
                primary_max: at_primary.i_recloser[&p.id],
                disparity: at_primary.delta_rr[&b.id],
            });
        }

        let mut passive = net.clone();
        passive.dg_units.clear();
        let passive_sol = solve_distflow(&passive, self.config.tolerance, self.config.max_iter)?;
        let max_load_current = net
            .reclosers
            .iter()
            .map(|r| {
                let with_dg = through_current(net, &sol, r.node.0);
                let without = through_current(&passive, &passive_sol, r.node.0);
                (r.id.clone(), with_dg.max(without))
            })
            .collect();

        Ok(FaultState { solution: sol, recloser_ranges, lateral_faults, recloser_pairs, max_load_current })
    }

    /// Coordination pairs at the network's current settings.
    pub fn pairs(&self, state: &FaultState) -> Result<Vec<CoordinationPair>> {
        let net = &self.network;
        let margins = self.config.margins;
        let mut out = Vec::new();

        for l in &net.laterals {
            let Some(fuse_id) = &l.fuse else { continue };
            let Some(r) = net.protecting_recloser(l.tap) else { continue };
            let study = &state.lateral_faults[fuse_id];
            let fuse = self.fuses.get(fuse_id).ok_or_else(|| Error::UnknownFuse(fuse_id.clone()))?;
            let range = (state.recloser_ranges[&r.id].min, study.i_recloser[&r.id]);
            let disparity = study.delta_fr[&r.id];
            let first = r.sequence.first_curve().expect("validated sequence has a first curve");
            let mm = Characteristic::Fuse { curve: fuse.clone(), which: FuseCharacteristic::MinimumMelting };
            let tc = Characteristic::Fuse { curve: fuse.clone(), which: FuseCharacteristic::TotalClearing };
            let name = format!("{}-{}", r.id, fuse_id);
            match self.config.scheme {
                FuseScheme::Saving => {
                    out.push(CoordinationPair {
                        name: name.clone(),
                        kind: PairKind::FuseRecloser,
                        primary: DeviceRef::Recloser(r.id.clone()),
                        backup: DeviceRef::Fuse(fuse_id.clone()),
                        primary_curve: Characteristic::Tci(first.clone()),
                        backup_curve: mm,
                        margin_required: margins.fuse_recloser,
                        range,
                        disparity,
                        primary_downstream: false,
                        tunable: (true, false),
                    });
                    if !self.config.anti_islanding {
                        if let Some(slow) = r.sequence.curve(ShotKind::Slow) {
                            out.push(CoordinationPair {
                                name: format!("{name}-slow"),
                                kind: PairKind::FuseRecloser,
                                primary: DeviceRef::Fuse(fuse_id.clone()),
                                backup: DeviceRef::Recloser(r.id.clone()),
                                primary_curve: tc,
                                backup_curve: Characteristic::Tci(slow.clone()),
                                margin_required: margins.fuse_recloser,
                                range,
                                disparity,
                                primary_downstream: true,
                                tunable: (false, false),
                            });
                        }
                    }
                }
                FuseScheme::Sacrificing => out.push(CoordinationPair {
                    name,
                    kind: PairKind::FuseRecloser,
                    primary: DeviceRef::Fuse(fuse_id.clone()),
                    backup: DeviceRef::Recloser(r.id.clone()),
                    primary_curve: tc,
                    backup_curve: Characteristic::Tci(first.clone()),
                    margin_required: margins.fuse_recloser,
                    range,
                    disparity,
                    primary_downstream: true,
                    tunable: (false, true),
                }),
            }
        }

        for rp in &state.recloser_pairs {
            let b = net.recloser(&rp.backup)?;
            let p = net.recloser(&rp.primary)?;
            out.push(CoordinationPair {
                name: format!("{}-{}", b.id, p.id),
                kind: PairKind::RecloserRecloser,
                primary: DeviceRef::Recloser(p.id.clone()),
                backup: DeviceRef::Recloser(b.id.clone()),
                primary_curve: Characteristic::Tci(p.sequence.first_curve().expect("validated").clone()),
                backup_curve: Characteristic::Tci(b.sequence.first_curve().expect("validated").clone()),
                margin_required: margins.recloser_recloser,
                range: (rp.backup_min, rp.backup_max),
                disparity: rp.disparity,
                primary_downstream: true,
                tunable: (true, true),
            });
        }
        Ok(out)
    }

    pub fn check_all_with(&self, state: &FaultState) -> Result<Vec<CoordinationReport>> {
        self.pairs(state)?.iter().map(|p| check_pair(p, &self.config.sweep)).collect()
    }

    pub fn check_all(&self) -> Result<Vec<CoordinationReport>> {
        self.check_all_with(&self.fault_state()?)
    }

    /// Pickup bounds per recloser: twice the largest load current, and half
    /// the smallest line-to-line fault current in the zone.
    pub fn pickup_limits(&self, state: &FaultState) -> BTreeMap<String, (f64, f64)> {
        self.network
            .reclosers
            .iter()
            .map(|r| {
                let lo = 2.0 * state.max_load_current[&r.id];
                let hi = 0.5 * (3f64.sqrt() / 2.0) * state.recloser_ranges[&r.id].min;
                (r.id.clone(), (lo, hi))
            })
            .collect()
    }

    /// Fault location used when the CLI asks for a named recloser's node.
    pub fn recloser_node(&self, id: &str) -> Result<NodeId> {
        Ok(self.network.recloser(id)?.node)
    }
}

#[cfg(test)]
mod tests {
    use crate::fixtures;

    #[test]
    fn pedagogical_pairs() {
        let study = fixtures::five_node().unwrap();
        let state = study.fault_state().unwrap();
        let pairs = study.pairs(&state).unwrap();
        let names: Vec<_> = pairs.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["R1-F1", "R2-F2", "R1-R2"]);
        for p in &pairs {
            assert!(p.range.0 < p.range.1, "{}", p.name);
        }
    }

    #[test]
    fn tail_dg_leaves_upstream_recloser_pair_alone() {
        let study = fixtures::five_node().unwrap();
        let mut tail = study.network.clone();
        let last = tail.last_node();
        tail.dg_units.retain(|g| g.tap == last);
        assert!(!tail.dg_units.is_empty());
        let mut none = tail.clone();
        none.dg_units.clear();
        let a = study.with_network(tail).check_all().unwrap();
        let b = study.with_network(none).check_all().unwrap();
        let (a, b) = (a.last().unwrap(), b.last().unwrap());
        assert_eq!(a.pair, "R1-R2");
        assert_eq!(a.disparity, 0.0);
        assert_eq!(a.range, b.range);
        assert_eq!(a.failure_mode, b.failure_mode);
    }
}
