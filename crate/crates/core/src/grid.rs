//! Radial feeder data model.
//!
//! A [`Network`] is a single main feeder: node 0 connects to the substation
//! and section `i` joins node `i` to node `i + 1`. Laterals and DG units tap
//! feeder nodes. A DG unit recorded at node `j` belongs to the section
//! between node `j` and `j + 1`. Everything is per-unit on the network's
//! [`Bases`].

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::curves::ReclosingSequence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederSection {
    pub from: NodeId,
    pub to: NodeId,
    pub r: f64,
    pub x: f64,
}

impl FeederSection {
    pub fn impedance(&self) -> Complex64 {
        Complex64::new(self.r, self.x)
    }
}

/// Aggregate lateral load with an optional protecting fuse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lateral {
    pub id: usize,
    pub tap: NodeId,
    pub load_p: f64,
    pub load_q: f64,
    pub fuse: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DgKind {
    Synchronous,
    Asynchronous,
    InverterBased,
}

/// Machine data of a DG unit. Reactances are on the unit's own rating base.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MachineParams {
    Synchronous {
        xd_subtransient: f64,
    },
    Asynchronous {
        x_locked_rotor: f64,
        rated_slip: f64,
    },
    InverterBased {
        k_off: f64,
        k_clamp: f64,
        /// Reactance used to estimate the prospective subtransient current.
        coupling_x: f64,
    },
}

pub const DEFAULT_INVERTER_COUPLING_X: f64 = 0.5;
pub const DEFAULT_RATED_SLIP: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgUnit {
    pub id: usize,
    pub tap: NodeId,
    /// Apparent-power rating, per-unit on the system base.
    pub rating: f64,
    pub p_out: f64,
    pub q_out: f64,
    pub machine: MachineParams,
    pub curtailable: bool,
}

impl DgUnit {
    pub fn kind(&self) -> DgKind {
        match self.machine {
            MachineParams::Synchronous { .. } => DgKind::Synchronous,
            MachineParams::Asynchronous { .. } => DgKind::Asynchronous,
            MachineParams::InverterBased { .. } => DgKind::InverterBased,
        }
    }

    /// Rated current at 1 pu voltage, per-unit on the system base.
    pub fn rated_current(&self) -> f64 {
        self.rating
    }

    /// Reactive-to-real power ratio held fixed when output is rescaled.
    pub fn q_ratio(&self) -> f64 {
        if self.p_out > 0.0 {
            self.q_out / self.p_out
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubstationSource {
    pub voltage: f64,
    pub impedance: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecloserPlacement {
    pub id: String,
    pub node: NodeId,
    pub sequence: ReclosingSequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bases {
    pub base_mva: f64,
    /// Line-to-line kV.
    pub base_kv: f64,
}

impl Bases {
    pub fn current_amps(&self) -> f64 {
        self.base_mva * 1e3 / (3f64.sqrt() * self.base_kv)
    }

    pub fn impedance_ohms(&self) -> f64 {
        self.base_kv * self.base_kv / self.base_mva
    }

    pub fn amps_to_pu(&self, amps: f64) -> f64 {
        amps / self.current_amps()
    }

    pub fn pu_to_amps(&self, pu: f64) -> f64 {
        pu * self.current_amps()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub sections: Vec<FeederSection>,
    pub laterals: Vec<Lateral>,
    pub dg_units: Vec<DgUnit>,
    pub source: SubstationSource,
    pub reclosers: Vec<RecloserPlacement>,
    pub bases: Bases,
}

/// One broken invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub element: String,
    pub rule: String,
}

impl Violation {
    fn new(element: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation { element: element.into(), rule: rule.into() }
    }
}

const CAPABILITY_SLACK: f64 = 1e-9;

impl Network {
    pub fn node_count(&self) -> usize {
        self.sections.len() + 1
    }

    pub fn last_node(&self) -> NodeId {
        NodeId(self.sections.len())
    }

    pub fn has_node(&self, node: NodeId) -> bool {
        node.0 < self.node_count()
    }

    fn check_node(&self, node: NodeId) -> Result<()> {
        if self.has_node(node) {
            Ok(())
        } else {
            Err(Error::UnknownNode(node.0))
        }
    }

    pub fn lateral(&self, id: usize) -> Result<&Lateral> {
        self.laterals.iter().find(|l| l.id == id).ok_or(Error::UnknownLateral(id))
    }

    pub fn dg(&self, id: usize) -> Result<&DgUnit> {
        self.dg_units.iter().find(|d| d.id == id).ok_or(Error::UnknownDg(id))
    }

    pub fn dg_mut(&mut self, id: usize) -> Result<&mut DgUnit> {
        self.dg_units.iter_mut().find(|d| d.id == id).ok_or(Error::UnknownDg(id))
    }

    pub fn recloser(&self, id: &str) -> Result<&RecloserPlacement> {
        self.reclosers
            .iter()
            .find(|r| r.id == id)
            .ok_or_else(|| Error::UnknownRecloser(id.to_string()))
    }

    pub fn recloser_index(&self, id: &str) -> Result<usize> {
        self.reclosers
            .iter()
            .position(|r| r.id == id)
            .ok_or_else(|| Error::UnknownRecloser(id.to_string()))
    }

    /// Lateral protected by the named fuse.
    pub fn fused_lateral(&self, fuse: &str) -> Result<&Lateral> {
        self.laterals
            .iter()
            .find(|l| l.fuse.as_deref() == Some(fuse))
            .ok_or_else(|| Error::UnknownFuse(fuse.to_string()))
    }

    /// Net real and reactive demand (load minus generation) per node.
    pub fn net_demand(&self) -> Vec<(f64, f64)> {
        let mut out = vec![(0.0, 0.0); self.node_count()];
        for l in &self.laterals {
            if let Some(slot) = out.get_mut(l.tap.0) {
                slot.0 += l.load_p;
                slot.1 += l.load_q;
            }
        }
        for g in &self.dg_units {
            if let Some(slot) = out.get_mut(g.tap.0) {
                slot.0 -= g.p_out;
                slot.1 -= g.q_out;
            }
        }
        out
    }

    /// Nearest recloser at or upstream of `node`.
    pub fn protecting_recloser(&self, node: NodeId) -> Option<&RecloserPlacement> {
        self.reclosers.iter().rev().find(|r| r.node <= node)
    }

    /// Feeder nodes a recloser reaches as first or backup device: from its
    /// own node up to and including the next recloser's node, or to the
    /// end of the feeder.
    pub fn recloser_zone(&self, id: &str) -> Result<(NodeId, NodeId)> {
        let k = self.recloser_index(id)?;
        let start = self.reclosers[k].node;
        let end = self.reclosers.get(k + 1).map(|r| r.node).unwrap_or(self.last_node());
        Ok((start, end))
    }

    /// Sets a unit's real output and keeps its power factor.
    pub fn set_dg_output(&mut self, id: usize, p: f64) -> Result<()> {
        let g = self.dg_mut(id)?;
        let ratio = g.q_ratio();
        g.p_out = p;
        g.q_out = p * ratio;
        Ok(())
    }
}

pub fn validate(network: &Network) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = network.node_count();

    if !(network.bases.base_mva > 0.0) || !(network.bases.base_kv > 0.0) {
        out.push(Violation::new("bases", "base_mva and base_kv must be positive"));
    }

    let src = &network.source;
    if !(0.9..=1.1).contains(&src.voltage) {
        out.push(Violation::new("source", format!("voltage {} outside [0.9, 1.1]", src.voltage)));
    }
    if !(src.impedance.norm() > 0.0) {
        out.push(Violation::new("source", "source impedance magnitude must be positive"));
    }

    for (i, s) in network.sections.iter().enumerate() {
        let name = format!("section {i}");
        if s.from != NodeId(i) || s.to != NodeId(i + 1) {
            out.push(Violation::new(
                &name,
                format!("expected {} -> {}, got {} -> {} (radial chain)", i, i + 1, s.from.0, s.to.0),
            ));
        }
        if !(s.r >= 0.0) || !(s.x >= 0.0) {
            out.push(Violation::new(&name, "r and x must be nonnegative"));
        } else if s.r == 0.0 && s.x == 0.0 {
            out.push(Violation::new(&name, "r and x are both zero"));
        }
    }

    let mut lateral_ids = BTreeSet::new();
    let mut fuse_ids = BTreeSet::new();
    for l in &network.laterals {
        let name = format!("lateral {}", l.id);
        if !lateral_ids.insert(l.id) {
            out.push(Violation::new(&name, "duplicate lateral id"));
        }
        if l.tap.0 >= n {
            out.push(Violation::new(&name, format!("taps nonexistent node {}", l.tap.0)));
        }
        if !(l.load_p >= 0.0) {
            out.push(Violation::new(&name, "load_p must be nonnegative"));
        }
        if !(l.load_q.abs() <= 2.0 * l.load_p) {
            out.push(Violation::new(&name, "|load_q| must not exceed 2 * load_p"));
        }
        if let Some(f) = &l.fuse {
            if !fuse_ids.insert(f.clone()) {
                out.push(Violation::new(&name, format!("fuse {f} protects more than one lateral")));
            }
        }
    }

    let mut dg_ids = BTreeSet::new();
    for g in &network.dg_units {
        let name = format!("DG {}", g.id);
        if !dg_ids.insert(g.id) {
            out.push(Violation::new(&name, "duplicate DG id"));
        }
        if g.tap.0 >= n {
            out.push(Violation::new(&name, format!("taps nonexistent node {}", g.tap.0)));
        }
        if !(g.rating > 0.0) {
            out.push(Violation::new(&name, "rating must be positive"));
        }
        if !(g.p_out >= 0.0) {
            out.push(Violation::new(&name, "p_out must be nonnegative"));
        }
        if !(g.p_out * g.p_out + g.q_out * g.q_out <= g.rating * g.rating + CAPABILITY_SLACK) {
            out.push(Violation::new(&name, "p_out^2 + q_out^2 exceeds rating^2"));
        }
        match g.machine {
            MachineParams::Synchronous { xd_subtransient } => {
                if !(xd_subtransient > 0.0) {
                    out.push(Violation::new(&name, "subtransient reactance must be positive"));
                }
            }
            MachineParams::Asynchronous { x_locked_rotor, rated_slip } => {
                if !(x_locked_rotor > 0.0) {
                    out.push(Violation::new(&name, "locked-rotor reactance must be positive"));
                }
                if !(rated_slip > 0.0 && rated_slip < 1.0) {
                    out.push(Violation::new(&name, "rated slip must lie in (0, 1)"));
                }
            }
            MachineParams::InverterBased { k_off, k_clamp, coupling_x } => {
                if !(1.25 <= k_clamp && k_clamp <= 2.0 && 2.0 <= k_off && k_off <= 3.0) {
                    out.push(Violation::new(&name, "requires 1.25 <= k_clamp <= 2 <= k_off <= 3"));
                }
                if !(coupling_x > 0.0) {
                    out.push(Violation::new(&name, "coupling reactance must be positive"));
                }
            }
        }
    }

    let mut recloser_ids = BTreeSet::new();
    let mut prev: Option<NodeId> = None;
    for r in &network.reclosers {
        let name = format!("recloser {}", r.id);
        if !recloser_ids.insert(r.id.clone()) {
            out.push(Violation::new(&name, "duplicate recloser id"));
        }
        if r.node.0 >= n {
            out.push(Violation::new(&name, format!("placed at nonexistent node {}", r.node.0)));
        }
        if let Some(p) = prev {
            if r.node <= p {
                out.push(Violation::new(&name, "recloser nodes must strictly increase along the feeder"));
            }
        }
        prev = Some(r.node);
        let relay = r.node == NodeId(0);
        for problem in r.sequence.problems(relay) {
            out.push(Violation::new(&name, problem));
        }
    }

    out
}

/// Validates and returns the network, or the violations as an error.
pub fn validated(network: Network) -> Result<Network> {
    let v = validate(&network);
    if v.is_empty() {
        Ok(network)
    } else {
        Err(Error::InvalidNetwork(v))
    }
}

/// DG units tapped at or below `node`.
pub fn downstream_dg(network: &Network, node: NodeId) -> Result<BTreeSet<usize>> {
    network.check_node(node)?;
    Ok(network
        .dg_units
        .iter()
        .filter(|g| g.tap >= node)
        .map(|g| g.id)
        .collect())
}

/// DG units on the section between node `j` and `j + 1`.
pub fn section_dg(network: &Network, j: NodeId) -> Result<BTreeSet<usize>> {
    network.check_node(j)?;
    if j == network.last_node() {
        return Err(Error::TerminalNode(j.0));
    }
    Ok(network.dg_units.iter().filter(|g| g.tap == j).map(|g| g.id).collect())
}

/// DG units between a recloser and the next recloser downstream: the union
/// of [`section_dg`] over the sections the pair spans. For the last recloser
/// this runs to the end of the feeder.
pub fn recloser_section_dg(network: &Network, recloser: &str) -> Result<BTreeSet<usize>> {
    let k = network.recloser_index(recloser)?;
    let start = network.reclosers[k].node;
    let mut out = BTreeSet::new();
    match network.reclosers.get(k + 1) {
        Some(next) => {
            for j in start.0..next.node.0 {
                out.extend(section_dg(network, NodeId(j))?);
            }
        }
        None => {
            out.extend(network.dg_units.iter().filter(|g| g.tap >= start).map(|g| g.id));
        }
    }
    Ok(out)
}

/// Recloser id → set of downstream DG ids.
pub fn downstream_dg_by_recloser(network: &Network) -> BTreeMap<String, BTreeSet<usize>> {
    network
        .reclosers
        .iter()
        .map(|r| (r.id.clone(), downstream_dg(network, r.node).unwrap_or_default()))
        .collect()
}
