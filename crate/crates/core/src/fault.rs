//! Three-phase bolted fault analysis with DG contribution.
//!
//! Synchronous and asynchronous units become voltage sources behind their
//! subtransient (locked-rotor) reactance, with the internal EMF rebuilt
//! from the pre-fault terminal voltage and loading. Inverter-based units are
//! constant-current sources clamped at `k_clamp` times rated current, or
//! switch off when their prospective subtransient current exceeds `k_off`
//! times rated current. An inverter producing nothing is offline. The substation is an EMF at the source voltage
//! behind its impedance. Loads are neglected during the fault.
//!
//! Reclosers are directional: a recloser only measures current flowing
//! downstream through it, so it sees the substation and the DG upstream of
//! it, while a lateral fuse carries the whole fault current.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{downstream_dg, recloser_section_dg, DgUnit, MachineParams, Network, NodeId};
use crate::powerflow::{voltage_phasors, PowerFlowSolution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheveninEquivalent {
    pub emf: Complex64,
    pub impedance: Complex64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FaultRepresentation {
    VoltageBehindImpedance(TheveninEquivalent),
    ConstantCurrent { magnitude: f64 },
    Off,
}

/// Fault model of one DG unit. The EMF is expressed in the frame of the
/// unit's pre-fault terminal voltage (terminal voltage on the real axis).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DgFaultModel {
    pub dg_id: usize,
    pub representation: FaultRepresentation,
}

/// Reactance on the unit's rating base converted to the system base.
fn system_reactance(dg: &DgUnit, x_unit: f64) -> f64 {
    x_unit / dg.rating
}

/// Pre-fault slip of an asynchronous unit, affine in loading.
pub fn asynchronous_slip(dg: &DgUnit, rated_slip: f64) -> f64 {
    rated_slip * (dg.p_out / dg.rating)
}

pub fn build_dg_fault_model(dg: &DgUnit, v_terminal: f64) -> Result<DgFaultModel> {
    if !(v_terminal > 0.0) {
        return Err(Error::NonPositiveVoltage(v_terminal));
    }
    let v = Complex64::new(v_terminal, 0.0);
    let representation = match dg.machine {
        MachineParams::Synchronous { xd_subtransient } => {
            let z = Complex64::new(0.0, system_reactance(dg, xd_subtransient));
            let i_pre = (Complex64::new(dg.p_out, dg.q_out) / v).conj();
            FaultRepresentation::VoltageBehindImpedance(TheveninEquivalent { emf: v + z * i_pre, impedance: z })
        }
        MachineParams::Asynchronous { x_locked_rotor, rated_slip } => {
            let z = Complex64::new(0.0, system_reactance(dg, x_locked_rotor));
            // Real loading implied by the slip state.
            let slip = asynchronous_slip(dg, rated_slip);
            let p_slip = dg.rating * slip / rated_slip;
            let i_pre = (Complex64::new(p_slip, dg.q_out) / v).conj();
            FaultRepresentation::VoltageBehindImpedance(TheveninEquivalent { emf: v + z * i_pre, impedance: z })
        }
        MachineParams::InverterBased { k_off, k_clamp, coupling_x } => {
            let rated = dg.rated_current();
            let idle = dg.p_out == 0.0 && dg.q_out == 0.0;
            let prospective = v_terminal / system_reactance(dg, coupling_x);
            if idle || prospective > k_off * rated {
                FaultRepresentation::Off
            } else {
                FaultRepresentation::ConstantCurrent { magnitude: k_clamp * rated }
            }
        }
    };
    Ok(DgFaultModel { dg_id: dg.id, representation })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaultLocation {
    Node(NodeId),
    Lateral(usize),
}

impl std::fmt::Display for FaultLocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FaultLocation::Node(n) => write!(f, "node {}", n.0),
            FaultLocation::Lateral(l) => write!(f, "lateral {l}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultOptions {
    /// Fault impedance; zero is a bolted fault.
    pub fault_impedance: Complex64,
    /// Whether DG is connected. DG disconnects after the first recloser trip,
    /// so studies of later shots run with it off.
    pub dg_connected: bool,
}

impl Default for FaultOptions {
    fn default() -> Self {
        FaultOptions { fault_impedance: Complex64::new(0.0, 0.0), dg_connected: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultStudy {
    pub location: FaultLocation,
    pub fault_node: NodeId,
    /// Total current into the fault.
    pub i_fault: f64,
    pub i_substation: f64,
    pub i_recloser: BTreeMap<String, f64>,
    pub i_fuse: BTreeMap<String, f64>,
    pub i_dg: BTreeMap<usize, f64>,
    /// Disparity between each recloser and a lateral fuse below it: sum of
    /// the contributions of all DG downstream of the recloser node.
    pub delta_fr: BTreeMap<String, f64>,
    /// Disparity between each recloser and the next recloser downstream:
    /// sum of the contributions of the DG between them.
    pub delta_rr: BTreeMap<String, f64>,
    pub models: Vec<DgFaultModel>,
    /// Complex source currents, kept for consistency checks.
    #[serde(skip)]
    pub source_phasors: SourcePhasors,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SourcePhasors {
    pub substation: Complex64,
    pub dg: BTreeMap<usize, Complex64>,
    pub fault: Complex64,
}

fn fault_node(network: &Network, location: FaultLocation) -> Result<NodeId> {
    match location {
        FaultLocation::Node(n) if network.has_node(n) => Ok(n),
        FaultLocation::Node(n) => Err(Error::UnknownNode(n.0)),
        FaultLocation::Lateral(id) => Ok(network.lateral(id)?.tap),
    }
}

pub fn solve_fault(
    network: &Network,
    sol: &PowerFlowSolution,
    location: FaultLocation,
    options: &FaultOptions,
) -> Result<FaultStudy> {
    if !sol.converged {
        return Err(Error::NotConverged);
    }
    let f = fault_node(network, location)?;
    let n = network.node_count();
    let phasors = voltage_phasors(network, sol);

    // DG fault models rotated into the network frame.
    let mut models = Vec::new();
    let mut machines: Vec<(usize, usize, TheveninEquivalent)> = Vec::new();
    let mut injections: Vec<(usize, usize, Complex64)> = Vec::new();
    if options.dg_connected {
        for g in &network.dg_units {
            let vt = phasors[g.tap.0];
            let model = build_dg_fault_model(g, vt.norm())?;
            let rot = vt / vt.norm();
            match model.representation {
                FaultRepresentation::VoltageBehindImpedance(th) => machines.push((
                    g.id,
                    g.tap.0,
                    TheveninEquivalent { emf: th.emf * rot, impedance: th.impedance },
                )),
                FaultRepresentation::ConstantCurrent { magnitude } => {
                    injections.push((g.id, g.tap.0, rot * magnitude))
                }
                FaultRepresentation::Off => {}
            }
            models.push(model);
        }
    }

    // Nodal equations Y V = I with Norton sources.
    let zero = Complex64::new(0.0, 0.0);
    let mut y = DMatrix::from_element(n, n, zero);
    let mut rhs = DVector::from_element(n, zero);
    for s in &network.sections {
        let ys = s.impedance().inv();
        let (a, b) = (s.from.0, s.to.0);
        y[(a, a)] += ys;
        y[(b, b)] += ys;
        y[(a, b)] -= ys;
        y[(b, a)] -= ys;
    }
    let e_sub = Complex64::new(network.source.voltage, 0.0);
    let z_sub = network.source.impedance;
    y[(0, 0)] += z_sub.inv();
    rhs[0] += e_sub / z_sub;
    for &(_, k, th) in &machines {
        y[(k, k)] += th.impedance.inv();
        rhs[k] += th.emf / th.impedance;
    }
    for &(_, k, i) in &injections {
        rhs[k] += i;
    }

    let bolted = options.fault_impedance.norm() == 0.0;
    let v = if bolted {
        // Eliminate the faulted node (V_f = 0).
        let keep: Vec<usize> = (0..n).filter(|&k| k != f.0).collect();
        let mut v = DVector::from_element(n, zero);
        if !keep.is_empty() {
            let yr = y.select_rows(&keep).select_columns(&keep);
            let rr = rhs.select_rows(&keep);
            let vr = yr.lu().solve(&rr).ok_or(Error::SingularNetwork)?;
            for (idx, &k) in keep.iter().enumerate() {
                v[k] = vr[idx];
            }
        }
        v
    } else {
        y[(f.0, f.0)] += options.fault_impedance.inv();
        y.lu().solve(&rhs).ok_or(Error::SingularNetwork)?
    };

    let i_sub = (e_sub - v[0]) / z_sub;
    let mut dg_phasors = BTreeMap::new();
    for &(id, k, th) in &machines {
        dg_phasors.insert(id, (th.emf - v[k]) / th.impedance);
    }
    for &(id, _, i) in &injections {
        dg_phasors.insert(id, i);
    }
    let i_fault_phasor = if bolted {
        // Current arriving at the faulted node from branches and sources there.
        let mut total = zero;
        for s in &network.sections {
            let ys = s.impedance().inv();
            if s.to == f {
                total += (v[s.from.0] - v[f.0]) * ys;
            }
            if s.from == f {
                total += (v[s.to.0] - v[f.0]) * ys;
            }
        }
        if f.0 == 0 {
            total += i_sub;
        }
        for &(id, k, _) in &machines {
            if k == f.0 {
                total += dg_phasors[&id];
            }
        }
        for &(id, k, _) in &injections {
            if k == f.0 {
                total += dg_phasors[&id];
            }
        }
        total
    } else {
        v[f.0] / options.fault_impedance
    };

    let mut i_recloser = BTreeMap::new();
    for r in &network.reclosers {
        let current = if r.node > f {
            // Fault is upstream: current through the recloser flows toward
            // the substation and the directional element blocks.
            0.0
        } else if r.node.0 == 0 {
            i_sub.norm()
        } else {
            let s = &network.sections[r.node.0 - 1];
            ((v[s.from.0] - v[s.to.0]) / s.impedance()).norm()
        };
        i_recloser.insert(r.id.clone(), current);
    }

    let mut i_fuse = BTreeMap::new();
    if let FaultLocation::Lateral(id) = location {
        if let Some(fuse) = &network.lateral(id)?.fuse {
            i_fuse.insert(fuse.clone(), i_fault_phasor.norm());
        }
    }

    let mut i_dg: BTreeMap<usize, f64> = network.dg_units.iter().map(|g| (g.id, 0.0)).collect();
    for (id, ph) in &dg_phasors {
        i_dg.insert(*id, ph.norm());
    }

    let mut delta_fr = BTreeMap::new();
    let mut delta_rr = BTreeMap::new();
    for r in &network.reclosers {
        let fr: f64 = downstream_dg(network, r.node)?.iter().map(|id| i_dg[id]).fold(0.0, |a, b| a + b);
        let rr: f64 = recloser_section_dg(network, &r.id)?.iter().map(|id| i_dg[id]).fold(0.0, |a, b| a + b);
        delta_fr.insert(r.id.clone(), fr);
        delta_rr.insert(r.id.clone(), rr);
    }

    Ok(FaultStudy {
        location,
        fault_node: f,
        i_fault: i_fault_phasor.norm(),
        i_substation: i_sub.norm(),
        i_recloser,
        i_fuse,
        i_dg,
        delta_fr,
        delta_rr,
        models,
        source_phasors: SourcePhasors { substation: i_sub, dg: dg_phasors, fault: i_fault_phasor },
    })
}

/// Protective device reference.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DeviceRef {
    Recloser(String),
    Fuse(String),
}

impl std::fmt::Display for DeviceRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DeviceRef::Recloser(id) | DeviceRef::Fuse(id) => f.write_str(id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultRange {
    pub max: f64,
    pub min: f64,
    pub max_location: FaultLocation,
    pub min_location: FaultLocation,
}

/// Largest and smallest fault current a device sees over its zone: bolted
/// faults for the maximum, the zone's far end with the `min_fault_impedance`
/// floor for the minimum.
pub fn max_min_fault_currents(
    network: &Network,
    sol: &PowerFlowSolution,
    device: &DeviceRef,
    min_fault_impedance: Complex64,
    dg_connected: bool,
) -> Result<FaultRange> {
    let bolted = FaultOptions { fault_impedance: Complex64::new(0.0, 0.0), dg_connected };
    let floor = FaultOptions { fault_impedance: min_fault_impedance, dg_connected };
    match device {
        DeviceRef::Recloser(id) => {
            let (start, end) = network.recloser_zone(id)?;
            let mut best: Option<(f64, FaultLocation)> = None;
            for k in start.0..=end.0 {
                let loc = FaultLocation::Node(NodeId(k));
                let i = solve_fault(network, sol, loc, &bolted)?.i_recloser[id];
                if best.is_none_or(|(b, _)| i > b) {
                    best = Some((i, loc));
                }
            }
            let (max, max_location) = best.expect("zone has at least one node");
            let min_location = FaultLocation::Node(end);
            let min = solve_fault(network, sol, min_location, &floor)?.i_recloser[id];
            Ok(FaultRange { max, min, max_location, min_location })
        }
        DeviceRef::Fuse(id) => {
            let lateral = network.fused_lateral(id)?;
            let loc = FaultLocation::Lateral(lateral.id);
            let max = solve_fault(network, sol, loc, &bolted)?.i_fuse[id];
            let min = solve_fault(network, sol, loc, &floor)?.i_fuse[id];
            Ok(FaultRange { max, min, max_location: loc, min_location: loc })
        }
    }
}
