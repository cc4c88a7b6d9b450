//! Pre-fault DistFlow load flow on the radial feeder.
//!
//! With `P_i, Q_i` the sending-end flow on section `i` (node `i` to `i+1`)
//! and `(P_D − P_G)` the net demand at a node, the branch equations are
//!
//! ```text
//! P_{i+1} = P_i − r_i (P_i² + Q_i²) / V_i² − (P_D − P_G)_{i+1}
//! Q_{i+1} = Q_i − x_i (P_i² + Q_i²) / V_i² − (Q_D − Q_G)_{i+1}
//! V_{i+1}² = V_i² − 2 (r_i P_i + x_i Q_i) + (r_i² + x_i²)(P_i² + Q_i²) / V_i²
//! ```
//!
//! with `P = Q = 0` past the last node. DG units are constant-PQ injections.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{validate, Network};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 50;
/// Any node voltage below this during the sweep counts as collapse.
pub const COLLAPSE_VOLTAGE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowSolution {
    pub p_flow: Vec<f64>,
    pub q_flow: Vec<f64>,
    pub v_mag: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub max_mismatch: f64,
}

impl PowerFlowSolution {
    /// Apparent current magnitude at the sending end of section `i`.
    pub fn section_current(&self, i: usize) -> f64 {
        (self.p_flow[i].powi(2) + self.q_flow[i].powi(2)).sqrt() / self.v_mag[i]
    }
}

/// Largest residual of the branch equations at a candidate solution.
pub fn residual(network: &Network, p: &[f64], q: &[f64], v: &[f64]) -> f64 {
    let demand = network.net_demand();
    let m = network.sections.len();
    let mut worst: f64 = 0.0;
    for i in 0..m {
        let s = &network.sections[i];
        let s2 = p[i] * p[i] + q[i] * q[i];
        let v2 = v[i] * v[i];
        let (p_next, q_next) = if i + 1 < m { (p[i + 1], q[i + 1]) } else { (0.0, 0.0) };
        let rp = p_next - (p[i] - s.r * s2 / v2 - demand[i + 1].0);
        let rq = q_next - (q[i] - s.x * s2 / v2 - demand[i + 1].1);
        worst = worst.max(rp.abs()).max(rq.abs());
    }
    worst
}

pub fn solve_distflow(network: &Network, tol: f64, max_iter: usize) -> Result<PowerFlowSolution> {
    let violations = validate(network);
    if !violations.is_empty() {
        return Err(Error::InvalidNetwork(violations));
    }
    if !(tol > 0.0) || max_iter == 0 {
        return Err(Error::InvalidArgument("tol must be positive and max_iter at least 1".into()));
    }

    let m = network.sections.len();
    let n = network.node_count();
    let demand = network.net_demand();
    let v0 = network.source.voltage;

    let mut p = vec![0.0; m];
    let mut q = vec![0.0; m];
    let mut v = vec![v0; n];
    let mut mismatch = residual(network, &p, &q, &v);
    let mut iterations = 0;

    while mismatch > tol && iterations < max_iter {
        iterations += 1;

        // Backward: accumulate demand and losses from the feeder end.
        let (mut p_down, mut q_down) = (0.0, 0.0);
        for i in (0..m).rev() {
            let s = &network.sections[i];
            let loss = (p[i] * p[i] + q[i] * q[i]) / (v[i] * v[i]);
            p[i] = p_down + demand[i + 1].0 + s.r * loss;
            q[i] = q_down + demand[i + 1].1 + s.x * loss;
            p_down = p[i];
            q_down = q[i];
        }

        // Forward: propagate voltage magnitude from the source.
        for i in 0..m {
            let s = &network.sections[i];
            let v2 = v[i] * v[i];
            let next = v2 - 2.0 * (s.r * p[i] + s.x * q[i])
                + (s.r * s.r + s.x * s.x) * (p[i] * p[i] + q[i] * q[i]) / v2;
            let mag = if next > 0.0 { next.sqrt() } else { 0.0 };
            if mag < COLLAPSE_VOLTAGE {
                return Err(Error::Diverged { node: i + 1, v: mag, iteration: iterations });
            }
            v[i + 1] = mag;
        }

        mismatch = residual(network, &p, &q, &v);
    }

    Ok(PowerFlowSolution {
        p_flow: p,
        q_flow: q,
        v_mag: v,
        converged: mismatch <= tol,
        iterations,
        max_mismatch: mismatch,
    })
}

pub fn solve_distflow_default(network: &Network) -> Result<PowerFlowSolution> {
    solve_distflow(network, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER)
}

pub fn dg_terminal_voltages(network: &Network, sol: &PowerFlowSolution) -> Result<BTreeMap<usize, f64>> {
    if !sol.converged {
        return Err(Error::NotConverged);
    }
    Ok(network.dg_units.iter().map(|g| (g.id, sol.v_mag[g.tap.0])).collect())
}

/// Voltage phasors consistent with the magnitudes, node 0 at angle zero:
/// `V_{i+1} = V_i − z_i · conj(S_i / V_i)`.
pub fn voltage_phasors(network: &Network, sol: &PowerFlowSolution) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(network.node_count());
    out.push(Complex64::new(sol.v_mag[0], 0.0));
    for (i, s) in network.sections.iter().enumerate() {
        let vi = out[i];
        let current = (Complex64::new(sol.p_flow[i], sol.q_flow[i]) / vi).conj();
        out.push(vi - s.impedance() * current);
    }
    out
}

/// Pre-fault current through a recloser placed at `node` (flowing into the
/// node from upstream; at node 0 the total source injection).
pub fn through_current(network: &Network, sol: &PowerFlowSolution, node: usize) -> f64 {
    if node == 0 {
        let demand = network.net_demand()[0];
        let (p, q) = match sol.p_flow.first() {
            Some(&p0) => (p0 + demand.0, sol.q_flow[0] + demand.1),
            None => demand,
        };
        (p * p + q * q).sqrt() / sol.v_mag[0]
    } else {
        let i = node - 1;
        let s = &network.sections[i];
        // Receiving-end flow of the upstream section.
        let loss = (sol.p_flow[i].powi(2) + sol.q_flow[i].powi(2)) / sol.v_mag[i].powi(2);
        let p = sol.p_flow[i] - s.r * loss;
        let q = sol.q_flow[i] - s.x * loss;
        (p * p + q * q).sqrt() / sol.v_mag[node]
    }
}
