//! Bolted fault at every node: device currents and the DG fault current
//! seen below each recloser.
//!
//! ```text
//! cargo run --example fault_study -- [scenario.toml]
//! ```

use std::path::PathBuf;

use protcoord::fault::{solve_fault, FaultLocation, FaultOptions};
use protcoord::fixtures;
use protcoord::format::load_scenario;
use protcoord::grid::NodeId;

fn main() -> protcoord::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| fixtures::root().join("five_node/scenario.toml"));
    let study = load_scenario(&path)?.study;
    let net = &study.network;
    let ib = net.bases.current_amps();
    let sol = study.power_flow()?;
    for n in 1..net.node_count() {
        let fs = solve_fault(net, &sol, FaultLocation::Node(NodeId(n)), &FaultOptions::default())?;
        let devices: Vec<String> = fs
            .i_recloser
            .iter()
            .map(|(id, i)| format!("{id} {:.0} A (dI_FR {:.0})", i * ib, fs.delta_fr[id] * ib))
            .collect();
        println!("node {n:>3}: fault {:>6.0} A  {}", fs.i_fault * ib, devices.join("  "));
    }
    Ok(())
}
