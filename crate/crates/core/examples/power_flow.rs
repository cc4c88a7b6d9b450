//! Pre-fault DistFlow solution of a scenario's network.
//!
//! ```text
//! cargo run --example power_flow -- [scenario.toml]
//! ```

use std::path::PathBuf;

use protcoord::fixtures;
use protcoord::format::load_scenario;

fn main() -> protcoord::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| fixtures::root().join("five_node/scenario.toml"));
    let study = load_scenario(&path)?.study;
    let sol = study.power_flow()?;
    println!("converged in {} iterations", sol.iterations);
    let kw = study.network.bases.base_mva * 1000.0;
    for (k, v) in sol.v_mag.iter().enumerate() {
        print!("node {k:>3}  V {v:.6} pu");
        if k > 0 {
            print!("  in-flow {:>9.2} kW {:>9.2} kvar", sol.p_flow[k - 1] * kw, sol.q_flow[k - 1] * kw);
        }
        println!();
    }
    Ok(())
}
