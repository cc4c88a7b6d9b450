//! Checks every coordination pair of a scenario at its stored settings.
//!
//! ```text
//! cargo run --example coordination_check -- [scenario.toml]
//! ```

use std::path::PathBuf;

use protcoord::fixtures;
use protcoord::format::load_scenario;

fn main() -> protcoord::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| fixtures::root().join("five_node/scenario.toml"));
    let scenario = load_scenario(&path)?;
    let study = &scenario.study;
    let ib = study.network.bases.current_amps();
    let state = study.fault_state()?;
    for (id, r) in &state.recloser_ranges {
        println!(
            "{id}: max {:.0} A, min {:.0} A, load {:.0} A",
            r.max * ib,
            r.min * ib,
            state.max_load_current[id] * ib
        );
    }
    for r in study.check_all_with(&state)? {
        println!(
            "{:<10} range {:>6.0}..{:<6.0} A  dI {:>5.0} A  worst margin {:>8.4} s  {}",
            r.pair,
            r.range.0 * ib,
            r.range.1 * ib,
            r.disparity * ib,
            r.worst_margin,
            r.failure_mode.name()
        );
    }
    Ok(())
}
