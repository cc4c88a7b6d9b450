//! Minimum clearing-time recloser settings for a scenario's current
//! dispatch, then the coordination verdicts under those settings.
//!
//! ```text
//! cargo run --example settings_lp -- [scenario.toml]
//! ```

use std::path::PathBuf;

use protcoord::fixtures;
use protcoord::format::load_scenario;
use protcoord::optimizer::{apply_settings, baseline_settings, solve_settings};

fn main() -> protcoord::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| fixtures::root().join("five_node/scenario.toml"));
    let study = load_scenario(&path)?.study;
    let ib = study.network.bases.current_amps();

    match baseline_settings(&study) {
        Ok(base) => {
            for (id, s) in &base.settings {
                println!("baseline {id}: pickup {:.1} A, D {:.4}", s.pickup * ib, s.time_dial);
            }
        }
        Err(e) => println!("baseline: {e}"),
    }

    let state = study.fault_state()?;
    let sol = solve_settings(&study, &state)?;
    println!("objective {:.4} s (fallback pickups: {})", sol.objective, sol.fallback_pickups);
    for (id, s) in &sol.settings {
        println!("{id}: pickup {:.1} A, D {:.4}", s.pickup * ib, s.time_dial);
    }
    let mut net = study.network.clone();
    apply_settings(&mut net, &sol.settings)?;
    for r in study.with_network(net).check_all_with(&state)? {
        println!("{:<10} worst margin {:>8.4} s  {}", r.pair, r.worst_margin, r.failure_mode.name());
    }
    Ok(())
}
