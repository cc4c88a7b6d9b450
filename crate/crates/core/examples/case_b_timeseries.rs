//! Multi-step operation over a synthetic day: hourly dispatch, settings
//! re-optimized every five hours.
//!
//! ```text
//! cargo run --example case_b_timeseries -- [scenario.toml]
//! ```

use std::path::PathBuf;

use protcoord::fixtures;
use protcoord::format::load_scenario;
use protcoord::optimizer::{run_timeseries, AlternateConfig};

fn main() -> protcoord::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| fixtures::root().join("ieee37/case_b.toml"));
    let scenario = load_scenario(&path)?;
    let kw = scenario.study.network.bases.base_mva * 1e3;
    let run = run_timeseries(&scenario.study, &scenario.profile, scenario.cadence(), &AlternateConfig::default())?;
    for s in &run.steps {
        let out: Vec<String> = s.output.iter().map(|(id, p)| format!("DG{id} {:>6.1}", p * kw)).collect();
        let dials: Vec<String> = s.settings.iter().map(|(id, r)| format!("{id} {:.4}", r.time_dial)).collect();
        println!(
            "{:>2} {:<10} {}  D [{}]  sum T {:.4} s  slack {:.5}",
            s.step,
            format!("{:?}", s.status),
            out.join(" "),
            dials.join(", "),
            s.total_clearing_time,
            s.worst_slack
        );
        if let Some(d) = &s.diagnostic {
            println!("   {d}");
        }
    }
    Ok(())
}
