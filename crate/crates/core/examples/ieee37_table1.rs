//! Maximum and minimum fault currents at the three reclosers of the
//! IEEE 37-node feeder, next to the published values.
//!
//! ```text
//! cargo run --example ieee37_table1
//! ```

use protcoord::fixtures;

fn main() -> protcoord::Result<()> {
    let study = fixtures::scenario("ieee37/table1.toml")?.study;
    let state = study.fault_state()?;
    let ib = study.network.bases.current_amps();
    let published = [("R1", 2975.0), ("R2", 2445.0), ("R3", 1823.0)];
    for (id, want) in published {
        let r = &state.recloser_ranges[id];
        let max = r.max * ib;
        println!(
            "{id}: max {max:>7.1} A at {}  (published {want:.0} A, {:+.1}%)  min {:>7.1} A at {}",
            r.max_location,
            100.0 * (max - want) / want,
            r.min * ib,
            r.min_location
        );
    }
    Ok(())
}
