//! Tabulates each built-in TCI family at one setting, and the current
//! that gives a chosen trip time.
//!
//! ```text
//! cargo run --example tci_curves -- [pickup_pu] [time_dial]
//! ```

use protcoord::curves::{CurveLibrary, RecloserSettings};

fn main() -> protcoord::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>().expect("number"));
    let pickup = args.next().unwrap_or(0.3);
    let time_dial = args.next().unwrap_or(0.5);
    let lib = CurveLibrary::builtin();
    let multiples = [1.5, 2.0, 3.0, 5.0, 10.0, 20.0];
    println!("{:<20}{}", "M", multiples.map(|m| format!("{m:>9.1}")).join(""));
    for family in lib.families.keys() {
        let curve = lib.curve(family, RecloserSettings { pickup, time_dial })?;
        let row: String = multiples.iter().map(|m| format!("{:>9.4}", curve.time(m * pickup).or_infinite())).collect();
        let i_1s = curve.current_for_time(1.0)?;
        println!("{family:<20}{row}   1 s at M = {:.3}", i_1s / pickup);
    }
    Ok(())
}
