use proptest::prelude::*;
use protcoord::curves::{CurveLibrary, RecloserSettings};
use protcoord::fixtures;

proptest! {
    #[test]
    fn tci_time_inverts(pickup in 0.05f64..2.0, dial in 0.1f64..1.0, mult in 1.1f64..50.0, fam in 0usize..3) {
        let lib = CurveLibrary::builtin();
        let family = lib.families.keys().nth(fam).unwrap().clone();
        let curve = lib.curve(&family, RecloserSettings { pickup, time_dial: dial }).unwrap();
        let t = curve.time(mult * pickup).seconds().unwrap();
        let back = curve.current_for_time(t).unwrap();
        prop_assert!((back / (mult * pickup) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn heavier_load_never_raises_voltage(scale in 1.0f64..3.0) {
        let study = fixtures::five_node().unwrap();
        let mut heavy = study.network.clone();
        heavy.dg_units.clear();
        let light = study.with_network(heavy.clone()).power_flow().unwrap();
        for l in &mut heavy.laterals {
            l.load_p *= scale;
            l.load_q *= scale;
        }
        let loaded = study.with_network(heavy).power_flow().unwrap();
        for (a, b) in light.v_mag.iter().zip(&loaded.v_mag) {
            prop_assert!(b <= a);
        }
    }
}
