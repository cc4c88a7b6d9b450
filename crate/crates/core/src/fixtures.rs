//! Shipped fixtures, embedded so tests and examples run from any directory.
//!
//! The same files live under `crates/core/fixtures/` for the command line.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::format::{load_scenario_from, Scenario, Source};
use crate::study::Study;

const FILES: &[(&str, &str)] = &[
    ("curves.toml", include_str!("../fixtures/curves.toml")),
    ("five_node/network.toml", include_str!("../fixtures/five_node/network.toml")),
    ("five_node/fuses.toml", include_str!("../fixtures/five_node/fuses.toml")),
    ("five_node/scenario.toml", include_str!("../fixtures/five_node/scenario.toml")),
    ("ieee37/network.toml", include_str!("../fixtures/ieee37/network.toml")),
    ("ieee37/fuses.toml", include_str!("../fixtures/ieee37/fuses.toml")),
    ("ieee37/table1.toml", include_str!("../fixtures/ieee37/table1.toml")),
    ("ieee37/case_a_network.toml", include_str!("../fixtures/ieee37/case_a_network.toml")),
    ("ieee37/case_a.toml", include_str!("../fixtures/ieee37/case_a.toml")),
    ("ieee37/case_b_network.toml", include_str!("../fixtures/ieee37/case_b_network.toml")),
    ("ieee37/case_b.toml", include_str!("../fixtures/ieee37/case_b.toml")),
    ("toys/fuses.toml", include_str!("../fixtures/toys/fuses.toml")),
    ("toys/two_recloser_network.toml", include_str!("../fixtures/toys/two_recloser_network.toml")),
    ("toys/two_recloser.toml", include_str!("../fixtures/toys/two_recloser.toml")),
    ("toys/three_recloser_network.toml", include_str!("../fixtures/toys/three_recloser_network.toml")),
    ("toys/three_recloser.toml", include_str!("../fixtures/toys/three_recloser.toml")),
];

/// Reads the embedded copies of the fixture tree.
pub struct Embedded;

impl Source for Embedded {
    fn read(&self, path: &Path) -> Result<String> {
        let key = path.to_string_lossy().replace('\\', "/");
        FILES
            .iter()
            .find(|(name, _)| *name == key)
            .map(|(_, text)| text.to_string())
            .ok_or_else(|| Error::InvalidArgument(format!("no embedded fixture {key}")))
    }
}

/// Names of the shipped scenarios, relative to the fixture root.
pub fn scenario_paths() -> Vec<&'static str> {
    FILES
        .iter()
        .map(|(n, _)| *n)
        .filter(|n| !n.ends_with("network.toml") && !n.ends_with("fuses.toml") && n.contains('/'))
        .collect()
}

pub fn scenario(path: &str) -> Result<Scenario> {
    load_scenario_from(&Embedded, &PathBuf::from(path))
}

/// Directory holding the fixture files on disk.
pub fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn five_node() -> Result<Study> {
    Ok(scenario("five_node/scenario.toml")?.study)
}
