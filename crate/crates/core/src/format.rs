//! TOML network, fuse-table and scenario files.
//!
//! Every file carries a `format` key naming its schema version and unknown
//! keys are rejected. `docs/formats.md` is the field reference.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::coordination::SweepConfig;
use crate::curves::{CurveLibrary, FuseCurve, RecloserSettings, ReclosingSequence};
use crate::error::{Error, Result};
use crate::grid::{
    validated, Bases, DgUnit, FeederSection, Lateral, MachineParams, Network, NodeId, RecloserPlacement,
    SubstationSource, DEFAULT_INVERTER_COUPLING_X, DEFAULT_RATED_SLIP,
};
use crate::study::{FuseScheme, Margins, Study, StudyConfig};

pub const NETWORK_FORMAT: &str = "feeder-network/1";
pub const FUSE_FORMAT: &str = "fuse-curves/1";
pub const SCENARIO_FORMAT: &str = "protcoord-scenario/1";

/// Parses TOML and reports errors with the file name and line.
pub fn parse_toml<T: DeserializeOwned>(text: &str, path: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start.min(text.len())].lines().count().max(1));
        let message = e.message().to_string();
        Error::Parse {
            path: match line {
                Some(l) => format!("{path}:{l}"),
                None => path.to_string(),
            },
            message,
        }
    })
}

fn check_format(found: &str, expected: &str, path: &str) -> Result<()> {
    if found == expected {
        Ok(())
    } else {
        Err(Error::Parse { path: path.to_string(), message: format!("format {found:?}, expected {expected:?}") })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpedanceUnit {
    #[default]
    Pu,
    Ohm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerUnit {
    #[default]
    Pu,
    Kw,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkFile {
    format: String,
    #[serde(default)]
    impedance_unit: ImpedanceUnit,
    #[serde(default)]
    power_unit: PowerUnit,
    bases: Bases,
    source: SourceEntry,
    sections: Vec<SectionEntry>,
    #[serde(default)]
    laterals: Vec<LateralEntry>,
    #[serde(default)]
    dg: Vec<DgEntry>,
    #[serde(default)]
    reclosers: Vec<RecloserEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceEntry {
    voltage: f64,
    r: f64,
    x: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SectionEntry {
    from: usize,
    to: usize,
    r: f64,
    x: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LateralEntry {
    id: usize,
    tap: usize,
    p: f64,
    q: f64,
    fuse: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum DgEntry {
    Synchronous {
        id: usize,
        tap: usize,
        rating: f64,
        p: f64,
        q: f64,
        xd_subtransient: f64,
        #[serde(default)]
        curtailable: bool,
    },
    Asynchronous {
        id: usize,
        tap: usize,
        rating: f64,
        p: f64,
        q: f64,
        x_locked_rotor: f64,
        rated_slip: Option<f64>,
        #[serde(default)]
        curtailable: bool,
    },
    Inverter {
        id: usize,
        tap: usize,
        rating: f64,
        p: f64,
        q: f64,
        k_off: f64,
        k_clamp: f64,
        coupling_x: Option<f64>,
        #[serde(default)]
        curtailable: bool,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurveEntry {
    family: String,
    pickup: f64,
    time_dial: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecloserEntry {
    id: String,
    node: usize,
    pattern: String,
    fast: Option<CurveEntry>,
    slow: Option<CurveEntry>,
}

/// Parses and validates a network file.
pub fn parse_network(text: &str, path: &str, curves: &CurveLibrary) -> Result<Network> {
    let file: NetworkFile = parse_toml(text, path)?;
    check_format(&file.format, NETWORK_FORMAT, path)?;
    let bases = file.bases;
    let z = |r: f64, x: f64| match file.impedance_unit {
        ImpedanceUnit::Pu => (r, x),
        ImpedanceUnit::Ohm => (r / bases.impedance_ohms(), x / bases.impedance_ohms()),
    };
    let s = |p: f64| match file.power_unit {
        PowerUnit::Pu => p,
        PowerUnit::Kw => p / (bases.base_mva * 1e3),
    };
    let in_file = |e: Error| Error::Parse { path: path.to_string(), message: e.to_string() };

    let (sr, sx) = z(file.source.r, file.source.x);
    let sections = file
        .sections
        .iter()
        .map(|e| {
            let (r, x) = z(e.r, e.x);
            FeederSection { from: NodeId(e.from), to: NodeId(e.to), r, x }
        })
        .collect();
    let laterals = file
        .laterals
        .into_iter()
        .map(|e| Lateral { id: e.id, tap: NodeId(e.tap), load_p: s(e.p), load_q: s(e.q), fuse: e.fuse })
        .collect();
    let dg_units = file
        .dg
        .into_iter()
        .map(|e| match e {
            DgEntry::Synchronous { id, tap, rating, p, q, xd_subtransient, curtailable } => DgUnit {
                id,
                tap: NodeId(tap),
                rating: s(rating),
                p_out: s(p),
                q_out: s(q),
                machine: MachineParams::Synchronous { xd_subtransient },
                curtailable,
            },
            DgEntry::Asynchronous { id, tap, rating, p, q, x_locked_rotor, rated_slip, curtailable } => DgUnit {
                id,
                tap: NodeId(tap),
                rating: s(rating),
                p_out: s(p),
                q_out: s(q),
                machine: MachineParams::Asynchronous {
                    x_locked_rotor,
                    rated_slip: rated_slip.unwrap_or(DEFAULT_RATED_SLIP),
                },
                curtailable,
            },
            DgEntry::Inverter { id, tap, rating, p, q, k_off, k_clamp, coupling_x, curtailable } => DgUnit {
                id,
                tap: NodeId(tap),
                rating: s(rating),
                p_out: s(p),
                q_out: s(q),
                machine: MachineParams::InverterBased {
                    k_off,
                    k_clamp,
                    coupling_x: coupling_x.unwrap_or(DEFAULT_INVERTER_COUPLING_X),
                },
                curtailable,
            },
        })
        .collect();
    let mut reclosers = Vec::new();
    for e in file.reclosers {
        let curve = |c: Option<CurveEntry>| -> Result<_> {
            c.map(|c| curves.curve(&c.family, RecloserSettings { pickup: c.pickup, time_dial: c.time_dial }))
                .transpose()
        };
        let sequence = ReclosingSequence {
            pattern: ReclosingSequence::parse_pattern(&e.pattern).map_err(in_file)?,
            fast: curve(e.fast).map_err(in_file)?,
            slow: curve(e.slow).map_err(in_file)?,
        };
        reclosers.push(RecloserPlacement { id: e.id, node: NodeId(e.node), sequence });
    }

    validated(Network {
        sections,
        laterals,
        dg_units,
        source: SubstationSource { voltage: file.source.voltage, impedance: Complex64::new(sr, sx) },
        reclosers,
        bases,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FuseFile {
    format: String,
    fuses: BTreeMap<String, FuseEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FuseEntry {
    /// `[current_amps, seconds]` pairs.
    mm: Vec<(f64, f64)>,
    tc: Vec<(f64, f64)>,
}

/// Parses a fuse table in amperes and converts it to per-unit current.
pub fn parse_fuses(text: &str, path: &str, bases: &Bases) -> Result<BTreeMap<String, FuseCurve>> {
    let file: FuseFile = parse_toml(text, path)?;
    check_format(&file.format, FUSE_FORMAT, path)?;
    let scale = 1.0 / bases.current_amps();
    file.fuses
        .into_iter()
        .map(|(id, e)| {
            let curve = FuseCurve::new(id.clone(), e.mm, e.tc)
                .map_err(|err| Error::Parse { path: path.to_string(), message: err.to_string() })?;
            Ok((id, curve.scaled_currents(scale)))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub format: String,
    pub name: Option<String>,
    pub network: String,
    pub fuses: String,
    pub curves: Option<String>,
    #[serde(default)]
    pub margins: Option<Margins>,
    #[serde(default)]
    pub power_flow: PowerFlowBlock,
    #[serde(default)]
    pub fault: FaultBlock,
    #[serde(default)]
    pub coordination: CoordinationBlock,
    #[serde(default)]
    pub optimization: OptimizationBlock,
    pub cadence: Option<Cadence>,
    pub profile: Option<ProfileBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerFlowBlock {
    pub tolerance: f64,
    pub max_iter: usize,
}

impl Default for PowerFlowBlock {
    fn default() -> Self {
        let d = StudyConfig::default();
        PowerFlowBlock { tolerance: d.tolerance, max_iter: d.max_iter }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FaultBlock {
    /// Fault impedance floor for minimum fault currents, ohms.
    pub min_fault_r_ohm: f64,
    pub min_fault_x_ohm: f64,
    /// Default location for the `fault` command: `node:N` or `lateral:N`.
    pub location: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoordinationBlock {
    pub points_per_decade: usize,
    pub min_points_per_decade: usize,
    pub independent_currents: bool,
    pub anti_islanding: bool,
    pub scheme: FuseScheme,
    pub margin_tolerance: f64,
    /// Overrides the family of every recloser's fast curve.
    pub fast_family: Option<String>,
}

impl Default for CoordinationBlock {
    fn default() -> Self {
        let s = SweepConfig::default();
        CoordinationBlock {
            points_per_decade: s.points_per_decade,
            min_points_per_decade: s.min_points_per_decade,
            independent_currents: s.independent_currents,
            anti_islanding: true,
            scheme: FuseScheme::Saving,
            margin_tolerance: s.margin_tolerance,
            fast_family: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizationBlock {
    pub tolerance: f64,
    pub max_iters: usize,
    pub dispatch_tolerance: f64,
    /// Start from the no-DG baseline settings instead of the file's.
    pub baseline_start: bool,
}

impl Default for OptimizationBlock {
    fn default() -> Self {
        OptimizationBlock { tolerance: 1e-4, max_iters: 20, dispatch_tolerance: 1e-6, baseline_start: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Cadence {
    pub dispatch_every: usize,
    pub settings_every: usize,
}

/// Available real power per DG unit per step, per-unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileBlock {
    pub units: Vec<usize>,
    pub steps: Vec<Vec<f64>>,
}

/// A fully loaded scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub study: Study,
    pub curves: CurveLibrary,
    pub file: ScenarioFile,
    /// Per step, available power per DG id, per-unit.
    pub profile: Vec<BTreeMap<usize, f64>>,
}

impl Scenario {
    pub fn cadence(&self) -> Cadence {
        self.file.cadence.unwrap_or(Cadence { dispatch_every: 1, settings_every: 1 })
    }
}

/// Reads files for the loader; lets shipped fixtures load from memory.
pub trait Source {
    fn read(&self, path: &Path) -> Result<String>;
}

pub struct Disk;

impl Source for Disk {
    fn read(&self, path: &Path) -> Result<String> {
        std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    load_scenario_from(&Disk, path)
}

pub fn load_scenario_from(src: &dyn Source, path: &Path) -> Result<Scenario> {
    build_scenario(src, read_scenario_file(src, path)?, path)
}

/// Parses a scenario file without loading what it refers to.
pub fn read_scenario_file(src: &dyn Source, path: &Path) -> Result<ScenarioFile> {
    let label = path.display().to_string();
    let file: ScenarioFile = parse_toml(&src.read(path)?, &label)?;
    check_format(&file.format, SCENARIO_FORMAT, &label)?;
    Ok(file)
}

/// Loads the files a scenario refers to, relative to `path`'s directory.
pub fn build_scenario(src: &dyn Source, file: ScenarioFile, path: &Path) -> Result<Scenario> {
    let label = path.display().to_string();
    scenario_from_file(src, file, path.parent().unwrap_or(Path::new("")), &label)
}

fn scenario_from_file(src: &dyn Source, file: ScenarioFile, dir: &Path, label: &str) -> Result<Scenario> {
    let at = |rel: &str| -> PathBuf { dir.join(rel) };
    let curves = match &file.curves {
        Some(rel) => {
            let p = at(rel);
            CurveLibrary::from_toml_str(&src.read(&p)?, &p.display().to_string())?
        }
        None => CurveLibrary::builtin(),
    };
    let net_path = at(&file.network);
    let mut network = parse_network(&src.read(&net_path)?, &net_path.display().to_string(), &curves)?;
    if let Some(family) = &file.coordination.fast_family {
        let constants = curves.get(family)?;
        for r in &mut network.reclosers {
            if let Some(c) = r.sequence.fast.as_mut() {
                c.family = family.clone();
                c.constants = constants;
            }
        }
    }
    let fuse_path = at(&file.fuses);
    let fuses = parse_fuses(&src.read(&fuse_path)?, &fuse_path.display().to_string(), &network.bases)?;

    let zb = network.bases.impedance_ohms();
    let c = &file.coordination;
    let config = StudyConfig {
        margins: file.margins.unwrap_or_default(),
        sweep: SweepConfig {
            points_per_decade: c.points_per_decade,
            min_points_per_decade: c.min_points_per_decade,
            independent_currents: c.independent_currents,
            margin_tolerance: c.margin_tolerance,
        },
        min_fault_impedance: Complex64::new(file.fault.min_fault_r_ohm / zb, file.fault.min_fault_x_ohm / zb),
        anti_islanding: c.anti_islanding,
        scheme: c.scheme,
        tolerance: file.power_flow.tolerance,
        max_iter: file.power_flow.max_iter,
    };

    let invalid = |m: String| Error::Parse { path: label.to_string(), message: m };
    if let Some(cad) = &file.cadence {
        if cad.dispatch_every == 0 || cad.settings_every % cad.dispatch_every != 0 {
            return Err(invalid(format!(
                "settings_every ({}) must be a positive multiple of dispatch_every ({})",
                cad.settings_every, cad.dispatch_every
            )));
        }
    }
    let mut profile = Vec::new();
    if let Some(p) = &file.profile {
        for id in &p.units {
            network.dg(*id).map_err(|e| invalid(e.to_string()))?;
        }
        for (k, row) in p.steps.iter().enumerate() {
            if row.len() != p.units.len() {
                return Err(invalid(format!("profile step {k} has {} values for {} units", row.len(), p.units.len())));
            }
            if row.iter().any(|&v| !(v >= 0.0)) {
                return Err(invalid(format!("profile step {k} has a negative or missing value")));
            }
            profile.push(p.units.iter().zip(row).map(|(&id, &v)| (id, v)).collect());
        }
    }
    let name = file.name.clone().unwrap_or_else(|| label.to_string());
    let study = Study::new(network, fuses, config)?;
    Ok(Scenario { name, study, curves, file, profile })
}

/// Parses a fault location of the form `node:N` or `lateral:N`.
pub fn parse_location(s: &str) -> Result<crate::fault::FaultLocation> {
    use crate::fault::FaultLocation;
    let bad = || Error::InvalidArgument(format!("fault location {s:?}: expected node:N or lateral:N"));
    let (kind, n) = s.split_once(':').ok_or_else(bad)?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    match kind.trim() {
        "node" => Ok(FaultLocation::Node(NodeId(n))),
        "lateral" => Ok(FaultLocation::Lateral(n)),
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NET: &str = r#"
format = "feeder-network/1"
bases = { base_mva = 10.0, base_kv = 12.47 }
source = { voltage = 1.0, r = 0.001, x = 0.01 }
sections = [{ from = 0, to = 1, r = 0.01, x = 0.02 }]
"#;

    #[test]
    fn minimal_network_parses() {
        let n = parse_network(NET, "net.toml", &CurveLibrary::builtin()).unwrap();
        assert_eq!(n.node_count(), 2);
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let text = format!("{NET}color = \"blue\"\n");
        match parse_network(&text, "net.toml", &CurveLibrary::builtin()) {
            Err(Error::Parse { path, message }) => {
                assert!(path.starts_with("net.toml:"), "{path}");
                assert!(message.contains("color"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ohms_convert_to_per_unit() {
        let text = NET.replace("format = \"feeder-network/1\"", "format = \"feeder-network/1\"\nimpedance_unit = \"ohm\"");
        let n = parse_network(&text, "net.toml", &CurveLibrary::builtin()).unwrap();
        let zb = 12.47f64 * 12.47 / 10.0;
        assert!((n.sections[0].r - 0.01 / zb).abs() < 1e-15);
    }

    #[test]
    fn wrong_format_version() {
        let text = NET.replace("feeder-network/1", "feeder-network/9");
        assert!(matches!(parse_network(&text, "n", &CurveLibrary::builtin()), Err(Error::Parse { .. })));
    }

    #[test]
    fn fuse_table_converts_amps() {
        let text = r#"
format = "fuse-curves/1"
[fuses.F1]
mm = [[100.0, 10.0], [1000.0, 0.1]]
tc = [[120.0, 20.0], [1200.0, 0.2]]
"#;
        let b = Bases { base_mva: 10.0, base_kv: 12.47 };
        let f = parse_fuses(text, "f", &b).unwrap();
        assert!((f["F1"].mm[0].0 - 100.0 / b.current_amps()).abs() < 1e-12);
    }

    #[test]
    fn locations() {
        use crate::fault::FaultLocation;
        assert_eq!(parse_location("node:3").unwrap(), FaultLocation::Node(NodeId(3)));
        assert_eq!(parse_location("lateral:2").unwrap(), FaultLocation::Lateral(2));
        assert!(parse_location("bus:2").is_err());
    }
}
