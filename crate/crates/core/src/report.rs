//! Command results as text summaries plus CSV tables.
//!
//! Each `cmd_*` function does the whole job of one command-line subcommand
//! without touching the file system, so the binary only parses flags and
//! writes what it gets back.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::coordination::PairKind;
use crate::curves::RecloserSettings;
use crate::error::{Error, Result};
use crate::fault::{solve_fault, FaultLocation, FaultOptions, FaultRepresentation};
use crate::format::Scenario;
use crate::grid::Network;
use crate::optimizer::{
    alternate_from, baseline_settings, current_settings, run_timeseries, solve_settings, AlternateConfig, DispatchLimits,
    OptimizationTrace, StepStatus, StopReason,
};

/// Version suffix carried by every table schema.
pub const CSV_VERSION: u32 = 1;

/// One CSV file: a schema name, a header and rows of preformatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.to_string(), header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn schema(&self) -> String {
        format!("{}/{CSV_VERSION}", self.name)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv of utf-8 cells"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    /// Finished, but some step fell back to an earlier state.
    Degraded,
    Infeasible,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::Infeasible => 1,
            RunStatus::Degraded => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub schema: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub command: String,
    pub scenario: String,
    pub summary: String,
    pub tables: Vec<Table>,
    pub status: RunStatus,
}

impl RunReport {
    pub fn manifest(&self) -> Vec<ManifestEntry> {
        self.tables.iter().map(|t| ManifestEntry { file: t.file_name(), schema: t.schema(), rows: t.rows.len() }).collect()
    }

    pub fn manifest_table(&self) -> Table {
        let mut t = Table::new("manifest", &["file", "schema", "rows"]);
        for e in self.manifest() {
            t.rows.push(vec![e.file, e.schema, e.rows.to_string()]);
        }
        t
    }

    /// Writes every table and `manifest.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let io = |p: &Path| {
            let path = p.display().to_string();
            move |source| Error::Io { path, source }
        };
        std::fs::create_dir_all(dir).map_err(io(dir))?;
        let mut written = Vec::new();
        for t in self.tables.iter().chain(std::iter::once(&self.manifest_table())) {
            let p = dir.join(t.file_name());
            std::fs::write(&p, t.to_csv()?).map_err(io(&p))?;
            written.push(p);
        }
        Ok(written)
    }
}

/// Fixed-point with `digits` decimals; never prints a negative zero.
pub fn num(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.digits$}");
    if s.starts_with('-') && s[1..].bytes().all(|b| b == b'0' || b == b'.') {
        s[1..].to_string()
    } else {
        s
    }
}

fn opt(x: Option<f64>, digits: usize) -> String {
    x.map(|v| num(v, digits)).unwrap_or_default()
}

const V: usize = 8;
const AMPS: usize = 3;
const KW: usize = 3;
const SEC: usize = 6;
const DIAL: usize = 6;

fn kw(net: &Network, p: f64) -> f64 {
    p * net.bases.base_mva * 1000.0
}

fn amps(net: &Network, i: f64) -> f64 {
    net.bases.pu_to_amps(i)
}

fn report(command: &str, sc: &Scenario, summary: String, tables: Vec<Table>, status: RunStatus) -> RunReport {
    RunReport { command: command.into(), scenario: sc.name.clone(), summary, tables, status }
}

pub fn cmd_powerflow(sc: &Scenario) -> Result<RunReport> {
    let study = &sc.study;
    let net = &study.network;
    let sol = study.power_flow()?;
    let mut volts = Table::new("voltages", &["node", "v_pu", "v_kv"]);
    for (n, v) in sol.v_mag.iter().enumerate() {
        volts.rows.push(vec![n.to_string(), num(*v, V), num(v * net.bases.base_kv, V)]);
    }
    let mut flows = Table::new("flows", &["section", "from", "to", "p_kw", "q_kvar", "current_a"]);
    for (k, s) in net.sections.iter().enumerate() {
        flows.rows.push(vec![
            k.to_string(),
            s.from.0.to_string(),
            s.to.0.to_string(),
            num(kw(net, sol.p_flow[k]), KW),
            num(kw(net, sol.q_flow[k]), KW),
            num(amps(net, sol.section_current(k)), AMPS),
        ]);
    }
    let (vmin, at) = sol.v_mag.iter().enumerate().fold((f64::INFINITY, 0), |b, (n, &v)| if v < b.0 { (v, n) } else { b });
    let summary = format!(
        "power flow converged in {} sweeps (mismatch {:.2e})\nhead flow {} kW / {} kvar, lowest voltage {} pu at node {at}\n",
        sol.iterations,
        sol.max_mismatch,
        num(kw(net, sol.p_flow.first().copied().unwrap_or(0.0)), 1),
        num(kw(net, sol.q_flow.first().copied().unwrap_or(0.0)), 1),
        num(vmin, 5),
    );
    Ok(report("powerflow", sc, summary, vec![volts, flows], RunStatus::Ok))
}

/// Fault location used when neither the command line nor the scenario
/// names one: the feeder end.
pub fn default_location(sc: &Scenario) -> FaultLocation {
    FaultLocation::Node(sc.study.network.last_node())
}

pub fn cmd_fault(sc: &Scenario, location: FaultLocation) -> Result<RunReport> {
    let study = &sc.study;
    let net = &study.network;
    let state = study.fault_state()?;
    let fs = solve_fault(net, &state.solution, location, &FaultOptions::default())?;

    let mut devices = Table::new("fault_devices", &["device", "kind", "current_pu", "current_a"]);
    for (id, i) in &fs.i_recloser {
        devices.rows.push(vec![id.clone(), "recloser".into(), num(*i, V), num(amps(net, *i), AMPS)]);
    }
    for (id, i) in &fs.i_fuse {
        devices.rows.push(vec![id.clone(), "fuse".into(), num(*i, V), num(amps(net, *i), AMPS)]);
    }
    let mut dg = Table::new("fault_dg", &["dg", "model", "current_pu", "current_a"]);
    for m in &fs.models {
        let model = match m.representation {
            FaultRepresentation::VoltageBehindImpedance(_) => "voltage_behind_impedance",
            FaultRepresentation::ConstantCurrent { .. } => "constant_current",
            FaultRepresentation::Off => "off",
        };
        let i = fs.i_dg.get(&m.dg_id).copied().unwrap_or(0.0);
        dg.rows.push(vec![m.dg_id.to_string(), model.into(), num(i, V), num(amps(net, i), AMPS)]);
    }
    let mut disparity = Table::new("disparity", &["recloser", "delta_fr_pu", "delta_rr_pu", "delta_fr_a", "delta_rr_a"]);
    for r in &net.reclosers {
        let fr = fs.delta_fr.get(&r.id).copied().unwrap_or(0.0);
        let rr = fs.delta_rr.get(&r.id).copied().unwrap_or(0.0);
        disparity.rows.push(vec![r.id.clone(), num(fr, V), num(rr, V), num(amps(net, fr), AMPS), num(amps(net, rr), AMPS)]);
    }
    let mut ranges = Table::new("recloser_ranges", &["recloser", "node", "max_a", "min_a", "max_location", "min_location"]);
    for r in &net.reclosers {
        let g = state.recloser_ranges[&r.id];
        ranges.rows.push(vec![
            r.id.clone(),
            r.node.0.to_string(),
            num(amps(net, g.max), AMPS),
            num(amps(net, g.min), AMPS),
            g.max_location.to_string(),
            g.min_location.to_string(),
        ]);
    }

    let mut summary = format!(
        "bolted fault at {location}: {} A total, {} A from the substation\n",
        num(amps(net, fs.i_fault), 1),
        num(amps(net, fs.i_substation), 1)
    );
    for row in &ranges.rows {
        let _ = writeln!(summary, "{:<6} max {:>10} A  min {:>10} A", row[0], row[2], row[3]);
    }
    Ok(report("fault", sc, summary, vec![devices, dg, disparity, ranges], RunStatus::Ok))
}

pub fn cmd_coordinate(sc: &Scenario) -> Result<RunReport> {
    let study = &sc.study;
    let net = &study.network;
    let reports = study.check_all()?;
    let mut verdicts = Table::new(
        "verdicts",
        &[
            "pair",
            "kind",
            "primary",
            "backup",
            "range_min_a",
            "range_max_a",
            "disparity_a",
            "margin_required_s",
            "worst_margin_s",
            "worst_current_a",
            "failure_mode",
            "backup_delay_s",
        ],
    );
    let mut samples =
        Table::new("curve_samples", &["pair", "current_a", "i_primary_a", "i_backup_a", "t_primary_s", "t_backup_s"]);
    let mut summary = String::new();
    for r in &reports {
        let kind = match r.kind {
            PairKind::FuseRecloser => "fuse_recloser",
            PairKind::RecloserRecloser => "recloser_recloser",
        };
        verdicts.rows.push(vec![
            r.pair.clone(),
            kind.into(),
            r.primary.to_string(),
            r.backup.to_string(),
            num(amps(net, r.range.0), AMPS),
            num(amps(net, r.range.1), AMPS),
            num(amps(net, r.disparity), AMPS),
            num(r.margin_required, SEC),
            num(r.worst_margin, SEC),
            num(amps(net, r.worst_current), AMPS),
            r.failure_mode.name().into(),
            opt(r.backup_delay, SEC),
        ]);
        for s in &r.samples {
            samples.rows.push(vec![
                r.pair.clone(),
                num(amps(net, s.current), AMPS),
                num(amps(net, s.i_primary), AMPS),
                num(amps(net, s.i_backup), AMPS),
                opt(s.t_primary, SEC),
                opt(s.t_backup, SEC),
            ]);
        }
        let _ = writeln!(
            summary,
            "{:<10} {:<14} worst margin {} s (need {}) -> {}",
            r.pair,
            kind,
            num(r.worst_margin, 4),
            num(r.margin_required, 3),
            r.failure_mode.name()
        );
    }
    Ok(report("coordinate", sc, summary, vec![verdicts, samples], RunStatus::Ok))
}

pub fn alternate_config(sc: &Scenario) -> AlternateConfig {
    let o = &sc.file.optimization;
    AlternateConfig {
        tolerance: o.tolerance,
        max_iters: o.max_iters,
        dispatch_tolerance: o.dispatch_tolerance,
        baseline_start: o.baseline_start,
    }
}

/// Starting point written by an earlier `optimize` run.
#[derive(Debug, Clone, PartialEq)]
pub struct StartPoint {
    pub settings: BTreeMap<String, RecloserSettings>,
    pub output: BTreeMap<usize, f64>,
}

pub fn cmd_optimize(sc: &Scenario, start: Option<&StartPoint>) -> Result<RunReport> {
    let study = &sc.study;
    let net = &study.network;
    let cfg = alternate_config(sc);
    let limits = DispatchLimits::from_network(net);

    let settings_only = match solve_settings(study, &study.fault_state()?) {
        Ok(_) => "feasible".to_string(),
        Err(Error::Infeasible(why)) => format!("infeasible: {why}"),
        Err(e) => return Err(e),
    };
    let (settings0, output0) = match start {
        Some(s) => (s.settings.clone(), s.output.clone()),
        None => {
            let settings =
                if cfg.baseline_start { baseline_settings(study)?.settings } else { current_settings(net) };
            (settings, limits.available.clone())
        }
    };
    let trace = alternate_from(study, &limits, &cfg, settings0, output0)?;

    let tables = trace_tables(net, &trace);
    let mut summary = format!("settings alone at full output: {settings_only}\n");
    for it in &trace.iterations {
        let _ = writeln!(
            summary,
            "k={:<2} DG {:>10} kW  clearing {} s  worst slack {}  {}",
            it.k,
            num(kw(net, it.obj_dg_output), 1),
            num(it.obj_clearing_time, 4),
            num(it.worst_slack(), 5),
            if it.feasible { "feasible" } else { "infeasible" }
        );
    }
    let _ = writeln!(summary, "stop: {:?}", trace.stop_reason);
    if let Some(d) = &trace.diagnostic {
        let _ = writeln!(summary, "diagnostic: {d}");
    }
    let status = match trace.stop_reason {
        StopReason::SlackFixedPoint => RunStatus::Ok,
        StopReason::MaxIters if trace.last().feasible => RunStatus::Degraded,
        _ => RunStatus::Infeasible,
    };
    Ok(report("optimize", sc, summary, tables, status))
}

fn trace_tables(net: &Network, trace: &OptimizationTrace) -> Vec<Table> {
    let dg_ids: Vec<usize> = net.dg_units.iter().map(|g| g.id).collect();
    let rec_ids: Vec<String> = net.reclosers.iter().map(|r| r.id.clone()).collect();
    let mut header: Vec<String> =
        ["k", "clearing_time_s", "dg_output_kw", "worst_slack", "feasible"].iter().map(|s| s.to_string()).collect();
    header.extend(dg_ids.iter().map(|id| format!("p_dg{id}_kw")));
    header.extend(rec_ids.iter().map(|id| format!("d_{id}")));
    let mut t = Table { name: "trace".into(), header, rows: Vec::new() };
    let mut slacks = Table::new("slacks", &["k", "pair", "slack"]);
    for it in &trace.iterations {
        let mut row = vec![
            it.k.to_string(),
            num(it.obj_clearing_time, SEC),
            num(kw(net, it.obj_dg_output), KW),
            num(it.worst_slack(), SEC),
            it.feasible.to_string(),
        ];
        row.extend(dg_ids.iter().map(|id| num(kw(net, it.output.get(id).copied().unwrap_or(0.0)), KW)));
        row.extend(rec_ids.iter().map(|id| opt(it.settings.get(id).map(|s| s.time_dial), DIAL)));
        t.rows.push(row);
        for (pair, s) in &it.slacks {
            slacks.rows.push(vec![it.k.to_string(), pair.clone(), num(*s, SEC)]);
        }
    }

    let last = trace.last_feasible().unwrap_or(trace.last());
    let mut settings = Table::new("final_settings", &["recloser", "pickup_a", "time_dial"]);
    for id in &rec_ids {
        if let Some(s) = last.settings.get(id) {
            settings.rows.push(vec![id.clone(), num(amps(net, s.pickup), AMPS), num(s.time_dial, DIAL)]);
        }
    }
    let mut dispatch = Table::new("final_dispatch", &["dg", "p_kw"]);
    for id in &dg_ids {
        dispatch.rows.push(vec![id.to_string(), num(kw(net, last.output.get(id).copied().unwrap_or(0.0)), KW)]);
    }
    vec![t, slacks, settings, dispatch]
}

/// Reads `final_settings.csv` and `final_dispatch.csv` from a directory
/// written by `optimize`.
pub fn read_start_point(dir: &Path, net: &Network) -> Result<StartPoint> {
    let rows = |name: &str| -> Result<Vec<csv::StringRecord>> {
        let p = dir.join(name);
        let text = std::fs::read_to_string(&p).map_err(|source| Error::Io { path: p.display().to_string(), source })?;
        let mut r = csv::Reader::from_reader(text.as_bytes());
        Ok(r.records().collect::<std::result::Result<_, _>>()?)
    };
    let bad = |name: &str, k: usize| Error::Parse { path: dir.join(name).display().to_string(), message: format!("row {}", k + 2) };
    let float = |s: Option<&str>| s.and_then(|v| v.parse::<f64>().ok());

    let mut settings = BTreeMap::new();
    for (k, r) in rows("final_settings.csv")?.iter().enumerate() {
        let (Some(id), Some(pickup), Some(d)) = (r.get(0), float(r.get(1)), float(r.get(2))) else {
            return Err(bad("final_settings.csv", k));
        };
        net.recloser(id)?;
        settings.insert(id.to_string(), RecloserSettings { pickup: net.bases.amps_to_pu(pickup), time_dial: d });
    }
    let mut output = BTreeMap::new();
    for (k, r) in rows("final_dispatch.csv")?.iter().enumerate() {
        let (Some(id), Some(p)) = (r.get(0).and_then(|s| s.parse::<usize>().ok()), float(r.get(1))) else {
            return Err(bad("final_dispatch.csv", k));
        };
        net.dg(id)?;
        output.insert(id, p / (net.bases.base_mva * 1000.0));
    }
    Ok(StartPoint { settings, output })
}

pub fn cmd_timeseries(sc: &Scenario) -> Result<RunReport> {
    let study = &sc.study;
    let net = &study.network;
    if sc.profile.is_empty() {
        return Err(Error::InvalidArgument(format!("scenario {} has no profile", sc.name)));
    }
    let cadence = sc.cadence();
    let ts = run_timeseries(study, &sc.profile, cadence, &alternate_config(sc))?;

    let dg_ids: Vec<usize> = net.dg_units.iter().map(|g| g.id).collect();
    let rec_ids: Vec<String> = net.reclosers.iter().map(|r| r.id.clone()).collect();
    let mut header: Vec<String> = ["step", "status", "clearing_time_s", "worst_slack"].iter().map(|s| s.to_string()).collect();
    header.extend(dg_ids.iter().map(|id| format!("avail_dg{id}_kw")));
    header.extend(dg_ids.iter().map(|id| format!("p_dg{id}_kw")));
    header.extend(rec_ids.iter().map(|id| format!("d_{id}")));
    header.push("diagnostic".into());
    let mut t = Table { name: "timeseries".into(), header, rows: Vec::new() };

    let mut summary = format!(
        "{} steps, dispatch every {}, settings every {}\n",
        ts.steps.len(),
        cadence.dispatch_every,
        cadence.settings_every
    );
    for s in &ts.steps {
        let status = match s.status {
            StepStatus::Settings => "settings",
            StepStatus::Dispatch => "dispatch",
            StepStatus::Hold => "hold",
            StepStatus::Infeasible => "infeasible",
        };
        let mut row = vec![s.step.to_string(), status.into(), num(s.total_clearing_time, SEC), num(s.worst_slack, SEC)];
        row.extend(dg_ids.iter().map(|id| num(kw(net, s.available.get(id).copied().unwrap_or(0.0)), KW)));
        row.extend(dg_ids.iter().map(|id| num(kw(net, s.output.get(id).copied().unwrap_or(0.0)), KW)));
        row.extend(rec_ids.iter().map(|id| opt(s.settings.get(id).map(|x| x.time_dial), DIAL)));
        row.push(s.diagnostic.clone().unwrap_or_default());
        t.rows.push(row);

        let outputs: Vec<String> =
            dg_ids.iter().map(|id| format!("DG{id} {}", num(kw(net, s.output.get(id).copied().unwrap_or(0.0)), 1))).collect();
        let dials: Vec<String> =
            rec_ids.iter().filter_map(|id| s.settings.get(id).map(|x| format!("{id} {}", num(x.time_dial, 4)))).collect();
        let _ = writeln!(
            summary,
            "{:>3} {:<10} {}  D [{}]  clearing {} s",
            s.step,
            status,
            outputs.join(" "),
            dials.join(", "),
            num(s.total_clearing_time, 4)
        );
        if let Some(d) = &s.diagnostic {
            let _ = writeln!(summary, "    {d}");
        }
    }
    let status = if ts.degraded() { RunStatus::Degraded } else { RunStatus::Ok };
    Ok(report("timeseries", sc, summary, vec![t], status))
}
