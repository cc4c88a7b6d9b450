//! Command-line interface. `protcoord <command> --scenario FILE`.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::fixtures::{self, Embedded};
use crate::format::{build_scenario, parse_location, read_scenario_file, Disk, Scenario, Source};
use crate::report::{self, RunReport};
use crate::study::Margins;

/// Environment variable naming the directory relative scenario paths are
/// also looked up in.
pub const FIXTURES_ENV: &str = "PROTCOORD_FIXTURES";

#[derive(Debug, Parser)]
#[command(name = "protcoord", version, about = "Recloser-fuse protection coordination with distributed generation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario file. Relative paths are tried as given, then under the
    /// fixture directory, then among the embedded fixtures.
    #[arg(long, global = true, default_value = "five_node/scenario.toml")]
    pub scenario: PathBuf,
    /// Replaces the scenario's network file.
    #[arg(long, global = true)]
    pub network: Option<PathBuf>,
    /// Directory for CSV output; nothing is written without it.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Stopping tolerance of the alternating optimization.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iters: Option<usize>,
    /// Curve family for every recloser's fast curve.
    #[arg(long, global = true)]
    pub curve_family: Option<String>,
    /// Required margins in seconds: fuse-recloser,recloser-recloser.
    #[arg(long, global = true, value_parser = parse_margins)]
    pub margins: Option<Margins>,
    #[arg(long, global = true, env = FIXTURES_ENV)]
    pub fixtures: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pre-fault load flow: node voltages and section flows.
    Powerflow,
    /// Bolted fault at one location, with DG contributions and disparities.
    Fault {
        /// `node:N` or `lateral:N`; defaults to the scenario's or the feeder end.
        #[arg(long)]
        location: Option<String>,
    },
    /// Checks every coordination pair and samples both curves.
    Coordinate,
    /// Alternates settings and dispatch until neither changes.
    Optimize {
        /// Output directory of an earlier run to start from.
        #[arg(long)]
        start: Option<PathBuf>,
    },
    /// Steps through the scenario's renewable profile.
    Timeseries,
}

fn parse_margins(s: &str) -> std::result::Result<Margins, String> {
    let (fr, rr) = s.split_once(',').ok_or("expected FR,RR")?;
    let f = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"));
    let m = Margins { fuse_recloser: f(fr)?, recloser_recloser: f(rr)? };
    if !(m.fuse_recloser > 0.0 && m.recloser_recloser > 0.0) {
        return Err("margins must be positive".into());
    }
    Ok(m)
}

/// Reads from disk when the file exists there, from the embedded fixtures
/// otherwise.
struct DiskThenEmbedded;

impl Source for DiskThenEmbedded {
    fn read(&self, path: &Path) -> Result<String> {
        if path.is_file() {
            Disk.read(path)
        } else {
            Embedded.read(path)
        }
    }
}

fn resolve(path: &Path, fixture_dir: Option<&Path>) -> PathBuf {
    if path.is_file() || path.is_absolute() {
        return path.to_path_buf();
    }
    let dir = fixture_dir.map(Path::to_path_buf).unwrap_or_else(fixtures::root);
    let under = dir.join(path);
    if under.is_file() {
        under
    } else {
        path.to_path_buf()
    }
}

pub fn load(common: &Common) -> Result<Scenario> {
    let path = resolve(&common.scenario, common.fixtures.as_deref());
    let mut file = read_scenario_file(&DiskThenEmbedded, &path)?;
    if let Some(n) = &common.network {
        let abs = std::path::absolute(n).map_err(|source| Error::Io { path: n.display().to_string(), source })?;
        file.network = abs.display().to_string();
    }
    if let Some(t) = common.tol {
        file.optimization.tolerance = t;
    }
    if let Some(k) = common.max_iters {
        file.optimization.max_iters = k;
    }
    if let Some(f) = &common.curve_family {
        file.coordination.fast_family = Some(f.clone());
    }
    if let Some(m) = common.margins {
        file.margins = Some(m);
    }
    build_scenario(&DiskThenEmbedded, file, &path)
}

pub fn execute(cli: &Cli) -> Result<RunReport> {
    let sc = load(&cli.common)?;
    match &cli.command {
        Command::Powerflow => report::cmd_powerflow(&sc),
        Command::Fault { location } => {
            let loc = match location.as_deref().or(sc.file.fault.location.as_deref()) {
                Some(s) => parse_location(s)?,
                None => report::default_location(&sc),
            };
            report::cmd_fault(&sc, loc)
        }
        Command::Coordinate => report::cmd_coordinate(&sc),
        Command::Optimize { start } => {
            let start = start.as_deref().map(|d| report::read_start_point(d, &sc.study.network)).transpose()?;
            report::cmd_optimize(&sc, start.as_ref())
        }
        Command::Timeseries => report::cmd_timeseries(&sc),
    }
}

/// Runs the command line and returns the process exit code: 0 success,
/// 1 infeasible or divergent, 2 bad input, 3 finished with fallbacks.
pub fn run(cli: &Cli) -> i32 {
    let result = execute(cli).and_then(|r| {
        print!("{}", r.summary);
        if let Some(dir) = &cli.common.out_dir {
            r.write(dir)?;
            for e in r.manifest() {
                println!("wrote {} ({} rows, {})", dir.join(&e.file).display(), e.rows, e.schema);
            }
        }
        Ok(r.status.exit_code())
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
