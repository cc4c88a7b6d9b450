use thiserror::Error;

use crate::grid::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("network failed validation: {}", format_violations(.0))]
    InvalidNetwork(Vec<Violation>),

    #[error("unknown node {0}")]
    UnknownNode(usize),

    #[error("node {0} is the terminal node and has no downstream section")]
    TerminalNode(usize),

    #[error("unknown lateral {0}")]
    UnknownLateral(usize),

    #[error("unknown recloser {0:?}")]
    UnknownRecloser(String),

    #[error("unknown fuse {0:?}")]
    UnknownFuse(String),

    #[error("unknown DG unit {0}")]
    UnknownDg(usize),

    #[error("unknown curve family {0:?}")]
    UnknownCurveFamily(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("voltage collapse at node {node}: V = {v:.4} pu after {iteration} sweeps")]
    Diverged { node: usize, v: f64, iteration: usize },

    #[error("load flow has not converged; fault analysis requires a converged pre-fault state")]
    NotConverged,

    #[error("nonpositive terminal voltage {0} for DG unit")]
    NonPositiveVoltage(f64),

    #[error("fault network is singular")]
    SingularNetwork,

    #[error("time {t} s is at or below the curve asymptote {asymptote} s")]
    UnreachableTime { t: f64, asymptote: f64 },

    #[error("margin of {delta_t} s is unreachable on {curve}")]
    UnreachableMargin { delta_t: f64, curve: String },

    #[error("sweep too coarse: {got} points per decade, at least {need} required")]
    SweepTooCoarse { got: usize, need: usize },

    #[error("degenerate coordination range for {pair}: min {min} >= max {max}")]
    DegenerateRange { pair: String, min: f64, max: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("malformed input in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| format!("{}: {}", v.element, v.rule))
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    /// Exit code of the command-line shell: 1 for infeasible or divergent
    /// studies, 2 for anything wrong with the inputs.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Diverged { .. } | Error::NotConverged | Error::Infeasible(_) => 1,
            Error::SingularNetwork | Error::UnreachableMargin { .. } => 1,
            _ => 2,
        }
    }
}
