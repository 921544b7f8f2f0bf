//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Invalid configuration (bad schema, infeasible budget, unsupported combination).
    #[error("config error: {0}")]
    Config(String),

    /// A finitary resolution (cell, order comparison, component) did not
    /// certify within the exploration cap. Carries the radius explored.
    #[error("unresolved after exploring radius {radius}: {what}")]
    Unresolved { what: String, radius: u64 },

    /// An exact-oracle query exceeds the enumeration capacity ceiling.
    #[error("capacity exceeded: {0} latent configurations (ceiling 2^26)")]
    Capacity(f64),

    /// A conditioning labeling has probability zero under the process law.
    /// Signals an engine bug; never expected on engine-generated inputs.
    #[error("conditioning labeling has probability zero")]
    ZeroProbability,

    /// The engine hit its time horizon with active agents remaining.
    #[error("engine did not terminate by t={max_time}: {stuck} agent(s) still active")]
    NonTermination { max_time: u64, stuck: usize },

    /// The engine can make no further progress: active agents remain but
    /// every bit on the graph has been read.
    #[error("engine starved at t={time}: {stuck} agent(s) active with no bits remaining")]
    Starved { time: u64, stuck: usize },

    /// API misuse (e.g. stepping a halted simulation).
    #[error("usage error: {0}")]
    Usage(String),

    /// Automorphism image falls outside the declared window.
    #[error("vertex maps outside the declared window")]
    OutOfWindow,

    /// I/O or serialization failure (CLI layer).
    #[error("{0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
