//! Finitely dependent invariant random fields on lattices, realized as
//! finitary factors of i.i.d. processes.
//!
//! The library builds the full pipeline: lattice geometry ([`graph`]),
//! seeded counter-based randomness ([`randomness`]), nested cell processes
//! ([`cell`]), finitary random total orders ([`order`]), bit-stream
//! simulation of discrete distributions ([`ky`]), exact process oracles
//! ([`oracle`]), the time-stepped coding engine ([`engine`]) and the
//! statistical verification harness ([`verify`]).

pub mod cell;
pub mod config;
pub mod engine;
pub mod error;
pub mod graph;
pub mod ky;
pub mod oracle;
pub mod order;
pub mod randomness;
pub mod verify;

pub use error::{Error, Result};
