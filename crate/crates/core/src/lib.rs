//! Simulator for collective self-consumption energy communities.
//!
//! Metered imports and exports of community members are distributed through
//! an ex-post local energy market ([`allocation`]), settled into member bills
//! under a French-style tax structure ([`billing`]), and scored with a set of
//! fairness indicators ([`fairness`]). [`scenario`] generates synthetic
//! communities and [`harness`] runs whole sweeps over communities, PV uptake
//! levels and mechanisms.

pub mod allocation;
pub mod billing;
pub mod error;
pub mod exec;
pub mod fairness;
pub mod harness;
pub mod io;
pub mod model;
pub mod scenario;
pub mod tariff;

pub use error::{Error, Result};
pub use exec::Execution;

/// Tolerance for energy equality and saturation tests, kWh.
pub const EPSILON_KWH: f64 = 1e-9;
