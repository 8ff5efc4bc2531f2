//! Discrete-event simulator for opportunistic networks of smartphones.
//!
//! The stack has five layers: a road map, the Working Day Movement Model,
//! random traffic, an infrastructure-mode WiFi role state machine
//! (idle / access point / client), and pluggable routing (Epidemic, binary
//! Spray-and-Wait, and home-gated HRSON).

pub mod engine;
pub mod error;
pub mod geometry;
pub mod map;
pub mod metrics;
pub mod mobility;
pub mod radio;
pub mod routing;
pub mod scenario;
pub mod traffic;

pub use error::{Result, SimError};
pub use geometry::{Point, Rect};
