//! Hold-length analysis for coarse-grained guidance of one vehicle on a ring road.
//!
//! The model is a ring of `n` optimal-velocity vehicles, one of which follows a
//! piecewise-constant command `u = -K x(t_k)` refreshed every `delta` seconds.
//! The crate simulates that loop, bounds the admissible hold length with
//! Lyapunov and Lyapunov-Krasovskii certificates, and synthesizes gains.

pub mod config;
pub mod error;
pub mod h2_synth;
pub mod holdlimit;
pub mod io;
pub mod linalg;
pub mod lmi_cert;
pub mod lyapunov;
pub mod report;
pub mod ring_model;
pub mod sdp;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};
