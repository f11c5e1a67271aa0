//! Achievable rate regions of RIS-assisted multi-user MIMO broadcast
//! channels under I/Q imbalance, with proper or improper Gaussian signaling
//! and optional one-layer rate splitting.
//!
//! Complex baseband models are mapped to real `[Re; Im]` form
//! ([`wl_model`]), rates are evaluated with log-determinants ([`rate`]),
//! and the weighted max-min rate problem is solved by alternating
//! minorize-maximize steps over covariances and RIS phases ([`ao`]) using
//! concave lower bounds ([`surrogate`]) and a barrier interior-point solver
//! ([`solver`]).

pub mod ao;
pub mod cli;
pub mod error;
pub mod io;
pub mod linalg;
pub mod rate;
pub mod region;
pub mod scenario;
pub mod solver;
pub mod surrogate;
pub mod validate;
pub mod wl_model;
