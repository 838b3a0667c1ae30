//! Federated deep reinforcement learning for physical-layer key generation.
//!
//! Two parties observe correlated sensor signals. Each learns, with a
//! centralized-critic actor-critic method and federated averaging of the
//! actors, which samples to turn into key bits; at run time each derives its
//! key alone from its own signal.

pub mod agent;
pub mod cli;
pub mod config;
pub mod env;
pub mod error;
pub mod eval;
pub mod federated;
pub mod keygen;
pub mod nn;
pub mod randomness;
pub mod signal;
pub mod training;

pub use error::{Error, Result};
