//! Decentralized optimization over a communication graph.
//!
//! The crate implements an edge-synchronous accelerated dual coordinate
//! descent method (`esdacd`) in two equivalent forms: an edge-space form
//! that updates one dual variable per edge, and a node-local form in which
//! every node only keeps its own pair of iterates and lazily catches up on
//! the global contraction steps it missed. Around it sit the pieces needed
//! to run and compare it:
//!
//! - [`graph`]: topologies, incidence matrices and Laplacians.
//! - [`spectral`]: eigendecompositions, projector diagonals and the step
//!   sizes / rate derived from them.
//! - [`objectives`]: local functions and their conjugate-gradient oracles.
//! - [`baselines`]: pairwise gossip, heavy-ball gossip and the synchronous
//!   dual accelerated method (SSDA).
//! - [`timing`]: common-seed edge schedules and the idealized delay model.
//! - [`harness`]: configuration, synthetic datasets and CSV output.

pub mod baselines;
pub mod error;
pub mod esdacd;
pub mod graph;
pub mod harness;
pub mod instance;
pub mod objectives;
pub mod spectral;
pub mod timing;
pub mod trace;

pub use error::{Error, Result};
pub use graph::{Graph, IncidenceMatrix, TopologyKind};
pub use instance::Instance;
pub use objectives::{LocalObjective, ObjectiveKind};
pub use spectral::SpectralParams;
pub use timing::{Schedule, TimingResult};
pub use trace::{RunTrace, TraceRecord};
