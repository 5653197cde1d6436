//! Deterministic simulation of blockchain autonomous systems joined by gateways.
//!
//! Chains ([`chain`]) confirm units with a quorum/latency consensus model.
//! Gateways ([`gateway`]) advertise reachability, serve delegated reads,
//! vouch for confirmations and move asset authority between chains, with
//! the [`identity`] resolver as the single source of truth for where an
//! asset lives. [`valuenet`] routes value across currency chains through
//! reserve-holding connectors, [`survivor`] retries application
//! transactions across candidate chains, and [`simnet`] runs all of it on a
//! seeded discrete-event clock with fault injection. [`runner`] writes run
//! artifacts to disk and [`batch`] fans independent seeds out over rayon.

pub mod batch;
pub mod chain;
pub mod gateway;
pub mod identity;
pub mod ids;
pub mod runner;
pub mod scenario;
pub mod simnet;
pub mod survivor;
pub mod valuenet;

pub use ids::{AppId, ChainId, ConnectorId, Digest, GatewayId, IdempotencyKey, LocalRef, NodeId, PathId, Tick, TransferId};
