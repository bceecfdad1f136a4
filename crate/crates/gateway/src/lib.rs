//! HTTP side of the triage pipeline: clients for remote scorers and
//! resolvers, and the blinded review service.

pub mod client;
pub mod server;
pub mod service;

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

pub use client::{HttpResolver, HttpScorer};
pub use server::{spawn, RunningServer, ServerError};
pub use service::{router, Service, StateError};

use triage_core::PipelineConfig;

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("refusing to start: {0}")]
    State(#[from] StateError),
    #[error(transparent)]
    Server(#[from] ServerError),
}

/// Load state, bind `addr` and serve the review API in the background.
pub fn serve(cfg: PipelineConfig, corpus_dir: &Path, state_dir: &Path, addr: SocketAddr) -> Result<RunningServer, GatewayError> {
    let service = Service::load(cfg, corpus_dir, state_dir)?;
    tracing::info!(%addr, state = %state_dir.display(), "starting review service");
    Ok(spawn(router(Arc::new(service)), addr)?)
}
