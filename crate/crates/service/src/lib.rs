//! Engineering assistant service.
//!
//! An engineer's project (documents plus a hardware configuration) is
//! analyzed with the trained models; the results come back as
//! recommendations the engineer accepts or rejects, and missing project
//! attributes come back as questions. Accepting a recommendation or
//! answering a question changes the project and triggers a new analysis.
//! A small triple store records what was derived from what.
//!
//! [`api::router`] exposes it all over HTTP and [`serve`] runs it.

pub mod api;
pub mod assistant;
pub mod knowledge;
pub mod models;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

pub use assistant::{analyze_project, AssistantError, Decision, Event, Payload, Project, ProjectState};
pub use knowledge::{Pattern, Triple, TripleStore};
pub use models::Models;
pub use store::{NewProject, Store, StoreError};

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(store: Arc<Store>, addr: SocketAddr, static_dir: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, api::router(store, static_dir)).await
}
