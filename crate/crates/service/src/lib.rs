//! The MATEC HTTP service: persistence, monitoring, and the API over the
//! orchestration engine.

pub mod api;
pub mod config;
pub mod demo;
pub mod log;
pub mod monitor;
pub mod problem;
pub mod state;
pub mod store;

use std::sync::Arc;
use std::time::Duration;

pub use config::ServiceConfig;
pub use state::AppState;

/// Binds, starts the monitor, and serves until the process is stopped.
/// Prints `listening on ADDR` once the socket is bound.
pub async fn serve(config: ServiceConfig) -> anyhow::Result<()> {
    let (state, report) = AppState::open(&config).await?;
    tracing::info!(
        records = report.records,
        truncated_bytes = report.truncated_bytes,
        interrupted = report.interrupted,
        "store recovered"
    );
    let monitor =
        tokio::spawn(monitor::run(Arc::clone(&state.store), Duration::from_secs(config.monitor_interval_secs)));
    let listener = tokio::net::TcpListener::bind(config.listen).await?;
    println!("listening on {}", listener.local_addr()?);
    let served = axum::serve(listener, api::router(state)).await;
    monitor.abort();
    Ok(served?)
}
