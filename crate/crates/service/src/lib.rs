//! HTTP/JSON advisor over a task-event store.
//!
//! | Method | Path | Stage |
//! |--------|------|-------|
//! | `POST` / `GET` | `/events` | ingest a JSON array or JSONL; export JSONL |
//! | `GET` | `/patterns?task_type=` | mined disruptiveness rules |
//! | `GET` | `/advice/switch?task=&initiator=` | before a switch |
//! | `GET` | `/suspension/{task}` | while suspended |
//! | `GET` | `/resumption/{task}/cues` | when resuming |
//! | `POST` | `/resumption/{task}/cue-visit` | record a cue visit |
//! | `GET` | `/graph/communication?from=&to=` | stakeholder graph |
//!
//! Errors are `{"error": "..."}` with 400 for bad input, 404 for an unknown
//! task and 409 when the task is in the wrong phase.

pub mod advisor;
pub mod config;
pub mod error;
pub mod routes;
pub mod state;

use std::sync::Arc;

pub use config::Config;
pub use error::ApiError;
pub use routes::router;
pub use state::{AppState, StartError};

/// Binds `config.bind:config.port` and serves until Ctrl-C.
pub async fn serve(config: Config) -> Result<(), Box<dyn std::error::Error + Send + Sync>> {
    let addr = format!("{}:{}", config.bind, config.port);
    let state = Arc::new(AppState::open(config)?);
    let listener = tokio::net::TcpListener::bind(&addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
