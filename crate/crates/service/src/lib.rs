//! HTTP/JSON API over compiled plan spaces and navigation sessions.
//!
//! | Method | Path | Body | Response |
//! |---|---|---|---|
//! | POST | `/tasks` | task JSON | `{task_id}` |
//! | POST | `/tasks/{id}/spaces` | `{length}` | `{space_id, length, count}` |
//! | GET | `/spaces/{id}` | | `{count, brave, cautious, facets, facet_count}` |
//! | POST | `/spaces/{id}/prob` | `{query}` | `{num, den}` |
//! | POST | `/spaces/{id}/sample` | `{n, seed}` | `{plans}` |
//! | POST | `/spaces/{id}/sessions` | `{sample_k?, seed?}` | `{session_id, snapshot}` |
//! | GET | `/sessions/{id}` | | snapshot |
//! | POST | `/sessions/{id}/commit` | `{commitment}` | snapshot |
//! | POST | `/sessions/{id}/undo` | | snapshot |
//!
//! Counts are decimal strings. Errors are `{"error": message}` with status
//! 404 (unknown id), 409 (inconsistent or plan-eliminating commitment,
//! nothing to undo, sampling an empty space), 422 (malformed body or query)
//! or 503 (compilation budget exceeded).

mod api;
mod store;

use std::sync::Arc;

use tokio::net::TcpListener;

pub use api::{router, ApiError, AppState};
pub use store::{space_id, ServiceConfig, SessionSlot, SessionStore, StoreError};

/// Serves the API on an already bound listener until the process is stopped.
pub async fn serve(listener: TcpListener, config: ServiceConfig) -> std::io::Result<()> {
    let app = router(Arc::new(SessionStore::new(config)));
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, "listening");
    }
    axum::serve(listener, app).await
}
