//! Session service for interactive exploration of a tree over its dataset.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

pub mod api;
pub mod session;

pub use api::router;
pub use session::{CreateSession, EvaluationDelta, LayoutEdit, Session, SessionError, SessionStore, StoreConfig, Workspace};

#[derive(Debug, Clone, Default)]
pub struct ServeConfig {
    pub store: StoreConfig,
    pub static_dir: Option<PathBuf>,
}

/// Serves until ctrl-c.
pub async fn serve(addr: SocketAddr, config: ServeConfig) -> std::io::Result<()> {
    let store = Arc::new(SessionStore::new(config.store));
    let app = router(store, config.static_dir);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
