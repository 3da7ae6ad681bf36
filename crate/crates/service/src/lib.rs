//! REST backend: profiles, plans, feedback, retraining and history over a
//! JSON-file store.

pub mod api;
pub mod error;
pub mod store;

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

pub use api::{router, AppState};
pub use error::{ApiError, ErrorBody};
pub use store::Store;

use beacon_core::catalog::Catalog;

/// Open the store and build the shared state.
pub fn open(catalog: Catalog, store_dir: &Path, api_key: Option<String>) -> std::io::Result<Arc<AppState>> {
    Ok(AppState::new(catalog, Store::open(store_dir)?, api_key))
}

/// Serve until Ctrl-C.
pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
