use std::path::PathBuf;
use std::sync::Arc;

use tokio::net::TcpListener;

use acap_middleware::callee::serve;
use acap_middleware::{AdherenceMode, CalleeConfig};

use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct ServeArgs {
    pub config: Option<PathBuf>,
    pub listen: Option<String>,
    pub mode: Option<AdherenceMode>,
}

/// Serves a callee until interrupted. Configuration: defaults, then the
/// TOML file, then `ACAP_*` variables, then flags.
pub fn cmd_serve(args: &ServeArgs) -> Result<(), CliError> {
    let mut config =
        CalleeConfig::load(args.config.as_deref()).map_err(|e| CliError::input(e.to_string()))?;
    if let Some(listen) = &args.listen {
        config.listen = listen.clone();
    }
    if let Some(mode) = args.mode {
        config.adherence_mode = mode;
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::failed(e.to_string()))?;
    runtime.block_on(async {
        let listener = TcpListener::bind(&config.listen)
            .await
            .map_err(|e| CliError::failed(format!("binding {}: {e}", config.listen)))?;
        let base_url = match &config.public_url {
            Some(url) => url.clone(),
            None => format!(
                "http://{}",
                listener
                    .local_addr()
                    .map_err(|e| CliError::failed(e.to_string()))?
            ),
        };
        let service = config
            .build_service(&base_url)
            .map_err(|e| CliError::failed(e.to_string()))?;
        tracing::info!(url = %base_url, mode = ?config.adherence_mode, "callee listening");
        eprintln!("serving {base_url}");
        serve(listener, Arc::new(service), async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::failed(e.to_string()))
    })
}
