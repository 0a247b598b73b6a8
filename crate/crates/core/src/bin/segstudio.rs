use clap::Parser;
use segstudio::api::{bind, serve, ApiConfig, App};

fn main() -> std::process::ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "segstudio=info".into()),
        )
        .init();
    let config = ApiConfig::parse();
    match run(config) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("segstudio: {e}");
            std::process::ExitCode::FAILURE
        }
    }
}

fn run(config: ApiConfig) -> segstudio::Result<()> {
    let app = App::from_config(&config)?;
    let listener = bind(config.port, true)?;
    tracing::info!(port = config.port, data_dir = %config.data_dir.display(), "listening");
    let rt = tokio::runtime::Runtime::new()
        .map_err(|e| segstudio::Error::Startup(format!("runtime: {e}")))?;
    rt.block_on(serve(app, listener, shutdown_signal()))
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        if let Ok(mut s) = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate())
        {
            s.recv().await;
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    tracing::info!("shutting down");
}
