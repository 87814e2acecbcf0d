use egbo_service::{serve, AppState};
use tokio::net::TcpListener;

use crate::{runtime, CliError, ServeArgs};

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(e) => {
                log::warn!("cannot install SIGTERM handler: {e}");
                std::future::pending::<()>().await;
            }
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
    eprintln!("shutting down");
}

pub fn execute(args: ServeArgs) -> Result<(), CliError> {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(runtime)?;
    rt.block_on(async move {
        let addr = format!("{}:{}", args.host, args.port);
        let listener = TcpListener::bind(&addr)
            .await
            .map_err(|e| CliError::Runtime(format!("cannot listen on {addr}: {e}")))?;
        let state = AppState::open(&args.data, args.seed)
            .await
            .map_err(|e| CliError::Runtime(format!("cannot open data directory {}: {e}", args.data.display())))?;
        let local = listener.local_addr().map_err(runtime)?;
        println!("listening on http://{local} (data {})", args.data.display());
        serve(listener, state, shutdown_signal()).await.map_err(runtime)?;
        println!("sessions saved to {}", args.data.display());
        Ok(())
    })
}
