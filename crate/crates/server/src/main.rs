use std::path::PathBuf;

use clap::Parser;

use ccsim_server::registry::Registry;
use ccsim_server::{router, AppState};

#[derive(Parser)]
#[command(name = "ccsim-server", version, about = "HTTP control service for ccsim runs")]
struct Args {
    /// Listen address.
    #[arg(long, env = "CCSIM_BIND", default_value = "127.0.0.1:8080")]
    bind: String,
    /// Run index and per-run logs live here.
    #[arg(long, env = "CCSIM_DATA_DIR", default_value = "ccsim-data")]
    data_dir: PathBuf,
    /// Simultaneous simulations; further runs queue. Defaults to the CPU count.
    #[arg(long)]
    max_concurrent: Option<usize>,
    /// Serve a built dashboard from this directory at `/`.
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> std::process::ExitCode {
    let args = Args::parse();
    let slots = args
        .max_concurrent
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let registry = match Registry::open(&args.data_dir, slots) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: opening {}: {e}", args.data_dir.display());
            return std::process::ExitCode::from(2);
        }
    };
    let app = router(AppState { registry }, args.static_dir);
    let listener = match tokio::net::TcpListener::bind(&args.bind).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: binding {}: {e}", args.bind);
            return std::process::ExitCode::from(2);
        }
    };
    eprintln!("ccsim-server listening on http://{}", listener.local_addr().unwrap());
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    if let Err(e) = axum::serve(listener, app).with_graceful_shutdown(shutdown).await {
        eprintln!("error: {e}");
        return std::process::ExitCode::from(2);
    }
    std::process::ExitCode::SUCCESS
}
