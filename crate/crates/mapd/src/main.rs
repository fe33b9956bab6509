use std::sync::Arc;

use emu_core::compile::Manifest;
use emu_mapd::config::{Config, Mode, RuntimeKind};
use emu_mapd::{router, AppState, DockerCli, EventHub, LocalRuntime, Runtime, TopologyDocument};
use tracing_subscriber::EnvFilter;

fn load_manifest(cfg: &Config) -> Result<Option<Manifest>, String> {
    let Some(dir) = &cfg.manifest else {
        return Ok(None);
    };
    let path = dir.join(emu_core::compile::MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    Manifest::from_yaml(&text)
        .map(Some)
        .map_err(|e| e.to_string())
}

fn state(cfg: &Config) -> Result<Arc<AppState>, String> {
    let hub = EventHub::new(cfg.queue);
    match cfg.mode {
        Mode::Offline => {
            let doc = match &cfg.manifest {
                Some(dir) => TopologyDocument::load_manifest_dir(dir).map_err(|e| e.to_string())?,
                None => TopologyDocument::default(),
            };
            let state = AppState::offline(doc, hub);
            state.start_scripted(cfg.seed, cfg.tick);
            Ok(state)
        }
        Mode::Live => {
            let runtime: Arc<dyn Runtime> = match cfg.runtime {
                RuntimeKind::Docker => Arc::new(DockerCli::new(cfg.runtime_socket.clone())),
                RuntimeKind::Local => {
                    let manifest = load_manifest(cfg)?.expect("checked by config");
                    Arc::new(LocalRuntime::from_manifest(&manifest))
                }
            };
            AppState::live(runtime, hub).map_err(|e| e.to_string())
        }
    }
}

#[tokio::main]
async fn main() {
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")),
        )
        .init();
    let cfg = match Config::from_env() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("mapd: {e}");
            std::process::exit(2);
        }
    };
    let state = match tokio::task::block_in_place(|| state(&cfg)) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("mapd: {e}");
            std::process::exit(1);
        }
    };
    let nodes = state.topology().nodes.len();
    let addr = std::net::SocketAddr::from(([0, 0, 0, 0], cfg.port));
    let listener = match tokio::net::TcpListener::bind(addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("mapd: bind {addr}: {e}");
            std::process::exit(1);
        }
    };
    tracing::info!(%addr, ?cfg.mode, nodes, "listening");
    let app = router(state.clone());
    let served = axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await;
    state.shutdown();
    if let Err(e) = served {
        eprintln!("mapd: {e}");
        std::process::exit(1);
    }
}
