//! Listeners and lifecycle.

use std::io;
use std::net::SocketAddr;
use std::sync::Arc;

use tokio::net::{TcpListener, TcpStream};
use tokio::task::JoinHandle;
use tokio_util::codec::Framed;
use tokio_util::sync::CancellationToken;
use tokio_util::task::TaskTracker;

use crate::config::{ConfigError, ServerConfig};
use crate::frame::FrameCodec;
use crate::hub::Hub;
use crate::session::run_session;
use crate::store::{Store, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("address {0} is already in use")]
    AddressInUse(SocketAddr),
    #[error("{addr}: {source}")]
    Bind { addr: SocketAddr, source: io::Error },
    #[error(transparent)]
    Io(#[from] io::Error),
}

async fn bind(addr: SocketAddr) -> Result<TcpListener, ServerError> {
    TcpListener::bind(addr)
        .await
        .map_err(|source| match source.kind() {
            io::ErrorKind::AddrInUse => ServerError::AddressInUse(addr),
            _ => ServerError::Bind { addr, source },
        })
}

pub struct Server {
    hub: Arc<Hub>,
    tcp: TcpListener,
    http: Option<TcpListener>,
}

impl Server {
    /// Loads every asset named by `config` and binds its listeners.
    pub async fn bind(config: &ServerConfig) -> Result<Server, ServerError> {
        let hub = Hub::new(
            Arc::new(config.pipeline()?),
            config.transcriber()?,
            Arc::new(config.catalog()?),
            Store::open(&config.storage_dir)?,
            config.hub_config(),
        )?;
        Self::with_hub(Arc::new(hub), config.listen, config.http_listen).await
    }

    pub async fn with_hub(
        hub: Arc<Hub>,
        listen: SocketAddr,
        http_listen: Option<SocketAddr>,
    ) -> Result<Server, ServerError> {
        let tcp = bind(listen).await?;
        let http = match http_listen {
            Some(addr) => Some(bind(addr).await?),
            None => None,
        };
        Ok(Server { hub, tcp, http })
    }

    pub fn hub(&self) -> &Arc<Hub> {
        &self.hub
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.tcp.local_addr().expect("bound listener")
    }

    pub fn http_addr(&self) -> Option<SocketAddr> {
        self.http
            .as_ref()
            .map(|l| l.local_addr().expect("bound listener"))
    }

    /// Serves until `shutdown` fires, then waits for open sessions to end.
    pub async fn run(self, shutdown: CancellationToken) -> Result<(), ServerError> {
        let tracker = TaskTracker::new();
        if let Some(listener) = self.http {
            let app = crate::http::router(self.hub.clone(), shutdown.clone());
            let token = shutdown.clone();
            tracker.spawn(async move {
                if let Err(e) = axum::serve(listener, app)
                    .with_graceful_shutdown(token.cancelled_owned())
                    .await
                {
                    tracing::error!(error = %e, "http listener failed");
                }
            });
        }
        tracing::info!(addr = %self.tcp.local_addr()?, "relay listening");
        loop {
            let accepted = tokio::select! {
                _ = shutdown.cancelled() => break,
                accepted = self.tcp.accept() => accepted,
            };
            match accepted {
                Ok((stream, peer)) => {
                    tracing::debug!(%peer, "connection");
                    tracker.spawn(tcp_session(self.hub.clone(), stream, shutdown.clone()));
                }
                Err(e) => tracing::warn!(error = %e, "accept failed"),
            }
        }
        tracker.close();
        tracker.wait().await;
        tracing::info!("relay stopped");
        Ok(())
    }

    /// Runs the server on the current runtime and returns a handle.
    pub fn spawn(self) -> ServerHandle {
        let token = CancellationToken::new();
        let addr = self.local_addr();
        let http_addr = self.http_addr();
        let hub = self.hub.clone();
        let task = tokio::spawn(self.run(token.clone()));
        ServerHandle {
            addr,
            http_addr,
            hub,
            token,
            task,
        }
    }
}

async fn tcp_session(hub: Arc<Hub>, stream: TcpStream, shutdown: CancellationToken) {
    let _ = stream.set_nodelay(true);
    let (sink, stream) = futures::StreamExt::split(Framed::new(stream, FrameCodec::default()));
    run_session(hub, stream, sink, shutdown).await;
}

pub struct ServerHandle {
    pub addr: SocketAddr,
    pub http_addr: Option<SocketAddr>,
    pub hub: Arc<Hub>,
    token: CancellationToken,
    task: JoinHandle<Result<(), ServerError>>,
}

impl ServerHandle {
    pub async fn shutdown(self) -> Result<(), ServerError> {
        self.token.cancel();
        self.task.await.map_err(io::Error::other)?
    }
}
