//! Binds a request handler to protected channels.

use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use log::{debug, warn};
use rand::rngs::OsRng;

use crate::abe::SecureRng;
use crate::channel::{ChannelError, Frame, Handshake, SecureSession, TcpTransport, Transport, FRAME_HELLO};
use crate::suite::CryptoSuite;

/// Turns one decrypted request into one reply.
pub trait Service {
    fn handle(&mut self, kind: u8, body: &[u8], rng: &mut dyn SecureRng) -> (u8, Vec<u8>);
}

impl<S: Service + ?Sized> Service for Box<S> {
    fn handle(&mut self, kind: u8, body: &[u8], rng: &mut dyn SecureRng) -> (u8, Vec<u8>) {
        (**self).handle(kind, body, rng)
    }
}

/// Server half of one connection, without I/O: the first frame must be a
/// hello, every later frame a protected request.
#[derive(Debug)]
pub struct ServerConnection {
    suite: CryptoSuite,
    session: Option<SecureSession>,
}

impl ServerConnection {
    pub fn new(suite: CryptoSuite) -> Self {
        Self { suite, session: None }
    }

    pub fn is_established(&self) -> bool {
        self.session.is_some()
    }

    /// The frame to send back. An error means the connection must close.
    pub fn on_frame(
        &mut self,
        frame: &Frame,
        service: &mut dyn Service,
        rng: &mut dyn SecureRng,
    ) -> Result<Frame, ChannelError> {
        match &mut self.session {
            None => {
                let (session, reply) = Handshake::respond(self.suite, frame, rng)?;
                self.session = Some(session);
                Ok(reply)
            }
            Some(session) => {
                if frame.kind == FRAME_HELLO {
                    session.abort();
                    return Err(ChannelError::UnexpectedFrame(FRAME_HELLO));
                }
                let (kind, body) = session.open(frame)?;
                let (rkind, rbody) = service.handle(kind, &body, rng);
                session.seal(rkind, &rbody)
            }
        }
    }
}

/// Serves one connection until the peer closes or the session aborts.
pub fn serve_connection<T: Transport>(
    mut transport: T,
    suite: CryptoSuite,
    service: &mut dyn Service,
    rng: &mut dyn SecureRng,
) -> Result<(), ChannelError> {
    let mut conn = ServerConnection::new(suite);
    loop {
        let frame = match transport.recv_frame() {
            Ok(f) => f,
            Err(ChannelError::Closed) => return Ok(()),
            Err(e) => return Err(e),
        };
        let reply = conn.on_frame(&frame, service, rng)?;
        transport.send_frame(&reply)?;
    }
}

/// Locks a shared service for each request so connections interleave.
struct Shared<S>(Arc<Mutex<S>>);

impl<S: Service> Service for Shared<S> {
    fn handle(&mut self, kind: u8, body: &[u8], rng: &mut dyn SecureRng) -> (u8, Vec<u8>) {
        self.0.lock().unwrap_or_else(|p| p.into_inner()).handle(kind, body, rng)
    }
}

/// Accepts connections forever, one thread each.
pub fn serve_tcp<S>(listener: TcpListener, suite: CryptoSuite, service: Arc<Mutex<S>>) -> std::io::Result<()>
where
    S: Service + Send + 'static,
{
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                warn!("accept failed: {e}");
                continue;
            }
        };
        let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
        let service = Arc::clone(&service);
        thread::spawn(move || {
            let transport = match TcpTransport::new(stream) {
                Ok(t) => t,
                Err(e) => return warn!("{peer}: {e}"),
            };
            let mut shared = Shared(service);
            match serve_connection(transport, suite, &mut shared, &mut OsRng) {
                Ok(()) => debug!("{peer}: closed"),
                Err(e) => warn!("{peer}: session ended: {e}"),
            }
        });
    }
    Ok(())
}

/// Seconds since the Unix epoch, the clock MST expiries are measured on.
pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// One node of a persisted deployment, served on the wall clock. Picks up
/// index and key changes made by other processes before every request.
pub struct DeploymentService {
    deployment: super::Deployment,
    id: String,
    registry_only: bool,
}

impl DeploymentService {
    /// Serves node `id`.
    pub fn node(deployment: super::Deployment, id: &str) -> Result<Self, super::NodeError> {
        if deployment.authorization_node(id).is_none() && deployment.service_node(id).is_none() {
            return Err(super::NodeError::UnknownNode(id.to_owned()));
        }
        Ok(Self {
            deployment,
            id: id.to_owned(),
            registry_only: false,
        })
    }

    /// Serves index snapshots only: the authority's public face.
    pub fn registry(deployment: super::Deployment) -> Self {
        Self {
            deployment,
            id: String::new(),
            registry_only: true,
        }
    }
}

impl Service for DeploymentService {
    fn handle(&mut self, kind: u8, body: &[u8], rng: &mut dyn SecureRng) -> (u8, Vec<u8>) {
        if let Err(e) = self.deployment.refresh() {
            warn!("refresh failed: {e}");
        }
        if self.registry_only {
            return match kind {
                super::proto::INDEX_REQUEST => (super::proto::INDEX_SNAPSHOT, self.deployment.index().to_json().into_bytes()),
                other => super::reply(Err(super::NodeError::Unsupported(other))),
            };
        }
        super::reply(self.deployment.handle(&self.id, kind, body, unix_now(), rng))
    }
}
