use std::collections::VecDeque;
use std::fmt::Write as _;
use std::sync::{Arc, Mutex, MutexGuard};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::abe::SecureRng;
use crate::channel::{ChannelError, Frame, Transport};
use crate::client::Connector;
use crate::nodes::server::{ServerConnection, Service};
use crate::nodes::{reply, Deployment, NodeRole};

/// Which way a frame travels on a link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LinkDirection {
    ToNode,
    ToClient,
}

impl LinkDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ToNode => ">",
            Self::ToClient => "<",
        }
    }
}

/// What happened to a frame on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delivery {
    Delivered,
    Tampered,
    Dropped,
    Replayed,
    Injected,
}

impl Delivery {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Delivered => "delivered",
            Self::Tampered => "tampered",
            Self::Dropped => "dropped",
            Self::Replayed => "replayed",
            Self::Injected => "injected",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub seq: u64,
    pub time: u64,
    pub client: String,
    pub node: String,
    pub conn: u64,
    pub direction: LinkDirection,
    pub delivery: Delivery,
    /// Encoded frame exactly as it crossed the wire.
    pub bytes: Vec<u8>,
    pub index_version: u64,
}

/// Every frame that crossed the simulated network, in order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    /// Line-oriented dump, stable across runs with the same seed.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{} t={} {}{}{} c{} v{} {} {}",
                e.seq,
                e.time,
                e.client,
                e.direction.as_str(),
                e.node,
                e.conn,
                e.index_version,
                e.delivery.as_str(),
                hex::encode(&e.bytes)
            );
        }
        out
    }

    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.dump().as_bytes()).into()
    }

    /// Everything an eavesdropper on all links saw.
    pub fn wire_bytes(&self) -> Vec<u8> {
        self.entries.iter().flat_map(|e| e.bytes.iter().copied()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Selects frames on the network. Empty fields match anything.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LinkFilter {
    pub client: Option<String>,
    pub node: Option<String>,
    pub direction: Option<LinkDirection>,
    /// Only frames of this type byte.
    pub kind: Option<u8>,
}

impl LinkFilter {
    pub fn any() -> Self {
        Self::default()
    }

    fn matches(&self, client: &str, node: &str, dir: LinkDirection, kind: u8) -> bool {
        self.client.as_deref().is_none_or(|c| c == client)
            && self.node.as_deref().is_none_or(|n| n == node)
            && self.direction.is_none_or(|d| d == dir)
            && self.kind.is_none_or(|k| k == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HookAction {
    /// Flip one bit of the encoded frame; the index wraps around its length.
    Tamper { bit: usize },
    Drop,
    /// Deliver the frame, then deliver it again.
    Replay,
    /// Deliver these bytes before the frame.
    Inject(Vec<u8>),
}

/// An adversary hook: acts on the `skip`-th and following matching frames,
/// `count` times (forever when `None`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hook {
    pub filter: LinkFilter,
    pub action: HookAction,
    pub skip: u64,
    pub count: Option<u64>,
}

impl Hook {
    pub fn once(filter: LinkFilter, action: HookAction, skip: u64) -> Self {
        Self {
            filter,
            action,
            skip,
            count: Some(1),
        }
    }
}

/// A connection that ended because the node rejected a frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Abort {
    pub conn: u64,
    pub seq: u64,
    pub error: String,
}

/// What a controlled node does instead of following the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeControl {
    /// Close every connection on the first request.
    DenyService,
}

struct HookState {
    hook: Hook,
    seen: u64,
    fired: u64,
}

struct World {
    deployment: Deployment,
    clock: u64,
    rng: ChaCha20Rng,
    transcript: Transcript,
    hooks: Vec<HookState>,
    next_conn: u64,
    aborts: Vec<Abort>,
    controlled: std::collections::BTreeMap<String, NodeControl>,
    opened: Vec<(u64, String, String)>,
    /// Connections the client end dropped, with the transcript length then.
    dropped: Vec<(u64, u64)>,
}

impl World {
    fn record(&mut self, client: &str, node: &str, conn: u64, dir: LinkDirection, delivery: Delivery, bytes: Vec<u8>) {
        let seq = self.transcript.entries.len() as u64;
        self.transcript.entries.push(TranscriptEntry {
            seq,
            time: self.clock,
            client: client.to_owned(),
            node: node.to_owned(),
            conn,
            direction: dir,
            delivery,
            bytes,
            index_version: self.deployment.index().version(),
        });
    }

    /// Runs the frame through the hooks and returns what the receiver gets.
    fn intercept(&mut self, client: &str, node: &str, conn: u64, dir: LinkDirection, frame: &Frame) -> Vec<Vec<u8>> {
        let bytes = frame.encode();
        let mut action = None;
        for h in &mut self.hooks {
            if !h.hook.filter.matches(client, node, dir, frame.kind) {
                continue;
            }
            h.seen += 1;
            if h.seen <= h.hook.skip || h.hook.count.is_some_and(|c| h.fired >= c) {
                continue;
            }
            h.fired += 1;
            action = Some(h.hook.action.clone());
            break;
        }
        match action {
            None => {
                self.record(client, node, conn, dir, Delivery::Delivered, bytes.clone());
                vec![bytes]
            }
            Some(HookAction::Tamper { bit }) => {
                let mut b = bytes;
                let i = bit % (b.len() * 8);
                b[i / 8] ^= 1 << (i % 8);
                self.record(client, node, conn, dir, Delivery::Tampered, b.clone());
                vec![b]
            }
            Some(HookAction::Drop) => {
                self.record(client, node, conn, dir, Delivery::Dropped, bytes);
                Vec::new()
            }
            Some(HookAction::Replay) => {
                self.record(client, node, conn, dir, Delivery::Delivered, bytes.clone());
                self.record(client, node, conn, dir, Delivery::Replayed, bytes.clone());
                vec![bytes.clone(), bytes]
            }
            Some(HookAction::Inject(extra)) => {
                self.record(client, node, conn, dir, Delivery::Injected, extra.clone());
                self.record(client, node, conn, dir, Delivery::Delivered, bytes.clone());
                vec![extra, bytes]
            }
        }
    }

    /// Live node serving `address`: matched by address, then by id.
    fn resolve(&self, address: &str) -> Option<String> {
        let index = self.deployment.index();
        let live = |r| index.live(r).find(|n| n.address == address).map(|n| n.id.clone());
        live(NodeRole::Authorization)
            .or_else(|| live(NodeRole::Service))
            .or_else(|| index.is_whitelisted(address).then(|| address.to_owned()))
    }
}

/// Adapter giving one node of the deployment the server-side interface.
struct NodeService<'a> {
    deployment: &'a mut Deployment,
    id: &'a str,
    now: u64,
}

impl Service for NodeService<'_> {
    fn handle(&mut self, kind: u8, body: &[u8], rng: &mut dyn SecureRng) -> (u8, Vec<u8>) {
        reply(self.deployment.handle(self.id, kind, body, self.now, rng))
    }
}

/// Deterministic in-memory network around a deployment.
///
/// Single-threaded and event-ordered: a request is delivered and answered
/// inside the client's `send`, so the same seed and the same calls always
/// give the same transcript.
#[derive(Clone)]
pub struct SimNet {
    world: Arc<Mutex<World>>,
}

impl SimNet {
    pub fn new(deployment: Deployment, seed: u64) -> Self {
        Self {
            world: Arc::new(Mutex::new(World {
                deployment,
                clock: 0,
                rng: ChaCha20Rng::seed_from_u64(seed),
                transcript: Transcript::default(),
                hooks: Vec::new(),
                next_conn: 0,
                aborts: Vec::new(),
                controlled: Default::default(),
                opened: Vec::new(),
                dropped: Vec::new(),
            })),
        }
    }

    fn lock(&self) -> MutexGuard<'_, World> {
        self.world.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn connector(&self, client: &str) -> SimConnector {
        SimConnector {
            net: self.clone(),
            client: client.to_owned(),
        }
    }

    pub fn now(&self) -> u64 {
        self.lock().clock
    }

    pub fn advance_clock(&self, dt: u64) {
        self.lock().clock += dt;
    }

    /// Runs `f` on the deployment with the network's clock and randomness,
    /// as an operator action.
    pub fn with_deployment<R>(&self, f: impl FnOnce(&mut Deployment, u64, &mut dyn SecureRng) -> R) -> R {
        let mut w = self.lock();
        let w = &mut *w;
        f(&mut w.deployment, w.clock, &mut w.rng)
    }

    pub fn deployment(&self) -> Deployment {
        self.lock().deployment.clone()
    }

    pub fn install_hook(&self, hook: Hook) {
        self.lock().hooks.push(HookState { hook, seen: 0, fired: 0 });
    }

    pub fn clear_hooks(&self) {
        self.lock().hooks.clear();
    }

    /// How often each installed hook has acted.
    pub fn hook_fires(&self) -> Vec<u64> {
        self.lock().hooks.iter().map(|h| h.fired).collect()
    }

    pub fn control_node(&self, id: &str, control: NodeControl) {
        self.lock().controlled.insert(id.to_owned(), control);
    }

    pub fn release_node(&self, id: &str) {
        self.lock().controlled.remove(id);
    }

    pub fn transcript(&self) -> Transcript {
        self.lock().transcript.clone()
    }

    pub fn aborts(&self) -> Vec<Abort> {
        self.lock().aborts.clone()
    }

    /// Connections opened so far: (conn, client, node).
    pub fn connections(&self) -> Vec<(u64, String, String)> {
        self.lock().opened.clone()
    }

    /// Whether the frame at transcript position `seq` was rejected: the
    /// node aborted the connection, or the client abandoned it without
    /// sending anything further on it.
    pub fn rejected(&self, seq: u64) -> bool {
        let w = self.lock();
        let Some(e) = w.transcript.entries.get(seq as usize) else {
            return false;
        };
        if w.aborts.iter().any(|a| a.conn == e.conn && a.seq >= seq) {
            return true;
        }
        let abandoned = w.dropped.iter().any(|&(c, _)| c == e.conn);
        let continued = w.transcript.entries[seq as usize + 1..]
            .iter()
            .any(|l| l.conn == e.conn && l.direction == LinkDirection::ToNode);
        abandoned && !continued
    }
}

#[derive(Clone)]
pub struct SimConnector {
    net: SimNet,
    client: String,
}

impl SimConnector {
    pub fn client(&self) -> &str {
        &self.client
    }
}

impl Connector for SimConnector {
    fn connect(&mut self, address: &str) -> Result<Box<dyn Transport>, ChannelError> {
        let mut w = self.net.lock();
        let node = w
            .resolve(address)
            .ok_or_else(|| ChannelError::Io(format!("no live node at {address}")))?;
        let conn = w.next_conn;
        w.next_conn += 1;
        w.opened.push((conn, self.client.clone(), node.clone()));
        let suite = *w.deployment.suite();
        Ok(Box::new(SimTransport {
            world: Arc::clone(&self.net.world),
            client: self.client.clone(),
            node,
            conn,
            server: ServerConnection::new(suite),
            inbox: VecDeque::new(),
            closed: false,
        }))
    }
}

/// Client end of one simulated connection; the node end runs inline.
struct SimTransport {
    world: Arc<Mutex<World>>,
    client: String,
    node: String,
    conn: u64,
    server: ServerConnection,
    inbox: VecDeque<Result<Frame, ChannelError>>,
    closed: bool,
}

impl SimTransport {
    fn node_receives(&mut self, w: &mut World, bytes: &[u8]) {
        let seq = w.transcript.entries.len() as u64;
        let conn = self.conn;
        let abort = |w: &mut World, error: String| w.aborts.push(Abort { conn, seq, error });
        if !w.deployment.index().is_whitelisted(&self.node) {
            self.closed = true;
            return abort(w, "node no longer whitelisted".into());
        }
        if w.controlled.get(&self.node) == Some(&NodeControl::DenyService) && self.server.is_established() {
            self.closed = true;
            return abort(w, "service denied".into());
        }
        let frame = match Frame::decode(bytes) {
            Ok((f, used)) if used == bytes.len() => f,
            Ok(_) => {
                self.closed = true;
                return abort(w, "trailing bytes after frame".into());
            }
            Err(e) => {
                self.closed = true;
                return abort(w, e.to_string());
            }
        };
        let World {
            deployment, clock, rng, ..
        } = w;
        let mut service = NodeService {
            deployment,
            id: &self.node,
            now: *clock,
        };
        match self.server.on_frame(&frame, &mut service, rng) {
            Ok(reply) => {
                for b in w.intercept(&self.client, &self.node, self.conn, LinkDirection::ToClient, &reply) {
                    self.inbox.push_back(match Frame::decode(&b) {
                        Ok((f, used)) if used == b.len() => Ok(f),
                        Ok(_) => Err(ChannelError::Truncated),
                        Err(e) => Err(e),
                    });
                }
            }
            Err(e) => {
                self.closed = true;
                abort(w, e.to_string());
            }
        }
    }
}

impl Drop for SimTransport {
    fn drop(&mut self) {
        let mut w = self.world.lock().unwrap_or_else(|p| p.into_inner());
        let seq = w.transcript.entries.len() as u64;
        w.dropped.push((self.conn, seq));
    }
}

impl Transport for SimTransport {
    fn send_frame(&mut self, frame: &Frame) -> Result<(), ChannelError> {
        if self.closed {
            return Err(ChannelError::Closed);
        }
        let world = Arc::clone(&self.world);
        let mut w = world.lock().unwrap_or_else(|p| p.into_inner());
        let deliveries = w.intercept(&self.client, &self.node, self.conn, LinkDirection::ToNode, frame);
        for bytes in deliveries {
            if self.closed {
                break;
            }
            self.node_receives(&mut w, &bytes);
        }
        Ok(())
    }

    fn recv_frame(&mut self) -> Result<Frame, ChannelError> {
        self.inbox.pop_front().unwrap_or(Err(ChannelError::Closed))
    }
}
