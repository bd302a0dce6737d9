//! Consumer side of Attribute-Authenticate, Put, Get and Write.

use std::collections::BTreeMap;
use std::ops::Range;
use std::time::Duration;

use thiserror::Error;

use crate::abe::{
    Abe, AbeError, AbePrivateKey, AbePublicParams, ChainChunk, ChainCiphertext, ChainManifest, ChainSlice, SecureRng,
    DEFAULT_CHUNK_SIZE,
};
use crate::channel::{Channel, ChannelError, TcpTransport, Transport};
use crate::mst::{self, AuthRequest, IssuedToken, MasterSessionToken, MstError};
use crate::nodes::proto::{
    self, Ack, ErrorCode, ErrorReply, GetRequest, GetResponse, PutRequest, WriteChange, WriteRequest,
};
use crate::nodes::{signing_bytes, validate_resource_id, NodeError, PublicIndex};
use crate::policy::{AttributeSet, PolicyExpr};
use crate::suite::{CryptoSuite, SigKeyPair, SuiteError, SymKeyMaterial};
use crate::wire::{Reader, WireError, Writer};

const CREDENTIALS_VERSION: u8 = 1;
const SESSION_VERSION: u8 = 1;
/// Attempts per request when the channel fails in a renegotiable way.
pub const MAX_ATTEMPTS: usize = 3;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("{code}: {message}")]
    Remote { code: ErrorCode, message: String },
    /// K' did not open: the key lacks an advertised attribute or is stale.
    #[error("{0}")]
    KeyRecovery(MstError),
    #[error("own authorized attributes do not satisfy the policy")]
    PolicyUnsatisfied,
    #[error("byte range {start}..{end} outside resource of {len} bytes")]
    RangeOutOfBounds { start: u64, end: u64, len: u64 },
    #[error("unexpected reply type 0x{0:02x}")]
    UnexpectedReply(u8),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Abe(#[from] AbeError),
    #[error(transparent)]
    Suite(#[from] SuiteError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Node(#[from] NodeError),
}

impl ClientError {
    pub fn remote_code(&self) -> Option<ErrorCode> {
        match self {
            Self::Remote { code, .. } => Some(*code),
            _ => None,
        }
    }

    /// Stable name of the error class, as used in scenario expectations.
    pub fn class(&self) -> &'static str {
        match self {
            Self::Channel(_) => "channel",
            Self::Remote { code, .. } => code.as_str(),
            Self::KeyRecovery(_) => "key-recovery",
            Self::PolicyUnsatisfied => "policy-unsatisfied",
            Self::RangeOutOfBounds { .. } => "range-out-of-bounds",
            Self::UnexpectedReply(_) => "unexpected-reply",
            Self::Abe(_) => "abe",
            Self::Invalid(_) | Self::Suite(_) | Self::Wire(_) | Self::Node(_) => "invalid",
        }
    }
}

/// An enrolled consumer's keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsumerCredentials {
    pub id: String,
    pub key: AbePrivateKey,
    /// PK_self/SK_self.
    pub signing: SigKeyPair,
    /// Validity attributes held; always a subset of the key's attributes.
    pub validity: AttributeSet,
}

impl ConsumerCredentials {
    /// Generic attributes the key holds.
    pub fn attributes(&self) -> AttributeSet {
        self.key
            .names()
            .iter()
            .filter(|n| !self.validity.contains(n))
            .collect()
    }

    /// Swaps in a re-issued ABE key.
    pub fn install_key(&mut self, key: AbePrivateKey) -> Result<(), ClientError> {
        if !self.validity.is_subset(&key.names()) {
            return Err(ClientError::Invalid("re-issued key lacks held validity attributes".into()));
        }
        self.key = key;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(CREDENTIALS_VERSION);
        w.str(&self.id)
            .bytes(&self.key.to_bytes())
            .bytes(&self.signing.to_bytes())
            .strings(self.validity.iter());
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::versioned(buf, CREDENTIALS_VERSION)?;
        let c = Self {
            id: r.str()?.to_owned(),
            key: AbePrivateKey::from_bytes(r.bytes()?)?,
            signing: SigKeyPair::from_bytes(r.bytes()?)?,
            validity: r.strings()?.into_iter().collect(),
        };
        r.finish()?;
        if !c.validity.is_subset(&c.key.names()) {
            return Err(WireError::Invalid("validity attributes not in key".into()));
        }
        Ok(c)
    }
}

/// An authenticated session: the MST, K1 and where to use them.
#[derive(Debug, Clone)]
pub struct SessionState {
    issued: IssuedToken,
    mst: MasterSessionToken,
    k1: SymKeyMaterial,
    pub target: String,
}

impl SessionState {
    pub fn mst(&self) -> &MasterSessionToken {
        &self.mst
    }

    pub fn expiry(&self) -> u64 {
        self.mst.core.expiry
    }

    /// A′.
    pub fn authorized(&self) -> &AttributeSet {
        &self.mst.core.authorized
    }

    /// K1, for callers that must prove possession, such as the harness.
    pub fn session_key(&self) -> &SymKeyMaterial {
        &self.k1
    }

    /// Assembles a session from parts obtained outside Attribute-Authenticate.
    pub fn from_parts(issued: IssuedToken, mst: MasterSessionToken, k1: SymKeyMaterial, target: String) -> Self {
        Self { issued, mst, k1, target }
    }

    pub fn is_expired(&self, now: u64) -> bool {
        now >= self.expiry()
    }

    /// What may be written to disk: K′ and MST′, never K1.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(SESSION_VERSION);
        w.str(&self.target).bytes(&self.issued.to_bytes());
        w.finish()
    }

    /// Re-derives K1 from K′ with the consumer's key.
    pub fn from_bytes(
        buf: &[u8],
        abe: &Abe,
        index: &PublicIndex,
        suite: &CryptoSuite,
        creds: &ConsumerCredentials,
    ) -> Result<Self, ClientError> {
        let mut r = Reader::versioned(buf, SESSION_VERSION)?;
        let target = r.str()?.to_owned();
        let issued = IssuedToken::from_bytes(r.bytes()?)?;
        r.finish()?;
        Self::open(issued, target, abe, index, suite, creds)
    }

    fn open(
        issued: IssuedToken,
        target: String,
        abe: &Abe,
        index: &PublicIndex,
        suite: &CryptoSuite,
        creds: &ConsumerCredentials,
    ) -> Result<Self, ClientError> {
        let (k1, mst) = mst::open_issued(abe, index.pk(), suite, &creds.key, &issued).map_err(|e| match e {
            e @ MstError::KeyRecovery(_) => ClientError::KeyRecovery(e),
            other => ClientError::Invalid(format!("issued token: {other}")),
        })?;
        Ok(Self { issued, mst, k1, target })
    }
}

/// Opens transports to node addresses.
pub trait Connector {
    fn connect(&mut self, address: &str) -> Result<Box<dyn Transport>, ChannelError>;
}

#[derive(Debug, Clone, Default)]
pub struct TcpConnector {
    pub timeout: Option<Duration>,
}

impl Connector for TcpConnector {
    fn connect(&mut self, address: &str) -> Result<Box<dyn Transport>, ChannelError> {
        Ok(Box::new(TcpTransport::connect(address, self.timeout)?))
    }
}

/// Fetches the public index from any node.
pub fn fetch_index(
    connector: &mut dyn Connector,
    suite: CryptoSuite,
    address: &str,
    rng: &mut dyn SecureRng,
) -> Result<PublicIndex, ClientError> {
    let mut ch = Channel::connect(connector.connect(address)?, suite, rng)?;
    let (kind, body) = ch.request(proto::INDEX_REQUEST, &[])?;
    let body = expect(kind, body, proto::INDEX_SNAPSHOT)?;
    let text = String::from_utf8(body).map_err(|_| ClientError::Invalid("index snapshot is not UTF-8".into()))?;
    Ok(PublicIndex::from_json(&text)?)
}

fn expect(kind: u8, body: Vec<u8>, want: u8) -> Result<Vec<u8>, ClientError> {
    if kind == want {
        return Ok(body);
    }
    if kind == proto::ERROR {
        let e = ErrorReply::from_bytes(&body)?;
        return Err(ClientError::Remote {
            code: e.code,
            message: e.message,
        });
    }
    Err(ClientError::UnexpectedReply(kind))
}

/// What to advertise in Attribute-Authenticate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthArgs {
    pub attributes: AttributeSet,
    pub validity: AttributeSet,
    pub ttl: i64,
}

/// Where Put's chain encryption runs. Only [`LocalEncryption`] exists; the
/// trait is the seam for an encryption proxy.
pub trait EncryptionProxy: Send {
    fn encrypt_chain(
        &mut self,
        abe: &Abe,
        pk: &AbePublicParams,
        data: &[u8],
        policy: &PolicyExpr,
        chunk_size: u32,
        rng: &mut dyn SecureRng,
    ) -> Result<ChainCiphertext, ClientError>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LocalEncryption;

impl EncryptionProxy for LocalEncryption {
    fn encrypt_chain(
        &mut self,
        abe: &Abe,
        pk: &AbePublicParams,
        data: &[u8],
        policy: &PolicyExpr,
        chunk_size: u32,
        rng: &mut dyn SecureRng,
    ) -> Result<ChainCiphertext, ClientError> {
        Ok(abe.encrypt_chain(pk, data, policy, chunk_size, rng)?)
    }
}

/// A consumer with open connections to the nodes it talks to.
pub struct Client<C: Connector> {
    abe: Abe,
    suite: CryptoSuite,
    index: PublicIndex,
    creds: ConsumerCredentials,
    connector: C,
    channels: BTreeMap<String, Channel<Box<dyn Transport>>>,
    chunk_size: u32,
    proxy: Box<dyn EncryptionProxy>,
}

impl<C: Connector> Client<C> {
    pub fn new(abe: Abe, index: PublicIndex, creds: ConsumerCredentials, connector: C) -> Self {
        Self {
            abe,
            suite: CryptoSuite::by_id(index.suite()),
            index,
            creds,
            connector,
            channels: BTreeMap::new(),
            chunk_size: DEFAULT_CHUNK_SIZE,
            proxy: Box::new(LocalEncryption),
        }
    }

    pub fn with_chunk_size(mut self, chunk_size: u32) -> Self {
        self.chunk_size = chunk_size.max(1);
        self
    }

    pub fn with_proxy(mut self, proxy: Box<dyn EncryptionProxy>) -> Self {
        self.proxy = proxy;
        self
    }

    pub fn credentials(&self) -> &ConsumerCredentials {
        &self.creds
    }

    pub fn credentials_mut(&mut self) -> &mut ConsumerCredentials {
        &mut self.creds
    }

    pub fn index(&self) -> &PublicIndex {
        &self.index
    }

    pub fn set_index(&mut self, index: PublicIndex) {
        self.index = index;
    }

    pub fn connector_mut(&mut self) -> &mut C {
        &mut self.connector
    }

    /// Forgets open channels; the next request handshakes again.
    pub fn disconnect(&mut self) {
        self.channels.clear();
    }

    /// One request/reply, reconnecting on channel failures. Every request
    /// is safe to repeat: it is resent byte-identical.
    fn request(&mut self, address: &str, kind: u8, body: &[u8], rng: &mut dyn SecureRng) -> Result<(u8, Vec<u8>), ClientError> {
        let mut last = ChannelError::Closed;
        for _ in 0..MAX_ATTEMPTS {
            if !self.channels.contains_key(address) {
                let transport = match self.connector.connect(address) {
                    Ok(t) => t,
                    Err(e) if e.is_renegotiable() => {
                        last = e;
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                };
                match Channel::connect(transport, self.suite, rng) {
                    Ok(ch) => {
                        self.channels.insert(address.to_owned(), ch);
                    }
                    Err(e) if e.is_renegotiable() => {
                        last = e;
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            let ch = self.channels.get_mut(address).expect("inserted above");
            match ch.request(kind, body) {
                Ok(r) => return Ok(r),
                Err(e) => {
                    self.channels.remove(address);
                    if !e.is_renegotiable() {
                        return Err(e.into());
                    }
                    last = e;
                }
            }
        }
        Err(last.into())
    }

    /// Attribute-Authenticate against the authorization node at `authz`;
    /// the session will be used with the service node at `target`.
    pub fn authenticate(
        &mut self,
        args: &AuthArgs,
        authz: &str,
        target: &str,
        rng: &mut dyn SecureRng,
    ) -> Result<SessionState, ClientError> {
        let req = AuthRequest {
            attributes: args.attributes.clone(),
            validity: args.validity.clone(),
            ttl_req: args.ttl,
            consumer_pk: self.creds.signing.public().to_vec(),
        };
        let (kind, body) = self.request(authz, proto::AUTH_REQUEST, &req.to_bytes(), rng)?;
        let issued = IssuedToken::from_bytes(&expect(kind, body, proto::AUTH_ISSUED)?)?;
        SessionState::open(issued, target.to_owned(), &self.abe, &self.index, &self.suite, &self.creds)
    }

    pub fn put(
        &mut self,
        state: &mut SessionState,
        id: &str,
        policy: &PolicyExpr,
        data: &[u8],
        rng: &mut dyn SecureRng,
    ) -> Result<u64, ClientError> {
        validate_resource_id(id)?;
        if !policy.satisfied_by(state.authorized()) {
            return Err(ClientError::PolicyUnsatisfied);
        }
        let chain = self
            .proxy
            .encrypt_chain(&self.abe, self.index.pk(), data, policy, self.chunk_size, rng)?;
        let signature = self.creds.signing.sign(&signing_bytes(id, 1, &chain.manifest()));
        let req = PutRequest {
            mst: state.mst.to_bytes(),
            id: id.to_owned(),
            policy: policy.to_canonical(),
            sealed_body: state.k1.encrypt(&chain.to_bytes(), rng),
            signature,
        };
        let target = state.target.clone();
        let (kind, body) = self.request(&target, proto::PUT_REQUEST, &req.to_bytes(), rng)?;
        Ok(Ack::from_bytes(&expect(kind, body, proto::PUT_ACK)?)?.version)
    }

    /// Version, whole-version manifest and the slice covering `range`.
    fn fetch(
        &mut self,
        state: &mut SessionState,
        id: &str,
        range: Option<Range<u64>>,
        rng: &mut dyn SecureRng,
    ) -> Result<(u64, ChainManifest, ChainSlice), ClientError> {
        let req = GetRequest {
            mst: state.mst.to_bytes(),
            id: id.to_owned(),
            range,
        };
        let target = state.target.clone();
        let (kind, body) = self.request(&target, proto::GET_REQUEST, &req.to_bytes(), rng)?;
        let resp = GetResponse::from_bytes(&expect(kind, body, proto::GET_RESPONSE)?)?;
        let slice = ChainSlice::from_bytes(&state.k1.decrypt(&resp.sealed_slice)?)?;
        let manifest = ChainManifest::from_bytes(&resp.manifest)?;
        if manifest.header_digest != slice.context().header_digest
            || manifest.total_len != slice.total_len
            || manifest.chunk_size != slice.chunk_size
        {
            return Err(ClientError::Invalid("manifest does not describe the returned slice".into()));
        }
        Ok((resp.version, manifest, slice))
    }

    /// The whole resource, or the bytes in `range`.
    pub fn get(
        &mut self,
        state: &mut SessionState,
        id: &str,
        range: Option<Range<u64>>,
        rng: &mut dyn SecureRng,
    ) -> Result<Vec<u8>, ClientError> {
        let (_, _, slice) = self.fetch(state, id, range.clone(), rng)?;
        let range = range.unwrap_or(0..slice.total_len);
        Ok(slice.decrypt_range(&self.abe, self.index.pk(), &self.creds.key, range)?)
    }

    /// Overwrites `data.len()` bytes at `offset`. Re-seals only the chunks
    /// the range touches, under the resource's existing data key.
    pub fn write(
        &mut self,
        state: &mut SessionState,
        id: &str,
        offset: u64,
        data: &[u8],
        rng: &mut dyn SecureRng,
    ) -> Result<u64, ClientError> {
        let end = offset
            .checked_add(data.len() as u64)
            .ok_or_else(|| ClientError::Invalid("write range overflows".into()))?;
        let (version, mut manifest, slice) = self.fetch(state, id, Some(offset..end), rng)?;
        if end > slice.total_len {
            return Err(ClientError::RangeOutOfBounds {
                start: offset,
                end,
                len: slice.total_len,
            });
        }
        let ctx = slice.context();
        let key = self.abe.open_chain_key(self.index.pk(), &slice.header, &self.creds.key)?;
        let mut chunks = Vec::with_capacity(slice.chunks.len());
        let cs = slice.chunk_size as u64;
        for chunk in &slice.chunks {
            let mut plain = key.open_chunk(&ctx, chunk)?;
            let start = chunk.index as u64 * cs;
            let from = offset.max(start);
            let to = end.min(start + plain.len() as u64);
            if from < to {
                plain[(from - start) as usize..(to - start) as usize]
                    .copy_from_slice(&data[(from - offset) as usize..(to - offset) as usize]);
            }
            let sealed = key.seal_chunk(&ctx, chunk.index, &plain, rng);
            manifest.chunk_digests[chunk.index as usize] = sealed.digest();
            chunks.push(sealed);
        }
        let signature = self.creds.signing.sign(&signing_bytes(id, version + 1, &manifest));
        let change = WriteChange::Chunks(state.k1.encrypt(&ChainChunk::encode_list(&chunks), rng));
        self.send_write(state, id, version, change, signature, rng)
    }

    /// Replaces the whole body, keeping the policy and data key.
    pub fn replace(
        &mut self,
        state: &mut SessionState,
        id: &str,
        data: &[u8],
        rng: &mut dyn SecureRng,
    ) -> Result<u64, ClientError> {
        let (version, _, slice) = self.fetch(state, id, Some(0..0), rng)?;
        let key = self.abe.open_chain_key(self.index.pk(), &slice.header, &self.creds.key)?;
        let chain = self.abe.reseal_chain(slice.header, &key, data, slice.chunk_size, rng);
        let signature = self.creds.signing.sign(&signing_bytes(id, version + 1, &chain.manifest()));
        let change = WriteChange::Whole(state.k1.encrypt(&chain.to_bytes(), rng));
        self.send_write(state, id, version, change, signature, rng)
    }

    fn send_write(
        &mut self,
        state: &mut SessionState,
        id: &str,
        base_version: u64,
        change: WriteChange,
        signature: Vec<u8>,
        rng: &mut dyn SecureRng,
    ) -> Result<u64, ClientError> {
        let req = WriteRequest {
            mst: state.mst.to_bytes(),
            id: id.to_owned(),
            base_version,
            change,
            signature,
        };
        let target = state.target.clone();
        let (kind, body) = self.request(&target, proto::WRITE_REQUEST, &req.to_bytes(), rng)?;
        Ok(Ack::from_bytes(&expect(kind, body, proto::WRITE_ACK)?)?.version)
    }
}
