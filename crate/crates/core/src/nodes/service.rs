use super::proto::{
    Ack, GetRequest, GetResponse, PutRequest, WriteChange, WriteRequest, GET_REQUEST, GET_RESPONSE, INDEX_REQUEST,
    INDEX_SNAPSHOT, PUT_ACK, PUT_REQUEST, WRITE_ACK, WRITE_REQUEST,
};
use super::{validate_resource_id, NodeContext, NodeDescriptor, NodeError, NodeRole, ResourceRecord, Store};
use crate::abe::{AbePrivateKey, ChainChunk, ChainCiphertext};
use crate::mst::{self, MasterSessionToken, MstError, SessionGrant};
use crate::policy::PolicyExpr;
use crate::wire::{Reader, Writer};

const STATE_VERSION: u8 = 1;

/// A key replaced by a re-key, still accepted for tokens issued before it.
#[derive(Debug, Clone, PartialEq, Eq)]
struct RetiredKey {
    key: AbePrivateKey,
    until: u64,
}

/// Verifies session tokens and serves resources from its store.
#[derive(Debug, Clone)]
pub struct ServiceNode {
    descriptor: NodeDescriptor,
    retired: Vec<RetiredKey>,
    store: Store,
}

impl ServiceNode {
    pub fn new(descriptor: NodeDescriptor, store: Store) -> Result<Self, NodeError> {
        if descriptor.role != NodeRole::Service {
            return Err(NodeError::Invalid(format!("{:?} is not a service node descriptor", descriptor.id)));
        }
        Ok(Self {
            descriptor,
            retired: Vec::new(),
            store,
        })
    }

    pub fn id(&self) -> &str {
        &self.descriptor.id
    }

    pub fn descriptor(&self) -> &NodeDescriptor {
        &self.descriptor
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut Store {
        &mut self.store
    }

    /// Every key the node currently accepts tokens under.
    pub fn keys(&self) -> impl Iterator<Item = &AbePrivateKey> + '_ {
        std::iter::once(&self.descriptor.abe_key).chain(self.retired.iter().map(|r| &r.key))
    }

    /// Installs a fresh key. The old one keeps opening tokens until
    /// `grace_until`, which callers set to now + TTL_max so no outstanding
    /// session outlives its key.
    pub fn rekey(&mut self, key: AbePrivateKey, now: u64, grace_until: u64) {
        let old = std::mem::replace(&mut self.descriptor.abe_key, key);
        self.retired.retain(|r| r.until > now);
        self.retired.push(RetiredKey { key: old, until: grace_until });
    }

    /// Drops every retired key, e.g. when the retired keys are known stolen.
    pub fn forget_retired(&mut self) {
        self.retired.clear();
    }

    pub fn verify(&self, ctx: &NodeContext<'_>, mst_bytes: &[u8]) -> Result<SessionGrant, NodeError> {
        let mst = MasterSessionToken::from_bytes(mst_bytes).map_err(MstError::Wire)?;
        let check = |key: &AbePrivateKey| mst::verify(ctx.abe, ctx.index.pk(), ctx.suite, key, ctx.index, &mst, ctx.now);
        match check(&self.descriptor.abe_key) {
            Err(MstError::SealOpenFailed) => {}
            other => return Ok(other?),
        }
        for r in self.retired.iter().filter(|r| r.until > ctx.now) {
            if let Ok(g) = check(&r.key) {
                return Ok(g);
            }
        }
        Err(MstError::SealOpenFailed.into())
    }

    pub fn handle(&mut self, ctx: &mut NodeContext<'_>, kind: u8, body: &[u8]) -> Result<(u8, Vec<u8>), NodeError> {
        match kind {
            PUT_REQUEST => self.put(ctx, &PutRequest::from_bytes(body)?),
            GET_REQUEST => self.get(ctx, &GetRequest::from_bytes(body)?),
            WRITE_REQUEST => self.write(ctx, &WriteRequest::from_bytes(body)?),
            INDEX_REQUEST => Ok((INDEX_SNAPSHOT, ctx.index.to_json().into_bytes())),
            other => Err(NodeError::Unsupported(other)),
        }
    }

    fn put(&mut self, ctx: &mut NodeContext<'_>, req: &PutRequest) -> Result<(u8, Vec<u8>), NodeError> {
        let grant = self.verify(ctx, &req.mst)?;
        validate_resource_id(&req.id)?;
        let policy: PolicyExpr = req.policy.parse()?;
        if !policy.satisfied_by(&grant.authorized) {
            return Err(NodeError::PolicyUnsatisfied);
        }
        let chain = ChainCiphertext::from_bytes(&grant.k1.decrypt(&req.sealed_body)?)?;
        if chain.policy() != &policy {
            return Err(NodeError::Invalid("body policy differs from the declared policy".into()));
        }
        let record = ResourceRecord {
            id: req.id.clone(),
            policy,
            body: chain,
            owner_pk: grant.consumer_pk.clone(),
            signature: req.signature.clone(),
            version: 1,
        };
        if !record.signature_valid(ctx.suite.sig) {
            return Err(NodeError::BadOwnerSignature);
        }
        if let Some(existing) = self.store.get(&req.id) {
            // A retried Put of the identical record is acknowledged.
            if existing == &record {
                return Ok((PUT_ACK, Ack { version: 1 }.to_bytes()));
            }
            return Err(NodeError::DuplicateResource(req.id.clone()));
        }
        self.store.put(record)?;
        Ok((PUT_ACK, Ack { version: 1 }.to_bytes()))
    }

    fn authorized_record(&self, grant: &SessionGrant, id: &str) -> Result<&ResourceRecord, NodeError> {
        let record = self
            .store
            .get(id)
            .ok_or_else(|| NodeError::NoSuchResource(id.to_owned()))?;
        if !record.policy.satisfied_by(&grant.authorized) {
            return Err(NodeError::PolicyUnsatisfied);
        }
        Ok(record)
    }

    fn get(&mut self, ctx: &mut NodeContext<'_>, req: &GetRequest) -> Result<(u8, Vec<u8>), NodeError> {
        let mut grant = self.verify(ctx, &req.mst)?;
        let record = self.authorized_record(&grant, &req.id)?;
        let slice = match &req.range {
            Some(r) => record.body.slice(r)?,
            None => record.body.full_slice(),
        };
        let resp = GetResponse {
            version: record.version,
            manifest: record.body.manifest().to_bytes(),
            sealed_slice: grant.k1.encrypt(&slice.to_bytes(), ctx.rng),
        };
        Ok((GET_RESPONSE, resp.to_bytes()))
    }

    fn write(&mut self, ctx: &mut NodeContext<'_>, req: &WriteRequest) -> Result<(u8, Vec<u8>), NodeError> {
        let grant = self.verify(ctx, &req.mst)?;
        let record = self.authorized_record(&grant, &req.id)?;
        if record.signature == req.signature && record.version == req.base_version + 1 {
            // Retry of the write that produced the current version.
            return Ok((WRITE_ACK, Ack { version: record.version }.to_bytes()));
        }
        if record.version != req.base_version {
            return Err(NodeError::VersionConflict {
                expected: record.version,
                found: req.base_version,
            });
        }
        let body = match &req.change {
            WriteChange::Chunks(sealed) => {
                let chunks = ChainChunk::decode_list(&grant.k1.decrypt(sealed)?)?;
                if chunks.is_empty() {
                    return Ok((WRITE_ACK, Ack { version: record.version }.to_bytes()));
                }
                let mut body = record.body.clone();
                body.replace_chunks(chunks)?;
                body
            }
            WriteChange::Whole(sealed) => {
                let body = ChainCiphertext::from_bytes(&grant.k1.decrypt(sealed)?)?;
                if body.policy() != &record.policy {
                    return Err(NodeError::PolicyChange);
                }
                body
            }
        };
        let next = ResourceRecord {
            id: record.id.clone(),
            policy: record.policy.clone(),
            body,
            owner_pk: grant.consumer_pk.clone(),
            signature: req.signature.clone(),
            version: record.version + 1,
        };
        if !next.signature_valid(ctx.suite.sig) {
            return Err(NodeError::BadOwnerSignature);
        }
        let version = next.version;
        self.store.put(next)?;
        Ok((WRITE_ACK, Ack { version }.to_bytes()))
    }

    /// Descriptor plus retired keys; the store persists itself.
    pub fn state_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(STATE_VERSION);
        w.bytes(&self.descriptor.to_bytes()).u32(self.retired.len() as u32);
        for r in &self.retired {
            w.bytes(&r.key.to_bytes()).u64(r.until);
        }
        w.finish()
    }

    pub fn from_state_bytes(buf: &[u8], store: Store) -> Result<Self, NodeError> {
        let mut r = Reader::versioned(buf, STATE_VERSION)?;
        let descriptor = NodeDescriptor::from_bytes(r.bytes()?)?;
        let n = r.u32()?;
        let mut retired = Vec::new();
        for _ in 0..n {
            retired.push(RetiredKey {
                key: AbePrivateKey::from_bytes(r.bytes()?)?,
                until: r.u64()?,
            });
        }
        r.finish()?;
        let mut node = Self::new(descriptor, store)?;
        node.retired = retired;
        Ok(node)
    }
}

