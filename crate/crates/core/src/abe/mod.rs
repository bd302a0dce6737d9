//! Pluggable CP-ABE engine.
//!
//! [`Abe`] is the scheme-agnostic facade implementing the four-algorithm
//! contract (setup, key generation, encryption, decryption) plus attribute
//! re-issue for revocation. It owns every check that does not depend on the
//! underlying mathematics: universe membership, epoch freshness, message
//! capacity and policy satisfaction. Concrete constructions implement
//! [`AbeScheme`].
//!
//! An attribute's *representation* is its name together with an epoch.
//! Re-issuing an attribute bumps the epoch, which changes the scheme material
//! derived from it; keys holding the old epoch stop matching ciphertexts
//! created afterwards.

mod chain;
mod mock;
mod waters;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::CryptoRng;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::policy::{compile_access_structure, AccessStructure, AttributeSet, PolicyError, PolicyExpr, SelectedLeaf};
use crate::wire::{Reader, WireError, Writer};

pub use chain::{ChainChunk, ChainCiphertext, ChainManifest, ChainSlice, ChunkContext, DataKey, DEFAULT_CHUNK_SIZE};
pub use mock::MockScheme;
pub use waters::Waters08;

/// Object-safe randomness source accepted by every scheme.
pub trait SecureRng: RngCore + CryptoRng {}
impl<T: RngCore + CryptoRng + ?Sized> SecureRng for T {}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AbeError {
    #[error("security parameter {0} bits is not supported by this scheme")]
    UnsupportedSecurity(u16),
    #[error("attribute universe is empty")]
    EmptyUniverse,
    #[error("attribute {0:?} declared twice")]
    DuplicateAttribute(String),
    #[error("unknown attribute {0:?}")]
    UnknownAttribute(String),
    #[error("attribute {name:?} at epoch {held} is stale (current epoch {current})")]
    StaleEpoch { name: String, held: u32, current: u32 },
    #[error("refusing to issue a key for the empty attribute set")]
    EmptyAttributeSet,
    #[error("message of {len} bytes exceeds block capacity {capacity}")]
    MessageTooLarge { len: usize, capacity: usize },
    #[error("key attributes do not satisfy the ciphertext policy")]
    PolicyNotSatisfied,
    #[error("decryption failed")]
    DecryptionFailed,
    #[error("chunk {index} failed authentication")]
    ChunkAuthentication { index: u32 },
    #[error("byte range {start}..{end} outside resource of {len} bytes")]
    RangeOutOfBounds { start: u64, end: u64, len: u64 },
    #[error("object belongs to scheme {found}, engine runs {expected}")]
    SchemeMismatch { expected: SchemeId, found: SchemeId },
    #[error("malformed {0}")]
    Malformed(String),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SchemeId {
    #[serde(rename = "waters08-bls12-381")]
    Waters08Bls12,
    /// Non-cryptographic stand-in for fast protocol tests.
    #[serde(rename = "mock-insecure")]
    Mock,
}

impl SchemeId {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Waters08Bls12 => "waters08-bls12-381",
            Self::Mock => "mock-insecure",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeId {
    type Err = AbeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "waters08-bls12-381" | "waters08" => Ok(Self::Waters08Bls12),
            "mock-insecure" | "mock" => Ok(Self::Mock),
            other => Err(AbeError::Malformed(format!("scheme id {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttributeRole {
    Generic,
    ServiceNode,
    Authorization,
    Validity,
}

impl AttributeRole {
    fn code(self) -> u8 {
        match self {
            Self::Generic => 0,
            Self::ServiceNode => 1,
            Self::Authorization => 2,
            Self::Validity => 3,
        }
    }

    fn from_code(c: u8) -> Result<Self, WireError> {
        Ok(match c {
            0 => Self::Generic,
            1 => Self::ServiceNode,
            2 => Self::Authorization,
            3 => Self::Validity,
            _ => return Err(WireError::Invalid(format!("attribute role {c}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AttributeId {
    pub name: String,
    pub role: AttributeRole,
    pub epoch: u32,
}

impl AttributeId {
    pub fn new(name: impl Into<String>, role: AttributeRole) -> Self {
        Self {
            name: name.into(),
            role,
            epoch: 0,
        }
    }
}

impl fmt::Display for AttributeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.name, self.epoch)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributeRepresentation {
    pub id: AttributeId,
    pub material: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbeSystemConfig {
    pub security_bits: u16,
    pub universe: Vec<AttributeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbePublicParams {
    scheme: SchemeId,
    params: Vec<u8>,
    universe: BTreeMap<String, AttributeRepresentation>,
}

/// Master secret. Only ever serialized into the authority's own state.
#[derive(Clone, PartialEq, Eq)]
pub struct AbeMasterKey {
    scheme: SchemeId,
    secret: Vec<u8>,
}

impl fmt::Debug for AbeMasterKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AbeMasterKey").field("scheme", &self.scheme).finish_non_exhaustive()
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct AbePrivateKey {
    scheme: SchemeId,
    global: Vec<u8>,
    components: BTreeMap<AttributeId, Vec<u8>>,
}

impl fmt::Debug for AbePrivateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let attrs: Vec<String> = self.components.keys().map(ToString::to_string).collect();
        f.debug_struct("AbePrivateKey")
            .field("scheme", &self.scheme)
            .field("attributes", &attrs)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AbeCiphertext {
    scheme: SchemeId,
    policy: PolicyExpr,
    epochs: BTreeMap<String, u32>,
    body: Vec<u8>,
}

/// Low-level primitives of one CP-ABE construction. All validation that is
/// independent of the construction happens in [`Abe`] before these run.
pub trait AbeScheme: Send + Sync + fmt::Debug {
    fn id(&self) -> SchemeId;

    fn supports_security(&self, bits: u16) -> bool;

    /// Largest message accepted by [`AbeScheme::encrypt`].
    fn block_capacity(&self) -> usize;

    /// Returns `(public params, master secret)`.
    fn setup(&self, security_bits: u16, rng: &mut dyn SecureRng) -> Result<(Vec<u8>, Vec<u8>), AbeError>;

    /// Scheme material for `name` at `epoch`. Must be a deterministic
    /// function of the public params, name and epoch.
    fn represent(&self, params: &[u8], name: &str, epoch: u32) -> Result<Vec<u8>, AbeError>;

    /// Returns the key-wide component and one component per representation.
    fn keygen(
        &self,
        params: &[u8],
        secret: &[u8],
        attrs: &[&AttributeRepresentation],
        rng: &mut dyn SecureRng,
    ) -> Result<(Vec<u8>, Vec<Vec<u8>>), AbeError>;

    /// `leaves[i]` is the representation bound to leaf `i` of `structure`.
    fn encrypt(
        &self,
        params: &[u8],
        message: &[u8],
        policy: &PolicyExpr,
        structure: &AccessStructure,
        leaves: &[&AttributeRepresentation],
        rng: &mut dyn SecureRng,
    ) -> Result<Vec<u8>, AbeError>;

    /// `components[i]` is the key component matching leaf `i`, if any.
    /// `selection` only references leaves with a component.
    #[allow(clippy::too_many_arguments)]
    fn decrypt(
        &self,
        params: &[u8],
        body: &[u8],
        policy: &PolicyExpr,
        structure: &AccessStructure,
        selection: &[SelectedLeaf],
        leaf_ids: &[(&str, u32)],
        global: &[u8],
        components: &[Option<&[u8]>],
    ) -> Result<Vec<u8>, AbeError>;
}

/// Scheme-agnostic CP-ABE engine.
#[derive(Debug, Clone)]
pub struct Abe {
    scheme: Arc<dyn AbeScheme>,
}

impl Abe {
    pub fn new(scheme: Arc<dyn AbeScheme>) -> Self {
        Self { scheme }
    }

    pub fn waters08() -> Self {
        Self::new(Arc::new(Waters08::default()))
    }

    pub fn mock() -> Self {
        Self::new(Arc::new(MockScheme))
    }

    pub fn for_scheme(id: SchemeId) -> Self {
        match id {
            SchemeId::Waters08Bls12 => Self::waters08(),
            SchemeId::Mock => Self::mock(),
        }
    }

    pub fn scheme_id(&self) -> SchemeId {
        self.scheme.id()
    }

    pub fn block_capacity(&self) -> usize {
        self.scheme.block_capacity()
    }

    fn check_scheme(&self, found: SchemeId) -> Result<(), AbeError> {
        let expected = self.scheme.id();
        if expected != found {
            return Err(AbeError::SchemeMismatch { expected, found });
        }
        Ok(())
    }

    pub fn setup(
        &self,
        cfg: &AbeSystemConfig,
        rng: &mut dyn SecureRng,
    ) -> Result<(AbePublicParams, AbeMasterKey), AbeError> {
        if !matches!(cfg.security_bits, 128 | 192 | 256) || !self.scheme.supports_security(cfg.security_bits) {
            return Err(AbeError::UnsupportedSecurity(cfg.security_bits));
        }
        if cfg.universe.is_empty() {
            return Err(AbeError::EmptyUniverse);
        }
        let (params, secret) = self.scheme.setup(cfg.security_bits, rng)?;
        let mut pk = AbePublicParams {
            scheme: self.scheme.id(),
            params,
            universe: BTreeMap::new(),
        };
        for id in &cfg.universe {
            self.insert_attribute(&mut pk, id.clone())?;
        }
        let mk = AbeMasterKey {
            scheme: self.scheme.id(),
            secret,
        };
        Ok((pk, mk))
    }

    fn insert_attribute(&self, pk: &mut AbePublicParams, id: AttributeId) -> Result<AttributeRepresentation, AbeError> {
        if !crate::policy::is_valid_attribute_name(&id.name) {
            return Err(PolicyError::InvalidName(id.name).into());
        }
        if pk.universe.contains_key(&id.name) {
            return Err(AbeError::DuplicateAttribute(id.name));
        }
        let material = self.scheme.represent(&pk.params, &id.name, id.epoch)?;
        let rep = AttributeRepresentation { id, material };
        pk.universe.insert(rep.id.name.clone(), rep.clone());
        Ok(rep)
    }

    /// Grows the universe with a fresh attribute.
    pub fn add_attribute(
        &self,
        pk: &mut AbePublicParams,
        mk: &AbeMasterKey,
        id: AttributeId,
    ) -> Result<AttributeRepresentation, AbeError> {
        self.check_scheme(pk.scheme)?;
        self.check_scheme(mk.scheme)?;
        self.insert_attribute(pk, id)
    }

    pub fn generate_key<'a, I>(
        &self,
        pk: &AbePublicParams,
        mk: &AbeMasterKey,
        attrs: I,
        rng: &mut dyn SecureRng,
    ) -> Result<AbePrivateKey, AbeError>
    where
        I: IntoIterator<Item = &'a AttributeId>,
    {
        self.check_scheme(pk.scheme)?;
        self.check_scheme(mk.scheme)?;
        let mut reps: Vec<&AttributeRepresentation> = Vec::new();
        for id in attrs {
            let rep = pk
                .universe
                .get(&id.name)
                .ok_or_else(|| AbeError::UnknownAttribute(id.name.clone()))?;
            if rep.id.epoch != id.epoch {
                return Err(AbeError::StaleEpoch {
                    name: id.name.clone(),
                    held: id.epoch,
                    current: rep.id.epoch,
                });
            }
            if !reps.iter().any(|r| r.id.name == id.name) {
                reps.push(rep);
            }
        }
        if reps.is_empty() {
            return Err(AbeError::EmptyAttributeSet);
        }
        let (global, comps) = self.scheme.keygen(&pk.params, &mk.secret, &reps, rng)?;
        let components = reps.iter().map(|r| r.id.clone()).zip(comps).collect();
        Ok(AbePrivateKey {
            scheme: pk.scheme,
            global,
            components,
        })
    }

    /// Key for the current epochs of the named attributes.
    pub fn generate_key_for_names<'a>(
        &self,
        pk: &AbePublicParams,
        mk: &AbeMasterKey,
        names: impl IntoIterator<Item = &'a str>,
        rng: &mut dyn SecureRng,
    ) -> Result<AbePrivateKey, AbeError> {
        let ids = names
            .into_iter()
            .map(|n| pk.current(n).cloned().ok_or_else(|| AbeError::UnknownAttribute(n.to_owned())))
            .collect::<Result<Vec<_>, _>>()?;
        self.generate_key(pk, mk, &ids, rng)
    }

    pub fn encrypt(
        &self,
        pk: &AbePublicParams,
        message: &[u8],
        policy: &PolicyExpr,
        rng: &mut dyn SecureRng,
    ) -> Result<AbeCiphertext, AbeError> {
        self.check_scheme(pk.scheme)?;
        let capacity = self.scheme.block_capacity();
        if message.len() > capacity {
            return Err(AbeError::MessageTooLarge {
                len: message.len(),
                capacity,
            });
        }
        let structure = compile_access_structure(policy);
        let leaves = structure
            .leaves()
            .iter()
            .map(|n| pk.universe.get(n).ok_or_else(|| AbeError::UnknownAttribute(n.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        let epochs = leaves.iter().map(|r| (r.id.name.clone(), r.id.epoch)).collect();
        let body = self.scheme.encrypt(&pk.params, message, policy, &structure, &leaves, rng)?;
        Ok(AbeCiphertext {
            scheme: pk.scheme,
            policy: policy.clone(),
            epochs,
            body,
        })
    }

    /// Fails with [`AbeError::PolicyNotSatisfied`] when the key's
    /// representations cannot satisfy the policy, and with
    /// [`AbeError::DecryptionFailed`] when the mathematics disagree (tampered
    /// ciphertext or a key assembled from foreign components).
    pub fn decrypt(&self, pk: &AbePublicParams, ct: &AbeCiphertext, sk: &AbePrivateKey) -> Result<Vec<u8>, AbeError> {
        self.check_scheme(pk.scheme)?;
        self.check_scheme(ct.scheme)?;
        self.check_scheme(sk.scheme)?;
        let structure = compile_access_structure(&ct.policy);
        let mut leaf_ids = Vec::with_capacity(structure.leaves().len());
        for name in structure.leaves() {
            let epoch = *ct
                .epochs
                .get(name)
                .ok_or_else(|| AbeError::Malformed(format!("ciphertext lacks epoch for {name:?}")))?;
            leaf_ids.push((name.as_str(), epoch));
        }
        let components: Vec<Option<&[u8]>> = leaf_ids
            .iter()
            .map(|(name, epoch)| sk.component(name, *epoch))
            .collect();
        let selection = structure
            .select(|i| components[i].is_some())
            .ok_or(AbeError::PolicyNotSatisfied)?;
        self.scheme.decrypt(
            &pk.params,
            &ct.body,
            &ct.policy,
            &structure,
            &selection,
            &leaf_ids,
            &sk.global,
            &components,
        )
    }

    /// Bumps the epoch of `name`, replacing its representation in `pk`.
    pub fn reissue_attribute(
        &self,
        pk: &mut AbePublicParams,
        mk: &AbeMasterKey,
        name: &str,
    ) -> Result<AttributeRepresentation, AbeError> {
        self.check_scheme(pk.scheme)?;
        self.check_scheme(mk.scheme)?;
        let current = pk
            .universe
            .get(name)
            .ok_or_else(|| AbeError::UnknownAttribute(name.to_owned()))?;
        let mut id = current.id.clone();
        id.epoch = id
            .epoch
            .checked_add(1)
            .ok_or_else(|| AbeError::Malformed(format!("epoch overflow for {name:?}")))?;
        let material = self.scheme.represent(&pk.params, name, id.epoch)?;
        let rep = AttributeRepresentation { id, material };
        pk.universe.insert(name.to_owned(), rep.clone());
        Ok(rep)
    }
}

const PK_VERSION: u8 = 1;
const MK_VERSION: u8 = 1;
const SK_VERSION: u8 = 1;
const CT_VERSION: u8 = 1;

fn write_id(w: &mut Writer, id: &AttributeId) {
    w.str(&id.name).u8(id.role.code()).u32(id.epoch);
}

fn read_id(r: &mut Reader<'_>) -> Result<AttributeId, WireError> {
    let name = r.str()?.to_owned();
    let role = AttributeRole::from_code(r.u8()?)?;
    let epoch = r.u32()?;
    Ok(AttributeId { name, role, epoch })
}

fn read_scheme(r: &mut Reader<'_>) -> Result<SchemeId, WireError> {
    r.str()?
        .parse()
        .map_err(|e: AbeError| WireError::Invalid(e.to_string()))
}

impl AbePublicParams {
    pub fn scheme(&self) -> SchemeId {
        self.scheme
    }

    pub fn representation(&self, name: &str) -> Option<&AttributeRepresentation> {
        self.universe.get(name)
    }

    pub fn current(&self, name: &str) -> Option<&AttributeId> {
        self.universe.get(name).map(|r| &r.id)
    }

    pub fn universe(&self) -> impl Iterator<Item = &AttributeRepresentation> + '_ {
        self.universe.values()
    }

    pub fn names_with_role(&self, role: AttributeRole) -> AttributeSet {
        self.universe
            .values()
            .filter(|r| r.id.role == role)
            .map(|r| r.id.name.clone())
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(PK_VERSION);
        w.str(self.scheme.as_str()).bytes(&self.params).u32(self.universe.len() as u32);
        for rep in self.universe.values() {
            write_id(&mut w, &rep.id);
            w.bytes(&rep.material);
        }
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::versioned(buf, PK_VERSION)?;
        let scheme = read_scheme(&mut r)?;
        let params = r.bytes()?.to_vec();
        let n = r.u32()?;
        let mut universe = BTreeMap::new();
        for _ in 0..n {
            let id = read_id(&mut r)?;
            let material = r.bytes()?.to_vec();
            if universe.contains_key(&id.name) {
                return Err(WireError::Invalid(format!("duplicate attribute {:?}", id.name)));
            }
            universe.insert(id.name.clone(), AttributeRepresentation { id, material });
        }
        r.finish()?;
        Ok(Self { scheme, params, universe })
    }
}

impl AbeMasterKey {
    pub fn scheme(&self) -> SchemeId {
        self.scheme
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(MK_VERSION);
        w.str(self.scheme.as_str()).bytes(&self.secret);
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::versioned(buf, MK_VERSION)?;
        let scheme = read_scheme(&mut r)?;
        let secret = r.bytes()?.to_vec();
        r.finish()?;
        Ok(Self { scheme, secret })
    }
}

impl AbePrivateKey {
    /// Assembles a key from raw parts. Exposed so that collusion tests can
    /// build every mix of components that the API admits.
    pub fn from_parts(scheme: SchemeId, global: Vec<u8>, components: BTreeMap<AttributeId, Vec<u8>>) -> Self {
        Self {
            scheme,
            global,
            components,
        }
    }

    pub fn scheme(&self) -> SchemeId {
        self.scheme
    }

    pub fn global_component(&self) -> &[u8] {
        &self.global
    }

    pub fn components(&self) -> &BTreeMap<AttributeId, Vec<u8>> {
        &self.components
    }

    pub fn attributes(&self) -> impl Iterator<Item = &AttributeId> + '_ {
        self.components.keys()
    }

    /// Attribute names regardless of epoch.
    pub fn names(&self) -> AttributeSet {
        self.components.keys().map(|id| id.name.clone()).collect()
    }

    pub fn holds(&self, name: &str, epoch: u32) -> bool {
        self.component(name, epoch).is_some()
    }

    fn component(&self, name: &str, epoch: u32) -> Option<&[u8]> {
        self.components
            .iter()
            .find(|(id, _)| id.name == name && id.epoch == epoch)
            .map(|(_, c)| c.as_slice())
    }

    /// Attributes whose held epoch matches the current universe in `pk`.
    pub fn current_names(&self, pk: &AbePublicParams) -> AttributeSet {
        self.components
            .keys()
            .filter(|id| pk.current(&id.name).map(|c| c.epoch) == Some(id.epoch))
            .map(|id| id.name.clone())
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(SK_VERSION);
        w.str(self.scheme.as_str()).bytes(&self.global).u32(self.components.len() as u32);
        for (id, comp) in &self.components {
            write_id(&mut w, id);
            w.bytes(comp);
        }
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::versioned(buf, SK_VERSION)?;
        let scheme = read_scheme(&mut r)?;
        let global = r.bytes()?.to_vec();
        let n = r.u32()?;
        let mut components = BTreeMap::new();
        for _ in 0..n {
            let id = read_id(&mut r)?;
            components.insert(id, r.bytes()?.to_vec());
        }
        r.finish()?;
        Ok(Self {
            scheme,
            global,
            components,
        })
    }
}

impl AbeCiphertext {
    pub fn scheme(&self) -> SchemeId {
        self.scheme
    }

    pub fn policy(&self) -> &PolicyExpr {
        &self.policy
    }

    /// Epoch of each distinct leaf attribute at encryption time.
    pub fn epochs(&self) -> &BTreeMap<String, u32> {
        &self.epochs
    }

    pub fn body(&self) -> &[u8] {
        &self.body
    }

    /// Direct body access for tamper tests.
    pub fn body_mut(&mut self) -> &mut Vec<u8> {
        &mut self.body
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(CT_VERSION);
        w.str(self.scheme.as_str())
            .str(&self.policy.to_canonical())
            .u32(self.epochs.len() as u32);
        for (name, epoch) in &self.epochs {
            w.str(name).u32(*epoch);
        }
        w.bytes(&self.body);
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::versioned(buf, CT_VERSION)?;
        let scheme = read_scheme(&mut r)?;
        let policy = crate::policy::parse(r.str()?).map_err(|e| WireError::Invalid(e.to_string()))?;
        let n = r.u32()?;
        let mut epochs = BTreeMap::new();
        for _ in 0..n {
            let name = r.str()?.to_owned();
            epochs.insert(name, r.u32()?);
        }
        let body = r.bytes()?.to_vec();
        r.finish()?;
        if policy.attribute_names().len() != epochs.len()
            || policy.attribute_names().iter().any(|n| !epochs.contains_key(*n))
        {
            return Err(WireError::Invalid("epoch table does not match policy leaves".into()));
        }
        Ok(Self {
            scheme,
            policy,
            epochs,
            body,
        })
    }
}

#[cfg(test)]
mod tests;
