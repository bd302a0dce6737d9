//! Master Session Tokens: issuance by an authorization node, recovery by
//! the consumer, and the five-check verification run by service nodes.
//!
//! ```text
//! MST1 = E_ABE(K2, SN and v_1 .. and v_u) ‖ A' ‖ expiry ‖ R ‖ PK_self
//! MST2 = S_PSIG(MST1, M_private)
//! MST3 = E_SYM(K1 ‖ expiry ‖ R, K2)
//! MST  = MST1 ‖ MST2 ‖ MST3 ‖ M_public
//! ```
//!
//! The consumer receives `K' = E_ABE(K1, a_1 and .. a_n and v_1 .. v_u)` and
//! `MST' = E_SYM(MST, K1)`.

use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abe::{Abe, AbeCiphertext, AbeError, AbePrivateKey, AbePublicParams, AttributeRole, SecureRng};
use crate::policy::{conjunction, AttributeSet, PolicyError};
use crate::suite::{CryptoSuite, SigKeyPair, SuiteError, SymKeyMaterial, SYM_KEY_LEN};
use crate::wire::{Reader, WireError, Writer};

/// Attribute held by every provisioned service node.
pub const SERVICE_NODE_ATTRIBUTE: &str = "SN";

pub const NONCE_LEN: usize = 16;
const CORE_VERSION: u8 = 1;
const SEALED_LEN: usize = SYM_KEY_LEN + 8 + NONCE_LEN;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MstError {
    #[error("none of the requested attributes can be authorized by this node")]
    NothingAuthorizable,
    #[error("{got} validity attributes advertised, at least {need} required")]
    TooFewValidity { got: usize, need: usize },
    #[error("{0:?} is not a validity attribute")]
    NotValidity(String),
    #[error("requested TTL must be positive")]
    BadTtl,
    #[error("issuer is not a whitelisted authorization node for the authorized attributes")]
    UnknownIssuer,
    #[error("token signature does not verify")]
    BadSignature,
    #[error("sealed token part could not be opened")]
    SealOpenFailed,
    #[error("nonce or expiry differ between signed and sealed token parts")]
    SealedMismatch,
    #[error("token expired at {expiry} (now {now})")]
    Expired { expiry: u64, now: u64 },
    #[error("could not recover session key: {0}")]
    KeyRecovery(AbeError),
    #[error(transparent)]
    Abe(#[from] AbeError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Suite(#[from] SuiteError),
    #[error(transparent)]
    Wire(#[from] WireError),
}

/// System-wide protocol parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolParams {
    /// Total validity attributes in the system.
    pub x: u32,
    /// Minimum validity attributes a consumer must advertise.
    pub u: u32,
    pub ttl_max: u64,
}

impl ProtocolParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.u == 0 || self.u > self.x {
            return Err(format!("need 1 <= u <= x, got u={} x={}", self.u, self.x));
        }
        if self.ttl_max == 0 {
            return Err("ttl_max must be positive".into());
        }
        Ok(())
    }

    pub fn validity_names(&self) -> Vec<String> {
        (1..=self.x).map(|k| format!("v{k}")).collect()
    }
}

impl Default for ProtocolParams {
    fn default() -> Self {
        Self { x: 4, u: 2, ttl_max: 900 }
    }
}

/// MST1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MstCore {
    pub k2_blob: AbeCiphertext,
    pub authorized: AttributeSet,
    pub expiry: u64,
    pub nonce: [u8; NONCE_LEN],
    pub consumer_pk: Vec<u8>,
}

impl MstCore {
    /// Signature input. Every field is fixed-size or length-prefixed, so the
    /// encoding is injective.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(CORE_VERSION);
        self.write(&mut w);
        w.finish()
    }

    fn write(&self, w: &mut Writer) {
        w.bytes(&self.k2_blob.to_bytes())
            .strings(self.authorized.iter())
            .u64(self.expiry)
            .raw(&self.nonce)
            .bytes(&self.consumer_pk);
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, WireError> {
        let k2_blob = AbeCiphertext::from_bytes(r.bytes()?)?;
        let names = r.strings()?;
        let authorized: AttributeSet = names.iter().map(String::as_str).collect();
        if authorized.len() != names.len() {
            return Err(WireError::Invalid("duplicate authorized attribute".into()));
        }
        Ok(Self {
            k2_blob,
            authorized,
            expiry: r.u64()?,
            nonce: r.array()?,
            consumer_pk: r.bytes()?.to_vec(),
        })
    }

    pub fn from_canonical(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::versioned(buf, CORE_VERSION)?;
        let core = Self::read(&mut r)?;
        r.finish()?;
        Ok(core)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MasterSessionToken {
    pub core: MstCore,
    /// MST2.
    pub signature: Vec<u8>,
    /// MST3.
    pub sealed: Vec<u8>,
    /// M_public.
    pub issuer: Vec<u8>,
}

impl MasterSessionToken {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(CORE_VERSION);
        self.core.write(&mut w);
        w.bytes(&self.signature).bytes(&self.sealed).bytes(&self.issuer);
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::versioned(buf, CORE_VERSION)?;
        let core = MstCore::read(&mut r)?;
        let tok = Self {
            core,
            signature: r.bytes()?.to_vec(),
            sealed: r.bytes()?.to_vec(),
            issuer: r.bytes()?.to_vec(),
        };
        r.finish()?;
        Ok(tok)
    }
}

/// Attribute-Authenticate step 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthRequest {
    pub attributes: AttributeSet,
    pub validity: AttributeSet,
    pub ttl_req: i64,
    pub consumer_pk: Vec<u8>,
}

impl AuthRequest {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(1);
        w.strings(self.attributes.iter())
            .strings(self.validity.iter())
            .i64(self.ttl_req)
            .bytes(&self.consumer_pk);
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::versioned(buf, 1)?;
        let req = Self {
            attributes: r.strings()?.into_iter().collect(),
            validity: r.strings()?.into_iter().collect(),
            ttl_req: r.i64()?,
            consumer_pk: r.bytes()?.to_vec(),
        };
        r.finish()?;
        Ok(req)
    }
}

/// What the authorization node sends back: K' and MST'.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IssuedToken {
    pub k_prime: AbeCiphertext,
    pub sealed_mst: Vec<u8>,
}

impl IssuedToken {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(1);
        w.bytes(&self.k_prime.to_bytes()).bytes(&self.sealed_mst);
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::versioned(buf, 1)?;
        let t = Self {
            k_prime: AbeCiphertext::from_bytes(r.bytes()?)?,
            sealed_mst: r.bytes()?.to_vec(),
        };
        r.finish()?;
        Ok(t)
    }
}

/// Everything an authorization node needs to issue tokens.
pub struct Issuer<'a> {
    pub abe: &'a Abe,
    pub pk: &'a AbePublicParams,
    pub suite: &'a CryptoSuite,
    pub signing: &'a SigKeyPair,
    /// A_j: the attributes this node may authorize.
    pub responsibility: &'a AttributeSet,
    pub params: &'a ProtocolParams,
}

impl Issuer<'_> {
    /// Attribute-Authenticate steps 3 to 11.
    pub fn issue(&self, req: &AuthRequest, now: u64, rng: &mut dyn SecureRng) -> Result<IssuedToken, MstError> {
        let authorized = req.attributes.intersection(self.responsibility);
        if authorized.is_empty() {
            return Err(MstError::NothingAuthorizable);
        }
        let need = self.params.u as usize;
        if req.validity.len() < need {
            return Err(MstError::TooFewValidity {
                got: req.validity.len(),
                need,
            });
        }
        for v in req.validity.iter() {
            if self.pk.current(v).map(|id| id.role) != Some(AttributeRole::Validity) {
                return Err(MstError::NotValidity(v.to_owned()));
            }
        }
        if req.ttl_req <= 0 {
            return Err(MstError::BadTtl);
        }
        let expiry = now + (req.ttl_req as u64).min(self.params.ttl_max);
        let (mst, mut k1) = mint_token(
            self.abe,
            self.pk,
            self.suite,
            self.signing,
            authorized,
            &req.validity,
            expiry,
            &req.consumer_pk,
            rng,
        )?;
        // K' binds every advertised attribute, not just the authorized ones.
        let kp_names: Vec<&str> = req.attributes.iter().chain(req.validity.iter()).collect();
        let k_prime = self.abe.encrypt(self.pk, k1.key_bytes(), &conjunction(&kp_names)?, rng)?;
        let sealed_mst = k1.encrypt(&mst.to_bytes(), rng);
        Ok(IssuedToken { k_prime, sealed_mst })
    }
}

/// Builds and signs an MST with fresh K1, K2 and R. No admission checks:
/// [`Issuer::issue`] performs those. Anyone holding signing key and PK
/// can call this, which is exactly what a stolen authorization key buys.
#[allow(clippy::too_many_arguments)]
pub fn mint_token(
    abe: &Abe,
    pk: &AbePublicParams,
    suite: &CryptoSuite,
    signing: &SigKeyPair,
    authorized: AttributeSet,
    validity: &AttributeSet,
    expiry: u64,
    consumer_pk: &[u8],
    rng: &mut dyn SecureRng,
) -> Result<(MasterSessionToken, SymKeyMaterial), MstError> {
    let k1 = SymKeyMaterial::generate(suite.sym, rng);
    let mut k2 = SymKeyMaterial::generate(suite.sym, rng);
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);

    let sn_names: Vec<&str> = std::iter::once(SERVICE_NODE_ATTRIBUTE).chain(validity.iter()).collect();
    let k2_blob = abe.encrypt(pk, k2.key_bytes(), &conjunction(&sn_names)?, rng)?;

    let core = MstCore {
        k2_blob,
        authorized,
        expiry,
        nonce,
        consumer_pk: consumer_pk.to_vec(),
    };
    let signature = signing.sign(&core.canonical_bytes());
    let sealed = k2.encrypt(&sealed_plaintext(k1.key_bytes(), expiry, &nonce), rng);
    let mst = MasterSessionToken {
        core,
        signature,
        sealed,
        issuer: signing.public().to_vec(),
    };
    Ok((mst, k1))
}

fn sealed_plaintext(k1: &[u8; SYM_KEY_LEN], expiry: u64, nonce: &[u8; NONCE_LEN]) -> Vec<u8> {
    let mut w = Writer::new();
    w.raw(k1).u64(expiry).raw(nonce);
    w.finish()
}

/// Consumer side of step 12: recover K1 from K', then the MST from MST'.
pub fn open_issued(
    abe: &Abe,
    pk: &AbePublicParams,
    suite: &CryptoSuite,
    key: &AbePrivateKey,
    issued: &IssuedToken,
) -> Result<(SymKeyMaterial, MasterSessionToken), MstError> {
    let k1_bytes = abe.decrypt(pk, &issued.k_prime, key).map_err(MstError::KeyRecovery)?;
    let k1 = SymKeyMaterial::from_slice(suite.sym, &k1_bytes)?;
    let mst = MasterSessionToken::from_bytes(&k1.decrypt(&issued.sealed_mst)?)?;
    Ok((k1, mst))
}

/// Registry view used by verification step 1.
pub trait IssuerDirectory {
    /// A_j of the live, non-blacklisted authorization node owning `m_public`.
    fn responsibility_of(&self, m_public: &[u8]) -> Option<AttributeSet>;
}

/// Result of a successful verification.
#[derive(Clone, PartialEq, Eq)]
pub struct SessionGrant {
    pub k1: SymKeyMaterial,
    pub authorized: AttributeSet,
    pub expiry: u64,
    pub consumer_pk: Vec<u8>,
    pub issuer: Vec<u8>,
}

impl fmt::Debug for SessionGrant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SessionGrant")
            .field("authorized", &self.authorized)
            .field("expiry", &self.expiry)
            .finish_non_exhaustive()
    }
}

/// Service-node verification, checks in the order the protocol lists them.
/// Nothing from the sealed part is trusted before its check passes.
pub fn verify(
    abe: &Abe,
    pk: &AbePublicParams,
    suite: &CryptoSuite,
    service_key: &AbePrivateKey,
    directory: &dyn IssuerDirectory,
    mst: &MasterSessionToken,
    now: u64,
) -> Result<SessionGrant, MstError> {
    let fail = |e: MstError| {
        warn!("MST rejected: {e}");
        Err(e)
    };
    match directory.responsibility_of(&mst.issuer) {
        Some(aj) if mst.core.authorized.is_subset(&aj) && !mst.core.authorized.is_empty() => {}
        _ => return fail(MstError::UnknownIssuer),
    }
    if !suite.sig.verify(&mst.issuer, &mst.core.canonical_bytes(), &mst.signature) {
        return fail(MstError::BadSignature);
    }
    let Ok(k2_bytes) = abe.decrypt(pk, &mst.core.k2_blob, service_key) else {
        return fail(MstError::SealOpenFailed);
    };
    let k2 = SymKeyMaterial::from_slice(suite.sym, &k2_bytes)?;
    let sealed = match k2.decrypt(&mst.sealed) {
        Ok(p) if p.len() == SEALED_LEN => p,
        _ => return fail(MstError::SealOpenFailed),
    };
    let mut r = Reader::new(&sealed);
    let k1: [u8; SYM_KEY_LEN] = r.array()?;
    let expiry = r.u64()?;
    let nonce: [u8; NONCE_LEN] = r.array()?;
    if expiry != mst.core.expiry || nonce != mst.core.nonce {
        return fail(MstError::SealedMismatch);
    }
    if now >= expiry {
        return fail(MstError::Expired { expiry, now });
    }
    Ok(SessionGrant {
        k1: SymKeyMaterial::from_key(suite.sym, k1),
        authorized: mst.core.authorized.clone(),
        expiry,
        consumer_pk: mst.core.consumer_pk.clone(),
        issuer: mst.issuer.clone(),
    })
}

#[cfg(test)]
mod tests;
