//! The configured non-ABE components: E_SYM, MAC, S_PSIG, R_KE and the
//! channel key derivation, bundled as a named [`CryptoSuite`].
//!
//! Two suites are registered. `paper-default-v1` follows the reference
//! configuration: AES-256 with a block-cipher MAC (CMAC, the length-safe
//! form of CBC-MAC), RSA-2048 signatures and finite-field Diffie-Hellman.
//! `modern-fast-v1` swaps in Ed25519/X25519/HMAC for fast simulations.

mod ke;
mod kdf;
mod mac;
mod sig;
mod sym;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ke::{EphemeralKey, KeAlg, SharedSecret, MODP_2048_PRIME};
pub use kdf::{derive_channel_keys, ChannelKeys, Direction, DirectionKeys, KdfAlg};
pub use mac::MacAlg;
pub use sig::{SigAlg, SigKeyPair};
pub use sym::{SymAlg, SymKeyMaterial, IV_LEN, SYM_KEY_LEN};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SuiteError {
    #[error("unknown crypto suite {0:?}")]
    UnknownSuite(String),
    #[error("key material has length {found}, expected {expected}")]
    KeyLength { expected: usize, found: usize },
    #[error("initialization vector reused under one key")]
    ParameterReuse,
    #[error("malformed {0}")]
    Malformed(&'static str),
    #[error("peer key-exchange value rejected")]
    BadPeerValue,
    #[error("key generation failed: {0}")]
    KeyGeneration(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SuiteId {
    #[serde(rename = "paper-default-v1")]
    PaperDefault,
    #[serde(rename = "modern-fast-v1")]
    ModernFast,
}

impl SuiteId {
    pub const ALL: [SuiteId; 2] = [SuiteId::PaperDefault, SuiteId::ModernFast];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::PaperDefault => "paper-default-v1",
            Self::ModernFast => "modern-fast-v1",
        }
    }
}

impl fmt::Display for SuiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SuiteId {
    type Err = SuiteError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| SuiteError::UnknownSuite(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CryptoSuite {
    pub id: SuiteId,
    pub sym: SymAlg,
    pub mac: MacAlg,
    pub sig: SigAlg,
    pub ke: KeAlg,
    pub kdf: KdfAlg,
}

impl CryptoSuite {
    pub const fn paper_default() -> Self {
        Self {
            id: SuiteId::PaperDefault,
            sym: SymAlg::Aes256Ctr,
            mac: MacAlg::CmacAes256,
            sig: SigAlg::RsaPkcs1v15Sha256,
            ke: KeAlg::Modp2048,
            kdf: KdfAlg::HkdfSha256,
        }
    }

    pub const fn modern_fast() -> Self {
        Self {
            id: SuiteId::ModernFast,
            sym: SymAlg::Aes256Ctr,
            mac: MacAlg::HmacSha256,
            sig: SigAlg::Ed25519,
            ke: KeAlg::X25519,
            kdf: KdfAlg::HkdfSha256,
        }
    }

    pub fn by_id(id: SuiteId) -> Self {
        match id {
            SuiteId::PaperDefault => Self::paper_default(),
            SuiteId::ModernFast => Self::modern_fast(),
        }
    }
}

impl Default for CryptoSuite {
    fn default() -> Self {
        Self::paper_default()
    }
}

impl FromStr for CryptoSuite {
    type Err = SuiteError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Self::by_id(s.parse()?))
    }
}
