use std::fmt;

use rsa::pkcs1v15::{Signature as RsaSignature, SigningKey as RsaSigningKey, VerifyingKey as RsaVerifyingKey};
use rsa::pkcs8::{DecodePrivateKey, DecodePublicKey, EncodePrivateKey, EncodePublicKey};
use rsa::signature::{SignatureEncoding, Signer, Verifier};
use rsa::{RsaPrivateKey, RsaPublicKey};
use sha2::Sha256;

use super::SuiteError;
use crate::abe::SecureRng;
use crate::wire::{Reader, WireError, Writer};

const RSA_BITS: usize = 2048;
const KEYPAIR_VERSION: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigAlg {
    /// RSA-2048, PKCS#1 v1.5 padding, SHA-256.
    RsaPkcs1v15Sha256,
    Ed25519,
}

impl SigAlg {
    fn code(self) -> u8 {
        match self {
            Self::RsaPkcs1v15Sha256 => 1,
            Self::Ed25519 => 2,
        }
    }

    fn from_code(c: u8) -> Result<Self, WireError> {
        match c {
            1 => Ok(Self::RsaPkcs1v15Sha256),
            2 => Ok(Self::Ed25519),
            _ => Err(WireError::Invalid(format!("signature algorithm {c}"))),
        }
    }

    /// Public keys are SubjectPublicKeyInfo DER for RSA and the raw 32-byte
    /// point for Ed25519. Malformed keys or signatures verify as false.
    pub fn verify(self, public: &[u8], message: &[u8], signature: &[u8]) -> bool {
        match self {
            Self::RsaPkcs1v15Sha256 => {
                let Ok(pk) = RsaPublicKey::from_public_key_der(public) else {
                    return false;
                };
                let Ok(sig) = RsaSignature::try_from(signature) else {
                    return false;
                };
                RsaVerifyingKey::<Sha256>::new(pk).verify(message, &sig).is_ok()
            }
            Self::Ed25519 => {
                let Ok(pk_bytes) = <[u8; 32]>::try_from(public) else {
                    return false;
                };
                let Ok(pk) = ed25519_dalek::VerifyingKey::from_bytes(&pk_bytes) else {
                    return false;
                };
                let Ok(sig) = ed25519_dalek::Signature::from_slice(signature) else {
                    return false;
                };
                pk.verify_strict(message, &sig).is_ok()
            }
        }
    }
}

#[derive(Clone)]
enum Secret {
    Rsa(Box<RsaPrivateKey>),
    Ed25519(Box<ed25519_dalek::SigningKey>),
}

/// A signature key pair: PK_self/SK_self for consumers, M_public/M_private
/// for authorization nodes.
#[derive(Clone)]
pub struct SigKeyPair {
    alg: SigAlg,
    public: Vec<u8>,
    secret: Secret,
}

impl fmt::Debug for SigKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SigKeyPair")
            .field("alg", &self.alg)
            .field("public", &hex::encode(&self.public[self.public.len().saturating_sub(8)..]))
            .finish_non_exhaustive()
    }
}

impl PartialEq for SigKeyPair {
    fn eq(&self, other: &Self) -> bool {
        self.alg == other.alg && self.public == other.public
    }
}

impl Eq for SigKeyPair {}

impl SigKeyPair {
    pub fn generate(alg: SigAlg, rng: &mut dyn SecureRng) -> Result<Self, SuiteError> {
        let secret = match alg {
            SigAlg::RsaPkcs1v15Sha256 => Secret::Rsa(Box::new(
                RsaPrivateKey::new(&mut &mut *rng, RSA_BITS).map_err(|e| SuiteError::KeyGeneration(e.to_string()))?,
            )),
            SigAlg::Ed25519 => Secret::Ed25519(Box::new(ed25519_dalek::SigningKey::generate(&mut &mut *rng))),
        };
        Ok(Self::from_secret(alg, secret))
    }

    fn from_secret(alg: SigAlg, secret: Secret) -> Self {
        let public = match &secret {
            Secret::Rsa(sk) => sk
                .to_public_key()
                .to_public_key_der()
                .expect("RSA public key encodes")
                .as_bytes()
                .to_vec(),
            Secret::Ed25519(sk) => sk.verifying_key().to_bytes().to_vec(),
        };
        Self { alg, public, secret }
    }

    pub fn alg(&self) -> SigAlg {
        self.alg
    }

    pub fn public(&self) -> &[u8] {
        &self.public
    }

    pub fn sign(&self, message: &[u8]) -> Vec<u8> {
        match &self.secret {
            Secret::Rsa(sk) => RsaSigningKey::<Sha256>::new((**sk).clone()).sign(message).to_vec(),
            Secret::Ed25519(sk) => sk.sign(message).to_bytes().to_vec(),
        }
    }

    pub fn verify(&self, message: &[u8], signature: &[u8]) -> bool {
        self.alg.verify(&self.public, message, signature)
    }

    /// Private key file encoding. Contains secret material.
    pub fn to_bytes(&self) -> Vec<u8> {
        let secret = match &self.secret {
            Secret::Rsa(sk) => sk.to_pkcs8_der().expect("RSA private key encodes").as_bytes().to_vec(),
            Secret::Ed25519(sk) => sk.to_bytes().to_vec(),
        };
        let mut w = Writer::with_version(KEYPAIR_VERSION);
        w.u8(self.alg.code()).bytes(&secret);
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::versioned(buf, KEYPAIR_VERSION)?;
        let alg = SigAlg::from_code(r.u8()?)?;
        let raw = r.bytes()?;
        r.finish()?;
        let secret = match alg {
            SigAlg::RsaPkcs1v15Sha256 => Secret::Rsa(Box::new(
                RsaPrivateKey::from_pkcs8_der(raw).map_err(|e| WireError::Invalid(format!("RSA key: {e}")))?,
            )),
            SigAlg::Ed25519 => {
                let k: [u8; 32] = raw
                    .try_into()
                    .map_err(|_| WireError::Invalid("Ed25519 key length".into()))?;
                Secret::Ed25519(Box::new(ed25519_dalek::SigningKey::from_bytes(&k)))
            }
        };
        Ok(Self::from_secret(alg, secret))
    }
}
