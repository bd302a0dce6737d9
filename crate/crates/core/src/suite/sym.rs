use std::collections::HashSet;
use std::fmt;

use aes::Aes256;
use ctr::cipher::{KeyIvInit, StreamCipher};

use super::SuiteError;
use crate::abe::SecureRng;

pub const SYM_KEY_LEN: usize = 32;
pub const IV_LEN: usize = 16;

type Aes256Ctr = ctr::Ctr128BE<Aes256>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymAlg {
    Aes256Ctr,
}

impl SymAlg {
    /// Applies the keystream for `iv` in place. Encryption and decryption
    /// are the same operation.
    pub fn apply(self, key: &[u8; SYM_KEY_LEN], iv: &[u8; IV_LEN], buf: &mut [u8]) {
        match self {
            Self::Aes256Ctr => Aes256Ctr::new(key.into(), iv.into()).apply_keystream(buf),
        }
    }
}

/// An E_SYM key together with the parameters already consumed under it.
///
/// Ciphertexts are `iv ‖ body`. Every encryption through one instance uses
/// a distinct IV; reuse is refused rather than silently accepted.
#[derive(Clone)]
pub struct SymKeyMaterial {
    alg: SymAlg,
    key: [u8; SYM_KEY_LEN],
    used: HashSet<[u8; IV_LEN]>,
}

impl fmt::Debug for SymKeyMaterial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymKeyMaterial")
            .field("alg", &self.alg)
            .field("used_ivs", &self.used.len())
            .finish_non_exhaustive()
    }
}

impl PartialEq for SymKeyMaterial {
    fn eq(&self, other: &Self) -> bool {
        self.alg == other.alg && subtle::ConstantTimeEq::ct_eq(&self.key[..], &other.key[..]).into()
    }
}

impl Eq for SymKeyMaterial {}

impl SymKeyMaterial {
    pub fn generate(alg: SymAlg, rng: &mut dyn SecureRng) -> Self {
        let mut key = [0u8; SYM_KEY_LEN];
        rng.fill_bytes(&mut key);
        Self::from_key(alg, key)
    }

    pub fn from_key(alg: SymAlg, key: [u8; SYM_KEY_LEN]) -> Self {
        Self {
            alg,
            key,
            used: HashSet::new(),
        }
    }

    pub fn from_slice(alg: SymAlg, bytes: &[u8]) -> Result<Self, SuiteError> {
        let key: [u8; SYM_KEY_LEN] = bytes.try_into().map_err(|_| SuiteError::KeyLength {
            expected: SYM_KEY_LEN,
            found: bytes.len(),
        })?;
        Ok(Self::from_key(alg, key))
    }

    pub fn key_bytes(&self) -> &[u8; SYM_KEY_LEN] {
        &self.key
    }

    pub fn alg(&self) -> SymAlg {
        self.alg
    }

    pub fn encrypt(&mut self, plaintext: &[u8], rng: &mut dyn SecureRng) -> Vec<u8> {
        loop {
            let mut iv = [0u8; IV_LEN];
            rng.fill_bytes(&mut iv);
            if let Ok(ct) = self.encrypt_with_iv(iv, plaintext) {
                return ct;
            }
        }
    }

    pub fn encrypt_with_iv(&mut self, iv: [u8; IV_LEN], plaintext: &[u8]) -> Result<Vec<u8>, SuiteError> {
        if !self.used.insert(iv) {
            return Err(SuiteError::ParameterReuse);
        }
        let mut out = Vec::with_capacity(IV_LEN + plaintext.len());
        out.extend_from_slice(&iv);
        out.extend_from_slice(plaintext);
        self.alg.apply(&self.key, &iv, &mut out[IV_LEN..]);
        Ok(out)
    }

    pub fn decrypt(&self, ciphertext: &[u8]) -> Result<Vec<u8>, SuiteError> {
        if ciphertext.len() < IV_LEN {
            return Err(SuiteError::Malformed("symmetric ciphertext"));
        }
        let (iv, body) = ciphertext.split_at(IV_LEN);
        let iv: [u8; IV_LEN] = iv.try_into().expect("split at IV_LEN");
        let mut out = body.to_vec();
        self.alg.apply(&self.key, &iv, &mut out);
        Ok(out)
    }
}
