//! Deterministic stand-in scheme for protocol and harness tests.
//!
//! NOT CRYPTOGRAPHIC. The authority secret gating decryption is published
//! inside the public parameters. Decryption succeeds only when the key's
//! components were all minted for the same key id and cover a satisfying
//! set of representations, which mirrors the access behaviour of a real
//! scheme (including collusion and stale-epoch failures) at a fraction of
//! the cost.

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Nonce};
use hmac::{Hmac, Mac};
use sha2::{Digest, Sha256};

use super::{AbeError, AbeScheme, AttributeRepresentation, SchemeId, SecureRng};
use crate::policy::{AccessStructure, PolicyExpr, SelectedLeaf};

const SECRET_LEN: usize = 32;
const KEY_ID_LEN: usize = 16;
const NONCE_LEN: usize = 16;

#[derive(Debug, Default, Clone, Copy)]
pub struct MockScheme;

fn component(secret: &[u8], key_id: &[u8], name: &str, epoch: u32) -> Vec<u8> {
    let mut mac = <Hmac<Sha256> as Mac>::new_from_slice(secret).expect("any key length");
    mac.update(b"mock component");
    mac.update(key_id);
    mac.update(name.as_bytes());
    mac.update(&[0]);
    mac.update(&epoch.to_be_bytes());
    mac.finalize().into_bytes().to_vec()
}

fn envelope(secret: &[u8], nonce: &[u8]) -> Aes256Gcm {
    let key = Sha256::new()
        .chain_update(b"mock envelope")
        .chain_update(secret)
        .chain_update(nonce)
        .finalize();
    Aes256Gcm::new_from_slice(&key).expect("32-byte key")
}

impl AbeScheme for MockScheme {
    fn id(&self) -> SchemeId {
        SchemeId::Mock
    }

    fn supports_security(&self, _bits: u16) -> bool {
        true
    }

    fn block_capacity(&self) -> usize {
        256
    }

    fn setup(&self, _security_bits: u16, rng: &mut dyn SecureRng) -> Result<(Vec<u8>, Vec<u8>), AbeError> {
        let mut secret = vec![0u8; SECRET_LEN];
        rng.fill_bytes(&mut secret);
        Ok((secret.clone(), secret))
    }

    fn represent(&self, params: &[u8], name: &str, epoch: u32) -> Result<Vec<u8>, AbeError> {
        Ok(Sha256::new()
            .chain_update(b"mock representation")
            .chain_update(params)
            .chain_update(name.as_bytes())
            .chain_update(epoch.to_be_bytes())
            .finalize()
            .to_vec())
    }

    fn keygen(
        &self,
        _params: &[u8],
        secret: &[u8],
        attrs: &[&AttributeRepresentation],
        rng: &mut dyn SecureRng,
    ) -> Result<(Vec<u8>, Vec<Vec<u8>>), AbeError> {
        let mut key_id = vec![0u8; KEY_ID_LEN];
        rng.fill_bytes(&mut key_id);
        let comps = attrs
            .iter()
            .map(|r| component(secret, &key_id, &r.id.name, r.id.epoch))
            .collect();
        Ok((key_id, comps))
    }

    fn encrypt(
        &self,
        params: &[u8],
        message: &[u8],
        policy: &PolicyExpr,
        _structure: &AccessStructure,
        _leaves: &[&AttributeRepresentation],
        rng: &mut dyn SecureRng,
    ) -> Result<Vec<u8>, AbeError> {
        let mut nonce = [0u8; NONCE_LEN];
        rng.fill_bytes(&mut nonce);
        let aad = policy.to_canonical();
        let sealed = envelope(params, &nonce)
            .encrypt(
                Nonce::from_slice(&[0u8; 12]),
                Payload {
                    msg: message,
                    aad: aad.as_bytes(),
                },
            )
            .map_err(|_| AbeError::Malformed("message block".into()))?;
        let mut body = nonce.to_vec();
        body.extend_from_slice(&sealed);
        Ok(body)
    }

    fn decrypt(
        &self,
        params: &[u8],
        body: &[u8],
        policy: &PolicyExpr,
        _structure: &AccessStructure,
        selection: &[SelectedLeaf],
        leaf_ids: &[(&str, u32)],
        global: &[u8],
        components: &[Option<&[u8]>],
    ) -> Result<Vec<u8>, AbeError> {
        if body.len() < NONCE_LEN {
            return Err(AbeError::Malformed("mock ciphertext".into()));
        }
        for sel in selection {
            let (name, epoch) = leaf_ids[sel.leaf];
            let expected = component(params, global, name, epoch);
            if components[sel.leaf] != Some(expected.as_slice()) {
                return Err(AbeError::DecryptionFailed);
            }
        }
        let (nonce, sealed) = body.split_at(NONCE_LEN);
        let aad = policy.to_canonical();
        envelope(params, nonce)
            .decrypt(
                Nonce::from_slice(&[0u8; 12]),
                Payload {
                    msg: sealed,
                    aad: aad.as_bytes(),
                },
            )
            .map_err(|_| AbeError::DecryptionFailed)
    }
}
