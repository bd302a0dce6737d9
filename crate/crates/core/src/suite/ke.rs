use std::fmt;
use std::sync::OnceLock;

use num_bigint::BigUint;

use super::SuiteError;
use crate::abe::SecureRng;

/// 2048-bit MODP group prime from RFC 3526, generator 2.
pub const MODP_2048_PRIME: &str = "\
FFFFFFFFFFFFFFFFC90FDAA22168C234C4C6628B80DC1CD129024E088A67CC74\
020BBEA63B139B22514A08798E3404DDEF9519B3CD3A431B302B0A6DF25F1437\
4FE1356D6D51C245E485B576625E7EC6F44C42E9A637ED6B0BFF5CB6F406B7ED\
EE386BFB5A899FA5AE9F24117C4B1FE649286651ECE45B3DC2007CB8A163BF05\
98DA48361C55D39A69163FA8FD24CF5F83655D23DCA3AD961C62F356208552BB\
9ED529077096966D670C354E4ABC9804F1746C08CA18217C32905E462E36CE3B\
E39E772C180E86039B2783A2EC07A28FB5C55DF06F4C52C9DE2BCBF695581718\
3995497CEA956AE515D2261898FA051015728E5A8AACAA68FFFFFFFFFFFFFFFF";

const MODP_BYTES: usize = 256;
const DH_EXPONENT_BYTES: usize = 32;

fn modp_prime() -> &'static BigUint {
    static P: OnceLock<BigUint> = OnceLock::new();
    P.get_or_init(|| BigUint::parse_bytes(MODP_2048_PRIME.as_bytes(), 16).expect("valid hex"))
}

fn to_fixed(n: &BigUint) -> Vec<u8> {
    let raw = n.to_bytes_be();
    let mut out = vec![0u8; MODP_BYTES - raw.len()];
    out.extend_from_slice(&raw);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeAlg {
    /// Unauthenticated ephemeral finite-field Diffie-Hellman.
    Modp2048,
    X25519,
}

impl KeAlg {
    pub fn public_len(self) -> usize {
        match self {
            Self::Modp2048 => MODP_BYTES,
            Self::X25519 => 32,
        }
    }
}

pub enum EphemeralKey {
    Modp { x: BigUint, public: Vec<u8> },
    X25519 { secret: x25519_dalek::StaticSecret, public: [u8; 32] },
}

impl fmt::Debug for EphemeralKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EphemeralKey").field("alg", &self.alg()).finish_non_exhaustive()
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct SharedSecret(Vec<u8>);

impl fmt::Debug for SharedSecret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SharedSecret(..)")
    }
}

impl SharedSecret {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl EphemeralKey {
    pub fn generate(alg: KeAlg, rng: &mut dyn SecureRng) -> Self {
        match alg {
            KeAlg::Modp2048 => {
                let mut bytes = [0u8; DH_EXPONENT_BYTES];
                let x = loop {
                    rng.fill_bytes(&mut bytes);
                    let x = BigUint::from_bytes_be(&bytes);
                    if x > BigUint::from(1u8) {
                        break x;
                    }
                };
                let public = to_fixed(&BigUint::from(2u8).modpow(&x, modp_prime()));
                Self::Modp { x, public }
            }
            KeAlg::X25519 => {
                let mut bytes = [0u8; 32];
                rng.fill_bytes(&mut bytes);
                let secret = x25519_dalek::StaticSecret::from(bytes);
                let public = x25519_dalek::PublicKey::from(&secret).to_bytes();
                Self::X25519 { secret, public }
            }
        }
    }

    pub fn alg(&self) -> KeAlg {
        match self {
            Self::Modp { .. } => KeAlg::Modp2048,
            Self::X25519 { .. } => KeAlg::X25519,
        }
    }

    pub fn public(&self) -> &[u8] {
        match self {
            Self::Modp { public, .. } => public,
            Self::X25519 { public, .. } => public,
        }
    }

    /// Rejects out-of-range or degenerate peer values.
    pub fn agree(self, peer: &[u8]) -> Result<SharedSecret, SuiteError> {
        if peer.len() != self.alg().public_len() {
            return Err(SuiteError::BadPeerValue);
        }
        match self {
            Self::Modp { x, .. } => {
                let p = modp_prime();
                let y = BigUint::from_bytes_be(peer);
                let two = BigUint::from(2u8);
                if y < two || y > p - &two {
                    return Err(SuiteError::BadPeerValue);
                }
                Ok(SharedSecret(to_fixed(&y.modpow(&x, p))))
            }
            Self::X25519 { secret, .. } => {
                let peer: [u8; 32] = peer.try_into().expect("length checked");
                let shared = secret.diffie_hellman(&x25519_dalek::PublicKey::from(peer));
                if !shared.was_contributory() {
                    return Err(SuiteError::BadPeerValue);
                }
                Ok(SharedSecret(shared.as_bytes().to_vec()))
            }
        }
    }
}
