//! Waters' 2008 CP-ABE construction over BLS12-381, in its large-universe
//! form: the group element for each attribute representation is obtained by
//! hashing `(name, epoch)` onto G1, so new attributes and epoch bumps never
//! touch the public parameters.
//!
//! Public parameters: `g1^a`, `e(g1, g2)^alpha`.
//! Master secret: `alpha`, `a`.
//! Key for S: `K = g2^(alpha + a t)`, `L = g2^t`, `K_x = H(x)^t` for x in S.
//! Ciphertext for secret s shared as `lambda_i` over the access tree:
//! `C' = g1^s`, `C_i = g1^(a lambda_i) H(x_i)^(-r_i)`, `D_i = g2^(r_i)`.
//! Decryption recovers `e(g1, g2)^(alpha s)` as
//! `e(C', K) / (e(sum w_i C_i, L) prod e(K_x, D_i)^(w_i))`, which keys a
//! hashed AES-256-GCM envelope around the message block.

use std::collections::HashMap;
use std::sync::Mutex;

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Nonce};
use ark_bls12_381::{g1, Bls12_381, Fr, G1Affine, G1Projective, G2Affine, G2Projective};
use ark_ec::hashing::curve_maps::wb::WBMap;
use ark_ec::hashing::map_to_curve_hasher::MapToCurveBasedHasher;
use ark_ec::hashing::HashToCurve;
use ark_ec::pairing::{Pairing, PairingOutput};
use ark_ec::{CurveGroup, Group};
use ark_ff::field_hashers::DefaultFieldHasher;
use ark_ff::{Field, One, Zero};
use ark_serialize::{CanonicalDeserialize, CanonicalSerialize};
use ark_std::UniformRand;
use sha2::{Digest, Sha256};

use super::{AbeError, AbeScheme, AttributeRepresentation, SchemeId, SecureRng};
use crate::policy::{AccessNode, AccessStructure, PolicyExpr, SelectedLeaf};
use crate::wire::{Reader, Writer};

type Gt = PairingOutput<Bls12_381>;
type G1Hasher = MapToCurveBasedHasher<G1Projective, DefaultFieldHasher<Sha256, 128>, WBMap<g1::Config>>;

const HASH_DST: &[u8] = b"CPABE-DSS-V01-CS01-with-BLS12381G1_XMD:SHA-256_SSWU_RO_";
const KEM_LABEL: &[u8] = b"cpabe-dss waters08 kem v1";
const BODY_VERSION: u8 = 1;
const BLOCK_CAPACITY: usize = 256;

#[derive(Debug, Default)]
pub struct Waters08 {
    points: Mutex<HashMap<Vec<u8>, G1Affine>>,
}

fn ser<T: CanonicalSerialize>(v: &T) -> Vec<u8> {
    let mut out = Vec::with_capacity(v.compressed_size());
    v.serialize_compressed(&mut out).expect("serialization into a Vec cannot fail");
    out
}

fn de<T: CanonicalDeserialize>(bytes: &[u8], what: &str) -> Result<T, AbeError> {
    T::deserialize_compressed(bytes).map_err(|_| AbeError::Malformed(what.to_owned()))
}

struct PublicParts {
    g1_a: G1Affine,
    egg_alpha: Gt,
}

impl PublicParts {
    fn decode(params: &[u8]) -> Result<Self, AbeError> {
        let mut r = Reader::new(params);
        let g1_a = de(r.bytes()?, "public params")?;
        let egg_alpha = de(r.bytes()?, "public params")?;
        r.finish()?;
        Ok(Self { g1_a, egg_alpha })
    }
}

fn kem_key(z: &Gt, c_prime: &G1Affine) -> Aes256Gcm {
    let mut h = Sha256::new();
    h.update(KEM_LABEL);
    h.update(ser(z));
    h.update(ser(c_prime));
    Aes256Gcm::new_from_slice(&h.finalize()).expect("32-byte key")
}

/// Shares `secret` over the tree; `out[i]` receives leaf i's share.
fn share(node: &AccessNode, secret: Fr, out: &mut [Fr], rng: &mut dyn SecureRng) {
    match node {
        AccessNode::Leaf { index, .. } => out[*index] = secret,
        AccessNode::Gate { threshold, children } => {
            let mut coeffs = vec![secret];
            coeffs.extend((1..*threshold).map(|_| Fr::rand(rng)));
            for (j, child) in children.iter().enumerate() {
                let x = Fr::from(j as u64 + 1);
                // Horner evaluation of the gate polynomial at x.
                let y = coeffs.iter().rev().fold(Fr::zero(), |acc, c| acc * x + c);
                share(child, y, out, rng);
            }
        }
    }
}

/// Lagrange coefficient at zero for position `j` within `set`.
fn lagrange_at_zero(j: u32, set: &[u32]) -> Fr {
    let xj = Fr::from(j as u64);
    set.iter().filter(|&&m| m != j).fold(Fr::one(), |acc, &m| {
        let xm = Fr::from(m as u64);
        acc * xm * (xm - xj).inverse().expect("distinct gate positions")
    })
}

impl Waters08 {
    fn point(&self, material: &[u8]) -> Result<G1Affine, AbeError> {
        if let Some(p) = self.points.lock().expect("point cache poisoned").get(material) {
            return Ok(*p);
        }
        let p: G1Affine = de(material, "attribute representation")?;
        self.points
            .lock()
            .expect("point cache poisoned")
            .insert(material.to_vec(), p);
        Ok(p)
    }
}

impl AbeScheme for Waters08 {
    fn id(&self) -> SchemeId {
        SchemeId::Waters08Bls12
    }

    fn supports_security(&self, bits: u16) -> bool {
        // BLS12-381 sits at the 128-bit tier.
        bits == 128
    }

    fn block_capacity(&self) -> usize {
        BLOCK_CAPACITY
    }

    fn setup(&self, _security_bits: u16, rng: &mut dyn SecureRng) -> Result<(Vec<u8>, Vec<u8>), AbeError> {
        let alpha = Fr::rand(rng);
        let a = Fr::rand(rng);
        let g1_a = (G1Projective::generator() * a).into_affine();
        let egg_alpha = Bls12_381::pairing(G1Projective::generator(), G2Projective::generator()) * alpha;
        let mut w = Writer::new();
        w.bytes(&ser(&g1_a)).bytes(&ser(&egg_alpha));
        let mut s = Writer::new();
        s.bytes(&ser(&alpha)).bytes(&ser(&a));
        Ok((w.finish(), s.finish()))
    }

    fn represent(&self, _params: &[u8], name: &str, epoch: u32) -> Result<Vec<u8>, AbeError> {
        let hasher = G1Hasher::new(HASH_DST).map_err(|e| AbeError::Malformed(format!("hasher: {e}")))?;
        let mut msg = Vec::with_capacity(name.len() + 5);
        msg.extend_from_slice(name.as_bytes());
        msg.push(0);
        msg.extend_from_slice(&epoch.to_be_bytes());
        let p = hasher
            .hash(&msg)
            .map_err(|e| AbeError::Malformed(format!("hash to curve: {e}")))?;
        Ok(ser(&p))
    }

    fn keygen(
        &self,
        _params: &[u8],
        secret: &[u8],
        attrs: &[&AttributeRepresentation],
        rng: &mut dyn SecureRng,
    ) -> Result<(Vec<u8>, Vec<Vec<u8>>), AbeError> {
        let mut r = Reader::new(secret);
        let alpha: Fr = de(r.bytes()?, "master key")?;
        let a: Fr = de(r.bytes()?, "master key")?;
        r.finish()?;
        let t = Fr::rand(rng);
        let k = (G2Projective::generator() * (alpha + a * t)).into_affine();
        let l = (G2Projective::generator() * t).into_affine();
        let comps = attrs
            .iter()
            .map(|rep| Ok(ser(&(self.point(&rep.material)? * t).into_affine())))
            .collect::<Result<Vec<_>, AbeError>>()?;
        let mut w = Writer::new();
        w.bytes(&ser(&k)).bytes(&ser(&l));
        Ok((w.finish(), comps))
    }

    fn encrypt(
        &self,
        params: &[u8],
        message: &[u8],
        policy: &PolicyExpr,
        structure: &AccessStructure,
        leaves: &[&AttributeRepresentation],
        rng: &mut dyn SecureRng,
    ) -> Result<Vec<u8>, AbeError> {
        let pp = PublicParts::decode(params)?;
        let s = Fr::rand(rng);
        let mut shares = vec![Fr::zero(); leaves.len()];
        share(structure.root(), s, &mut shares, rng);

        let c_prime = (G1Projective::generator() * s).into_affine();
        let z = pp.egg_alpha * s;

        let mut w = Writer::with_version(BODY_VERSION);
        w.raw(&ser(&c_prime)).u32(leaves.len() as u32);
        for (rep, lambda) in leaves.iter().zip(&shares) {
            let r_i = Fr::rand(rng);
            let h = self.point(&rep.material)?;
            let c_i = (pp.g1_a * lambda - h * r_i).into_affine();
            let d_i = (G2Projective::generator() * r_i).into_affine();
            w.raw(&ser(&c_i)).raw(&ser(&d_i));
        }
        let aad = policy.to_canonical();
        let sealed = kem_key(&z, &c_prime)
            .encrypt(
                Nonce::from_slice(&[0u8; 12]),
                Payload {
                    msg: message,
                    aad: aad.as_bytes(),
                },
            )
            .map_err(|_| AbeError::Malformed("message block".into()))?;
        w.bytes(&sealed);
        Ok(w.finish())
    }

    fn decrypt(
        &self,
        _params: &[u8],
        body: &[u8],
        policy: &PolicyExpr,
        structure: &AccessStructure,
        selection: &[SelectedLeaf],
        _leaf_ids: &[(&str, u32)],
        global: &[u8],
        components: &[Option<&[u8]>],
    ) -> Result<Vec<u8>, AbeError> {
        const G1_LEN: usize = 48;
        const G2_LEN: usize = 96;

        let mut r = Reader::versioned(body, BODY_VERSION)?;
        let c_prime: G1Affine = de(r.take(G1_LEN)?, "ciphertext")?;
        let n = r.u32()? as usize;
        if n != structure.leaves().len() {
            return Err(AbeError::Malformed("ciphertext leaf count".into()));
        }
        let mut pairs = Vec::with_capacity(n);
        for _ in 0..n {
            pairs.push((r.take(G1_LEN)?, r.take(G2_LEN)?));
        }
        let sealed = r.bytes()?;
        r.finish()?;

        let mut g = Reader::new(global);
        let k: G2Affine = de(g.bytes()?, "private key")?;
        let l: G2Affine = de(g.bytes()?, "private key")?;
        g.finish()?;

        let mut weighted_c = G1Projective::zero();
        let mut lhs: Vec<G1Affine> = vec![c_prime];
        let mut rhs: Vec<G2Affine> = vec![k, l];
        for sel in selection {
            let omega = sel
                .path
                .iter()
                .fold(Fr::one(), |acc, (j, set)| acc * lagrange_at_zero(*j, set));
            let (c_bytes, d_bytes) = pairs[sel.leaf];
            let c_i: G1Affine = de(c_bytes, "ciphertext")?;
            let d_i: G2Affine = de(d_bytes, "ciphertext")?;
            let comp = components[sel.leaf].ok_or(AbeError::PolicyNotSatisfied)?;
            let k_x: G1Affine = de(comp, "private key component")?;
            weighted_c += c_i * omega;
            lhs.push((k_x * -omega).into_affine());
            rhs.push(d_i);
        }
        lhs.insert(1, (-weighted_c).into_affine());
        let z = Bls12_381::multi_pairing(lhs, rhs);

        let aad = policy.to_canonical();
        kem_key(&z, &c_prime)
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
