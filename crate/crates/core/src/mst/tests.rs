use std::collections::{HashMap, HashSet};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::*;
use crate::abe::{AbeMasterKey, AbeSystemConfig, AttributeId};
use crate::suite::SigAlg;

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

struct Directory(HashMap<Vec<u8>, AttributeSet>);

impl IssuerDirectory for Directory {
    fn responsibility_of(&self, m_public: &[u8]) -> Option<AttributeSet> {
        self.0.get(m_public).cloned()
    }
}

struct World {
    abe: Abe,
    pk: AbePublicParams,
    mk: AbeMasterKey,
    suite: CryptoSuite,
    node: SigKeyPair,
    responsibility: AttributeSet,
    params: ProtocolParams,
    service_key: AbePrivateKey,
    consumer: SigKeyPair,
    directory: Directory,
}

fn world(seed: u64) -> World {
    let abe = Abe::mock();
    let mut universe = vec![AttributeId::new(SERVICE_NODE_ATTRIBUTE, AttributeRole::ServiceNode)];
    universe.extend(["a1", "a2", "a3"].map(|n| AttributeId::new(n, AttributeRole::Generic)));
    universe.extend(["v1", "v2", "v3", "v4"].map(|n| AttributeId::new(n, AttributeRole::Validity)));
    let mut r = rng(seed);
    let (pk, mk) = abe.setup(&AbeSystemConfig { security_bits: 128, universe }, &mut r).unwrap();
    let suite = CryptoSuite::modern_fast();
    let node = SigKeyPair::generate(SigAlg::Ed25519, &mut r).unwrap();
    let consumer = SigKeyPair::generate(SigAlg::Ed25519, &mut r).unwrap();
    let responsibility: AttributeSet = ["a1", "a2"].into_iter().collect();
    let service_key = abe
        .generate_key_for_names(&pk, &mk, ["SN", "v1", "v2", "v3", "v4"], &mut r)
        .unwrap();
    let directory = Directory([(node.public().to_vec(), responsibility.clone())].into_iter().collect());
    World {
        abe,
        pk,
        mk,
        suite,
        node,
        responsibility,
        params: ProtocolParams { x: 4, u: 2, ttl_max: 900 },
        service_key,
        consumer,
        directory,
    }
}

impl World {
    fn issuer(&self) -> Issuer<'_> {
        Issuer {
            abe: &self.abe,
            pk: &self.pk,
            suite: &self.suite,
            signing: &self.node,
            responsibility: &self.responsibility,
            params: &self.params,
        }
    }

    fn request(&self, attrs: &[&str], validity: &[&str], ttl: i64) -> AuthRequest {
        AuthRequest {
            attributes: attrs.iter().copied().collect(),
            validity: validity.iter().copied().collect(),
            ttl_req: ttl,
            consumer_pk: self.consumer.public().to_vec(),
        }
    }

    fn consumer_key(&self, names: &[&str], seed: u64) -> AbePrivateKey {
        self.abe
            .generate_key_for_names(&self.pk, &self.mk, names.iter().copied(), &mut rng(seed))
            .unwrap()
    }

    fn token(&self, now: u64) -> (SymKeyMaterial, MasterSessionToken) {
        let issued = self
            .issuer()
            .issue(&self.request(&["a1"], &["v1", "v2"], 600), now, &mut rng(now))
            .unwrap();
        let key = self.consumer_key(&["a1", "v1", "v2"], 1);
        open_issued(&self.abe, &self.pk, &self.suite, &key, &issued).unwrap()
    }

    fn verify(&self, mst: &MasterSessionToken, now: u64) -> Result<SessionGrant, MstError> {
        verify(&self.abe, &self.pk, &self.suite, &self.service_key, &self.directory, mst, now)
    }
}

#[test]
fn expiry_takes_the_smaller_ttl() {
    let w = world(1);
    let key = w.consumer_key(&["a1", "v1", "v2"], 2);
    for (ttl, expected) in [(3600, 1900), (60, 1060)] {
        let issued = w.issuer().issue(&w.request(&["a1"], &["v1", "v2"], ttl), 1000, &mut rng(3)).unwrap();
        let (_, mst) = open_issued(&w.abe, &w.pk, &w.suite, &key, &issued).unwrap();
        assert_eq!(mst.core.expiry, expected);
    }
}

#[test]
fn issued_token_round_trips_to_the_same_session_key() {
    let w = world(2);
    let (k1, mst) = w.token(100);
    let grant = w.verify(&mst, 101).unwrap();
    assert_eq!(grant.k1.key_bytes(), k1.key_bytes());
    assert_eq!(grant.authorized.to_vec(), vec!["a1".to_string()]);
    assert_eq!(grant.consumer_pk, w.consumer.public());
    assert_eq!(mst.core.k2_blob.policy().to_canonical(), "(SN and (v1 and v2))");
    assert_eq!(MasterSessionToken::from_bytes(&mst.to_bytes()).unwrap(), mst);
}

#[test]
fn authorized_subset_is_limited_to_node_responsibility() {
    let w = world(3);
    let issued = w
        .issuer()
        .issue(&w.request(&["a1", "a3"], &["v1", "v2"], 600), 0, &mut rng(4))
        .unwrap();
    assert_eq!(issued.k_prime.policy().to_canonical(), "(a1 and (a3 and (v1 and v2)))");
    let key = w.consumer_key(&["a1", "a3", "v1", "v2"], 5);
    let (_, mst) = open_issued(&w.abe, &w.pk, &w.suite, &key, &issued).unwrap();
    assert_eq!(mst.core.authorized.to_vec(), vec!["a1".to_string()]);
}

#[test]
fn consumer_missing_an_advertised_attribute_cannot_open() {
    let w = world(4);
    let issued = w
        .issuer()
        .issue(&w.request(&["a1", "a2"], &["v1", "v2"], 600), 0, &mut rng(5))
        .unwrap();
    for names in [&["a1", "v1", "v2"][..], &["a1", "a2", "v1"]] {
        let key = w.consumer_key(names, 6);
        assert!(matches!(
            open_issued(&w.abe, &w.pk, &w.suite, &key, &issued),
            Err(MstError::KeyRecovery(AbeError::PolicyNotSatisfied))
        ));
    }
}

#[test]
fn issue_validates_request() {
    let w = world(5);
    let i = w.issuer();
    let mut r = rng(0);
    assert_eq!(
        i.issue(&w.request(&["a3"], &["v1", "v2"], 600), 0, &mut r),
        Err(MstError::NothingAuthorizable)
    );
    assert_eq!(
        i.issue(&w.request(&["a1"], &["v1"], 600), 0, &mut r),
        Err(MstError::TooFewValidity { got: 1, need: 2 })
    );
    assert_eq!(
        i.issue(&w.request(&["a1"], &["v1", "a2"], 600), 0, &mut r),
        Err(MstError::NotValidity("a2".into()))
    );
    assert_eq!(i.issue(&w.request(&["a1"], &["v1", "v2"], 0), 0, &mut r), Err(MstError::BadTtl));
}

#[test]
fn each_verification_check_is_individually_falsifiable() {
    let w = world(6);
    let (_, mst) = w.token(10);

    // 1. issuer not whitelisted (or not responsible for A').
    let mut bad = mst.clone();
    bad.issuer = w.consumer.public().to_vec();
    assert_eq!(w.verify(&bad, 11).unwrap_err(), MstError::UnknownIssuer);
    let mut bad = mst.clone();
    bad.core.authorized.insert("a3");
    assert_eq!(w.verify(&bad, 11).unwrap_err(), MstError::UnknownIssuer);

    // 2. signed content changed.
    let mut bad = mst.clone();
    bad.core.nonce[0] ^= 1;
    assert_eq!(w.verify(&bad, 11).unwrap_err(), MstError::BadSignature);

    // 3. sealed part cannot be opened: truncated, or a service key lacking
    // a validity attribute named in MST1.
    let mut bad = mst.clone();
    bad.sealed.pop();
    assert_eq!(w.verify(&bad, 11).unwrap_err(), MstError::SealOpenFailed);
    let partial = w
        .abe
        .generate_key_for_names(&w.pk, &w.mk, ["SN", "v1"], &mut rng(7))
        .unwrap();
    assert_eq!(
        verify(&w.abe, &w.pk, &w.suite, &partial, &w.directory, &mst, 11).unwrap_err(),
        MstError::SealOpenFailed
    );

    // 4. sealed expiry or R disagree with the signed core.
    let mut bad = mst.clone();
    let n = bad.sealed.len();
    bad.sealed[n - 1] ^= 1;
    assert_eq!(w.verify(&bad, 11).unwrap_err(), MstError::SealedMismatch);
    let mut bad = mst.clone();
    bad.sealed[n - NONCE_LEN - 1] ^= 1;
    assert_eq!(w.verify(&bad, 11).unwrap_err(), MstError::SealedMismatch);

    // 5. expired.
    assert_eq!(
        w.verify(&mst, mst.core.expiry).unwrap_err(),
        MstError::Expired { expiry: mst.core.expiry, now: mst.core.expiry }
    );
    assert!(w.verify(&mst, mst.core.expiry - 1).is_ok());
}

#[test]
fn forged_tokens_are_rejected() {
    let w = world(7);
    let (_, mst) = w.token(0);
    let rogue = SigKeyPair::generate(SigAlg::Ed25519, &mut rng(8)).unwrap();
    let mut r = rng(9);
    for i in 0..1_000 {
        let mut forged = mst.clone();
        forged.core.authorized.insert(if i % 2 == 0 { "a2" } else { "a1" });
        r.fill_bytes(&mut forged.core.nonce);
        match i % 3 {
            0 => {
                let mut sig = vec![0u8; forged.signature.len()];
                r.fill_bytes(&mut sig);
                forged.signature = sig;
                assert_eq!(w.verify(&forged, 1).unwrap_err(), MstError::BadSignature);
            }
            1 => {
                forged.signature = rogue.sign(&forged.core.canonical_bytes());
                assert_eq!(w.verify(&forged, 1).unwrap_err(), MstError::BadSignature);
            }
            _ => {
                forged.signature = rogue.sign(&forged.core.canonical_bytes());
                forged.issuer = rogue.public().to_vec();
                assert_eq!(w.verify(&forged, 1).unwrap_err(), MstError::UnknownIssuer);
            }
        }
    }
}

#[test]
fn canonical_encoding_is_injective() {
    let abe = Abe::mock();
    let names = ["a", "b", "ab", "c"];
    let universe = names.map(|n| AttributeId::new(n, AttributeRole::Generic)).to_vec();
    let mut r = rng(10);
    let (pk, _) = abe.setup(&AbeSystemConfig { security_bits: 128, universe }, &mut r).unwrap();
    let blobs: Vec<AbeCiphertext> = ["a", "b", "a and b", "ab"]
        .iter()
        .map(|p| abe.encrypt(&pk, b"k", &crate::policy::parse(p).unwrap(), &mut r).unwrap())
        .collect();

    let mut seen: HashMap<Vec<u8>, MstCore> = HashMap::new();
    let mut distinct = HashSet::new();
    for _ in 0..100_000 {
        let mut nonce = [0u8; NONCE_LEN];
        nonce[0] = r.gen_range(0..4);
        let core = MstCore {
            k2_blob: blobs[r.gen_range(0..blobs.len())].clone(),
            authorized: names.iter().copied().filter(|_| r.gen_bool(0.5)).collect(),
            expiry: r.gen_range(0..4),
            nonce,
            consumer_pk: (0..r.gen_range(0..3)).map(|_| r.gen_range(0..2)).collect(),
        };
        let bytes = core.canonical_bytes();
        if let Some(prev) = seen.get(&bytes) {
            assert_eq!(prev, &core, "encoding collision");
        } else {
            assert_eq!(MstCore::from_canonical(&bytes).unwrap(), core);
            distinct.insert(bytes.clone());
            seen.insert(bytes, core);
        }
    }
    // Small field domains force many repeats; collisions would show up here.
    assert!(distinct.len() > 1000);
}

#[test]
fn wire_types_round_trip() {
    let w = world(8);
    let req = w.request(&["a1", "a2"], &["v1", "v3"], -5);
    assert_eq!(AuthRequest::from_bytes(&req.to_bytes()).unwrap(), req);
    let issued = w.issuer().issue(&w.request(&["a1"], &["v1", "v3"], 5), 0, &mut rng(1)).unwrap();
    assert_eq!(IssuedToken::from_bytes(&issued.to_bytes()).unwrap(), issued);
    assert!(ProtocolParams { x: 2, u: 3, ttl_max: 1 }.validate().is_err());
    assert_eq!(ProtocolParams::default().validity_names(), ["v1", "v2", "v3", "v4"]);
}
