use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::*;
use crate::policy::{parse, satisfies};

const NAMES: [&str; 6] = ["a0", "a1", "a2", "a3", "a4", "a5"];

fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

fn config() -> AbeSystemConfig {
    AbeSystemConfig {
        security_bits: 128,
        universe: NAMES.iter().map(|n| AttributeId::new(*n, AttributeRole::Generic)).collect(),
    }
}

fn system(abe: &Abe, seed: u64) -> (AbePublicParams, AbeMasterKey) {
    abe.setup(&config(), &mut rng(seed)).unwrap()
}

fn subset(mask: u32) -> Vec<&'static str> {
    (0..NAMES.len()).filter(|i| mask & (1 << i) != 0).map(|i| NAMES[i]).collect()
}

fn arb_policy() -> impl Strategy<Value = PolicyExpr> {
    let leaf = (0..NAMES.len()).prop_map(|i| PolicyExpr::Leaf(NAMES[i].to_string()));
    leaf.prop_recursive(4, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(l, r)| PolicyExpr::and(l, r)),
            (inner.clone(), inner).prop_map(|(l, r)| PolicyExpr::or(l, r)),
        ]
    })
}

/// Mixes components from two keys into one, taking `from_b` names from `b`.
fn splice(global: &AbePrivateKey, a: &AbePrivateKey, b: &AbePrivateKey, from_b: &[&str]) -> AbePrivateKey {
    let mut comps = BTreeMap::new();
    for (src, take_listed) in [(a, false), (b, true)] {
        for (id, c) in src.components() {
            if from_b.contains(&id.name.as_str()) == take_listed {
                comps.insert(id.clone(), c.clone());
            }
        }
    }
    AbePrivateKey::from_parts(global.scheme(), global.global_component().to_vec(), comps)
}

fn check_round_trip(abe: &Abe, seed: u64, policy: &PolicyExpr, mask: u32, msg: &[u8]) -> Result<(), TestCaseError> {
    let (pk, mk) = system(abe, seed);
    let names = subset(mask);
    prop_assume!(!names.is_empty());
    let mut r = rng(seed ^ 0x5555);
    let sk = abe.generate_key_for_names(&pk, &mk, names.iter().copied(), &mut r).unwrap();
    let ct = abe.encrypt(&pk, msg, policy, &mut r).unwrap();
    let set: AttributeSet = names.iter().copied().collect();
    match abe.decrypt(&pk, &ct, &sk) {
        Ok(pt) => {
            prop_assert!(satisfies(&set, policy));
            prop_assert_eq!(pt, msg.to_vec());
        }
        Err(e) => {
            prop_assert!(!satisfies(&set, policy));
            prop_assert_eq!(e, AbeError::PolicyNotSatisfied);
        }
    }
    Ok(())
}

/// Splits a minimal authorized set of `policy` into two unauthorized halves,
/// each padded with extra attributes that keep it unauthorized.
fn colluding_halves(policy: &PolicyExpr, rot: usize, cut: usize, noise: u32) -> Option<(Vec<&'static str>, Vec<&'static str>)> {
    let mut order: Vec<&'static str> = NAMES.iter().copied().filter(|n| policy.attribute_names().contains(n)).collect();
    let k = order.len();
    order.rotate_left(rot % k);
    let mut m = order.clone();
    for n in &order {
        let trial: Vec<&str> = m.iter().copied().filter(|x| x != n).collect();
        if satisfies(&trial.iter().copied().collect(), policy) {
            m = trial;
        }
    }
    if m.len() < 2 {
        return None;
    }
    let cut = 1 + cut % (m.len() - 1);
    let (mut a, mut b) = (m[..cut].to_vec(), m[cut..].to_vec());
    for (i, n) in NAMES.iter().enumerate() {
        let half = if noise & (1 << i) != 0 { &mut a } else { &mut b };
        if half.contains(n) {
            continue;
        }
        half.push(n);
        if satisfies(&half.iter().copied().collect(), policy) {
            half.pop();
        }
    }
    Some((a, b))
}

/// Two keys that individually fail, spliced every way, must still fail.
fn check_collusion(abe: &Abe, seed: u64, policy: &PolicyExpr, rot: usize, cut: usize, noise: u32) -> Result<(), TestCaseError> {
    let halves = colluding_halves(policy, rot, cut, noise);
    prop_assume!(halves.is_some());
    let (na, nb) = halves.unwrap();
    let (pk, mk) = system(abe, seed);
    let sa: AttributeSet = na.iter().copied().collect();
    let sb: AttributeSet = nb.iter().copied().collect();
    prop_assert!(!satisfies(&sa, policy) && !satisfies(&sb, policy));
    prop_assert!(satisfies(&sa.union(&sb), policy));

    let mut r = rng(seed ^ 0xC011);
    let ka = abe.generate_key_for_names(&pk, &mk, na.iter().copied(), &mut r).unwrap();
    let kb = abe.generate_key_for_names(&pk, &mk, nb.iter().copied(), &mut r).unwrap();
    let ct = abe.encrypt(&pk, b"collusion target", policy, &mut r).unwrap();
    let only_b: Vec<&str> = nb.iter().copied().filter(|n| !sa.contains(n)).collect();
    for global in [&ka, &kb] {
        for take in 0u32..(1 << only_b.len()) {
            let picked: Vec<&str> = (0..only_b.len()).filter(|i| take & (1 << i) != 0).map(|i| only_b[i]).collect();
            let mixed = splice(global, &ka, &kb, &picked);
            let res = abe.decrypt(&pk, &ct, &mixed);
            prop_assert!(res.is_err(), "spliced key decrypted under {}", policy);
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 500, max_global_rejects: 4096, ..ProptestConfig::default() })]

    #[test]
    fn mock_decrypts_iff_policy_satisfied(
        seed in any::<u64>(),
        policy in arb_policy(),
        mask in 1u32..64,
        msg in proptest::collection::vec(any::<u8>(), 0..=256),
    ) {
        check_round_trip(&Abe::mock(), seed, &policy, mask, &msg)?;
    }

    #[test]
    fn mock_resists_collusion(seed in any::<u64>(), policy in arb_policy(), rot in 0usize..6, cut in 0usize..6, noise in 0u32..64) {
        check_collusion(&Abe::mock(), seed, &policy, rot, cut, noise)?;
    }
}

proptest! {
    // Pairing-based cases are ~10ms each; fewer cases, same oracles.
    #![proptest_config(ProptestConfig { cases: 24, max_global_rejects: 4096, ..ProptestConfig::default() })]

    #[test]
    fn waters_decrypts_iff_policy_satisfied(
        seed in any::<u64>(),
        policy in arb_policy(),
        mask in 1u32..64,
        msg in proptest::collection::vec(any::<u8>(), 0..=256),
    ) {
        check_round_trip(&Abe::waters08(), seed, &policy, mask, &msg)?;
    }

    #[test]
    fn waters_resists_collusion(seed in any::<u64>(), policy in arb_policy(), rot in 0usize..6, cut in 0usize..6, noise in 0u32..64) {
        check_collusion(&Abe::waters08(), seed, &policy, rot, cut, noise)?;
    }
}

#[test]
fn waters_threshold_policy_with_repeated_attribute() {
    let abe = Abe::waters08();
    let (pk, mk) = system(&abe, 1);
    let p = parse("(a0 and a1) or (a0 and a2) or (a3 and (a4 or a0))").unwrap();
    let mut r = rng(2);
    let ct = abe.encrypt(&pk, b"hello", &p, &mut r).unwrap();
    for (names, ok) in [
        (vec!["a0", "a2"], true),
        (vec!["a3", "a0"], true),
        (vec!["a1", "a2", "a3"], false),
        (vec!["a0"], false),
    ] {
        let sk = abe.generate_key_for_names(&pk, &mk, names.clone(), &mut r).unwrap();
        assert_eq!(abe.decrypt(&pk, &ct, &sk).is_ok(), ok, "{names:?}");
    }
}

#[test]
fn widened_key_cross_check_for_waters() {
    // Collusion check with the global component of the key whose set is
    // closer: a0 from key A and a1 from key B under "a0 and a1".
    let abe = Abe::waters08();
    let (pk, mk) = system(&abe, 3);
    let p = parse("a0 and a1").unwrap();
    let mut r = rng(4);
    let ka = abe.generate_key_for_names(&pk, &mk, ["a0"], &mut r).unwrap();
    let kb = abe.generate_key_for_names(&pk, &mk, ["a1"], &mut r).unwrap();
    let ct = abe.encrypt(&pk, b"x", &p, &mut r).unwrap();
    for global in [&ka, &kb] {
        let mixed = splice(global, &ka, &kb, &["a1"]);
        assert_eq!(abe.decrypt(&pk, &ct, &mixed), Err(AbeError::DecryptionFailed));
    }
}

#[test]
fn setup_validates_parameters() {
    for abe in [Abe::waters08(), Abe::mock()] {
        let mut cfg = config();
        cfg.security_bits = 100;
        assert_eq!(abe.setup(&cfg, &mut rng(0)).unwrap_err(), AbeError::UnsupportedSecurity(100));
        cfg.security_bits = 128;
        cfg.universe.clear();
        assert_eq!(abe.setup(&cfg, &mut rng(0)).unwrap_err(), AbeError::EmptyUniverse);
        let mut cfg = config();
        cfg.universe.push(AttributeId::new("a1", AttributeRole::Generic));
        assert!(matches!(abe.setup(&cfg, &mut rng(0)), Err(AbeError::DuplicateAttribute(_))));
    }
    let mut cfg = config();
    cfg.security_bits = 256;
    assert_eq!(
        Abe::waters08().setup(&cfg, &mut rng(0)).unwrap_err(),
        AbeError::UnsupportedSecurity(256)
    );
}

#[test]
fn distinct_seeds_give_distinct_public_params() {
    let abe = Abe::waters08();
    let (a, _) = system(&abe, 10);
    let (b, _) = system(&abe, 11);
    let (c, _) = system(&abe, 10);
    assert_ne!(a.to_bytes(), b.to_bytes());
    assert_eq!(a.to_bytes(), c.to_bytes());
}

#[test]
fn key_generation_rejects_bad_sets() {
    let abe = Abe::mock();
    let (pk, mk) = system(&abe, 5);
    let none: Vec<AttributeId> = Vec::new();
    assert_eq!(
        abe.generate_key(&pk, &mk, &none, &mut rng(0)).unwrap_err(),
        AbeError::EmptyAttributeSet
    );
    assert!(matches!(
        abe.generate_key_for_names(&pk, &mk, ["zz"], &mut rng(0)),
        Err(AbeError::UnknownAttribute(_))
    ));
    let mut stale = pk.current("a0").unwrap().clone();
    stale.epoch = 7;
    assert!(matches!(
        abe.generate_key(&pk, &mk, [&stale], &mut rng(0)),
        Err(AbeError::StaleEpoch { held: 7, current: 0, .. })
    ));
}

#[test]
fn oversized_message_and_unknown_leaf_rejected() {
    let abe = Abe::waters08();
    let (pk, _) = system(&abe, 6);
    let p = parse("a0").unwrap();
    assert!(matches!(
        abe.encrypt(&pk, &[0u8; 257], &p, &mut rng(0)),
        Err(AbeError::MessageTooLarge { len: 257, capacity: 256 })
    ));
    assert!(matches!(
        abe.encrypt(&pk, b"", &parse("a0 or nope").unwrap(), &mut rng(0)),
        Err(AbeError::UnknownAttribute(_))
    ));
}

#[test]
fn reissue_locks_out_old_keys_from_new_ciphertexts() {
    for abe in [Abe::waters08(), Abe::mock()] {
        let (mut pk, mk) = system(&abe, 7);
        let mut r = rng(8);
        let p = parse("a0 and a1").unwrap();
        let old_key = abe.generate_key_for_names(&pk, &mk, ["a0", "a1"], &mut r).unwrap();
        let old_ct = abe.encrypt(&pk, b"before", &p, &mut r).unwrap();

        let rep = abe.reissue_attribute(&mut pk, &mk, "a1").unwrap();
        assert_eq!(rep.id.epoch, 1);
        assert_eq!(pk.current("a1").unwrap().epoch, 1);
        let new_ct = abe.encrypt(&pk, b"after", &p, &mut r).unwrap();
        assert_eq!(new_ct.epochs()["a1"], 1);

        assert_eq!(abe.decrypt(&pk, &old_ct, &old_key).unwrap(), b"before");
        assert_eq!(abe.decrypt(&pk, &new_ct, &old_key), Err(AbeError::PolicyNotSatisfied));
        assert_eq!(old_key.current_names(&pk).to_vec(), vec!["a0".to_string()]);

        let new_key = abe.generate_key_for_names(&pk, &mk, ["a0", "a1"], &mut r).unwrap();
        assert_eq!(abe.decrypt(&pk, &new_ct, &new_key).unwrap(), b"after");
        // New keys hold only the new epoch, so old ciphertexts stay closed.
        assert_eq!(abe.decrypt(&pk, &old_ct, &new_key), Err(AbeError::PolicyNotSatisfied));

        // Forging a stale component under the new epoch label fails.
        let mut comps = old_key.components().clone();
        let stale = comps.remove(&AttributeId { epoch: 0, ..pk.current("a1").unwrap().clone() }).unwrap();
        comps.insert(pk.current("a1").unwrap().clone(), stale);
        let forged = AbePrivateKey::from_parts(abe.scheme_id(), old_key.global_component().to_vec(), comps);
        assert_eq!(abe.decrypt(&pk, &new_ct, &forged), Err(AbeError::DecryptionFailed));
    }
}

#[test]
fn added_attribute_is_usable() {
    let abe = Abe::waters08();
    let (mut pk, mk) = system(&abe, 9);
    abe.add_attribute(&mut pk, &mk, AttributeId::new("late", AttributeRole::Validity)).unwrap();
    assert!(matches!(
        abe.add_attribute(&mut pk, &mk, AttributeId::new("late", AttributeRole::Generic)),
        Err(AbeError::DuplicateAttribute(_))
    ));
    assert_eq!(pk.names_with_role(AttributeRole::Validity).to_vec(), vec!["late".to_string()]);
    let mut r = rng(1);
    let sk = abe.generate_key_for_names(&pk, &mk, ["late"], &mut r).unwrap();
    let ct = abe.encrypt(&pk, b"m", &parse("late or a0").unwrap(), &mut r).unwrap();
    assert_eq!(abe.decrypt(&pk, &ct, &sk).unwrap(), b"m");
}

#[test]
fn tampered_body_fails_to_decrypt() {
    for abe in [Abe::waters08(), Abe::mock()] {
        let (pk, mk) = system(&abe, 12);
        let mut r = rng(13);
        let sk = abe.generate_key_for_names(&pk, &mk, ["a0"], &mut r).unwrap();
        let ct = abe.encrypt(&pk, b"integrity", &parse("a0").unwrap(), &mut r).unwrap();
        let len = ct.body().len();
        for pos in [len - 1, len - 20, len / 2] {
            let mut bad = ct.clone();
            bad.body_mut()[pos] ^= 0x01;
            assert!(abe.decrypt(&pk, &bad, &sk).is_err(), "flip at {pos}");
        }
    }
}

#[test]
fn policy_is_bound_to_ciphertext() {
    let abe = Abe::mock();
    let (pk, mk) = system(&abe, 14);
    let mut r = rng(15);
    let sk = abe.generate_key_for_names(&pk, &mk, ["a0", "a1"], &mut r).unwrap();
    let ct = abe.encrypt(&pk, b"m", &parse("a0 and a1").unwrap(), &mut r).unwrap();
    let mut swapped = AbeCiphertext::from_bytes(&ct.to_bytes()).unwrap();
    swapped.policy = parse("a1 and a0").unwrap();
    assert_eq!(abe.decrypt(&pk, &swapped, &sk), Err(AbeError::DecryptionFailed));
}

#[test]
fn serialization_round_trips() {
    let abe = Abe::waters08();
    let (pk, mk) = system(&abe, 16);
    let mut r = rng(17);
    let sk = abe.generate_key_for_names(&pk, &mk, ["a2", "a3"], &mut r).unwrap();
    let ct = abe.encrypt(&pk, b"wire", &parse("a2 and (a3 or a4)").unwrap(), &mut r).unwrap();

    let pk2 = AbePublicParams::from_bytes(&pk.to_bytes()).unwrap();
    let mk2 = AbeMasterKey::from_bytes(&mk.to_bytes()).unwrap();
    let sk2 = AbePrivateKey::from_bytes(&sk.to_bytes()).unwrap();
    let ct2 = AbeCiphertext::from_bytes(&ct.to_bytes()).unwrap();
    assert_eq!((&pk2, &mk2, &sk2, &ct2), (&pk, &mk, &sk, &ct));
    assert_eq!(abe.decrypt(&pk2, &ct2, &sk2).unwrap(), b"wire");

    let bytes = ct.to_bytes();
    assert!(AbeCiphertext::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    let mut long = bytes.clone();
    long.push(0);
    assert!(AbeCiphertext::from_bytes(&long).is_err());
    assert!(!format!("{mk:?}").contains(&hex::encode(&mk.secret)));
}

#[test]
fn scheme_mismatch_detected() {
    let w = Abe::waters08();
    let m = Abe::mock();
    let (pk, _) = system(&m, 18);
    assert!(matches!(
        w.encrypt(&pk, b"", &parse("a0").unwrap(), &mut rng(0)),
        Err(AbeError::SchemeMismatch { .. })
    ));
}

// ---- chained mode ---------------------------------------------------------

fn pattern(len: usize) -> Vec<u8> {
    (0..len).map(|i| (i * 31 % 251) as u8).collect()
}

#[test]
fn chain_round_trips_at_boundary_lengths() {
    let abe = Abe::waters08();
    let (pk, mk) = system(&abe, 20);
    let mut r = rng(21);
    let sk = abe.generate_key_for_names(&pk, &mk, ["a0"], &mut r).unwrap();
    let p = parse("a0 or a1").unwrap();
    let cs = 4096u32;
    for len in [0usize, 1, cs as usize - 1, cs as usize, cs as usize + 1, 1 << 20] {
        let data = pattern(len);
        let chain = abe.encrypt_chain(&pk, &data, &p, cs, &mut r).unwrap();
        assert_eq!(chain.chunks.len(), len.div_ceil(cs as usize));
        let back = ChainCiphertext::from_bytes(&chain.to_bytes()).unwrap();
        assert_eq!(back, chain);
        assert_eq!(abe.decrypt_chain(&pk, &back, &sk).unwrap(), data, "len {len}");
    }
}

#[test]
fn chain_requires_satisfying_key() {
    let abe = Abe::mock();
    let (pk, mk) = system(&abe, 22);
    let mut r = rng(23);
    let sk = abe.generate_key_for_names(&pk, &mk, ["a2"], &mut r).unwrap();
    let chain = abe.encrypt_chain(&pk, &pattern(100), &parse("a0").unwrap(), 16, &mut r).unwrap();
    assert_eq!(abe.decrypt_chain(&pk, &chain, &sk), Err(AbeError::PolicyNotSatisfied));
}

#[test]
fn chain_range_reads_match_plaintext() {
    let abe = Abe::mock();
    let (pk, mk) = system(&abe, 24);
    let mut r = rng(25);
    let sk = abe.generate_key_for_names(&pk, &mk, ["a0"], &mut r).unwrap();
    let data = pattern(1000);
    let chain = abe.encrypt_chain(&pk, &data, &parse("a0").unwrap(), 64, &mut r).unwrap();
    for (s, e) in [(0u64, 0u64), (0, 1), (63, 65), (64, 128), (100, 1000), (999, 1000), (0, 1000)] {
        let slice = chain.slice(&(s..e)).unwrap();
        let slice = ChainSlice::from_bytes(&slice.to_bytes()).unwrap();
        let got = slice.decrypt_range(&abe, &pk, &sk, s..e).unwrap();
        assert_eq!(got, &data[s as usize..e as usize], "{s}..{e}");
    }
    assert!(matches!(
        abe.decrypt_chain_range(&pk, &chain, &sk, 10..1001),
        Err(AbeError::RangeOutOfBounds { .. })
    ));
    // A slice cannot serve a range it does not hold.
    let slice = chain.slice(&(0..64)).unwrap();
    assert!(slice.decrypt_range(&abe, &pk, &sk, 0..65).is_err());
}

#[test]
fn chain_tamper_is_localized_to_chunk() {
    let abe = Abe::waters08();
    let (pk, mk) = system(&abe, 26);
    let mut r = rng(27);
    let sk = abe.generate_key_for_names(&pk, &mk, ["a0"], &mut r).unwrap();
    let data = pattern(10 * 128);
    let mut chain = abe.encrypt_chain(&pk, &data, &parse("a0").unwrap(), 128, &mut r).unwrap();
    chain.chunks[3].ciphertext[5] ^= 0x80;
    assert_eq!(
        abe.decrypt_chain(&pk, &chain, &sk),
        Err(AbeError::ChunkAuthentication { index: 3 })
    );
    assert_eq!(abe.decrypt_chain_range(&pk, &chain, &sk, 0..384).unwrap(), &data[..384]);
    assert_eq!(abe.decrypt_chain_range(&pk, &chain, &sk, 512..1280).unwrap(), &data[512..]);
    assert!(abe.decrypt_chain_range(&pk, &chain, &sk, 300..400).is_err());
}

#[test]
fn chain_chunks_cannot_be_reordered_or_transplanted() {
    let abe = Abe::mock();
    let (pk, mk) = system(&abe, 28);
    let mut r = rng(29);
    let sk = abe.generate_key_for_names(&pk, &mk, ["a0"], &mut r).unwrap();
    let p = parse("a0").unwrap();
    let data = pattern(256);
    let chain = abe.encrypt_chain(&pk, &data, &p, 64, &mut r).unwrap();

    let mut swapped = chain.clone();
    swapped.chunks.swap(1, 2);
    swapped.chunks[1].index = 1;
    swapped.chunks[2].index = 2;
    assert!(abe.decrypt_chain(&pk, &swapped, &sk).is_err());

    // Same data key reused under a different header still fails.
    let key = abe.open_chain_key(&pk, &chain.header, &sk).unwrap();
    let other_header = abe.encrypt(&pk, key.as_bytes(), &p, &mut r).unwrap();
    let mut moved = chain.clone();
    moved.header = other_header;
    assert!(matches!(
        abe.decrypt_chain(&pk, &moved, &sk),
        Err(AbeError::ChunkAuthentication { index: 0 })
    ));

    let mut truncated = chain.clone();
    truncated.total_len = 192;
    truncated.chunks.pop();
    assert!(abe.decrypt_chain(&pk, &truncated, &sk).is_err());
}

#[test]
fn chain_manifest_tracks_chunk_changes() {
    let abe = Abe::mock();
    let (pk, mk) = system(&abe, 30);
    let mut r = rng(31);
    let sk = abe.generate_key_for_names(&pk, &mk, ["a0"], &mut r).unwrap();
    let data = pattern(300);
    let mut chain = abe.encrypt_chain(&pk, &data, &parse("a0").unwrap(), 100, &mut r).unwrap();
    let before = chain.manifest();
    assert_eq!(ChainManifest::from_bytes(&before.to_bytes()).unwrap(), before);

    let key = abe.open_chain_key(&pk, &chain.header, &sk).unwrap();
    let ctx = chain.context();
    let replacement = key.seal_chunk(&ctx, 1, &[7u8; 100], &mut r);
    chain.replace_chunks(vec![replacement]).unwrap();
    let after = chain.manifest();
    assert_eq!(after.chunk_digests[0], before.chunk_digests[0]);
    assert_ne!(after.chunk_digests[1], before.chunk_digests[1]);

    let mut expected = data.clone();
    expected[100..200].fill(7);
    assert_eq!(abe.decrypt_chain(&pk, &chain, &sk).unwrap(), expected);

    let oob = key.seal_chunk(&ctx, 9, b"x", &mut r);
    assert!(chain.replace_chunks(vec![oob]).is_err());
}

#[test]
fn chain_rejects_malformed_encodings() {
    let abe = Abe::mock();
    let (pk, _) = system(&abe, 32);
    let chain = abe.encrypt_chain(&pk, &pattern(50), &parse("a0").unwrap(), 16, &mut rng(0)).unwrap();
    assert!(abe.encrypt_chain(&pk, b"x", &parse("a0").unwrap(), 0, &mut rng(0)).is_err());
    let mut bad = chain.clone();
    bad.chunks[2].index = 5;
    assert!(ChainCiphertext::from_bytes(&bad.to_bytes()).is_err());
    let mut bad = chain.clone();
    bad.total_len = 100;
    assert!(ChainCiphertext::from_bytes(&bad.to_bytes()).is_err());
    assert!(DataKey::from_slice(&[0u8; 31]).is_err());
}

#[test]
fn default_geometry_one_mebibyte() {
    let abe = Abe::mock();
    let (pk, mk) = system(&abe, 34);
    let mut r = rng(35);
    let sk = abe.generate_key_for_names(&pk, &mk, ["a0"], &mut r).unwrap();
    let mut data = vec![0u8; 1 << 20];
    r.fill_bytes(&mut data);
    let p = parse("a0").unwrap();
    let mut chain = abe.encrypt_chain(&pk, &data, &p, DEFAULT_CHUNK_SIZE, &mut r).unwrap();
    assert_eq!(chain.chunks.len(), 16);

    let slice = chain.slice(&(65536..131072)).unwrap();
    assert_eq!((slice.first_chunk, slice.chunks.len()), (1, 1));
    assert_eq!(slice.decrypt_range(&abe, &pk, &sk, 65536..131072).unwrap(), &data[65536..131072]);

    chain.chunks[3].tag[0] ^= 1;
    assert_eq!(
        abe.decrypt_chain(&pk, &chain, &sk),
        Err(AbeError::ChunkAuthentication { index: 3 })
    );

    let empty = abe.encrypt_chain(&pk, b"", &p, DEFAULT_CHUNK_SIZE, &mut r).unwrap();
    assert!(empty.chunks.is_empty());
    assert!(abe.decrypt_chain_range(&pk, &empty, &sk, 0..0).unwrap().is_empty());
}
