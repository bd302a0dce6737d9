//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the lines always show; exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use cpabe_dss::abe::{Abe, AbeError, AbeSystemConfig, AttributeId, AttributeRole};
use cpabe_dss::client::{AuthArgs, Client, ClientError, ConsumerCredentials, SessionState};
use cpabe_dss::harness::{
    collude, measure_scaling, run_scenario, Scenario, ScenarioOutcome, SimConnector, SimNet, MEASURED_ACTIONS,
    RATIO_TOLERANCE, SWEEP,
};
use cpabe_dss::mst::MasterSessionToken;
use cpabe_dss::nodes::proto::{self, ErrorReply, GetRequest};
use cpabe_dss::nodes::{Deployment, ErrorCode, InitConfig, NodeError, ProtocolParams};
use cpabe_dss::policy::{self, AttributeSet};
use cpabe_dss::suite::{CryptoSuite, SigAlg, SigKeyPair, SymKeyMaterial};
use cpabe_dss::wire::Writer;

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 9] = [
        ("cp-abe correctness", c1_correctness),
        ("collusion resistance", c2_collusion),
        ("protocol round trip", c3_round_trip),
        ("mst verification matrix", c4_mst_matrix),
        ("weak-model adversary", c5_weak_model),
        ("strong-model recovery", c6_strong_model),
        ("revocation granularity", c7_revocation),
        ("scaling effort", c8_scaling),
        ("determinism", c9_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || *f == n.to_string()) {
            continue;
        }
        let start = Instant::now();
        let verdict = std::panic::catch_unwind(f).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("criterion {n} PASS {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n} FAIL {name}: {detail} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn set(names: &[&str]) -> AttributeSet {
    names.iter().copied().collect()
}

// ---- 1 -------------------------------------------------------------------

/// Policy tree of the test's own, evaluated independently of the library.
#[derive(Debug, Clone)]
enum Tree {
    Leaf(usize),
    And(Box<Tree>, Box<Tree>),
    Or(Box<Tree>, Box<Tree>),
}

impl Tree {
    fn random(rng: &mut ChaCha20Rng, universe: usize, leaves: usize) -> Self {
        if leaves == 1 {
            return Tree::Leaf(rng.gen_range(0..universe));
        }
        let left = rng.gen_range(1..leaves);
        let (l, r) = (
            Box::new(Self::random(rng, universe, left)),
            Box::new(Self::random(rng, universe, leaves - left)),
        );
        if rng.gen_bool(0.5) {
            Tree::And(l, r)
        } else {
            Tree::Or(l, r)
        }
    }

    fn eval(&self, held: &[bool]) -> bool {
        match self {
            Tree::Leaf(i) => held[*i],
            Tree::And(l, r) => l.eval(held) && r.eval(held),
            Tree::Or(l, r) => l.eval(held) || r.eval(held),
        }
    }

    fn text(&self, out: &mut String) {
        match self {
            Tree::Leaf(i) => write!(out, "u{i}").unwrap(),
            Tree::And(l, r) | Tree::Or(l, r) => {
                out.push('(');
                l.text(out);
                out.push_str(if matches!(self, Tree::And(..)) { " and " } else { " or " });
                r.text(out);
                out.push(')');
            }
        }
    }

    fn leaves(&self, out: &mut Vec<usize>) {
        match self {
            Tree::Leaf(i) => out.push(*i),
            Tree::And(l, r) | Tree::Or(l, r) => {
                l.leaves(out);
                r.leaves(out);
            }
        }
    }
}

const UNIVERSE: usize = 12;

fn universe_config() -> AbeSystemConfig {
    AbeSystemConfig {
        security_bits: 128,
        universe: (0..UNIVERSE)
            .map(|i| AttributeId::new(format!("u{i}"), AttributeRole::Generic))
            .collect(),
    }
}

fn c1_correctness() -> Verdict {
    const PAIRS: usize = 500;
    let abe = Abe::waters08();
    let mut rng = ChaCha20Rng::seed_from_u64(0xC1);
    let start = Instant::now();
    let (pk, mk) = abe.setup(&universe_config(), &mut rng).map_err(|e| e.to_string())?;
    let (mut sat, mut unsat, mut wrong) = (0, 0, Vec::new());
    for pair in 0..PAIRS {
        let leaves = rng.gen_range(1..=6);
        let tree = Tree::random(&mut rng, UNIVERSE, leaves);
        let mut text = String::new();
        tree.text(&mut text);
        let policy = policy::parse(&text).map_err(|e| format!("{text}: {e}"))?;
        // Half the keys start from the policy's own leaves so both outcomes
        // are well represented.
        let mut held = [false; UNIVERSE];
        if pair % 2 == 0 {
            let mut leaves = Vec::new();
            tree.leaves(&mut leaves);
            for l in leaves {
                held[l] = rng.gen_bool(0.7);
            }
        } else {
            for h in held.iter_mut() {
                *h = rng.gen_bool(0.3);
            }
        }
        if !held.iter().any(|h| *h) {
            held[rng.gen_range(0..UNIVERSE)] = true;
        }
        let names: Vec<String> = (0..UNIVERSE).filter(|i| held[*i]).map(|i| format!("u{i}")).collect();
        let key = abe
            .generate_key_for_names(&pk, &mk, names.iter().map(String::as_str), &mut rng)
            .map_err(|e| e.to_string())?;
        let mut msg = vec![0u8; 32];
        rng.fill_bytes(&mut msg);
        let ct = abe.encrypt(&pk, &msg, &policy, &mut rng).map_err(|e| e.to_string())?;
        let expect = tree.eval(&held);
        match (expect, abe.decrypt(&pk, &ct, &key)) {
            (true, Ok(pt)) if pt == msg => sat += 1,
            (false, Err(AbeError::PolicyNotSatisfied)) => unsat += 1,
            (_, got) => wrong.push(format!("{text} with {names:?}: expected {expect}, got {got:?}")),
        }
    }
    let elapsed = start.elapsed();
    check(wrong.is_empty(), || format!("{} of {PAIRS} wrong, first: {}", wrong.len(), wrong[0]))?;
    check(elapsed < Duration::from_secs(60), || format!("{PAIRS} pairs took {elapsed:?} (limit 60 s)"))?;
    Ok(format!(
        "{PAIRS} pairs on waters08, {sat} satisfied, {unsat} unsatisfied, 0 mismatches in {:.1} s (limit 60 s)",
        elapsed.as_secs_f64()
    ))
}

// ---- 2 -------------------------------------------------------------------

fn c2_collusion() -> Verdict {
    const INSTANCES: usize = 100;
    let abe = Abe::waters08();
    let mut rng = ChaCha20Rng::seed_from_u64(0xC2);
    let (pk, mk) = abe.setup(&universe_config(), &mut rng).map_err(|e| e.to_string())?;
    let mut attempts = 0;
    let mut controls = 0;
    for i in 0..INSTANCES {
        let mut attrs: Vec<usize> = (0..UNIVERSE).collect();
        attrs.shuffle(&mut rng);
        let width = rng.gen_range(2..=4);
        let policy_attrs = &attrs[..width];
        let cut = rng.gen_range(1..width);
        let noise = &attrs[width..];
        let name = |i: &usize| format!("u{i}");
        let mut a: Vec<String> = policy_attrs[..cut].iter().map(name).collect();
        let mut b: Vec<String> = policy_attrs[cut..].iter().map(name).collect();
        a.extend(noise.iter().filter(|_| rng.gen_bool(0.3)).map(name));
        b.extend(noise.iter().filter(|_| rng.gen_bool(0.3)).map(name));
        let policy_names: Vec<String> = policy_attrs.iter().map(name).collect();
        let policy = policy::conjunction(&policy_names).map_err(|e| e.to_string())?;
        let ct = abe.encrypt(&pk, b"collusion target", &policy, &mut rng).map_err(|e| e.to_string())?;
        let ka = abe
            .generate_key_for_names(&pk, &mk, a.iter().map(String::as_str), &mut rng)
            .map_err(|e| e.to_string())?;
        let kb = abe
            .generate_key_for_names(&pk, &mk, b.iter().map(String::as_str), &mut rng)
            .map_err(|e| e.to_string())?;
        let out = collude(&abe, &pk, &[ka.clone(), kb], &ct);
        attempts += out.attempts;
        check(!out.succeeded, || format!("instance {i}: {a:?} + {b:?} opened {}", policy.to_canonical()))?;
        // Positive control, every tenth instance: one full key in the pool.
        if i % 10 == 0 {
            let full = abe
                .generate_key_for_names(&pk, &mk, policy_names.iter().map(String::as_str), &mut rng)
                .map_err(|e| e.to_string())?;
            check(collude(&abe, &pk, &[ka, full], &ct).succeeded, || format!("instance {i}: control failed"))?;
            controls += 1;
        }
    }
    Ok(format!(
        "{INSTANCES} two-key instances against AND policies, {attempts} decryption attempts, 0 succeeded; {controls} positive controls opened"
    ))
}

// ---- 3 -------------------------------------------------------------------

struct Sim {
    net: SimNet,
    clients: BTreeMap<String, Client<SimConnector>>,
    rng: ChaCha20Rng,
}

fn sim(abe: Abe, suite: CryptoSuite, consumers: &[(&str, &[&str], &[&str])], services: &[&str], seed: u64) -> Sim {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut d = Deployment::init(
        abe.clone(),
        suite,
        InitConfig {
            generic: vec!["a1".into(), "a2".into(), "a3".into()],
            ..InitConfig::default()
        },
        ProtocolParams { x: 4, u: 2, ttl_max: 600 },
        &mut rng,
    )
    .unwrap();
    d.provision_authorization_node("an1", "an1.sim", &set(&["a1", "a2", "a3"]), &mut rng).unwrap();
    for s in services {
        d.provision_service_node(s, &format!("{s}.sim"), &mut rng).unwrap();
    }
    let creds: Vec<ConsumerCredentials> = consumers
        .iter()
        .map(|(id, a, v)| d.enroll_consumer(id, &set(a), &set(v), &mut rng).unwrap())
        .collect();
    let index = d.index().clone();
    let net = SimNet::new(d, seed + 1);
    let clients = creds
        .into_iter()
        .map(|c| {
            let id = c.id.clone();
            let client = Client::new(abe.clone(), index.clone(), c, net.connector(&id));
            (id, client)
        })
        .collect();
    Sim {
        net,
        clients,
        rng: ChaCha20Rng::seed_from_u64(seed + 2),
    }
}

impl Sim {
    fn auth(&mut self, who: &str, service: &str, attributes: Option<&[&str]>) -> Result<SessionState, ClientError> {
        let c = self.clients.get_mut(who).unwrap();
        let args = AuthArgs {
            attributes: attributes.map(set).unwrap_or_else(|| c.credentials().attributes()),
            validity: c.credentials().validity.clone(),
            ttl: 600,
        };
        c.authenticate(&args, "an1.sim", &format!("{service}.sim"), &mut self.rng)
    }
}

fn expect_class<T: std::fmt::Debug>(what: &str, r: Result<T, ClientError>, want: &str) -> Result<(), String> {
    match r {
        Err(e) if e.class() == want => Ok(()),
        other => Err(format!("{what}: expected {want}, got {other:?}")),
    }
}

fn round_trip(abe: Abe, suite: CryptoSuite, seed: u64) -> Result<(), String> {
    let mut s = sim(
        abe,
        suite,
        &[("alice", &["a1", "a2"], &["v1", "v2"]), ("bob", &["a3"], &["v3", "v4"])],
        &["sn1", "sn2"],
        seed,
    );
    let policy = policy::parse("a1 and a2").unwrap();
    for (i, size) in [0usize, 1, 64 * 1024, 1024 * 1024].into_iter().enumerate() {
        let service = if i % 2 == 0 { "sn1" } else { "sn2" };
        let mut session = s.auth("alice", service, None).map_err(|e| format!("auth: {e}"))?;
        let mut data = vec![0u8; size];
        s.rng.fill_bytes(&mut data);
        let id = format!("r{size}");
        let rng = &mut s.rng;
        let alice = s.clients.get_mut("alice").unwrap();
        alice.put(&mut session, &id, &policy, &data, rng).map_err(|e| format!("put {size}: {e}"))?;
        let got = alice.get(&mut session, &id, None, rng).map_err(|e| format!("get {size}: {e}"))?;
        check(got == data, || format!("get {size}: bytes differ"))?;
        let patch_len = size.min(100);
        let offset = (size - patch_len) / 2;
        let mut patch = vec![0u8; patch_len];
        rng.fill_bytes(&mut patch);
        alice
            .write(&mut session, &id, offset as u64, &patch, rng)
            .map_err(|e| format!("write {size}: {e}"))?;
        data[offset..offset + patch_len].copy_from_slice(&patch);
        let got = alice.get(&mut session, &id, None, rng).map_err(|e| format!("get after write {size}: {e}"))?;
        check(got == data, || format!("get after write {size}: bytes differ"))?;

        // Bob holds neither a1 nor a2.
        expect_class("bob auth", s.auth("bob", service, Some(&["a1"])), "key-recovery")?;
        let mut bs = s.auth("bob", service, None).map_err(|e| format!("bob auth: {e}"))?;
        let rng = &mut s.rng;
        let bob = s.clients.get_mut("bob").unwrap();
        expect_class("bob put", bob.put(&mut bs, "x", &policy, b"x", rng), "policy-unsatisfied")?;
        expect_class("bob get", bob.get(&mut bs, &id, None, rng), "policy-unsatisfied")?;
        expect_class("bob write", bob.write(&mut bs, &id, 0, &[], rng), "policy-unsatisfied")?;
    }
    Ok(())
}

fn c3_round_trip() -> Verdict {
    let start = Instant::now();
    round_trip(Abe::mock(), CryptoSuite::modern_fast(), 0xC3)?;
    let mock = start.elapsed();
    check(mock < Duration::from_secs(30), || format!("mock run took {mock:?} (limit 30 s)"))?;
    let start = Instant::now();
    round_trip(Abe::waters08(), CryptoSuite::paper_default(), 0xC3)?;
    let pairing = start.elapsed();
    check(pairing < Duration::from_secs(300), || format!("pairing run took {pairing:?} (limit 5 min)"))?;
    Ok(format!(
        "sizes 0, 1 B, 64 KiB, 1 MiB byte-exact over 2 service nodes; outsider rejected at auth, put, get, write; mock {:.1} s (limit 30 s), waters08 {:.1} s (limit 300 s)",
        mock.as_secs_f64(),
        pairing.as_secs_f64()
    ))
}

// ---- 4 -------------------------------------------------------------------

fn c4_mst_matrix() -> Verdict {
    let mut s = sim(
        Abe::mock(),
        CryptoSuite::modern_fast(),
        &[("alice", &["a1"], &["v1", "v2"])],
        &["sn1"],
        0xC4,
    );
    let mut session = s.auth("alice", "sn1", None).map_err(|e| e.to_string())?;
    let rng = &mut s.rng;
    let alice = s.clients.get_mut("alice").unwrap();
    alice
        .put(&mut session, "f", &policy::parse("a1").unwrap(), b"payload", rng)
        .map_err(|e| e.to_string())?;
    let mst = session.mst().clone();
    let k1 = *session.session_key().key_bytes();

    let d = s.net.deployment();
    let suite = *d.suite();
    let service_key = d.service_node("sn1").unwrap().keys().next().unwrap().clone();
    let k2_bytes = d
        .abe()
        .decrypt(d.index().pk(), &mst.core.k2_blob, &service_key)
        .map_err(|e| e.to_string())?;
    let mut k2 = SymKeyMaterial::from_slice(suite.sym, &k2_bytes).map_err(|e| e.to_string())?;
    let mut reseal = |expiry: u64, nonce: &[u8]| {
        let mut w = Writer::new();
        w.raw(&k1).u64(expiry).raw(nonce);
        k2.encrypt(&w.finish(), &mut *rng)
    };

    let mut cases: Vec<(&str, MasterSessionToken, u64, Option<ErrorCode>)> = Vec::new();
    let now = s.net.now();
    cases.push(("untouched", mst.clone(), now, None));

    let mut bad = mst.clone();
    let rogue = SigKeyPair::generate(SigAlg::Ed25519, &mut ChaCha20Rng::seed_from_u64(1)).unwrap();
    bad.issuer = rogue.public().to_vec();
    bad.signature = rogue.sign(&bad.core.canonical_bytes());
    cases.push(("issuer", bad, now, Some(ErrorCode::UnknownIssuer)));

    let mut bad = mst.clone();
    bad.core.expiry += 1000;
    cases.push(("signature", bad, now, Some(ErrorCode::BadSignature)));

    let mut bad = mst.clone();
    bad.sealed.truncate(bad.sealed.len() / 2);
    cases.push(("sealed", bad, now, Some(ErrorCode::SealOpenFailed)));

    let mut bad = mst.clone();
    bad.sealed = reseal(mst.core.expiry + 1000, &mst.core.nonce);
    cases.push(("expiry disagreement", bad, now, Some(ErrorCode::SealedMismatch)));
    let mut bad = mst.clone();
    let mut nonce = mst.core.nonce;
    nonce[0] ^= 0x80;
    bad.sealed = reseal(mst.core.expiry, &nonce);
    cases.push(("R disagreement", bad, now, Some(ErrorCode::SealedMismatch)));

    cases.push(("expiry", mst.clone(), mst.core.expiry, Some(ErrorCode::Expired)));

    let mut seen = Vec::new();
    for (name, token, at, want) in cases {
        let req = GetRequest {
            mst: token.to_bytes(),
            id: "f".into(),
            range: None,
        };
        let result = s
            .net
            .with_deployment(|d, _, rng| d.handle("sn1", proto::GET_REQUEST, &req.to_bytes(), at, rng));
        let got = match result {
            Ok((kind, _)) if kind == proto::GET_RESPONSE => None,
            Ok((kind, body)) if kind == proto::ERROR => Some(ErrorReply::from_bytes(&body).map_err(|e| e.to_string())?.code),
            Ok((kind, _)) => return Err(format!("{name}: reply 0x{kind:02x}")),
            Err(e) => Some(NodeError::code(&e)),
        };
        check(got == want, || format!("{name}: expected {want:?}, got {got:?}"))?;
        if let Some(c) = got {
            seen.push(format!("{name}->{c}"));
        }
    }
    Ok(format!("untouched token accepted; {}", seen.join(", ")))
}

// ---- 5 -------------------------------------------------------------------

const WEAK_SYSTEM: &str = r#"
[system]
generic = ["a1"]
chunk_size = 512

[[authz]]
id = "an1"
scope = ["a1"]

[[service]]
id = "sn1"

[[consumer]]
id = "alice"
attributes = ["a1"]
validity = ["v1", "v2"]
"#;

/// One seeded run: a fault on each of the four routines, between honest
/// runs that must succeed.
fn fault_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut text = format!("name = \"faults-{seed}\"\nseed = {seed}\n{WEAK_SYSTEM}");
    let hook = |text: &mut String, node: &str, rng: &mut ChaCha20Rng| {
        let direction = if rng.gen_bool(0.5) { "to-node" } else { "to-client" };
        let skip = rng.gen_range(0..2);
        if rng.gen_bool(0.75) {
            let bit = rng.gen_range(0..4096);
            write!(
                text,
                "\n[[step]]\naction = \"adversary\"\nhook = \"tamper\"\nnode = \"{node}\"\ndirection = \"{direction}\"\nbit = {bit}\nskip = {skip}\n"
            )
            .unwrap();
        } else {
            let mut junk = vec![0u8; rng.gen_range(1..64)];
            rng.fill_bytes(&mut junk);
            write!(
                text,
                "\n[[step]]\naction = \"adversary\"\nhook = \"inject\"\nnode = \"{node}\"\ndirection = \"{direction}\"\nbytes = \"{}\"\n",
                hex::encode(junk)
            )
            .unwrap();
        }
    };
    let size = rng.gen_range(1..3000);
    let auth = |session: &str| {
        format!("action = \"authenticate\"\nconsumer = \"alice\"\nauthz = \"an1\"\nservice = \"sn1\"\nsession = \"{session}\"")
    };
    let put = |id: &str| format!("action = \"put\"\nsession = \"alice\"\nid = \"{id}\"\npolicy = \"a1\"\nsize = {size}");
    let get = "action = \"get\"\nsession = \"alice\"\nid = \"f\"".to_string();
    let write = "action = \"write\"\nsession = \"alice\"\nid = \"f\"\noffset = 0\ndata = \"patched\"".to_string();
    // A faulted routine may abort or recover. Its honest repeat must succeed;
    // a write aborted after the node applied it is rewritten identically.
    let routines = [
        ("an1", auth("probe"), Some(auth("alice"))),
        ("sn1", put("p"), Some(put("f"))),
        ("sn1", get.clone(), None),
        ("sn1", write.clone(), Some(write)),
    ];
    for (node, faulted, honest) in &routines {
        hook(&mut text, node, &mut rng);
        write!(text, "\n[[step]]\n{faulted}\nexpect = \"any\"\n\n[[step]]\naction = \"adversary\"\nhook = \"clear\"\n").unwrap();
        if let Some(h) = honest {
            write!(text, "\n[[step]]\n{h}\n").unwrap();
        }
    }
    write!(text, "\n[[step]]\n{get}\n").unwrap();
    Scenario::from_toml(&text).expect("generated scenario parses")
}

fn scripts_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn shipped(name: &str) -> Scenario {
    Scenario::load(&scripts_dir().join(format!("{name}.toml"))).unwrap()
}

fn wire_clean(out: &ScenarioOutcome) -> Result<(), String> {
    for r in out.reports.iter().filter(|r| r.asset == "wire") {
        check(!r.occurred, || format!("{}: {} occurred", out.name, r.goal))?;
    }
    check(out.passed(), || format!("{} steps:\n{}", out.name, out.summary()))
}

fn c5_weak_model() -> Verdict {
    const MIN_FAULTS: u64 = 200;
    let (mut injected, mut detected, mut runs) = (0, 0, 0);
    let mut seed = 0;
    while injected < MIN_FAULTS {
        let out = run_scenario(&fault_scenario(seed)).map_err(|e| format!("seed {seed}: {e}"))?;
        wire_clean(&out)?;
        injected += out.faults.injected;
        detected += out.faults.detected;
        runs += 1;
        seed += 1;
    }
    for name in ["weak-eavesdrop", "weak-tamper", "weak-replay"] {
        let out = run_scenario(&shipped(name)).map_err(|e| e.to_string())?;
        check(out.model.is_weak(), || format!("{name} is not a weak-model scenario"))?;
        wire_clean(&out)?;
        injected += out.faults.injected;
        detected += out.faults.detected;
    }
    check(detected == injected, || format!("{detected} of {injected} faults detected"))?;
    Ok(format!(
        "{runs} seeded fault runs plus eavesdrop, tamper and replay scripts on all four routines: 0 compromise predicates, {detected}/{injected} faults detected (100%, at least {MIN_FAULTS})"
    ))
}

// ---- 6 -------------------------------------------------------------------

fn c6_strong_model() -> Verdict {
    let mut lines = Vec::new();
    for (script, asset, goal) in [
        ("strong-authz", "an1", "forged-accept"),
        ("strong-service", "sn1", "session-key"),
        ("strong-consumer", "alice", "issue-mst"),
    ] {
        let out = run_scenario(&shipped(script)).map_err(|e| e.to_string())?;
        check(out.passed(), || format!("{script}:\n{}", out.summary()))?;
        check(!out.model.is_weak(), || format!("{script} is not a strong-model scenario"))?;
        let r = out.report(asset, goal).ok_or_else(|| format!("{script}: no {asset}/{goal} report"))?;
        check(r.occurred, || format!("{script}: {asset}/{goal} did not occur"))?;
        check(r.forward, || format!("{script}: {asset}/{goal} not forward"))?;
        check(r.online_recoverable, || format!("{script}: {asset}/{goal} not online-recoverable"))?;
        check(!r.recovery_steps.is_empty(), || format!("{script}: no recovery steps"))?;
        // Every achieved compromise in the run is forward and recoverable.
        for other in out.reports.iter().filter(|o| o.occurred) {
            check(other.forward && other.online_recoverable, || format!("{script}: {other:?}"))?;
        }
        lines.push(format!("{asset}/{goal} ({} recovery steps)", r.recovery_steps.len()));
    }
    Ok(format!(
        "{}: each occurred, forward, recovered with other sessions running, identical attack failed afterwards",
        lines.join(", ")
    ))
}

// ---- 7 -------------------------------------------------------------------

fn c7_revocation() -> Verdict {
    let people: &[(&str, &[&str], &[&str])] = &[
        ("c12", &["a1"], &["v1", "v2"]),
        ("c13", &["a1"], &["v1", "v3"]),
        ("c14", &["a2"], &["v1", "v4"]),
        ("c23", &["a2"], &["v2", "v3"]),
        ("c34", &["a3"], &["v3", "v4"]),
        ("c123", &["a1"], &["v1", "v2", "v3"]),
    ];
    let mut details = Vec::new();
    for revoked in ["v1", "v3"] {
        let mut s = sim(Abe::mock(), CryptoSuite::modern_fast(), people, &["sn1"], 0xC7);
        let now = s.net.now();
        let rekey = s
            .net
            .with_deployment(|d, _, rng| d.revoke_validity_attribute(revoked, now, rng))
            .map_err(|e| e.to_string())?;
        let index = s.net.deployment().index().clone();
        // Partition from the enrollment table alone.
        let holders: Vec<&str> = people.iter().filter(|p| p.2.contains(&revoked)).map(|p| p.0).collect();
        let rekeyed: Vec<&str> = rekey.consumers.keys().map(String::as_str).collect();
        let mut holders = holders;
        holders.sort_unstable();
        check(rekeyed == holders, || format!("{revoked}: re-keyed {rekeyed:?}, partition {holders:?}"))?;

        for (id, _, validity) in people {
            let c = s.clients.get_mut(*id).unwrap();
            c.set_index(index.clone());
            let full = AuthArgs {
                attributes: c.credentials().attributes(),
                validity: set(validity),
                ttl: 600,
            };
            let r = c.authenticate(&full, "an1.sim", "sn1.sim", &mut s.rng);
            let requires = validity.contains(&revoked);
            check(r.is_ok() != requires, || format!("{revoked}: {id} advertising {validity:?} gave {r:?}"))?;
            if requires {
                // Without the revoked attribute: only holders of u others pass.
                let rest: Vec<&str> = validity.iter().copied().filter(|v| *v != revoked).collect();
                let narrow = AuthArgs {
                    validity: set(&rest),
                    ..full.clone()
                };
                let r = c.authenticate(&narrow, "an1.sim", "sn1.sim", &mut s.rng);
                check(r.is_ok() == (rest.len() >= 2), || format!("{revoked}: {id} advertising {rest:?} gave {r:?}"))?;
                c.credentials_mut()
                    .install_key(rekey.consumers[*id].clone())
                    .map_err(|e| e.to_string())?;
                let r = c.authenticate(&full, "an1.sim", "sn1.sim", &mut s.rng);
                check(r.is_ok(), || format!("{revoked}: re-issued {id} gave {r:?}"))?;
            }
        }
        details.push(format!("{revoked}: {} of {} re-keyed", holders.len(), people.len()));
    }
    Ok(format!(
        "{}; every advertiser of the revoked attribute fails until re-issued, everyone else unaffected",
        details.join(", ")
    ))
}

// ---- 8 -------------------------------------------------------------------

fn c8_scaling() -> Verdict {
    let mut series = 0;
    let mut worst: f64 = 0.0;
    let mut worst_slope: f64 = 0.0;
    for action in MEASURED_ACTIONS {
        for r in measure_scaling(action, &SWEEP, 8).map_err(|e| e.to_string())? {
            check(r.passed, || {
                format!(
                    "{action:?}/{}: max ratio {:.2}, slope ratio {:.2}, points {:?}",
                    r.series,
                    r.max_ratio,
                    r.slope_ratio,
                    r.points.iter().map(|p| (p.bound, p.cost)).collect::<Vec<_>>()
                )
            })?;
            series += 1;
            worst = worst.max(r.max_ratio);
            worst_slope = worst_slope.max(r.slope_ratio);
        }
    }
    // The quadratic negative control must be rejected by the same test.
    let quad = SWEEP
        .iter()
        .map(|&n| cpabe_dss::harness::SamplePoint {
            before: Default::default(),
            v: 0,
            bound: n as f64,
            cost: n * n,
        })
        .collect();
    let r = cpabe_dss::harness::fit_growth(MEASURED_ACTIONS[0], "control", quad);
    check(!r.passed, || "quadratic control passed the ratio test".into())?;
    Ok(format!(
        "{} actions, {series} sweeps over sizes 1..8: worst point/fit {worst:.2}, worst slope growth {worst_slope:.2} (tolerance {RATIO_TOLERANCE}); quadratic control rejected",
        MEASURED_ACTIONS.len()
    ))
}

// ---- 9 -------------------------------------------------------------------

fn c9_determinism() -> Verdict {
    let mut scripts: Vec<Scenario> = std::fs::read_dir(scripts_dir())
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .map(|p| Scenario::load(&p).unwrap())
        .collect();
    scripts.sort_by(|a, b| a.name.cmp(&b.name));
    scripts.push(fault_scenario(7));
    let mut frames = 0;
    for s in &scripts {
        let a = run_scenario(s).map_err(|e| e.to_string())?;
        let b = run_scenario(s).map_err(|e| e.to_string())?;
        check(a.transcript.wire_bytes() == b.transcript.wire_bytes(), || format!("{}: transcripts differ", s.name))?;
        check(a.transcript.dump() == b.transcript.dump(), || format!("{}: dumps differ", s.name))?;
        frames += a.transcript.len();
    }
    Ok(format!("{} scenarios run twice, {frames} frames, byte-identical transcripts", scripts.len()))
}
