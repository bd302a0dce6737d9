//! A whole deployment on the simulated network: one consumer stores, reads
//! and rewrites a resource; an outsider is turned away at every routine.
//!
//! cargo run --release --example protocol_round_trip            # mock scheme
//! cargo run --release --example protocol_round_trip -- waters08

use cpabe_dss::abe::{Abe, SchemeId};
use cpabe_dss::client::{AuthArgs, Client};
use cpabe_dss::harness::SimNet;
use cpabe_dss::nodes::{Deployment, InitConfig, ProtocolParams};
use cpabe_dss::policy::{self, AttributeSet};
use cpabe_dss::suite::CryptoSuite;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn set(names: &[&str]) -> AttributeSet {
    names.iter().copied().collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scheme: SchemeId = std::env::args().nth(1).as_deref().unwrap_or("mock").parse()?;
    let abe = Abe::for_scheme(scheme);
    let mut rng = ChaCha20Rng::seed_from_u64(5);

    let mut d = Deployment::init(
        abe.clone(),
        CryptoSuite::paper_default(),
        InitConfig {
            generic: vec!["engineering".into(), "finance".into()],
            ..InitConfig::default()
        },
        ProtocolParams { x: 4, u: 2, ttl_max: 600 },
        &mut rng,
    )?;
    d.provision_authorization_node("an1", "an1.sim", &set(&["engineering", "finance"]), &mut rng)?;
    d.provision_service_node("sn1", "sn1.sim", &mut rng)?;
    let alice = d.enroll_consumer("alice", &set(&["engineering"]), &set(&["v1", "v2"]), &mut rng)?;
    let mallory = d.enroll_consumer("mallory", &set(&["finance"]), &set(&["v3", "v4"]), &mut rng)?;
    let index = d.index().clone();
    let net = SimNet::new(d, 6);

    let mut a = Client::new(abe.clone(), index.clone(), alice, net.connector("alice"));
    let args = AuthArgs {
        attributes: set(&["engineering"]),
        validity: set(&["v1", "v2"]),
        ttl: 300,
    };
    let mut session = a.authenticate(&args, "an1.sim", "sn1.sim", &mut rng)?;
    println!("alice authorized for {}", session.authorized());

    let policy = policy::parse("engineering")?;
    let doc = b"design notes, revision one".to_vec();
    a.put(&mut session, "notes", &policy, &doc, &mut rng)?;
    a.write(&mut session, "notes", 23, b"two", &mut rng)?;
    let back = a.get(&mut session, "notes", None, &mut rng)?;
    println!("alice reads {:?}", String::from_utf8_lossy(&back));

    let mut m = Client::new(abe, index, mallory, net.connector("mallory"));
    let claim = AuthArgs {
        attributes: set(&["engineering"]),
        validity: set(&["v3", "v4"]),
        ttl: 300,
    };
    println!("mallory claiming engineering: {}", m.authenticate(&claim, "an1.sim", "sn1.sim", &mut rng).unwrap_err());
    let honest = AuthArgs {
        attributes: set(&["finance"]),
        ..claim
    };
    let mut ms = m.authenticate(&honest, "an1.sim", "sn1.sim", &mut rng)?;
    println!("mallory get: {}", m.get(&mut ms, "notes", None, &mut rng).unwrap_err());
    println!("mallory write: {}", m.write(&mut ms, "notes", 0, b"x", &mut rng).unwrap_err());
    println!("{} frames crossed the simulated network", net.transcript().len());
    Ok(())
}
