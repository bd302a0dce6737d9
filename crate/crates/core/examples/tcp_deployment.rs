//! A persisted deployment served over loopback TCP, one daemon thread per
//! node, with a consumer talking to it through real sockets.
//!
//! cargo run --example tcp_deployment

use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use cpabe_dss::abe::Abe;
use cpabe_dss::client::{AuthArgs, Client, TcpConnector};
use cpabe_dss::nodes::server::{serve_tcp, DeploymentService};
use cpabe_dss::nodes::{Deployment, InitConfig, ProtocolParams};
use cpabe_dss::policy::{self, AttributeSet};
use cpabe_dss::suite::CryptoSuite;
use rand::rngs::OsRng;

fn set(names: &[&str]) -> AttributeSet {
    names.iter().copied().collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let suite = CryptoSuite::modern_fast();
    let abe = Abe::mock();
    let mut rng = OsRng;
    let an = TcpListener::bind("127.0.0.1:0")?;
    let sn = TcpListener::bind("127.0.0.1:0")?;
    let (an_addr, sn_addr) = (an.local_addr()?.to_string(), sn.local_addr()?.to_string());

    let mut d = Deployment::create(
        dir.path(),
        abe.clone(),
        suite,
        InitConfig {
            generic: vec!["ops".into()],
            ..InitConfig::default()
        },
        ProtocolParams { x: 4, u: 2, ttl_max: 600 },
        &mut rng,
    )?;
    d.provision_authorization_node("an1", &an_addr, &set(&["ops"]), &mut rng)?;
    d.provision_service_node("sn1", &sn_addr, &mut rng)?;
    let creds = d.enroll_consumer("olga", &set(&["ops"]), &set(&["v1", "v2"]), &mut rng)?;
    d.save()?;

    for (id, listener) in [("an1", an), ("sn1", sn)] {
        let service = DeploymentService::node(Deployment::open(dir.path())?, id)?;
        thread::spawn(move || serve_tcp(listener, suite, Arc::new(Mutex::new(service))));
        println!("{id} listening on {}", d.index().node(id).map(|n| n.address.as_str()).unwrap_or("?"));
    }

    let mut client = Client::new(abe, d.index().clone(), creds, TcpConnector::default());
    let args = AuthArgs {
        attributes: set(&["ops"]),
        validity: set(&["v1", "v2"]),
        ttl: 120,
    };
    let mut session = client.authenticate(&args, &an_addr, &sn_addr, &mut rng)?;
    client.put(&mut session, "runbook", &policy::parse("ops")?, b"restart order: db, api, web", &mut rng)?;
    let back = client.get(&mut session, "runbook", Some(15..27), &mut rng)?;
    println!("read back over TCP: {:?}", String::from_utf8_lossy(&back));
    Ok(())
}
