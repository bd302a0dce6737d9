//! Revokes one validity attribute and shows that exactly its holders are
//! shut out until they install the re-issued key.
//!
//! cargo run --example revocation

use cpabe_dss::abe::Abe;
use cpabe_dss::client::{AuthArgs, Client, ClientError};
use cpabe_dss::harness::{SimConnector, SimNet};
use cpabe_dss::nodes::{Deployment, InitConfig, ProtocolParams};
use cpabe_dss::policy::AttributeSet;
use cpabe_dss::suite::CryptoSuite;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn set(names: &[&str]) -> AttributeSet {
    names.iter().copied().collect()
}

fn auth(c: &mut Client<SimConnector>, rng: &mut ChaCha20Rng) -> Result<(), ClientError> {
    let args = AuthArgs {
        attributes: c.credentials().attributes(),
        validity: c.credentials().validity.clone(),
        ttl: 300,
    };
    c.authenticate(&args, "an1.sim", "sn1.sim", rng).map(drop)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let abe = Abe::mock();
    let mut d = Deployment::init(
        abe.clone(),
        CryptoSuite::modern_fast(),
        InitConfig {
            generic: vec!["staff".into()],
            ..InitConfig::default()
        },
        ProtocolParams { x: 4, u: 2, ttl_max: 600 },
        &mut rng,
    )?;
    d.provision_authorization_node("an1", "an1.sim", &set(&["staff"]), &mut rng)?;
    d.provision_service_node("sn1", "sn1.sim", &mut rng)?;
    let people = [("ann", ["v1", "v2"]), ("ben", ["v1", "v3"]), ("cat", ["v2", "v4"]), ("dan", ["v3", "v4"])];
    let mut creds = Vec::new();
    for (id, v) in people {
        creds.push(d.enroll_consumer(id, &set(&["staff"]), &set(&v), &mut rng)?);
    }
    let net = SimNet::new(d, 8);
    let now = net.now();
    let rekey = net.with_deployment(|d, _, rng| d.revoke_validity_attribute("v1", now, rng))?;
    println!(
        "revoked {:?}: re-keyed consumers {:?} and {} service node(s)",
        rekey.revoked,
        rekey.consumers.keys().collect::<Vec<_>>(),
        rekey.service_nodes.len()
    );

    let index = net.deployment().index().clone();
    for c in creds {
        let id = c.id.clone();
        let mut client = Client::new(abe.clone(), index.clone(), c, net.connector(&id));
        match auth(&mut client, &mut rng) {
            Ok(()) => println!("{id}: unaffected"),
            Err(e) => {
                client.credentials_mut().install_key(rekey.consumers[&id].clone())?;
                auth(&mut client, &mut rng)?;
                println!("{id}: refused ({}), accepted after installing the new key", e.class());
            }
        }
    }
    Ok(())
}
