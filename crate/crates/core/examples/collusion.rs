//! Two consumers pool their keys against a conjunction neither satisfies
//! alone. The pooled attempt fails; a single sufficient key succeeds.
//!
//! cargo run --release --example collusion

use cpabe_dss::abe::{Abe, AbeSystemConfig, AttributeId, AttributeRole};
use cpabe_dss::harness::collude;
use cpabe_dss::policy;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha20Rng::seed_from_u64(9);
    let abe = Abe::waters08();
    let config = AbeSystemConfig {
        security_bits: 128,
        universe: ["hr", "audit", "legal"]
            .into_iter()
            .map(|n| AttributeId::new(n, AttributeRole::Generic))
            .collect(),
    };
    let (pk, mk) = abe.setup(&config, &mut rng)?;
    let ct = abe.encrypt(&pk, b"salary review", &policy::parse("hr and audit")?, &mut rng)?;
    let hr = abe.generate_key_for_names(&pk, &mk, ["hr", "legal"], &mut rng)?;
    let audit = abe.generate_key_for_names(&pk, &mk, ["audit"], &mut rng)?;
    let both = abe.generate_key_for_names(&pk, &mk, ["hr", "audit"], &mut rng)?;

    let pooled = collude(&abe, &pk, &[hr.clone(), audit], &ct);
    println!("hr+legal with audit: succeeded={} after {} attempts", pooled.succeeded, pooled.attempts);
    let control = collude(&abe, &pk, &[hr, both], &ct);
    println!("with one hr+audit key: succeeded={}", control.succeeded);
    Ok(())
}
