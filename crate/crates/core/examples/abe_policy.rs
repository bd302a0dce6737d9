//! Parses a policy, encrypts under it with the pairing scheme and shows
//! which keys open the ciphertext.
//!
//! cargo run --release --example abe_policy -- "(a1 and a2) or a3"

use cpabe_dss::abe::{Abe, AbeError, AbeSystemConfig, AttributeId, AttributeRole};
use cpabe_dss::policy;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = std::env::args().nth(1).unwrap_or_else(|| "(a1 and a2) or a3".into());
    let policy = policy::parse(&text)?;
    println!("policy {}", policy.to_canonical());

    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let abe = Abe::waters08();
    let config = AbeSystemConfig {
        security_bits: 128,
        universe: ["a1", "a2", "a3", "a4"]
            .into_iter()
            .map(|n| AttributeId::new(n, AttributeRole::Generic))
            .collect(),
    };
    let (pk, mk) = abe.setup(&config, &mut rng)?;
    let ct = abe.encrypt(&pk, b"attribute-gated secret", &policy, &mut rng)?;

    for holder in [&["a1"][..], &["a1", "a2"], &["a3"], &["a2", "a4"]] {
        let key = abe.generate_key_for_names(&pk, &mk, holder.iter().copied(), &mut rng)?;
        let verdict = match abe.decrypt(&pk, &ct, &key) {
            Ok(pt) => format!("opens: {:?}", String::from_utf8_lossy(&pt)),
            Err(AbeError::PolicyNotSatisfied) => "does not satisfy the policy".into(),
            Err(e) => return Err(e.into()),
        };
        println!("{holder:?} {verdict}");
    }
    Ok(())
}
