//! Encrypts a buffer as a chunk chain, reads a range back and rewrites one
//! chunk without touching the others.
//!
//! cargo run --example chunked_chain

use cpabe_dss::abe::{Abe, AbeSystemConfig, AttributeId, AttributeRole};
use cpabe_dss::policy;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let abe = Abe::mock();
    let config = AbeSystemConfig {
        security_bits: 128,
        universe: vec![AttributeId::new("a1", AttributeRole::Generic)],
    };
    let (pk, mk) = abe.setup(&config, &mut rng)?;
    let key = abe.generate_key_for_names(&pk, &mk, ["a1"], &mut rng)?;

    let mut data = vec![0u8; 10_000];
    rng.fill_bytes(&mut data);
    let mut chain = abe.encrypt_chain(&pk, &data, &policy::parse("a1")?, 1024, &mut rng)?;
    println!("{} bytes in {} chunks of {}", chain.total_len, chain.chunks.len(), chain.chunk_size);

    let range = 3000..3100;
    let slice = chain.slice(&range)?;
    println!("range {range:?} travels as {} chunk(s)", slice.chunks.len());
    assert_eq!(slice.decrypt_range(&abe, &pk, &key, range.clone())?, data[3000..3100]);

    // Rewrite chunk 2 under the same data key.
    let data_key = abe.open_chain_key(&pk, &chain.header, &key)?;
    let ctx = chain.context();
    data[2048..3072].fill(0xAB);
    let fresh = data_key.seal_chunk(&ctx, 2, &data[2048..3072], &mut rng);
    chain.replace_chunks(vec![fresh])?;
    assert_eq!(abe.decrypt_chain(&pk, &chain, &key)?, data);
    println!("chunk 2 rewritten, chain still decrypts byte-exact");
    Ok(())
}
