//! Handshakes a secure channel over an in-memory pipe and exchanges one
//! request, then shows a tampered frame being refused.
//!
//! cargo run --example secure_channel

use std::thread;

use cpabe_dss::channel::{Channel, Handshake, MemoryTransport};
use cpabe_dss::suite::CryptoSuite;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let suite = CryptoSuite::paper_default();
    let (client_end, server_end) = MemoryTransport::pair();
    let server = thread::spawn(move || {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let mut ch = Channel::accept(server_end, suite, &mut rng)?;
        let (kind, body) = ch.recv()?;
        let mut reply = body;
        reply.reverse();
        ch.send(kind + 1, &reply)
    });
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let mut ch = Channel::connect(client_end, suite, &mut rng)?;
    let (kind, body) = ch.request(0x20, b"hello over the channel")?;
    println!("suite {}: reply 0x{kind:02x} {:?}", suite.id.as_str(), String::from_utf8_lossy(&body));
    server.join().expect("server thread")?;

    // Session objects directly: one flipped bit and the receiver aborts.
    let (hs, hello) = Handshake::initiate(suite, &mut rng);
    let (mut responder, answer) = Handshake::respond(suite, &hello, &mut rng)?;
    let mut initiator = hs.finish(&answer)?;
    let mut frame = initiator.seal(0x30, b"integrity protected")?;
    frame.payload[0] ^= 1;
    println!("tampered frame: {}", responder.open(&frame).unwrap_err());
    println!("responder aborted: {}", responder.is_aborted());
    Ok(())
}
