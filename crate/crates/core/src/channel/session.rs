use std::fmt;

use sha2::{Digest, Sha256};

use super::{ChannelError, Frame, FRAME_HELLO};
use crate::abe::SecureRng;
use crate::suite::{derive_channel_keys, CryptoSuite, Direction, DirectionKeys, EphemeralKey, IV_LEN};
use crate::wire::{Reader, Writer};

const HELLO_VERSION: u8 = 1;
const HELLO_NONCE_LEN: usize = 16;
const SEQ_LEN: usize = 8;

struct Hello {
    suite: String,
    public: Vec<u8>,
}

fn hello_payload(suite: &CryptoSuite, key: &EphemeralKey, rng: &mut dyn SecureRng) -> Vec<u8> {
    let mut nonce = [0u8; HELLO_NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let mut w = Writer::with_version(HELLO_VERSION);
    w.str(suite.id.as_str()).bytes(key.public()).raw(&nonce);
    w.finish()
}

fn parse_hello(frame: &Frame) -> Result<Hello, ChannelError> {
    if frame.kind != FRAME_HELLO {
        return Err(ChannelError::UnexpectedFrame(frame.kind));
    }
    if !frame.tag.is_empty() {
        return Err(ChannelError::MalformedHandshake("tagged hello".into()));
    }
    let bad = |e: crate::wire::WireError| ChannelError::MalformedHandshake(e.to_string());
    let mut r = Reader::versioned(&frame.payload, HELLO_VERSION).map_err(bad)?;
    let suite = r.str().map_err(bad)?.to_owned();
    let public = r.bytes().map_err(bad)?.to_vec();
    r.take(HELLO_NONCE_LEN).map_err(bad)?;
    r.finish().map_err(bad)?;
    Ok(Hello { suite, public })
}

fn check_suite(suite: &CryptoSuite, hello: &Hello) -> Result<(), ChannelError> {
    if hello.suite != suite.id.as_str() {
        return Err(ChannelError::SuiteMismatch {
            ours: suite.id,
            theirs: hello.suite.clone(),
        });
    }
    Ok(())
}

fn transcript_salt(initiator: &[u8], responder: &[u8]) -> [u8; 32] {
    Sha256::new()
        .chain_update((initiator.len() as u32).to_be_bytes())
        .chain_update(initiator)
        .chain_update(responder)
        .finalize()
        .into()
}

/// Initiator state between sending its hello and receiving the reply.
pub struct Handshake {
    suite: CryptoSuite,
    key: EphemeralKey,
    hello: Vec<u8>,
}

impl fmt::Debug for Handshake {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Handshake").field("suite", &self.suite.id).finish_non_exhaustive()
    }
}

impl Handshake {
    pub fn initiate(suite: CryptoSuite, rng: &mut dyn SecureRng) -> (Self, Frame) {
        let key = EphemeralKey::generate(suite.ke, rng);
        let hello = hello_payload(&suite, &key, rng);
        let frame = Frame::untagged(FRAME_HELLO, hello.clone());
        (Self { suite, key, hello }, frame)
    }

    pub fn finish(self, reply: &Frame) -> Result<SecureSession, ChannelError> {
        let h = parse_hello(reply)?;
        check_suite(&self.suite, &h)?;
        let shared = self.key.agree(&h.public)?;
        let keys = derive_channel_keys(self.suite.kdf, &shared, &transcript_salt(&self.hello, &reply.payload));
        Ok(SecureSession::new(self.suite, Direction::InitiatorToResponder, &keys))
    }

    /// Responder side: consumes the initiator hello, returns the session and
    /// the reply to send.
    pub fn respond(
        suite: CryptoSuite,
        hello: &Frame,
        rng: &mut dyn SecureRng,
    ) -> Result<(SecureSession, Frame), ChannelError> {
        let h = parse_hello(hello)?;
        check_suite(&suite, &h)?;
        let key = EphemeralKey::generate(suite.ke, rng);
        let reply = hello_payload(&suite, &key, rng);
        let shared = key.agree(&h.public)?;
        let keys = derive_channel_keys(suite.kdf, &shared, &transcript_salt(&hello.payload, &reply));
        Ok((
            SecureSession::new(suite, Direction::ResponderToInitiator, &keys),
            Frame::untagged(FRAME_HELLO, reply),
        ))
    }
}

/// Encrypt-then-MAC session with per-direction keys and counters. The first
/// integrity or ordering failure aborts it permanently.
pub struct SecureSession {
    suite: CryptoSuite,
    send_keys: DirectionKeys,
    recv_keys: DirectionKeys,
    send_seq: u64,
    recv_seq: u64,
    aborted: bool,
}

impl fmt::Debug for SecureSession {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SecureSession")
            .field("suite", &self.suite.id)
            .field("send_seq", &self.send_seq)
            .field("recv_seq", &self.recv_seq)
            .field("aborted", &self.aborted)
            .finish_non_exhaustive()
    }
}

fn iv_for(seq: u64) -> [u8; IV_LEN] {
    let mut iv = [0u8; IV_LEN];
    iv[..SEQ_LEN].copy_from_slice(&seq.to_be_bytes());
    iv
}

impl SecureSession {
    fn new(suite: CryptoSuite, outgoing: Direction, keys: &crate::suite::ChannelKeys) -> Self {
        Self {
            suite,
            send_keys: keys.direction(outgoing).clone(),
            recv_keys: keys.direction(outgoing.reverse()).clone(),
            send_seq: 0,
            recv_seq: 0,
            aborted: false,
        }
    }

    pub fn suite(&self) -> &CryptoSuite {
        &self.suite
    }

    pub fn is_aborted(&self) -> bool {
        self.aborted
    }

    pub fn abort(&mut self) {
        self.aborted = true;
    }

    pub fn sent(&self) -> u64 {
        self.send_seq
    }

    pub fn received(&self) -> u64 {
        self.recv_seq
    }

    pub fn seal(&mut self, kind: u8, body: &[u8]) -> Result<Frame, ChannelError> {
        if self.aborted {
            return Err(ChannelError::Aborted);
        }
        let seq = self.send_seq;
        self.send_seq = seq.checked_add(1).ok_or(ChannelError::Aborted)?;
        let mut payload = Vec::with_capacity(SEQ_LEN + body.len());
        payload.extend_from_slice(&seq.to_be_bytes());
        payload.extend_from_slice(body);
        self.suite.sym.apply(&self.send_keys.enc, &iv_for(seq), &mut payload[SEQ_LEN..]);
        let mut frame = Frame::untagged(kind, payload);
        frame.tag = self.suite.mac.tag(&self.send_keys.mac, &[&frame.header(), &frame.payload]);
        Ok(frame)
    }

    /// Verifies before decrypting; never returns unauthenticated bytes.
    pub fn open(&mut self, frame: &Frame) -> Result<(u8, Vec<u8>), ChannelError> {
        if self.aborted {
            return Err(ChannelError::Aborted);
        }
        let mac = self.suite.mac;
        if frame.tag.len() != mac.tag_len()
            || frame.payload.len() < SEQ_LEN
            || !mac.verify(&self.recv_keys.mac, &[&frame.header(), &frame.payload], &frame.tag)
        {
            self.aborted = true;
            return Err(ChannelError::Integrity);
        }
        let seq = u64::from_be_bytes(frame.payload[..SEQ_LEN].try_into().expect("8 bytes"));
        if seq != self.recv_seq {
            self.aborted = true;
            return Err(ChannelError::Replay {
                expected: self.recv_seq,
                got: seq,
            });
        }
        self.recv_seq += 1;
        let mut body = frame.payload[SEQ_LEN..].to_vec();
        self.suite.sym.apply(&self.recv_keys.enc, &iv_for(seq), &mut body);
        Ok((frame.kind, body))
    }
}
