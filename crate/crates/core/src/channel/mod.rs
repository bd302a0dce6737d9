//! Framed transport and the R_KE-established protected session that every
//! routine runs over.
//!
//! ```text
//! frame     = type:u8 ‖ len:u32 ‖ tag_len:u8 ‖ payload[len] ‖ tag[tag_len]
//! protected = seq:u64 ‖ E_SYM(body) with IV = seq ‖ 0^8
//! tag       = MAC(type ‖ len ‖ protected)
//! ```
//!
//! The handshake frames are the only untagged ones. Keys are derived from
//! the exchanged secret salted by a digest of both hello payloads, so any
//! tampering with the handshake shows up as a MAC failure on the first
//! protected frame.

mod session;
mod transport;

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::suite::{SuiteError, SuiteId};

pub use session::{Handshake, SecureSession};
pub use transport::{Channel, MemoryTransport, TcpTransport, Transport};

pub const FRAME_HELLO: u8 = 0x01;
pub const MAX_PAYLOAD: usize = 64 << 20;
const HEADER_LEN: usize = 6;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChannelError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("connection closed")]
    Closed,
    #[error("truncated frame")]
    Truncated,
    #[error("frame payload of {0} bytes exceeds limit")]
    Oversize(usize),
    #[error("peer runs suite {theirs}, we run {ours}")]
    SuiteMismatch { ours: SuiteId, theirs: String },
    #[error("malformed handshake: {0}")]
    MalformedHandshake(String),
    #[error("frame failed integrity check; session aborted")]
    Integrity,
    #[error("frame sequence {got} where {expected} was due; session aborted")]
    Replay { expected: u64, got: u64 },
    #[error("session already aborted")]
    Aborted,
    #[error("unexpected frame type 0x{0:02x}")]
    UnexpectedFrame(u8),
    #[error(transparent)]
    Suite(#[from] SuiteError),
}

impl ChannelError {
    /// Errors after which a fresh handshake may succeed.
    pub fn is_renegotiable(&self) -> bool {
        matches!(
            self,
            Self::Integrity | Self::Replay { .. } | Self::Aborted | Self::Closed | Self::Truncated | Self::Io(_)
        )
    }
}

impl From<io::Error> for ChannelError {
    fn from(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::UnexpectedEof | io::ErrorKind::ConnectionReset | io::ErrorKind::BrokenPipe => Self::Closed,
            _ => Self::Io(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub kind: u8,
    pub payload: Vec<u8>,
    pub tag: Vec<u8>,
}

impl Frame {
    pub fn untagged(kind: u8, payload: Vec<u8>) -> Self {
        Self {
            kind,
            payload,
            tag: Vec::new(),
        }
    }

    /// Bytes covered by the MAC.
    fn header(&self) -> [u8; 5] {
        let len = (self.payload.len() as u32).to_be_bytes();
        [self.kind, len[0], len[1], len[2], len[3]]
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len() + self.tag.len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&self.header());
        out.push(self.tag.len() as u8);
        out.extend_from_slice(&self.payload);
        out.extend_from_slice(&self.tag);
        out
    }

    /// Parses one frame from the front of `buf`, returning bytes consumed.
    pub fn decode(buf: &[u8]) -> Result<(Self, usize), ChannelError> {
        if buf.len() < HEADER_LEN {
            return Err(ChannelError::Truncated);
        }
        let len = u32::from_be_bytes(buf[1..5].try_into().expect("4 bytes")) as usize;
        if len > MAX_PAYLOAD {
            return Err(ChannelError::Oversize(len));
        }
        let tag_len = buf[5] as usize;
        let total = HEADER_LEN + len + tag_len;
        if buf.len() < total {
            return Err(ChannelError::Truncated);
        }
        let frame = Self {
            kind: buf[0],
            payload: buf[HEADER_LEN..HEADER_LEN + len].to_vec(),
            tag: buf[HEADER_LEN + len..total].to_vec(),
        };
        Ok((frame, total))
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, ChannelError> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)?;
        let len = u32::from_be_bytes(header[1..5].try_into().expect("4 bytes")) as usize;
        if len > MAX_PAYLOAD {
            return Err(ChannelError::Oversize(len));
        }
        let mut body = vec![0u8; len + header[5] as usize];
        r.read_exact(&mut body).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => ChannelError::Truncated,
            _ => e.into(),
        })?;
        let tag = body.split_off(len);
        Ok(Self {
            kind: header[0],
            payload: body,
            tag,
        })
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<(), ChannelError> {
        w.write_all(&self.encode())?;
        w.flush()?;
        Ok(())
    }
}
