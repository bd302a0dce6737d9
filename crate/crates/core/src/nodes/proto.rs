//! Routine messages carried inside protected frames.

use std::ops::Range;

use crate::wire::{Reader, WireError, Writer};

pub const AUTH_REQUEST: u8 = 0x10;
pub const AUTH_ISSUED: u8 = 0x11;
pub const PUT_REQUEST: u8 = 0x20;
pub const PUT_ACK: u8 = 0x21;
pub const GET_REQUEST: u8 = 0x30;
pub const GET_RESPONSE: u8 = 0x31;
pub const WRITE_REQUEST: u8 = 0x40;
pub const WRITE_ACK: u8 = 0x41;
pub const INDEX_REQUEST: u8 = 0x50;
pub const INDEX_SNAPSHOT: u8 = 0x51;
pub const ERROR: u8 = 0x7e;

const MSG_VERSION: u8 = 1;

/// Error classes carried in [`ERROR`] replies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u16)]
pub enum ErrorCode {
    Malformed = 1,
    NothingAuthorizable = 2,
    TooFewValidity = 3,
    NotValidity = 4,
    BadTtl = 5,
    UnknownIssuer = 10,
    BadSignature = 11,
    SealOpenFailed = 12,
    SealedMismatch = 13,
    Expired = 14,
    PolicyUnsatisfied = 20,
    BadOwnerSignature = 21,
    NoSuchResource = 22,
    RangeOutOfBounds = 23,
    DuplicateResource = 24,
    VersionConflict = 25,
    PolicyChange = 26,
    InvalidResourceId = 27,
    UnsupportedRequest = 30,
    Internal = 99,
}

impl ErrorCode {
    const ALL: [Self; 20] = [
        Self::Malformed,
        Self::NothingAuthorizable,
        Self::TooFewValidity,
        Self::NotValidity,
        Self::BadTtl,
        Self::UnknownIssuer,
        Self::BadSignature,
        Self::SealOpenFailed,
        Self::SealedMismatch,
        Self::Expired,
        Self::PolicyUnsatisfied,
        Self::BadOwnerSignature,
        Self::NoSuchResource,
        Self::RangeOutOfBounds,
        Self::DuplicateResource,
        Self::VersionConflict,
        Self::PolicyChange,
        Self::InvalidResourceId,
        Self::UnsupportedRequest,
        Self::Internal,
    ];

    pub fn from_u16(v: u16) -> Self {
        Self::ALL.into_iter().find(|c| *c as u16 == v).unwrap_or(Self::Internal)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Malformed => "malformed",
            Self::NothingAuthorizable => "nothing-authorizable",
            Self::TooFewValidity => "too-few-validity",
            Self::NotValidity => "not-validity",
            Self::BadTtl => "bad-ttl",
            Self::UnknownIssuer => "unknown-issuer",
            Self::BadSignature => "bad-signature",
            Self::SealOpenFailed => "seal-open-failed",
            Self::SealedMismatch => "sealed-mismatch",
            Self::Expired => "expired",
            Self::PolicyUnsatisfied => "policy-unsatisfied",
            Self::BadOwnerSignature => "bad-owner-signature",
            Self::NoSuchResource => "no-such-resource",
            Self::RangeOutOfBounds => "range-out-of-bounds",
            Self::DuplicateResource => "duplicate-resource",
            Self::VersionConflict => "version-conflict",
            Self::PolicyChange => "policy-change",
            Self::InvalidResourceId => "invalid-resource-id",
            Self::UnsupportedRequest => "unsupported-request",
            Self::Internal => "internal",
        }
    }
}

impl std::fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErrorReply {
    pub code: ErrorCode,
    pub message: String,
}

impl ErrorReply {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(MSG_VERSION);
        w.u16(self.code as u16).str(&self.message);
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::versioned(buf, MSG_VERSION)?;
        let code = ErrorCode::from_u16(r.u16()?);
        let message = r.str()?.to_owned();
        r.finish()?;
        Ok(Self { code, message })
    }
}

fn write_range(w: &mut Writer, range: &Option<Range<u64>>) {
    match range {
        Some(r) => w.u8(1).u64(r.start).u64(r.end),
        None => w.u8(0),
    };
}

fn read_range(r: &mut Reader<'_>) -> Result<Option<Range<u64>>, WireError> {
    match r.u8()? {
        0 => Ok(None),
        1 => Ok(Some(r.u64()?..r.u64()?)),
        t => Err(WireError::Invalid(format!("range tag {t}"))),
    }
}

/// Put: the token, identifier, policy, `E_SYM(E_CHAIN(D), K1)` and the
/// owner signature over the chain manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PutRequest {
    pub mst: Vec<u8>,
    pub id: String,
    pub policy: String,
    pub sealed_body: Vec<u8>,
    pub signature: Vec<u8>,
}

impl PutRequest {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(MSG_VERSION);
        w.bytes(&self.mst)
            .str(&self.id)
            .str(&self.policy)
            .bytes(&self.sealed_body)
            .bytes(&self.signature);
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::versioned(buf, MSG_VERSION)?;
        let m = Self {
            mst: r.bytes()?.to_vec(),
            id: r.str()?.to_owned(),
            policy: r.str()?.to_owned(),
            sealed_body: r.bytes()?.to_vec(),
            signature: r.bytes()?.to_vec(),
        };
        r.finish()?;
        Ok(m)
    }
}

/// Version acknowledgment for Put and Write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ack {
    pub version: u64,
}

impl Ack {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(MSG_VERSION);
        w.u64(self.version);
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::versioned(buf, MSG_VERSION)?;
        let version = r.u64()?;
        r.finish()?;
        Ok(Self { version })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GetRequest {
    pub mst: Vec<u8>,
    pub id: String,
    pub range: Option<Range<u64>>,
}

impl GetRequest {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(MSG_VERSION);
        w.bytes(&self.mst).str(&self.id);
        write_range(&mut w, &self.range);
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::versioned(buf, MSG_VERSION)?;
        let m = Self {
            mst: r.bytes()?.to_vec(),
            id: r.str()?.to_owned(),
            range: read_range(&mut r)?,
        };
        r.finish()?;
        Ok(m)
    }
}

/// `E_SYM(slice, K1)` where the slice is the header plus covering chunks.
/// The manifest of the whole version travels alongside so a writer can
/// re-sign after replacing only some chunks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GetResponse {
    pub version: u64,
    pub manifest: Vec<u8>,
    pub sealed_slice: Vec<u8>,
}

impl GetResponse {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(MSG_VERSION);
        w.u64(self.version).bytes(&self.manifest).bytes(&self.sealed_slice);
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::versioned(buf, MSG_VERSION)?;
        let m = Self {
            version: r.u64()?,
            manifest: r.bytes()?.to_vec(),
            sealed_slice: r.bytes()?.to_vec(),
        };
        r.finish()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WriteChange {
    /// `E_SYM(chunk list, K1)`: re-sealed chunks at their indices.
    Chunks(Vec<u8>),
    /// `E_SYM(chain, K1)`: a whole new body under the same policy.
    Whole(Vec<u8>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WriteRequest {
    pub mst: Vec<u8>,
    pub id: String,
    /// Version the change was prepared against.
    pub base_version: u64,
    pub change: WriteChange,
    /// Owner signature over version `base_version + 1`.
    pub signature: Vec<u8>,
}

impl WriteRequest {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::with_version(MSG_VERSION);
        w.bytes(&self.mst).str(&self.id).u64(self.base_version);
        match &self.change {
            WriteChange::Chunks(b) => w.u8(1).bytes(b),
            WriteChange::Whole(b) => w.u8(2).bytes(b),
        };
        w.bytes(&self.signature);
        w.finish()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, WireError> {
        let mut r = Reader::versioned(buf, MSG_VERSION)?;
        let mst = r.bytes()?.to_vec();
        let id = r.str()?.to_owned();
        let base_version = r.u64()?;
        let change = match r.u8()? {
            1 => WriteChange::Chunks(r.bytes()?.to_vec()),
            2 => WriteChange::Whole(r.bytes()?.to_vec()),
            t => return Err(WireError::Invalid(format!("write change tag {t}"))),
        };
        let signature = r.bytes()?.to_vec();
        r.finish()?;
        Ok(Self {
            mst,
            id,
            base_version,
            change,
            signature,
        })
    }
}
