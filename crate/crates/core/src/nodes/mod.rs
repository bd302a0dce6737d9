//! The three component roles (authority, authorization node, service node),
//! the public index, the resource store and the recovery procedures.
//!
//! Node logic is sans-IO: each node turns one decrypted request into one
//! reply given a [`NodeContext`]. [`server`] binds that to a protected
//! channel over TCP; the harness binds it to its simulated network.

mod authority;
mod authz;
mod deployment;
mod index;
mod ledger;
pub mod proto;
pub mod server;
mod service;
mod store;

use thiserror::Error;

use crate::abe::{Abe, AbeError, SecureRng};
use crate::channel::ChannelError;
use crate::mst::MstError;
use crate::policy::PolicyError;
use crate::suite::{CryptoSuite, SuiteError};
use crate::wire::WireError;

pub use crate::mst::ProtocolParams;
pub use authority::{Authority, ConsumerRecord, InitConfig, NodeDescriptor, Rekey};
pub use authz::AuthorizationNode;
pub use deployment::{Deployment, RecoveryReport};
pub(crate) use deployment::write_secret;
pub use index::{NodeEntry, NodeRole, PublicIndex};
pub use ledger::{ActionCost, Census, ScalingAction, ScalingLedger};
pub use proto::ErrorCode;
pub use service::ServiceNode;
pub use store::{signing_bytes, validate_resource_id, ResourceRecord, Store, MAX_RESOURCE_ID_LEN};

/// Prefix of the role attribute issued to each authorization node.
pub const AUTHORIZATION_ATTRIBUTE_PREFIX: &str = "AN_";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NodeError {
    #[error(transparent)]
    Mst(#[from] MstError),
    #[error("authorized attributes do not satisfy the resource policy")]
    PolicyUnsatisfied,
    #[error("owner signature does not verify against the session key")]
    BadOwnerSignature,
    #[error("no resource {0:?}")]
    NoSuchResource(String),
    #[error("byte range {start}..{end} outside resource of {len} bytes")]
    RangeOutOfBounds { start: u64, end: u64, len: u64 },
    #[error("resource {0:?} already exists")]
    DuplicateResource(String),
    #[error("write prepared against version {found}, resource is at {expected}")]
    VersionConflict { expected: u64, found: u64 },
    #[error("a write may not change the resource policy")]
    PolicyChange,
    #[error("invalid resource identifier {0:?}")]
    InvalidResourceId(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("unknown consumer {0:?}")]
    UnknownConsumer(String),
    #[error("unsupported request type 0x{0:02x}")]
    Unsupported(u8),
    #[error("{0}")]
    Invalid(String),
    #[error("store: {0}")]
    Store(String),
    #[error("i/o: {0}")]
    Io(String),
    #[error(transparent)]
    Abe(AbeError),
    #[error(transparent)]
    Suite(#[from] SuiteError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

impl From<AbeError> for NodeError {
    fn from(e: AbeError) -> Self {
        match e {
            AbeError::RangeOutOfBounds { start, end, len } => Self::RangeOutOfBounds { start, end, len },
            AbeError::Wire(w) => Self::Wire(w),
            other => Self::Abe(other),
        }
    }
}

impl NodeError {
    pub fn code(&self) -> ErrorCode {
        match self {
            Self::Mst(m) => match m {
                MstError::NothingAuthorizable => ErrorCode::NothingAuthorizable,
                MstError::TooFewValidity { .. } => ErrorCode::TooFewValidity,
                MstError::NotValidity(_) => ErrorCode::NotValidity,
                MstError::BadTtl => ErrorCode::BadTtl,
                MstError::UnknownIssuer => ErrorCode::UnknownIssuer,
                MstError::BadSignature => ErrorCode::BadSignature,
                MstError::SealOpenFailed => ErrorCode::SealOpenFailed,
                MstError::SealedMismatch => ErrorCode::SealedMismatch,
                MstError::Expired { .. } => ErrorCode::Expired,
                MstError::Wire(_) | MstError::Policy(_) => ErrorCode::Malformed,
                _ => ErrorCode::Internal,
            },
            Self::PolicyUnsatisfied => ErrorCode::PolicyUnsatisfied,
            Self::BadOwnerSignature => ErrorCode::BadOwnerSignature,
            Self::NoSuchResource(_) => ErrorCode::NoSuchResource,
            Self::RangeOutOfBounds { .. } => ErrorCode::RangeOutOfBounds,
            Self::DuplicateResource(_) => ErrorCode::DuplicateResource,
            Self::VersionConflict { .. } => ErrorCode::VersionConflict,
            Self::PolicyChange => ErrorCode::PolicyChange,
            Self::InvalidResourceId(_) => ErrorCode::InvalidResourceId,
            Self::Unsupported(_) => ErrorCode::UnsupportedRequest,
            Self::Wire(_) | Self::Policy(_) | Self::Suite(_) => ErrorCode::Malformed,
            Self::Abe(AbeError::Malformed(_)) => ErrorCode::Malformed,
            _ => ErrorCode::Internal,
        }
    }
}

/// What a node sees while handling one request.
pub struct NodeContext<'a> {
    pub abe: &'a Abe,
    pub suite: &'a CryptoSuite,
    pub index: &'a PublicIndex,
    pub now: u64,
    pub rng: &'a mut dyn SecureRng,
}

/// Encodes a handler result as a reply frame body.
pub fn reply(result: Result<(u8, Vec<u8>), NodeError>) -> (u8, Vec<u8>) {
    match result {
        Ok(r) => r,
        Err(e) => (
            proto::ERROR,
            proto::ErrorReply {
                code: e.code(),
                message: e.to_string(),
            }
            .to_bytes(),
        ),
    }
}
