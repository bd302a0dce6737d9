use std::fmt;

use hkdf::Hkdf;
use sha2::Sha256;

use super::SharedSecret;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KdfAlg {
    HkdfSha256,
}

impl KdfAlg {
    pub fn derive(self, ikm: &[u8], salt: &[u8], label: &[u8]) -> [u8; 32] {
        match self {
            Self::HkdfSha256 => {
                let mut out = [0u8; 32];
                Hkdf::<Sha256>::new(Some(salt), ikm)
                    .expand(label, &mut out)
                    .expect("32 bytes is a valid HKDF output length");
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    InitiatorToResponder,
    ResponderToInitiator,
}

impl Direction {
    fn label(self) -> &'static str {
        match self {
            Self::InitiatorToResponder => "c2s",
            Self::ResponderToInitiator => "s2c",
        }
    }

    pub fn reverse(self) -> Self {
        match self {
            Self::InitiatorToResponder => Self::ResponderToInitiator,
            Self::ResponderToInitiator => Self::InitiatorToResponder,
        }
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct DirectionKeys {
    pub enc: [u8; 32],
    pub mac: [u8; 32],
}

impl fmt::Debug for DirectionKeys {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("DirectionKeys(..)")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelKeys {
    pub initiator_to_responder: DirectionKeys,
    pub responder_to_initiator: DirectionKeys,
}

impl ChannelKeys {
    pub fn direction(&self, d: Direction) -> &DirectionKeys {
        match d {
            Direction::InitiatorToResponder => &self.initiator_to_responder,
            Direction::ResponderToInitiator => &self.responder_to_initiator,
        }
    }
}

/// Four independent keys, one labelled HKDF expansion each. `salt` binds
/// the keys to the handshake transcript.
pub fn derive_channel_keys(kdf: KdfAlg, shared: &SharedSecret, salt: &[u8]) -> ChannelKeys {
    let dir = |d: Direction| DirectionKeys {
        enc: kdf.derive(shared.as_bytes(), salt, format!("cpabe-dss channel {} enc", d.label()).as_bytes()),
        mac: kdf.derive(shared.as_bytes(), salt, format!("cpabe-dss channel {} mac", d.label()).as_bytes()),
    };
    ChannelKeys {
        initiator_to_responder: dir(Direction::InitiatorToResponder),
        responder_to_initiator: dir(Direction::ResponderToInitiator),
    }
}
