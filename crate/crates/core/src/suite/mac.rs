use aes::Aes256;
use cmac::Cmac;
use hmac::{Hmac, Mac};
use sha2::Sha256;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MacAlg {
    CmacAes256,
    HmacSha256,
}

impl MacAlg {
    pub fn tag_len(self) -> usize {
        match self {
            Self::CmacAes256 => 16,
            Self::HmacSha256 => 32,
        }
    }

    /// Tag over the concatenation of `parts`.
    pub fn tag(self, key: &[u8; 32], parts: &[&[u8]]) -> Vec<u8> {
        match self {
            Self::CmacAes256 => {
                let mut m = <Cmac<Aes256> as Mac>::new_from_slice(key).expect("32-byte key");
                parts.iter().for_each(|p| m.update(p));
                m.finalize().into_bytes().to_vec()
            }
            Self::HmacSha256 => {
                let mut m = <Hmac<Sha256> as Mac>::new_from_slice(key).expect("any key length");
                parts.iter().for_each(|p| m.update(p));
                m.finalize().into_bytes().to_vec()
            }
        }
    }

    /// Constant-time check.
    pub fn verify(self, key: &[u8; 32], parts: &[&[u8]], tag: &[u8]) -> bool {
        match self {
            Self::CmacAes256 => {
                let mut m = <Cmac<Aes256> as Mac>::new_from_slice(key).expect("32-byte key");
                parts.iter().for_each(|p| m.update(p));
                m.verify_slice(tag).is_ok()
            }
            Self::HmacSha256 => {
                let mut m = <Hmac<Sha256> as Mac>::new_from_slice(key).expect("any key length");
                parts.iter().for_each(|p| m.update(p));
                m.verify_slice(tag).is_ok()
            }
        }
    }
}
