use std::collections::{BTreeMap, BTreeSet, HashSet};

use crate::abe::{Abe, AbeCiphertext, AbePrivateKey, AbePublicParams};

/// Window length of the plaintext scan.
pub const SCAN_WINDOW: usize = 16;

/// 255 degrees of freedom at p = 0.001.
pub const CHI_SQUARE_BYTE_LIMIT: f64 = 330.5;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Capability {
    Eavesdrop,
    Tamper,
    Replay,
    Drop,
    Inject,
    /// Stolen key material, by asset name.
    HoldKeys(Vec<String>),
    /// Full control of one node, snapshot included.
    ControlNode(String),
}

impl Capability {
    fn is_weak(&self) -> bool {
        matches!(self, Self::Eavesdrop | Self::Tamper | Self::Replay | Self::Drop | Self::Inject)
    }
}

/// Weak model: the routines and the wire. Strong model: components too.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AdversaryModel {
    pub capabilities: BTreeSet<Capability>,
}

impl AdversaryModel {
    pub fn weak() -> Self {
        Self {
            capabilities: [
                Capability::Eavesdrop,
                Capability::Tamper,
                Capability::Replay,
                Capability::Drop,
                Capability::Inject,
            ]
            .into_iter()
            .collect(),
        }
    }

    pub fn strong(extra: impl IntoIterator<Item = Capability>) -> Self {
        let mut m = Self::weak();
        m.capabilities.extend(extra);
        m
    }

    pub fn is_weak(&self) -> bool {
        self.capabilities.iter().all(Capability::is_weak)
    }

    pub fn has(&self, c: &Capability) -> bool {
        self.capabilities.contains(c)
    }

    pub fn grant(&mut self, c: Capability) {
        self.capabilities.insert(c);
    }
}

/// Classification of one (asset, goal) pair after a scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompromiseReport {
    pub asset: String,
    pub goal: String,
    /// The goal predicate held at some point.
    pub occurred: bool,
    /// No effect reached beyond the asset itself.
    pub local: bool,
    /// Nothing transferred or held before the compromise was exposed.
    pub forward: bool,
    /// Recovery ran while other sessions kept working, and the same attack
    /// failed afterwards.
    pub online_recoverable: bool,
    pub recovery_steps: Vec<String>,
}

/// Result of trying every key and every component mix against one ciphertext.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollusionOutcome {
    pub attempts: usize,
    pub succeeded: bool,
    /// Plaintext recovered by the first successful attempt.
    pub recovered: Option<Vec<u8>>,
}

/// Pools the keys' components in every way the key API allows: each key
/// alone, and each key's randomizer with the union of every key's
/// attribute components.
pub fn collude(abe: &Abe, pk: &AbePublicParams, keys: &[AbePrivateKey], target: &AbeCiphertext) -> CollusionOutcome {
    let mut candidates: Vec<AbePrivateKey> = keys.to_vec();
    if keys.len() > 1 {
        let mut pooled = BTreeMap::new();
        for k in keys {
            for (id, c) in k.components() {
                pooled.entry(id.clone()).or_insert_with(|| c.clone());
            }
        }
        for k in keys {
            candidates.push(AbePrivateKey::from_parts(
                k.scheme(),
                k.global_component().to_vec(),
                pooled.clone(),
            ));
        }
    }
    let mut attempts = 0;
    for key in &candidates {
        attempts += 1;
        if let Ok(pt) = abe.decrypt(pk, target, key) {
            return CollusionOutcome {
                attempts,
                succeeded: true,
                recovered: Some(pt),
            };
        }
    }
    CollusionOutcome {
        attempts,
        succeeded: false,
        recovered: None,
    }
}

/// Whether any `SCAN_WINDOW`-byte run of any secret occurs in `haystack`.
pub fn contains_plaintext<'a>(haystack: &[u8], secrets: impl IntoIterator<Item = &'a [u8]>) -> bool {
    let mut windows: HashSet<&[u8]> = HashSet::new();
    for s in secrets {
        if s.len() >= SCAN_WINDOW {
            windows.extend(s.windows(SCAN_WINDOW));
        }
    }
    !windows.is_empty() && haystack.windows(SCAN_WINDOW).any(|w| windows.contains(w))
}

/// Pearson chi-square of the byte histogram against uniform.
pub fn byte_chi_square(bytes: &[u8]) -> f64 {
    let mut counts = [0u64; 256];
    for b in bytes {
        counts[*b as usize] += 1;
    }
    let expected = bytes.len() as f64 / 256.0;
    counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum()
}
