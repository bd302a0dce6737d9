use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::NodeError;
use crate::abe::{ChainCiphertext, ChainManifest};
use crate::policy::PolicyExpr;
use crate::suite::SigAlg;
use crate::wire::Writer;

pub const MAX_RESOURCE_ID_LEN: usize = 256;
const MANIFEST_FILE: &str = "manifest";
const MANIFEST_FORMAT: u32 = 1;
const SIGNING_LABEL: &str = "cpabe-dss resource v1";

pub fn validate_resource_id(id: &str) -> Result<(), NodeError> {
    if id.is_empty() || id.len() > MAX_RESOURCE_ID_LEN {
        return Err(NodeError::InvalidResourceId(id.chars().take(32).collect()));
    }
    Ok(())
}

/// Bytes the owner signs: identifier, version and the chain manifest.
pub fn signing_bytes(id: &str, version: u64, manifest: &ChainManifest) -> Vec<u8> {
    let mut w = Writer::new();
    w.str(SIGNING_LABEL).str(id).u64(version).bytes(&manifest.to_bytes());
    w.finish()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceRecord {
    pub id: String,
    pub policy: PolicyExpr,
    pub body: ChainCiphertext,
    /// PK_self of the session that wrote this version.
    pub owner_pk: Vec<u8>,
    pub signature: Vec<u8>,
    pub version: u64,
}

impl ResourceRecord {
    pub fn signed_message(&self) -> Vec<u8> {
        signing_bytes(&self.id, self.version, &self.body.manifest())
    }

    pub fn signature_valid(&self, alg: SigAlg) -> bool {
        alg.verify(&self.owner_pk, &self.signed_message(), &self.signature)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestFile {
    format: u32,
    #[serde(default, rename = "resource")]
    resources: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    id: String,
    policy: String,
    version: u64,
    body: String,
    #[serde(with = "hex")]
    header_digest: Vec<u8>,
    chunk_size: u32,
    total_len: u64,
    chunk_digests: Vec<String>,
    #[serde(with = "hex")]
    owner_pk: Vec<u8>,
    #[serde(with = "hex")]
    signature: Vec<u8>,
}

fn body_file(id: &str) -> String {
    format!("{}.chain", hex::encode(Sha256::digest(id.as_bytes())))
}

/// Resource store of one service node. Holds only E_CHAIN ciphertexts.
/// With a directory attached, every mutation rewrites the body file and the
/// manifest through a rename so a crash leaves the previous state.
#[derive(Debug, Clone, Default)]
pub struct Store {
    dir: Option<PathBuf>,
    records: BTreeMap<String, ResourceRecord>,
}

impl Store {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn open(dir: &Path) -> Result<Self, NodeError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let mut store = Self {
            dir: Some(dir.to_owned()),
            records: BTreeMap::new(),
        };
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            store.write_manifest()?;
            return Ok(store);
        }
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let file: ManifestFile = toml::from_str(&text).map_err(|e| NodeError::Store(format!("manifest: {e}")))?;
        if file.format != MANIFEST_FORMAT {
            return Err(NodeError::Store(format!("manifest format {}", file.format)));
        }
        for e in file.resources {
            let bpath = dir.join(&e.body);
            let raw = fs::read(&bpath).map_err(|err| io_err(&bpath, err))?;
            let body = ChainCiphertext::from_bytes(&raw)?;
            let m = body.manifest();
            let digests: Vec<String> = m.chunk_digests.iter().map(hex::encode).collect();
            if m.header_digest.as_slice() != e.header_digest
                || m.chunk_size != e.chunk_size
                || m.total_len != e.total_len
                || digests != e.chunk_digests
            {
                return Err(NodeError::Store(format!("body of {:?} does not match manifest", e.id)));
            }
            let policy: PolicyExpr = e.policy.parse()?;
            if &policy != body.policy() {
                return Err(NodeError::Store(format!("policy of {:?} does not match body", e.id)));
            }
            store.records.insert(
                e.id.clone(),
                ResourceRecord {
                    id: e.id,
                    policy,
                    body,
                    owner_pk: e.owner_pk,
                    signature: e.signature,
                    version: e.version,
                },
            );
        }
        Ok(store)
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn get(&self, id: &str) -> Option<&ResourceRecord> {
        self.records.get(id)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &ResourceRecord> + '_ {
        self.records.values()
    }

    /// Inserts or replaces a record.
    pub fn put(&mut self, record: ResourceRecord) -> Result<(), NodeError> {
        if let Some(dir) = &self.dir {
            let path = dir.join(body_file(&record.id));
            write_atomic(&path, &record.body.to_bytes())?;
        }
        self.records.insert(record.id.clone(), record);
        self.write_manifest()
    }

    fn manifest_text(&self) -> String {
        let file = ManifestFile {
            format: MANIFEST_FORMAT,
            resources: self
                .records
                .values()
                .map(|r| {
                    let m = r.body.manifest();
                    ManifestEntry {
                        id: r.id.clone(),
                        policy: r.policy.to_canonical(),
                        version: r.version,
                        body: body_file(&r.id),
                        header_digest: m.header_digest.to_vec(),
                        chunk_size: m.chunk_size,
                        total_len: m.total_len,
                        chunk_digests: m.chunk_digests.iter().map(hex::encode).collect(),
                        owner_pk: r.owner_pk.clone(),
                        signature: r.signature.clone(),
                    }
                })
                .collect(),
        };
        toml::to_string(&file).expect("manifest serializes")
    }

    fn write_manifest(&self) -> Result<(), NodeError> {
        match &self.dir {
            Some(dir) => write_atomic(&dir.join(MANIFEST_FILE), self.manifest_text().as_bytes()),
            None => Ok(()),
        }
    }

    /// Every byte the store would hold on disk, by file name.
    pub fn raw_files(&self) -> BTreeMap<String, Vec<u8>> {
        let mut out: BTreeMap<String, Vec<u8>> = self
            .records
            .values()
            .map(|r| (body_file(&r.id), r.body.to_bytes()))
            .collect();
        out.insert(MANIFEST_FILE.to_owned(), self.manifest_text().into_bytes());
        out
    }
}

fn io_err(path: &Path, e: std::io::Error) -> NodeError {
    NodeError::Io(format!("{}: {e}", path.display()))
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), NodeError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}
