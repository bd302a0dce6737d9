use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::NodeError;
use crate::abe::{AbePublicParams, SchemeId};
use crate::mst::{IssuerDirectory, ProtocolParams};
use crate::policy::AttributeSet;
use crate::suite::SuiteId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeRole {
    Authority,
    Authorization,
    Service,
}

impl NodeRole {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Authority => "authority",
            Self::Authorization => "authz",
            Self::Service => "service",
        }
    }
}

impl std::str::FromStr for NodeRole {
    type Err = NodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "authority" => Ok(Self::Authority),
            "authz" | "authorization" => Ok(Self::Authorization),
            "service" => Ok(Self::Service),
            other => Err(NodeError::Invalid(format!("unknown role {other:?}"))),
        }
    }
}

/// Whitelist entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeEntry {
    pub id: String,
    pub role: NodeRole,
    pub address: String,
    /// M_public for authorization nodes; empty otherwise.
    #[serde(with = "hex")]
    pub m_public: Vec<u8>,
    /// A_j for authorization nodes; empty otherwise.
    pub responsibility: AttributeSet,
    pub blacklisted: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case")]
enum IndexEvent {
    Init {
        scheme: SchemeId,
        suite: SuiteId,
        params: ProtocolParams,
        #[serde(with = "hex")]
        pk: Vec<u8>,
    },
    Params {
        #[serde(with = "hex")]
        pk: Vec<u8>,
    },
    Register {
        node: NodeEntry,
    },
    Blacklist {
        id: String,
    },
    Remove {
        id: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LogLine {
    version: u64,
    #[serde(flatten)]
    event: IndexEvent,
}

/// The public index: E_ABE parameters, node whitelist and blacklist.
/// `version` increments on every mutation. With a log path attached every
/// mutation is appended as one JSON line before it is applied.
#[derive(Debug, Clone)]
pub struct PublicIndex {
    version: u64,
    suite: SuiteId,
    params: ProtocolParams,
    pk: AbePublicParams,
    nodes: BTreeMap<String, NodeEntry>,
    log: Option<PathBuf>,
}

impl PublicIndex {
    pub fn new(suite: SuiteId, params: ProtocolParams, pk: AbePublicParams) -> Self {
        Self {
            version: 1,
            suite,
            params,
            pk,
            nodes: BTreeMap::new(),
            log: None,
        }
    }

    /// Starts a fresh log at `path`, which must not exist. Only valid on a
    /// newly created index.
    pub fn create_log(&mut self, path: &Path) -> Result<(), NodeError> {
        if path.exists() {
            return Err(NodeError::Invalid(format!("{} already exists", path.display())));
        }
        if self.version != 1 || !self.nodes.is_empty() {
            return Err(NodeError::Invalid("log must start from a fresh index".into()));
        }
        self.log = Some(path.to_owned());
        self.append(&LogLine {
            version: 1,
            event: IndexEvent::Init {
                scheme: self.pk.scheme(),
                suite: self.suite,
                params: self.params,
                pk: self.pk.to_bytes(),
            },
        })
    }

    pub fn open(path: &Path) -> Result<Self, NodeError> {
        let file = File::open(path).map_err(|e| NodeError::Io(format!("{}: {e}", path.display())))?;
        let mut index: Option<Self> = None;
        for (no, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| NodeError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: LogLine = serde_json::from_str(&line)
                .map_err(|e| NodeError::Invalid(format!("index log line {}: {e}", no + 1)))?;
            match (&mut index, entry.event) {
                (None, IndexEvent::Init { suite, params, pk, .. }) => {
                    let pk = AbePublicParams::from_bytes(&pk)?;
                    index = Some(Self::new(suite, params, pk));
                }
                (None, _) | (Some(_), IndexEvent::Init { .. }) => {
                    return Err(NodeError::Invalid(format!("index log line {}: unexpected event", no + 1)));
                }
                (Some(ix), ev) => {
                    ix.apply(ev)?;
                    if ix.version != entry.version {
                        return Err(NodeError::Invalid(format!("index log line {}: version gap", no + 1)));
                    }
                }
            }
        }
        let mut index = index.ok_or_else(|| NodeError::Invalid("empty index log".into()))?;
        index.log = Some(path.to_owned());
        Ok(index)
    }

    fn append(&self, line: &LogLine) -> Result<(), NodeError> {
        let Some(path) = &self.log else {
            return Ok(());
        };
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| NodeError::Io(format!("{}: {e}", path.display())))?;
        let mut text = serde_json::to_string(line).expect("index events serialize");
        text.push('\n');
        f.write_all(text.as_bytes()).map_err(|e| NodeError::Io(e.to_string()))?;
        f.sync_data().map_err(|e| NodeError::Io(e.to_string()))
    }

    fn apply(&mut self, ev: IndexEvent) -> Result<(), NodeError> {
        match ev {
            IndexEvent::Init { .. } => return Err(NodeError::Invalid("index already initialized".into())),
            IndexEvent::Params { pk } => self.pk = AbePublicParams::from_bytes(&pk)?,
            IndexEvent::Register { node } => {
                if self.nodes.contains_key(&node.id) {
                    return Err(NodeError::Invalid(format!("node {:?} already registered", node.id)));
                }
                self.nodes.insert(node.id.clone(), node);
            }
            IndexEvent::Blacklist { id } => {
                self.nodes
                    .get_mut(&id)
                    .ok_or_else(|| NodeError::UnknownNode(id.clone()))?
                    .blacklisted = true;
            }
            IndexEvent::Remove { id } => {
                self.nodes.remove(&id).ok_or(NodeError::UnknownNode(id))?;
            }
        }
        self.version += 1;
        Ok(())
    }

    fn mutate(&mut self, ev: IndexEvent) -> Result<(), NodeError> {
        let mut next = self.clone();
        next.log = None;
        next.apply(ev.clone())?;
        self.append(&LogLine {
            version: next.version,
            event: ev,
        })?;
        next.log = self.log.take();
        *self = next;
        Ok(())
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn suite(&self) -> SuiteId {
        self.suite
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }

    pub fn pk(&self) -> &AbePublicParams {
        &self.pk
    }

    pub fn publish_params(&mut self, pk: &AbePublicParams) -> Result<(), NodeError> {
        self.mutate(IndexEvent::Params { pk: pk.to_bytes() })
    }

    pub fn register(&mut self, node: NodeEntry) -> Result<(), NodeError> {
        self.mutate(IndexEvent::Register { node })
    }

    pub fn blacklist(&mut self, id: &str) -> Result<(), NodeError> {
        self.mutate(IndexEvent::Blacklist { id: id.to_owned() })
    }

    pub fn remove(&mut self, id: &str) -> Result<(), NodeError> {
        self.mutate(IndexEvent::Remove { id: id.to_owned() })
    }

    pub fn node(&self, id: &str) -> Option<&NodeEntry> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeEntry> + '_ {
        self.nodes.values()
    }

    /// Whitelisted nodes of `role`.
    pub fn live(&self, role: NodeRole) -> impl Iterator<Item = &NodeEntry> + '_ {
        self.nodes.values().filter(move |n| n.role == role && !n.blacklisted)
    }

    pub fn is_whitelisted(&self, id: &str) -> bool {
        self.nodes.get(id).is_some_and(|n| !n.blacklisted)
    }

    /// JSON snapshot served to remote readers.
    pub fn to_json(&self) -> String {
        let lines = self.snapshot_lines();
        serde_json::to_string(&lines).expect("index serializes")
    }

    fn snapshot_lines(&self) -> Vec<LogLine> {
        let mut lines = vec![LogLine {
            version: self.version,
            event: IndexEvent::Init {
                scheme: self.pk.scheme(),
                suite: self.suite,
                params: self.params,
                pk: self.pk.to_bytes(),
            },
        }];
        lines.extend(self.nodes.values().map(|n| LogLine {
            version: self.version,
            event: IndexEvent::Register { node: n.clone() },
        }));
        lines
    }

    pub fn from_json(text: &str) -> Result<Self, NodeError> {
        let lines: Vec<LogLine> =
            serde_json::from_str(text).map_err(|e| NodeError::Invalid(format!("index snapshot: {e}")))?;
        let mut it = lines.into_iter();
        let Some(LogLine {
            version,
            event: IndexEvent::Init { suite, params, pk, .. },
        }) = it.next()
        else {
            return Err(NodeError::Invalid("index snapshot lacks header".into()));
        };
        let mut ix = Self::new(suite, params, AbePublicParams::from_bytes(&pk)?);
        for line in it {
            match line.event {
                IndexEvent::Register { node } => {
                    ix.nodes.insert(node.id.clone(), node);
                }
                _ => return Err(NodeError::Invalid("unexpected snapshot event".into())),
            }
        }
        ix.version = version;
        Ok(ix)
    }
}

impl IssuerDirectory for PublicIndex {
    fn responsibility_of(&self, m_public: &[u8]) -> Option<AttributeSet> {
        self.live(NodeRole::Authorization)
            .find(|n| n.m_public == m_public)
            .map(|n| n.responsibility.clone())
    }
}
