use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use serde::{Deserialize, Serialize};

use super::ledger::{ActionCost, ScalingAction};
use super::store::write_atomic;
use super::{
    Authority, AuthorizationNode, InitConfig, NodeContext, NodeDescriptor, NodeError, NodeRole, ProtocolParams,
    PublicIndex, Rekey, ServiceNode, Store, AUTHORIZATION_ATTRIBUTE_PREFIX,
};
use crate::abe::{Abe, SchemeId, SecureRng};
use crate::client::ConsumerCredentials;
use crate::mst::SERVICE_NODE_ATTRIBUTE;
use crate::policy::AttributeSet;
use crate::suite::{CryptoSuite, SuiteId};

const SYSTEM_FILE: &str = "system.toml";
const AUTHORITY_FILE: &str = "authority.key";
const INDEX_FILE: &str = "index.jsonl";
const NODES_DIR: &str = "nodes";
const STORES_DIR: &str = "stores";
const SYSTEM_FORMAT: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SystemFile {
    format: u32,
    scheme: SchemeId,
    suite: SuiteId,
    security_bits: u16,
    #[serde(default)]
    generic: Vec<String>,
    params: ProtocolParams,
}

/// Outcome of a node recovery procedure.
#[derive(Debug, Clone)]
pub struct RecoveryReport {
    pub compromised: String,
    pub replacement: String,
    /// Role attributes whose epoch was bumped.
    pub revoked: Vec<String>,
    pub index_version_before: u64,
    pub index_version_after: u64,
    /// Records carried over to the replacement service node.
    pub migrated: usize,
    /// Records dropped because their owner signature no longer verified.
    pub dropped: usize,
    pub steps: Vec<String>,
    pub cost: Option<ActionCost>,
}

/// Fingerprint of a file, to notice when another process rewrote it.
type Stamp = Option<(u64, SystemTime)>;

fn stamp(path: &Path) -> Stamp {
    let m = fs::metadata(path).ok()?;
    Some((m.len(), m.modified().ok()?))
}

/// One authority with its index, authorization nodes and service nodes.
///
/// In memory this is the whole system the harness drives. Attached to a
/// directory it is the operator's view: every node's keys in `nodes/`, each
/// service store in `stores/<id>/`, the index as an append-only log.
#[derive(Debug, Clone)]
pub struct Deployment {
    abe: Abe,
    suite: CryptoSuite,
    config: InitConfig,
    authority: Authority,
    index: PublicIndex,
    authz: BTreeMap<String, AuthorizationNode>,
    service: BTreeMap<String, ServiceNode>,
    dir: Option<PathBuf>,
    stamps: BTreeMap<PathBuf, Stamp>,
}

impl Deployment {
    pub fn init(
        abe: Abe,
        suite: CryptoSuite,
        config: InitConfig,
        params: ProtocolParams,
        rng: &mut dyn SecureRng,
    ) -> Result<Self, NodeError> {
        let (authority, index) = Authority::system_init(abe.clone(), suite, &config, params, rng)?;
        Ok(Self {
            abe,
            suite,
            config,
            authority,
            index,
            authz: BTreeMap::new(),
            service: BTreeMap::new(),
            dir: None,
            stamps: BTreeMap::new(),
        })
    }

    /// Initializes a system persisted under `dir`, which must not already
    /// hold one.
    pub fn create(
        dir: &Path,
        abe: Abe,
        suite: CryptoSuite,
        config: InitConfig,
        params: ProtocolParams,
        rng: &mut dyn SecureRng,
    ) -> Result<Self, NodeError> {
        if dir.join(SYSTEM_FILE).exists() {
            return Err(NodeError::Invalid(format!("{} already holds a system", dir.display())));
        }
        fs::create_dir_all(dir.join(NODES_DIR)).map_err(|e| io_err(dir, e))?;
        fs::create_dir_all(dir.join(STORES_DIR)).map_err(|e| io_err(dir, e))?;
        let mut d = Self::init(abe, suite, config, params, rng)?;
        d.index.create_log(&dir.join(INDEX_FILE))?;
        d.dir = Some(dir.to_owned());
        let sys = SystemFile {
            format: SYSTEM_FORMAT,
            scheme: d.abe.scheme_id(),
            suite: d.suite.id,
            security_bits: d.config.security_bits,
            generic: d.config.generic.clone(),
            params,
        };
        let text = toml::to_string(&sys).expect("system file serializes");
        write_atomic(&dir.join(SYSTEM_FILE), text.as_bytes())?;
        d.save()?;
        Ok(d)
    }

    pub fn open(dir: &Path) -> Result<Self, NodeError> {
        let path = dir.join(SYSTEM_FILE);
        let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
        let sys: SystemFile = toml::from_str(&text).map_err(|e| NodeError::Invalid(format!("{}: {e}", path.display())))?;
        if sys.format != SYSTEM_FORMAT {
            return Err(NodeError::Invalid(format!("system format {}", sys.format)));
        }
        let abe = Abe::for_scheme(sys.scheme);
        let suite = CryptoSuite::by_id(sys.suite);
        let apath = dir.join(AUTHORITY_FILE);
        let authority = Authority::from_bytes(&fs::read(&apath).map_err(|e| io_err(&apath, e))?)?;
        let index = PublicIndex::open(&dir.join(INDEX_FILE))?;
        let mut d = Self {
            abe,
            suite,
            config: InitConfig {
                security_bits: sys.security_bits,
                generic: sys.generic,
            },
            authority,
            index,
            authz: BTreeMap::new(),
            service: BTreeMap::new(),
            dir: Some(dir.to_owned()),
            stamps: BTreeMap::new(),
        };
        d.stamps.insert(dir.join(INDEX_FILE), stamp(&dir.join(INDEX_FILE)));
        let live: Vec<(String, NodeRole)> = d.index.nodes().filter(|n| !n.blacklisted).map(|n| (n.id.clone(), n.role)).collect();
        for (id, role) in live {
            d.load_node(&id, role)?;
        }
        Ok(d)
    }

    fn node_file(&self, id: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(NODES_DIR).join(format!("{id}.node")))
    }

    fn store_dir(&self, id: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(STORES_DIR).join(id))
    }

    fn load_node(&mut self, id: &str, role: NodeRole) -> Result<(), NodeError> {
        let path = self.node_file(id).expect("persistent deployment");
        let raw = fs::read(&path).map_err(|e| io_err(&path, e))?;
        self.stamps.insert(path.clone(), stamp(&path));
        match role {
            NodeRole::Authorization => {
                self.authz.insert(id.to_owned(), AuthorizationNode::new(NodeDescriptor::from_bytes(&raw)?)?);
            }
            NodeRole::Service => {
                let store = match self.service.remove(id) {
                    Some(old) => old.store().clone(),
                    None => Store::open(&self.store_dir(id).expect("persistent deployment"))?,
                };
                self.service.insert(id.to_owned(), ServiceNode::from_state_bytes(&raw, store)?);
            }
            NodeRole::Authority => {}
        }
        Ok(())
    }

    /// Writes the authority state and every live node's keys. Stores and
    /// the index persist themselves on each mutation.
    pub fn save(&self) -> Result<(), NodeError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        write_secret(&dir.join(AUTHORITY_FILE), &self.authority.to_bytes())?;
        for (id, n) in &self.authz {
            write_secret(&self.node_file(id).expect("dir set"), &n.descriptor().to_bytes())?;
        }
        for (id, n) in &self.service {
            write_secret(&self.node_file(id).expect("dir set"), &n.state_bytes())?;
        }
        Ok(())
    }

    /// Picks up index and key changes written by another process. Returns
    /// whether anything was reloaded.
    pub fn refresh(&mut self) -> Result<bool, NodeError> {
        let Some(dir) = self.dir.clone() else {
            return Ok(false);
        };
        let mut changed = false;
        let ipath = dir.join(INDEX_FILE);
        let now = stamp(&ipath);
        if self.stamps.get(&ipath) != Some(&now) {
            self.index = PublicIndex::open(&ipath)?;
            self.stamps.insert(ipath, now);
            changed = true;
        }
        let live: Vec<(String, NodeRole)> = self.index.nodes().filter(|n| !n.blacklisted).map(|n| (n.id.clone(), n.role)).collect();
        self.authz.retain(|id, _| live.iter().any(|(l, _)| l == id));
        self.service.retain(|id, _| live.iter().any(|(l, _)| l == id));
        for (id, role) in live {
            let path = self.node_file(&id).expect("dir set");
            let now = stamp(&path);
            if self.stamps.get(&path) != Some(&now) && now.is_some() {
                self.load_node(&id, role)?;
                changed = true;
            }
        }
        Ok(changed)
    }

    pub fn abe(&self) -> &Abe {
        &self.abe
    }

    pub fn suite(&self) -> &CryptoSuite {
        &self.suite
    }

    pub fn config(&self) -> &InitConfig {
        &self.config
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn authority(&self) -> &Authority {
        &self.authority
    }

    pub fn authority_mut(&mut self) -> (&mut Authority, &mut PublicIndex) {
        (&mut self.authority, &mut self.index)
    }

    pub fn index(&self) -> &PublicIndex {
        &self.index
    }

    pub fn authorization_node(&self, id: &str) -> Option<&AuthorizationNode> {
        self.authz.get(id)
    }

    pub fn service_node(&self, id: &str) -> Option<&ServiceNode> {
        self.service.get(id)
    }

    pub fn service_node_mut(&mut self, id: &str) -> Option<&mut ServiceNode> {
        self.service.get_mut(id)
    }

    pub fn authorization_nodes(&self) -> impl Iterator<Item = &AuthorizationNode> + '_ {
        self.authz.values()
    }

    pub fn service_nodes(&self) -> impl Iterator<Item = &ServiceNode> + '_ {
        self.service.values()
    }

    pub fn provision_authorization_node(
        &mut self,
        id: &str,
        address: &str,
        scope: &AttributeSet,
        rng: &mut dyn SecureRng,
    ) -> Result<&AuthorizationNode, NodeError> {
        let desc = self
            .authority
            .provision_authorization_node(&mut self.index, id, address, scope, rng)?;
        self.install_authz(desc)?;
        Ok(&self.authz[id])
    }

    fn install_authz(&mut self, desc: NodeDescriptor) -> Result<(), NodeError> {
        let id = desc.id.clone();
        self.authz.insert(id, AuthorizationNode::new(desc)?);
        self.save()
    }

    pub fn provision_service_node(
        &mut self,
        id: &str,
        address: &str,
        rng: &mut dyn SecureRng,
    ) -> Result<&ServiceNode, NodeError> {
        let desc = self.authority.provision_service_node(&mut self.index, id, address, rng)?;
        self.install_service(desc, None)?;
        Ok(&self.service[id])
    }

    fn install_service(&mut self, desc: NodeDescriptor, records: Option<&Store>) -> Result<usize, NodeError> {
        let id = desc.id.clone();
        let mut store = match self.store_dir(&id) {
            Some(dir) => Store::open(&dir)?,
            None => Store::in_memory(),
        };
        let mut migrated = 0;
        if let Some(src) = records {
            for r in src.records().filter(|r| r.signature_valid(self.suite.sig)) {
                store.put(r.clone())?;
                migrated += 1;
            }
        }
        self.service.insert(id, ServiceNode::new(desc, store)?);
        self.save()?;
        Ok(migrated)
    }

    pub fn add_authority(&mut self) -> Result<(), NodeError> {
        self.authority.add_authority(&mut self.index)?;
        self.save()
    }

    pub fn remove_authority(&mut self) -> Result<(), NodeError> {
        self.authority.remove_authority(&mut self.index)?;
        self.save()
    }

    /// Decommissions a node: blacklisted and dropped, keys not revoked.
    pub fn remove_node(&mut self, id: &str) -> Result<(), NodeError> {
        self.authority.remove_node(&mut self.index, id)?;
        self.authz.remove(id);
        self.service.remove(id);
        self.save()
    }

    pub fn enroll_consumer(
        &mut self,
        id: &str,
        attributes: &AttributeSet,
        validity: &AttributeSet,
        rng: &mut dyn SecureRng,
    ) -> Result<ConsumerCredentials, NodeError> {
        let creds = self
            .authority
            .enroll_consumer(&mut self.index, id, attributes, validity, rng)?;
        self.save()?;
        Ok(creds)
    }

    /// Installs re-keyed service node keys. Replaced keys stay valid for
    /// TTL_max so outstanding sessions finish.
    fn apply_rekey(&mut self, rekey: &Rekey, now: u64) {
        let grace = now + self.authority.params().ttl_max;
        for (id, key) in &rekey.service_nodes {
            if let Some(node) = self.service.get_mut(id) {
                node.rekey(key.clone(), now, grace);
            }
        }
    }

    /// Returns the consumers' fresh keys; service nodes are re-keyed in place.
    pub fn revoke_validity_attribute(&mut self, name: &str, now: u64, rng: &mut dyn SecureRng) -> Result<Rekey, NodeError> {
        let rekey = self.authority.revoke_validity_attribute(&mut self.index, name, rng)?;
        self.apply_rekey(&rekey, now);
        self.save()?;
        Ok(rekey)
    }

    pub fn remove_consumer(&mut self, id: &str, now: u64, rng: &mut dyn SecureRng) -> Result<Rekey, NodeError> {
        let rekey = self.authority.remove_consumer(&mut self.index, id, rng)?;
        self.apply_rekey(&rekey, now);
        self.save()?;
        Ok(rekey)
    }

    /// Authorization node recovery: revoke the node's role attribute,
    /// blacklist it and its signing key, provision a replacement with the
    /// same responsibility and publish.
    pub fn recover_authorization_node(
        &mut self,
        id: &str,
        replacement: &str,
        rng: &mut dyn SecureRng,
    ) -> Result<RecoveryReport, NodeError> {
        let old = self.authz.get(id).ok_or_else(|| NodeError::UnknownNode(id.to_owned()))?.descriptor().clone();
        let before = self.index.version();
        let role_attr = format!("{AUTHORIZATION_ATTRIBUTE_PREFIX}{id}");
        self.authority.begin(ScalingAction::RecoverAuthorizationNode, &self.index);
        let result = (|| {
            let mut steps = Vec::new();
            self.authority.revoke_inner(&mut self.index, std::slice::from_ref(&role_attr), None, rng)?;
            steps.push(format!("revoked role attribute {role_attr}"));
            self.index.blacklist(id)?;
            self.authz.remove(id);
            steps.push(format!("blacklisted {id} and its signing key"));
            let desc = self.authority.provision_authorization_inner(
                &mut self.index,
                replacement,
                &old.address,
                &old.responsibility,
                rng,
            )?;
            steps.push(format!("provisioned {replacement} for {}", old.responsibility));
            self.install_authz(desc)?;
            steps.push(format!("published index version {}", self.index.version()));
            Ok(steps)
        })();
        self.finish_recovery(result, id, replacement, vec![role_attr], before, 0, 0)
    }

    /// Service node recovery: revoke SN, re-key every other service node,
    /// blacklist the node and provision a replacement that takes over the
    /// records whose owner signatures still verify.
    pub fn recover_service_node(
        &mut self,
        id: &str,
        replacement: &str,
        now: u64,
        rng: &mut dyn SecureRng,
    ) -> Result<RecoveryReport, NodeError> {
        let old = self.service.get(id).ok_or_else(|| NodeError::UnknownNode(id.to_owned()))?.clone();
        let before = self.index.version();
        self.authority.begin(ScalingAction::RecoverServiceNode, &self.index);
        let mut counts = (0, 0);
        let result = (|| {
            let mut steps = Vec::new();
            let rekey =
                self.authority
                    .revoke_inner(&mut self.index, &[SERVICE_NODE_ATTRIBUTE.to_owned()], Some(id), rng)?;
            steps.push(format!("revoked {SERVICE_NODE_ATTRIBUTE}"));
            self.apply_rekey(&rekey, now);
            steps.push(format!("re-keyed {} service node(s)", rekey.service_nodes.len()));
            self.index.blacklist(id)?;
            self.service.remove(id);
            steps.push(format!("blacklisted {id}"));
            let desc = self
                .authority
                .provision_service_inner(&mut self.index, replacement, &old.descriptor().address, rng)?;
            let migrated = self.install_service(desc, Some(old.store()))?;
            counts = (migrated, old.store().len() - migrated);
            steps.push(format!("provisioned {replacement} with {migrated} record(s)"));
            steps.push(format!("published index version {}", self.index.version()));
            Ok(steps)
        })();
        self.finish_recovery(
            result,
            id,
            replacement,
            vec![SERVICE_NODE_ATTRIBUTE.to_owned()],
            before,
            counts.0,
            counts.1,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn finish_recovery(
        &mut self,
        result: Result<Vec<String>, NodeError>,
        id: &str,
        replacement: &str,
        revoked: Vec<String>,
        before: u64,
        migrated: usize,
        dropped: usize,
    ) -> Result<RecoveryReport, NodeError> {
        let steps = match result {
            Ok(s) => s,
            Err(e) => {
                self.authority.abandon();
                return Err(e);
            }
        };
        let cost = self.authority.end(&self.index);
        if let Some(path) = self.node_file(id) {
            let _ = fs::remove_file(path);
        }
        self.save()?;
        Ok(RecoveryReport {
            compromised: id.to_owned(),
            replacement: replacement.to_owned(),
            revoked,
            index_version_before: before,
            index_version_after: self.index.version(),
            migrated,
            dropped,
            steps,
            cost,
        })
    }

    /// Dispatches one decrypted request to node `id`.
    pub fn handle(
        &mut self,
        id: &str,
        kind: u8,
        body: &[u8],
        now: u64,
        rng: &mut dyn SecureRng,
    ) -> Result<(u8, Vec<u8>), NodeError> {
        let mut ctx = NodeContext {
            abe: &self.abe,
            suite: &self.suite,
            index: &self.index,
            now,
            rng,
        };
        if let Some(n) = self.authz.get(id) {
            return n.handle(&mut ctx, kind, body);
        }
        if let Some(n) = self.service.get_mut(id) {
            return n.handle(&mut ctx, kind, body);
        }
        Err(NodeError::UnknownNode(id.to_owned()))
    }
}

fn io_err(path: &Path, e: std::io::Error) -> NodeError {
    NodeError::Io(format!("{}: {e}", path.display()))
}

/// Key files are created readable by the owner only.
pub(crate) fn write_secret(path: &Path, bytes: &[u8]) -> Result<(), NodeError> {
    use std::io::Write;
    let tmp = path.with_extension("tmp");
    let mut opts = fs::OpenOptions::new();
    opts.write(true).create(true).truncate(true);
    #[cfg(unix)]
    {
        use std::os::unix::fs::OpenOptionsExt;
        opts.mode(0o600);
    }
    let mut f = opts.open(&tmp).map_err(|e| io_err(&tmp, e))?;
    f.write_all(bytes).map_err(|e| io_err(&tmp, e))?;
    f.sync_data().map_err(|e| io_err(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}
