//! Scripted runs over the simulated network.
//!
//! A script declares the system, then a list of steps: honest routine
//! calls, clock advances, adversary hooks, compromises, attacks and
//! recoveries. Every step carries the outcome it expects. The run yields
//! the transcript and one [`CompromiseReport`] per asset and goal.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::adversary::{contains_plaintext, AdversaryModel, Capability, CompromiseReport};
use super::net::{Delivery, Hook, HookAction, LinkDirection, LinkFilter, NodeControl, SimConnector, SimNet, Transcript};
use crate::abe::{Abe, AbePrivateKey, SchemeId, DEFAULT_CHUNK_SIZE};
use crate::client::{AuthArgs, Client, ClientError, ConsumerCredentials, SessionState};
use crate::mst::{self, IssuedToken};
use crate::nodes::{Deployment, InitConfig, NodeError, ProtocolParams};
use crate::policy::{self, conjunction, AttributeSet};
use crate::suite::{CryptoSuite, SigKeyPair, SuiteId, SymKeyMaterial, SYM_KEY_LEN};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario script: {0}")]
    Parse(String),
    #[error("step {step}: unknown {what} {name:?}")]
    Unknown { step: usize, what: &'static str, name: String },
    #[error("step {step}: {message}")]
    Invalid { step: usize, message: String },
    #[error(transparent)]
    Node(#[from] NodeError),
    #[error("{0}")]
    Io(String),
}

fn default_seed() -> u64 {
    1
}

fn default_scheme() -> SchemeId {
    SchemeId::Mock
}

fn default_suite() -> SuiteId {
    SuiteId::ModernFast
}

fn default_bits() -> u16 {
    128
}

fn default_x() -> u32 {
    4
}

fn default_u() -> u32 {
    2
}

fn default_ttl() -> u64 {
    600
}

fn default_one() -> u64 {
    1
}

fn default_chunk() -> u32 {
    DEFAULT_CHUNK_SIZE
}

fn default_ok() -> String {
    "ok".into()
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default = "default_scheme")]
    pub scheme: SchemeId,
    #[serde(default = "default_suite")]
    pub suite: SuiteId,
    #[serde(default = "default_bits")]
    pub security_bits: u16,
    #[serde(default)]
    pub generic: Vec<String>,
    #[serde(default = "default_x")]
    pub x: u32,
    #[serde(default = "default_u")]
    pub u: u32,
    #[serde(default = "default_ttl")]
    pub ttl_max: u64,
    #[serde(default = "default_one")]
    pub authorities: u64,
    #[serde(default = "default_chunk")]
    pub chunk_size: u32,
}

impl Default for SystemSpec {
    fn default() -> Self {
        toml::from_str("").expect("all fields default")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuthzSpec {
    pub id: String,
    pub scope: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSpec {
    pub id: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsumerSpec {
    pub id: String,
    #[serde(default)]
    pub attributes: Vec<String>,
    #[serde(default)]
    pub validity: Vec<String>,
}

/// Bytes for a put or write: literal text, or `size` seeded random bytes.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Payload {
    pub data: Option<String>,
    pub size: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HookKind {
    Eavesdrop,
    Tamper,
    Drop,
    Replay,
    Inject,
    Clear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttackKind {
    /// Mint an MST with a stolen authorization signing key and Put with it.
    ForgeMst,
    /// Put with a stolen MST and K1 but the adversary's own signing key.
    StolenMstPut,
    /// Open K2 of a session's MST with stolen service keys.
    UnsealK2,
    /// Open stored resources with stolen service keys.
    DecryptStore,
    /// Have a controlled service node refuse a session's Get.
    DenyService,
    /// Attribute-Authenticate with a stolen consumer key.
    StolenKeyAuth,
}

impl AttackKind {
    pub fn goal(self) -> &'static str {
        match self {
            Self::ForgeMst | Self::StolenMstPut => "forged-accept",
            Self::UnsealK2 => "session-key",
            Self::DecryptStore => "resource-plaintext",
            Self::DenyService => "deny-service",
            Self::StolenKeyAuth => "issue-mst",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum Action {
    Authenticate {
        consumer: String,
        authz: String,
        service: String,
        session: Option<String>,
        attributes: Option<Vec<String>>,
        validity: Option<Vec<String>>,
        ttl: Option<i64>,
    },
    Put {
        session: String,
        id: String,
        policy: String,
        #[serde(flatten)]
        payload: Payload,
    },
    Get {
        session: String,
        id: String,
        range: Option<[u64; 2]>,
    },
    Write {
        session: String,
        id: String,
        offset: u64,
        #[serde(flatten)]
        payload: Payload,
    },
    Advance {
        dt: u64,
    },
    Adversary {
        hook: HookKind,
        client: Option<String>,
        node: Option<String>,
        direction: Option<String>,
        kind: Option<u8>,
        bit: Option<usize>,
        #[serde(default)]
        skip: u64,
        count: Option<u64>,
        bytes: Option<String>,
    },
    Snapshot {
        node: String,
    },
    Compromise {
        asset: String,
    },
    Attack {
        attack: AttackKind,
        asset: String,
        service: Option<String>,
        authz: Option<String>,
        session: Option<String>,
        id: Option<String>,
        policy: Option<String>,
        attributes: Option<Vec<String>>,
        validity: Option<Vec<String>>,
    },
    Recover {
        asset: String,
        replacement: Option<String>,
    },
    Revoke {
        attribute: String,
        #[serde(default = "default_true")]
        deliver: bool,
    },
    /// Hands a consumer the key re-issued for it by an undelivered revoke.
    Deliver {
        consumer: String,
    },
    RemoveConsumer {
        consumer: String,
    },
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Authenticate { .. } => "authenticate",
            Self::Put { .. } => "put",
            Self::Get { .. } => "get",
            Self::Write { .. } => "write",
            Self::Advance { .. } => "advance",
            Self::Adversary { .. } => "adversary",
            Self::Snapshot { .. } => "snapshot",
            Self::Compromise { .. } => "compromise",
            Self::Attack { .. } => "attack",
            Self::Recover { .. } => "recover",
            Self::Revoke { .. } => "revoke",
            Self::Deliver { .. } => "deliver",
            Self::RemoveConsumer { .. } => "remove-consumer",
        }
    }

    fn is_honest(&self) -> bool {
        matches!(self, Self::Authenticate { .. } | Self::Put { .. } | Self::Get { .. } | Self::Write { .. })
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct Step {
    #[serde(flatten)]
    pub action: Action,
    /// "ok", an error class, "error" for any failure, or "any".
    #[serde(default = "default_ok")]
    pub expect: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub system: SystemSpec,
    #[serde(default)]
    pub authz: Vec<AuthzSpec>,
    #[serde(default)]
    pub service: Vec<ServiceSpec>,
    #[serde(default)]
    pub consumer: Vec<ConsumerSpec>,
    #[serde(default, rename = "step")]
    pub steps: Vec<Step>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::Io(format!("{}: {e}", path.display())))?;
        let mut s = Self::from_toml(&text)?;
        if s.name.is_empty() {
            s.name = path.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    pub index: usize,
    pub action: &'static str,
    pub expected: String,
    /// "ok" or the error class.
    pub actual: String,
    pub detail: String,
}

impl StepOutcome {
    pub fn matched(&self) -> bool {
        match self.expected.as_str() {
            "any" => true,
            "error" => self.actual != "ok",
            e => self.actual == e,
        }
    }
}

/// Frames the adversary altered and how many the receiver rejected.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FaultStats {
    pub injected: u64,
    pub detected: u64,
}

#[derive(Debug, Clone)]
pub struct SnapshotRecord {
    pub node: String,
    pub digest: [u8; 32],
    pub bytes: usize,
    /// No resource plaintext, MST or session key in the snapshot.
    pub clean: bool,
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub name: String,
    pub transcript: Transcript,
    pub steps: Vec<StepOutcome>,
    pub reports: Vec<CompromiseReport>,
    pub faults: FaultStats,
    pub snapshots: Vec<SnapshotRecord>,
    pub model: AdversaryModel,
}

impl ScenarioOutcome {
    /// Every step ended as its script expected.
    pub fn passed(&self) -> bool {
        self.steps.iter().all(StepOutcome::matched)
    }

    pub fn report(&self, asset: &str, goal: &str) -> Option<&CompromiseReport> {
        self.reports.iter().find(|r| r.asset == asset && r.goal == goal)
    }

    /// One line per step and per report.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for s in &self.steps {
            out.push_str(&format!(
                "step {:>3} {:<16} expect={:<20} got={:<20} {}{}\n",
                s.index,
                s.action,
                s.expected,
                s.actual,
                if s.matched() { "ok" } else { "MISMATCH" },
                if s.detail.is_empty() { String::new() } else { format!(" ({})", s.detail) }
            ));
        }
        for r in &self.reports {
            out.push_str(&format!(
                "report {}/{} occurred={} local={} forward={} online-recoverable={}\n",
                r.asset, r.goal, r.occurred, r.local, r.forward, r.online_recoverable
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AssetKind {
    Authz,
    Service,
    Consumer,
    Session,
}

/// What the adversary took from one asset.
struct Loot {
    kind: AssetKind,
    at_step: usize,
    abe_keys: Vec<AbePrivateKey>,
    signing: Vec<SigKeyPair>,
    /// Raw exfiltrated state, scanned for past secrets.
    blobs: Vec<Vec<u8>>,
    session: Option<SessionState>,
}

struct AttackRecord {
    asset: String,
    goal: &'static str,
    after_recovery: bool,
    succeeded: bool,
    /// The attack acted on something other than the compromised asset.
    reached_beyond: bool,
}

/// A secret that must never reach the adversary, and when it came to be.
struct Secret {
    step: usize,
    owner: String,
    bytes: Vec<u8>,
    is_key: bool,
}

struct SessionEntry {
    consumer: String,
    state: SessionState,
    step: usize,
}

struct Runner {
    scenario: Scenario,
    abe: Abe,
    suite: CryptoSuite,
    net: SimNet,
    rng: ChaCha20Rng,
    clients: BTreeMap<String, Client<SimConnector>>,
    sessions: BTreeMap<String, SessionEntry>,
    resources: BTreeMap<String, Vec<u8>>,
    secrets: Vec<Secret>,
    loot: BTreeMap<String, Loot>,
    pending_keys: BTreeMap<String, AbePrivateKey>,
    attacks: Vec<AttackRecord>,
    recovered: BTreeMap<String, (usize, Vec<String>)>,
    attacker: Option<SigKeyPair>,
    model: AdversaryModel,
    outcomes: Vec<StepOutcome>,
    faults: FaultStats,
    snapshots: Vec<SnapshotRecord>,
}

type StepResult = Result<String, String>;

fn class_of(e: &ClientError) -> String {
    e.class().to_owned()
}

fn set(names: &[String]) -> AttributeSet {
    names.iter().cloned().collect()
}

/// Runs a scenario start to finish.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioOutcome, ScenarioError> {
    let mut r = Runner::new(scenario.clone())?;
    for i in 0..scenario.steps.len() {
        r.step(i)?;
    }
    Ok(r.finish())
}

impl Runner {
    fn new(scenario: Scenario) -> Result<Self, ScenarioError> {
        let sys = &scenario.system;
        let abe = Abe::for_scheme(sys.scheme);
        let suite = CryptoSuite::by_id(sys.suite);
        let mut op_rng = ChaCha20Rng::seed_from_u64(scenario.seed);
        let mut dep = Deployment::init(
            abe.clone(),
            suite,
            InitConfig {
                security_bits: sys.security_bits,
                generic: sys.generic.clone(),
            },
            ProtocolParams {
                x: sys.x,
                u: sys.u,
                ttl_max: sys.ttl_max,
            },
            &mut op_rng,
        )?;
        for _ in 1..sys.authorities.max(1) {
            dep.add_authority()?;
        }
        for a in &scenario.authz {
            dep.provision_authorization_node(&a.id, &address(&a.id), &set(&a.scope), &mut op_rng)?;
        }
        for s in &scenario.service {
            dep.provision_service_node(&s.id, &address(&s.id), &mut op_rng)?;
        }
        let mut creds = Vec::new();
        for c in &scenario.consumer {
            creds.push(dep.enroll_consumer(&c.id, &set(&c.attributes), &set(&c.validity), &mut op_rng)?);
        }
        let index = dep.index().clone();
        let net = SimNet::new(dep, scenario.seed.wrapping_add(1));
        let clients = creds
            .into_iter()
            .map(|c| {
                let id = c.id.clone();
                let client =
                    Client::new(abe.clone(), index.clone(), c, net.connector(&id)).with_chunk_size(sys.chunk_size);
                (id, client)
            })
            .collect();
        Ok(Self {
            rng: ChaCha20Rng::seed_from_u64(scenario.seed.wrapping_add(2)),
            scenario,
            abe,
            suite,
            net,
            clients,
            sessions: BTreeMap::new(),
            resources: BTreeMap::new(),
            secrets: Vec::new(),
            loot: BTreeMap::new(),
            pending_keys: BTreeMap::new(),
            attacks: Vec::new(),
            recovered: BTreeMap::new(),
            attacker: None,
            model: AdversaryModel::weak(),
            outcomes: Vec::new(),
            faults: FaultStats::default(),
            snapshots: Vec::new(),
        })
    }

    fn unknown(&self, step: usize, what: &'static str, name: &str) -> ScenarioError {
        ScenarioError::Unknown {
            step,
            what,
            name: name.to_owned(),
        }
    }

    fn sync_index(&mut self) {
        let index = self.net.with_deployment(|d, _, _| d.index().clone());
        for c in self.clients.values_mut() {
            c.set_index(index.clone());
        }
    }

    fn node_address(&self, step: usize, id: &str) -> Result<String, ScenarioError> {
        self.net
            .with_deployment(|d, _, _| d.index().node(id).map(|n| n.address.clone()))
            .ok_or_else(|| self.unknown(step, "node", id))
    }

    fn payload(&mut self, step: usize, p: &Payload) -> Result<Vec<u8>, ScenarioError> {
        match (&p.data, p.size) {
            (Some(d), None) => Ok(d.as_bytes().to_vec()),
            (None, Some(n)) => {
                let mut v = vec![0u8; n];
                self.rng.fill_bytes(&mut v);
                Ok(v)
            }
            _ => Err(ScenarioError::Invalid {
                step,
                message: "give exactly one of data or size".into(),
            }),
        }
    }

    fn step(&mut self, i: usize) -> Result<(), ScenarioError> {
        let step = self.scenario.steps[i].clone();
        let mark = self.net.transcript().len() as u64;
        let result = self.act(i, &step.action)?;
        self.count_faults(mark);
        let (actual, detail) = match result {
            Ok(detail) => ("ok".to_owned(), detail),
            Err(class) => {
                let (c, d) = class.split_once('|').unwrap_or((&class, ""));
                (c.to_owned(), d.to_owned())
            }
        };
        self.outcomes.push(StepOutcome {
            index: i,
            action: step.action.name(),
            expected: step.expect.clone(),
            actual,
            detail,
        });
        Ok(())
    }

    /// Checks every frame the adversary altered during the last step.
    fn count_faults(&mut self, mark: u64) {
        let t = self.net.transcript();
        for e in &t.entries[mark as usize..] {
            if matches!(e.delivery, Delivery::Tampered | Delivery::Injected) {
                self.faults.injected += 1;
                if self.net.rejected(e.seq) {
                    self.faults.detected += 1;
                }
            }
        }
    }

    fn session(&self, step: usize, name: &str) -> Result<&SessionEntry, ScenarioError> {
        self.sessions.get(name).ok_or_else(|| self.unknown(step, "session", name))
    }

    fn act(&mut self, i: usize, action: &Action) -> Result<StepResult, ScenarioError> {
        match action {
            Action::Authenticate {
                consumer,
                authz,
                service,
                session,
                attributes,
                validity,
                ttl,
            } => {
                let authz_addr = self.node_address(i, authz)?;
                let target = self.node_address(i, service)?;
                let ttl = ttl.unwrap_or(self.scenario.system.ttl_max as i64);
                let client = self.clients.get_mut(consumer).ok_or_else(|| ScenarioError::Unknown {
                    step: i,
                    what: "consumer",
                    name: consumer.clone(),
                })?;
                let args = AuthArgs {
                    attributes: attributes.as_deref().map(set).unwrap_or_else(|| client.credentials().attributes()),
                    validity: validity
                        .as_deref()
                        .map(set)
                        .unwrap_or_else(|| client.credentials().validity.clone()),
                    ttl,
                };
                match client.authenticate(&args, &authz_addr, &target, &mut self.rng) {
                    Ok(state) => {
                        let name = session.clone().unwrap_or_else(|| consumer.clone());
                        self.secrets.push(Secret {
                            step: i,
                            owner: name.clone(),
                            bytes: state.session_key().key_bytes().to_vec(),
                            is_key: true,
                        });
                        // The MST's secret-bearing parts; the rest is public.
                        let mst = state.mst();
                        for bytes in [mst.core.nonce.to_vec(), mst.signature.clone(), mst.sealed.clone()] {
                            self.secrets.push(Secret {
                                step: i,
                                owner: name.clone(),
                                bytes,
                                is_key: false,
                            });
                        }
                        let detail = format!("A'={}", state.authorized());
                        self.sessions.insert(
                            name,
                            SessionEntry {
                                consumer: consumer.clone(),
                                state,
                                step: i,
                            },
                        );
                        Ok(Ok(detail))
                    }
                    Err(e) => Ok(Err(format!("{}|{e}", class_of(&e)))),
                }
            }
            Action::Put {
                session,
                id,
                policy,
                payload,
            } => {
                let policy = policy::parse(policy).map_err(|e| ScenarioError::Invalid {
                    step: i,
                    message: e.to_string(),
                })?;
                let data = self.payload(i, payload)?;
                let consumer = self.session(i, session)?.consumer.clone();
                let entry = self.sessions.get_mut(session).expect("checked");
                let client = self.clients.get_mut(&consumer).expect("session owner exists");
                match client.put(&mut entry.state, id, &policy, &data, &mut self.rng) {
                    Ok(v) => {
                        self.secrets.push(Secret {
                            step: i,
                            owner: id.clone(),
                            bytes: data.clone(),
                            is_key: false,
                        });
                        self.resources.insert(id.clone(), data);
                        Ok(Ok(format!("version {v}")))
                    }
                    Err(e) => Ok(Err(format!("{}|{e}", class_of(&e)))),
                }
            }
            Action::Get { session, id, range } => {
                let consumer = self.session(i, session)?.consumer.clone();
                let entry = self.sessions.get_mut(session).expect("checked");
                let client = self.clients.get_mut(&consumer).expect("session owner exists");
                let range = range.map(|[a, b]| a..b);
                match client.get(&mut entry.state, id, range.clone(), &mut self.rng) {
                    Ok(data) => {
                        let want = self.resources.get(id).map(|full| {
                            let r = range.unwrap_or(0..full.len() as u64);
                            full[r.start as usize..r.end as usize].to_vec()
                        });
                        if want.as_deref() == Some(data.as_slice()) {
                            Ok(Ok(format!("{} bytes", data.len())))
                        } else {
                            Ok(Err("corrupt|returned bytes differ from what was written".into()))
                        }
                    }
                    Err(e) => Ok(Err(format!("{}|{e}", class_of(&e)))),
                }
            }
            Action::Write {
                session,
                id,
                offset,
                payload,
            } => {
                let data = self.payload(i, payload)?;
                let consumer = self.session(i, session)?.consumer.clone();
                let entry = self.sessions.get_mut(session).expect("checked");
                let client = self.clients.get_mut(&consumer).expect("session owner exists");
                match client.write(&mut entry.state, id, *offset, &data, &mut self.rng) {
                    Ok(v) => {
                        if let Some(full) = self.resources.get_mut(id) {
                            let o = *offset as usize;
                            full[o..o + data.len()].copy_from_slice(&data);
                            self.secrets.push(Secret {
                                step: i,
                                owner: id.clone(),
                                bytes: full.clone(),
                                is_key: false,
                            });
                        }
                        Ok(Ok(format!("version {v}")))
                    }
                    Err(e) => Ok(Err(format!("{}|{e}", class_of(&e)))),
                }
            }
            Action::Advance { dt } => {
                self.net.advance_clock(*dt);
                Ok(Ok(format!("t={}", self.net.now())))
            }
            Action::Adversary {
                hook,
                client,
                node,
                direction,
                kind,
                bit,
                skip,
                count,
                bytes,
            } => self.adversary(i, *hook, client, node, direction, *kind, *bit, *skip, *count, bytes),
            Action::Snapshot { node } => {
                let blob = self.snapshot(i, node)?;
                let clean = !self.leaks(&blob, usize::MAX, None);
                self.snapshots.push(SnapshotRecord {
                    node: node.clone(),
                    digest: Sha256::digest(&blob).into(),
                    bytes: blob.len(),
                    clean,
                });
                self.model.grant(Capability::ControlNode(node.clone()));
                Ok(if clean {
                    Ok(format!("{} bytes, no plaintext", blob.len()))
                } else {
                    Err("plaintext-found|snapshot holds a secret".into())
                })
            }
            Action::Compromise { asset } => self.compromise(i, asset),
            Action::Attack {
                attack,
                asset,
                service,
                authz,
                session,
                id,
                policy,
                attributes,
                validity,
            } => {
                let spec = AttackSpec {
                    service: service.as_deref(),
                    authz: authz.as_deref(),
                    session: session.as_deref(),
                    id: id.as_deref(),
                    policy: policy.as_deref(),
                    attributes: attributes.as_deref(),
                    validity: validity.as_deref(),
                };
                self.attack(i, *attack, asset, &spec)
            }
            Action::Recover { asset, replacement } => self.recover(i, asset, replacement.as_deref()),
            Action::Revoke { attribute, deliver } => {
                let now = self.net.now();
                let res = self
                    .net
                    .with_deployment(|d, _, rng| d.revoke_validity_attribute(attribute, now, rng));
                self.sync_index();
                match res {
                    Ok(rekey) => {
                        let n = rekey.consumers.len();
                        if *deliver {
                            self.install_keys(rekey.consumers);
                        } else {
                            self.pending_keys.extend(rekey.consumers);
                        }
                        Ok(Ok(format!("{n} consumer(s) re-keyed")))
                    }
                    Err(e) => Ok(Err(format!("{}|{e}", e.code()))),
                }
            }
            Action::Deliver { consumer } => match self.pending_keys.remove(consumer) {
                Some(key) => {
                    self.install_keys([(consumer.clone(), key)].into());
                    Ok(Ok(String::new()))
                }
                None => Ok(Err("nothing-pending|no re-issued key waiting".into())),
            },
            Action::RemoveConsumer { consumer } => {
                let now = self.net.now();
                let res = self.net.with_deployment(|d, _, rng| d.remove_consumer(consumer, now, rng));
                self.sync_index();
                match res {
                    Ok(rekey) => {
                        let n = rekey.consumers.len();
                        self.install_keys(rekey.consumers);
                        Ok(Ok(format!("{n} other consumer(s) re-keyed")))
                    }
                    Err(e) => Ok(Err(format!("{}|{e}", e.code()))),
                }
            }
        }
    }

    fn install_keys(&mut self, keys: BTreeMap<String, AbePrivateKey>) {
        for (id, key) in keys {
            if let Some(c) = self.clients.get_mut(&id) {
                let _ = c.credentials_mut().install_key(key);
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn adversary(
        &mut self,
        step: usize,
        hook: HookKind,
        client: &Option<String>,
        node: &Option<String>,
        direction: &Option<String>,
        kind: Option<u8>,
        bit: Option<usize>,
        skip: u64,
        count: Option<u64>,
        bytes: &Option<String>,
    ) -> Result<StepResult, ScenarioError> {
        let direction = match direction.as_deref() {
            None => None,
            Some("to-node") => Some(LinkDirection::ToNode),
            Some("to-client") => Some(LinkDirection::ToClient),
            Some(other) => {
                return Err(ScenarioError::Invalid {
                    step,
                    message: format!("direction {other:?}: use to-node or to-client"),
                })
            }
        };
        let filter = LinkFilter {
            client: client.clone(),
            node: node.clone(),
            direction,
            kind,
        };
        let action = match hook {
            HookKind::Eavesdrop => {
                self.model.grant(Capability::Eavesdrop);
                return Ok(Ok("eavesdropping on every link".into()));
            }
            HookKind::Clear => {
                self.net.clear_hooks();
                return Ok(Ok(String::new()));
            }
            HookKind::Tamper => HookAction::Tamper {
                bit: bit.unwrap_or_else(|| self.rng.gen()),
            },
            HookKind::Drop => HookAction::Drop,
            HookKind::Replay => HookAction::Replay,
            HookKind::Inject => {
                let b = match bytes {
                    Some(h) => hex::decode(h).map_err(|e| ScenarioError::Invalid {
                        step,
                        message: format!("inject bytes: {e}"),
                    })?,
                    None => {
                        let mut v = vec![0u8; 48];
                        self.rng.fill_bytes(&mut v);
                        v
                    }
                };
                HookAction::Inject(b)
            }
        };
        self.net.install_hook(Hook {
            filter,
            action,
            skip,
            count: count.or(Some(1)),
        });
        Ok(Ok(String::new()))
    }

    /// Exfiltrates a service or authorization node's persistent state.
    fn snapshot(&self, step: usize, node: &str) -> Result<Vec<u8>, ScenarioError> {
        self.net
            .with_deployment(|d, _, _| {
                if let Some(s) = d.service_node(node) {
                    let mut blob = s.state_bytes();
                    for (_, b) in s.store().raw_files() {
                        blob.extend_from_slice(&b);
                    }
                    for r in s.store().records() {
                        blob.extend_from_slice(&r.body.to_bytes());
                    }
                    return Some(blob);
                }
                d.authorization_node(node).map(|a| a.descriptor().to_bytes())
            })
            .ok_or_else(|| self.unknown(step, "node", node))
    }

    /// Whether `blob` holds any secret that existed before `before`, other
    /// than those belonging to `except`.
    fn leaks(&self, blob: &[u8], before: usize, except: Option<&str>) -> bool {
        let secrets = self
            .secrets
            .iter()
            .filter(|s| s.step < before && Some(s.owner.as_str()) != except)
            .map(|s| s.bytes.as_slice());
        contains_plaintext(blob, secrets)
    }

    fn compromise(&mut self, step: usize, asset: &str) -> Result<StepResult, ScenarioError> {
        let node = self.net.with_deployment(|d, _, _| {
            if let Some(a) = d.authorization_node(asset) {
                let desc = a.descriptor();
                let signing = desc.signing.iter().cloned().collect();
                return Some((AssetKind::Authz, vec![desc.abe_key.clone()], signing));
            }
            d.service_node(asset)
                .map(|s| (AssetKind::Service, s.keys().cloned().collect(), Vec::new()))
        });
        let entry = if let Some((kind, abe_keys, signing)) = node {
            self.model.grant(Capability::ControlNode(asset.to_owned()));
            Loot {
                kind,
                at_step: step,
                abe_keys,
                signing,
                blobs: vec![self.snapshot(step, asset)?],
                session: None,
            }
        } else if let Some(c) = self.clients.get(asset) {
            let key = c.credentials().key.clone();
            self.model.grant(Capability::HoldKeys(vec![asset.to_owned()]));
            Loot {
                kind: AssetKind::Consumer,
                at_step: step,
                blobs: vec![key.to_bytes()],
                abe_keys: vec![key],
                signing: Vec::new(),
                session: None,
            }
        } else if let Some(s) = self.sessions.get(asset) {
            self.model.grant(Capability::HoldKeys(vec![asset.to_owned()]));
            Loot {
                kind: AssetKind::Session,
                at_step: step,
                blobs: vec![s.state.mst().to_bytes()],
                abe_keys: Vec::new(),
                signing: Vec::new(),
                session: Some(s.state.clone()),
            }
        } else {
            return Err(self.unknown(step, "asset", asset));
        };
        let detail = format!(
            "{} ABE key(s), {} signing key(s), {} bytes of state",
            entry.abe_keys.len(),
            entry.signing.len(),
            entry.blobs.iter().map(Vec::len).sum::<usize>()
        );
        self.loot.insert(asset.to_owned(), entry);
        Ok(Ok(detail))
    }

    fn attacker_signing(&mut self) -> Result<SigKeyPair, ScenarioError> {
        if self.attacker.is_none() {
            let k = SigKeyPair::generate(self.suite.sig, &mut self.rng).map_err(NodeError::from)?;
            self.attacker = Some(k);
        }
        Ok(self.attacker.clone().expect("set above"))
    }

    /// A client for the adversary, holding `key` (or nothing) and its own
    /// signing key.
    fn attacker_client(
        &mut self,
        key: Option<AbePrivateKey>,
        validity: AttributeSet,
    ) -> Result<Client<SimConnector>, ScenarioError> {
        let signing = self.attacker_signing()?;
        let index = self.net.with_deployment(|d, _, _| d.index().clone());
        let key = key.unwrap_or_else(|| AbePrivateKey::from_parts(self.abe.scheme_id(), Vec::new(), BTreeMap::new()));
        let creds = ConsumerCredentials {
            id: "adversary".into(),
            key,
            signing,
            validity,
        };
        Ok(Client::new(self.abe.clone(), index, creds, self.net.connector("adversary"))
            .with_chunk_size(self.scenario.system.chunk_size))
    }

    fn attack(&mut self, step: usize, kind: AttackKind, asset: &str, spec: &AttackSpec<'_>) -> Result<StepResult, ScenarioError> {
        let Some(loot) = self.loot.get(asset) else {
            return Err(ScenarioError::Invalid {
                step,
                message: format!("attack on {asset:?} before it was compromised"),
            });
        };
        let expected_kind = match kind {
            AttackKind::ForgeMst => AssetKind::Authz,
            AttackKind::StolenMstPut => AssetKind::Session,
            AttackKind::UnsealK2 | AttackKind::DecryptStore | AttackKind::DenyService => AssetKind::Service,
            AttackKind::StolenKeyAuth => AssetKind::Consumer,
        };
        if loot.kind != expected_kind {
            return Err(ScenarioError::Invalid {
                step,
                message: format!("{kind:?} needs a compromised {expected_kind:?}"),
            });
        }
        let need = |v: Option<&str>, what: &'static str| {
            v.map(str::to_owned).ok_or_else(|| ScenarioError::Invalid {
                step,
                message: format!("{kind:?} needs {what}"),
            })
        };
        let (result, beyond) = match kind {
            AttackKind::ForgeMst => {
                let service = need(spec.service, "service")?;
                let id = need(spec.id, "id")?;
                let policy_text = need(spec.policy, "policy")?;
                (self.forge_mst(step, asset, &service, &id, &policy_text, spec)?, true)
            }
            AttackKind::StolenMstPut => {
                let id = need(spec.id, "id")?;
                let policy_text = need(spec.policy, "policy")?;
                (self.stolen_mst_put(step, asset, &id, &policy_text)?, true)
            }
            AttackKind::UnsealK2 => {
                let session = need(spec.session, "session")?;
                (self.unseal_k2(step, asset, &session)?, true)
            }
            AttackKind::DecryptStore => (self.decrypt_store(asset), false),
            AttackKind::DenyService => {
                let session = need(spec.session, "session")?;
                let id = need(spec.id, "id")?;
                (self.deny_service(step, asset, &session, &id)?, false)
            }
            AttackKind::StolenKeyAuth => {
                let authz = need(spec.authz, "authz")?;
                let service = need(spec.service, "service")?;
                (self.stolen_key_auth(step, asset, &authz, &service, spec)?, true)
            }
        };
        self.attacks.push(AttackRecord {
            asset: asset.to_owned(),
            goal: kind.goal(),
            after_recovery: self.recovered.contains_key(asset),
            succeeded: result.is_ok(),
            reached_beyond: beyond,
        });
        Ok(result)
    }

    fn forge_mst(
        &mut self,
        step: usize,
        asset: &str,
        service: &str,
        id: &str,
        policy_text: &str,
        spec: &AttackSpec<'_>,
    ) -> Result<StepResult, ScenarioError> {
        let policy = policy::parse(policy_text).map_err(|e| ScenarioError::Invalid {
            step,
            message: e.to_string(),
        })?;
        let target = self.node_address(step, service)?;
        let signing = self.loot[asset].signing.first().cloned().ok_or_else(|| ScenarioError::Invalid {
            step,
            message: "no signing key in the loot".into(),
        })?;
        let attacker = self.attacker_signing()?;
        let authorized = spec.attributes.map(set).unwrap_or_else(|| policy.attribute_names().into_iter().collect());
        let validity = spec.validity.map(set).unwrap_or_else(|| {
            (1..=self.scenario.system.u).map(|k| format!("v{k}")).collect()
        });
        let index = self.net.with_deployment(|d, _, _| d.index().clone());
        let expiry = self.net.now() + self.scenario.system.ttl_max;
        let forged = mst::mint_token(
            &self.abe,
            index.pk(),
            &self.suite,
            &signing,
            authorized.clone(),
            &validity,
            expiry,
            attacker.public(),
            &mut self.rng,
        );
        let (mst, k1) = match forged {
            Ok(x) => x,
            Err(e) => return Ok(Err(format!("mint-failed|{e}"))),
        };
        let names: Vec<&str> = authorized.iter().collect();
        let k_prime = self
            .abe
            .encrypt(
                index.pk(),
                k1.key_bytes(),
                &conjunction(&names).map_err(|e| ScenarioError::Invalid {
                    step,
                    message: e.to_string(),
                })?,
                &mut self.rng,
            )
            .map_err(NodeError::from)?;
        let sealed_mst = k1.clone().encrypt(&mst.to_bytes(), &mut self.rng);
        let mut state = SessionState::from_parts(IssuedToken { k_prime, sealed_mst }, mst, k1, target);
        let data = b"written under a forged master session token".to_vec();
        let mut client = self.attacker_client(None, AttributeSet::new())?;
        Ok(match client.put(&mut state, id, &policy, &data, &mut self.rng) {
            Ok(v) => Ok(format!("forged put accepted at version {v}")),
            Err(e) => Err(format!("{}|{e}", class_of(&e))),
        })
    }

    fn stolen_mst_put(&mut self, _step: usize, asset: &str, id: &str, policy_text: &str) -> Result<StepResult, ScenarioError> {
        let policy = policy::parse(policy_text).map_err(|e| ScenarioError::Invalid {
            step: _step,
            message: e.to_string(),
        })?;
        let mut state = self.loot[asset].session.clone().expect("session loot holds the session");
        let mut client = self.attacker_client(None, AttributeSet::new())?;
        let data = b"written with a stolen master session token".to_vec();
        Ok(match client.put(&mut state, id, &policy, &data, &mut self.rng) {
            Ok(v) => Ok(format!("put accepted at version {v}")),
            Err(e) => Err(format!("{}|{e}", class_of(&e))),
        })
    }

    fn unseal_k2(&mut self, step: usize, asset: &str, session: &str) -> Result<StepResult, ScenarioError> {
        let entry = self.session(step, session)?;
        let mst = entry.state.mst().clone();
        let want = *entry.state.session_key().key_bytes();
        let pk = self.net.with_deployment(|d, _, _| d.index().pk().clone());
        for key in &self.loot[asset].abe_keys {
            let Ok(k2) = self.abe.decrypt(&pk, &mst.core.k2_blob, key) else {
                continue;
            };
            let Ok(k2) = SymKeyMaterial::from_slice(self.suite.sym, &k2) else {
                continue;
            };
            if let Ok(plain) = k2.decrypt(&mst.sealed) {
                if plain.len() >= SYM_KEY_LEN && plain[..SYM_KEY_LEN] == want {
                    return Ok(Ok(format!("recovered K1 of session {session}")));
                }
            }
        }
        Ok(Err("seal-open-failed|no stolen key opens K2".into()))
    }

    fn decrypt_store(&mut self, asset: &str) -> StepResult {
        let loot = &self.loot[asset];
        let (pk, headers) = self.net.with_deployment(|d, _, _| {
            let headers: Vec<_> = d
                .service_node(asset)
                .map(|s| s.store().records().map(|r| r.body.header.clone()).collect())
                .unwrap_or_default();
            (d.index().pk().clone(), headers)
        });
        for h in &headers {
            for key in &loot.abe_keys {
                if self.abe.decrypt(&pk, h, key).is_ok() {
                    return Ok("opened a stored data key".into());
                }
            }
        }
        Err(format!("decryption-failed|{} record(s) resisted every stolen key", headers.len()))
    }

    fn deny_service(&mut self, step: usize, asset: &str, session: &str, id: &str) -> Result<StepResult, ScenarioError> {
        self.net.control_node(asset, NodeControl::DenyService);
        let consumer = self.session(step, session)?.consumer.clone();
        let entry = self.sessions.get_mut(session).expect("checked");
        let client = self.clients.get_mut(&consumer).expect("session owner exists");
        client.disconnect();
        Ok(match client.get(&mut entry.state, id, None, &mut self.rng) {
            Ok(_) => Err("served|the probe Get was answered".into()),
            Err(e) => Ok(format!("probe Get failed: {e}")),
        })
    }

    fn stolen_key_auth(
        &mut self,
        step: usize,
        asset: &str,
        authz: &str,
        service: &str,
        spec: &AttackSpec<'_>,
    ) -> Result<StepResult, ScenarioError> {
        let authz_addr = self.node_address(step, authz)?;
        let target = self.node_address(step, service)?;
        let key = self.loot[asset].abe_keys[0].clone();
        let victim = &self.clients[asset];
        let validity = spec
            .validity
            .map(set)
            .unwrap_or_else(|| victim.credentials().validity.clone());
        let attributes = spec
            .attributes
            .map(set)
            .unwrap_or_else(|| victim.credentials().attributes());
        let mut client = self.attacker_client(Some(key), validity.clone())?;
        let args = AuthArgs {
            attributes,
            validity,
            ttl: self.scenario.system.ttl_max as i64,
        };
        Ok(match client.authenticate(&args, &authz_addr, &target, &mut self.rng) {
            Ok(s) => Ok(format!("issued A'={}", s.authorized())),
            Err(e) => Err(format!("{}|{e}", class_of(&e))),
        })
    }

    fn recover(&mut self, step: usize, asset: &str, replacement: Option<&str>) -> Result<StepResult, ScenarioError> {
        let kind = match self.loot.get(asset) {
            Some(l) => l.kind,
            None => {
                return Err(ScenarioError::Invalid {
                    step,
                    message: format!("recovery of {asset:?}, which was never compromised"),
                })
            }
        };
        let replacement = replacement.map(str::to_owned).unwrap_or_else(|| format!("{asset}-r"));
        let now = self.net.now();
        let result: Result<Vec<String>, String> = match kind {
            AssetKind::Authz => self
                .net
                .with_deployment(|d, _, rng| d.recover_authorization_node(asset, &replacement, rng))
                .map(|r| r.steps)
                .map_err(|e| format!("{}|{e}", e.code())),
            AssetKind::Service => self
                .net
                .with_deployment(|d, _, rng| d.recover_service_node(asset, &replacement, now, rng))
                .map(|r| r.steps)
                .map_err(|e| format!("{}|{e}", e.code())),
            AssetKind::Consumer => {
                let res = self.net.with_deployment(|d, _, rng| d.remove_consumer(asset, now, rng));
                match res {
                    Ok(rekey) => {
                        let mut steps = vec![format!("revoked {}", rekey.revoked.join(", "))];
                        steps.push(format!("re-issued {} key(s)", rekey.consumers.len()));
                        self.install_keys(rekey.consumers);
                        Ok(steps)
                    }
                    Err(e) => Err(format!("{}|{e}", e.code())),
                }
            }
            AssetKind::Session => {
                let expiry = self.loot[asset].session.as_ref().map(SessionState::expiry).unwrap_or(now);
                if expiry > now {
                    self.net.advance_clock(expiry - now);
                }
                Ok(vec![format!("waited for expiry at t={expiry}")])
            }
        };
        self.sync_index();
        Ok(match result {
            Ok(steps) => {
                let detail = steps.join("; ");
                self.recovered.insert(asset.to_owned(), (step, steps));
                Ok(detail)
            }
            Err(e) => Err(e),
        })
    }

    fn finish(self) -> ScenarioOutcome {
        let transcript = self.net.transcript();
        let mut reports = Vec::new();

        // Communication surface: what crossed the wire.
        let wire = transcript.wire_bytes();
        let scan = |want: &dyn Fn(&Secret) -> bool| {
            contains_plaintext(&wire, self.secrets.iter().filter(|s| want(s)).map(|s| s.bytes.as_slice()))
        };
        let is_session = |s: &Secret| self.sessions.contains_key(&s.owner);
        let weak = [
            ("mst-plaintext", scan(&|s| is_session(s) && !s.is_key)),
            ("session-key", scan(&|s| is_session(s) && s.is_key)),
            ("resource-plaintext", scan(&|s| !is_session(s))),
            ("undetected-tamper", self.faults.detected < self.faults.injected),
        ];
        for (goal, occurred) in weak {
            reports.push(CompromiseReport {
                asset: "wire".into(),
                goal: goal.into(),
                occurred,
                local: !occurred,
                forward: !occurred,
                online_recoverable: !occurred,
                recovery_steps: Vec::new(),
            });
        }

        // Component surface: one report per compromised asset and goal.
        for (asset, loot) in &self.loot {
            let goals: BTreeSet<&str> = self.attacks.iter().filter(|a| &a.asset == asset).map(|a| a.goal).collect();
            let except = (loot.kind == AssetKind::Session).then_some(asset.as_str());
            let forward = !loot.blobs.iter().any(|b| self.leaks(b, loot.at_step, except));
            let recovery = self.recovered.get(asset);
            for goal in goals {
                let attacks: Vec<&AttackRecord> =
                    self.attacks.iter().filter(|a| &a.asset == asset && a.goal == goal).collect();
                let before: Vec<_> = attacks.iter().filter(|a| !a.after_recovery).collect();
                let after: Vec<_> = attacks.iter().filter(|a| a.after_recovery).collect();
                let occurred = before.iter().any(|a| a.succeeded);
                let local = !before.iter().any(|a| a.succeeded && a.reached_beyond);
                let online_recoverable = match recovery {
                    Some((at, _)) => {
                        let honest_ok = self
                            .outcomes
                            .iter()
                            .filter(|o| o.index > *at && self.scenario.steps[o.index].action.is_honest())
                            .all(StepOutcome::matched);
                        let concurrent = self.concurrent_session_survived(*at);
                        let blocked = !after.is_empty() && after.iter().all(|a| !a.succeeded);
                        honest_ok && concurrent && blocked
                    }
                    None => false,
                };
                reports.push(CompromiseReport {
                    asset: asset.clone(),
                    goal: goal.to_owned(),
                    occurred,
                    local,
                    forward,
                    online_recoverable,
                    recovery_steps: recovery.map(|(_, s)| s.clone()).unwrap_or_default(),
                });
            }
        }

        ScenarioOutcome {
            name: self.scenario.name.clone(),
            transcript,
            steps: self.outcomes,
            reports,
            faults: self.faults,
            snapshots: self.snapshots,
            model: self.model,
        }
    }

    /// Some session opened before step `at` completed an honest routine
    /// after it.
    fn concurrent_session_survived(&self, at: usize) -> bool {
        self.outcomes.iter().any(|o| {
            if o.index <= at || o.actual != "ok" {
                return false;
            }
            let session = match &self.scenario.steps[o.index].action {
                Action::Put { session, .. } | Action::Get { session, .. } | Action::Write { session, .. } => session,
                _ => return false,
            };
            self.sessions.get(session).is_some_and(|s| s.step < at)
        })
    }
}

struct AttackSpec<'a> {
    service: Option<&'a str>,
    authz: Option<&'a str>,
    session: Option<&'a str>,
    id: Option<&'a str>,
    policy: Option<&'a str>,
    attributes: Option<&'a [String]>,
    validity: Option<&'a [String]>,
}

/// Simulated address of a node.
pub fn address(id: &str) -> String {
    format!("{id}.sim")
}
