//! Operator and consumer command line. Every subcommand parses its inputs,
//! calls one library operation and reports the result; no protocol logic
//! lives here.

use std::fs;
use std::io::Write as _;
use std::net::TcpListener;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::rngs::OsRng;
use serde::Deserialize;
use thiserror::Error;

use crate::abe::{Abe, AbePrivateKey, SchemeId, DEFAULT_CHUNK_SIZE};
use crate::client::{fetch_index, AuthArgs, Client, ClientError, ConsumerCredentials, SessionState, TcpConnector};
use crate::harness::{run_scenario, Scenario, ScenarioError};
use crate::nodes::server::{serve_tcp, unix_now, DeploymentService};
use crate::nodes::{write_secret, Deployment, ErrorCode, InitConfig, NodeError, NodeRole, ProtocolParams, PublicIndex, Rekey};
use crate::policy::{self, AttributeSet};
use crate::suite::{CryptoSuite, SuiteId};

pub const ENV_CONFIG: &str = "CPABE_DSS_CONFIG";
pub const ENV_REGISTRY: &str = "CPABE_DSS_REGISTRY";
pub const ENV_CREDENTIALS: &str = "CPABE_DSS_CREDENTIALS";
pub const ENV_SESSION: &str = "CPABE_DSS_SESSION";

/// Directory under the registry where re-issued consumer keys are left.
pub const OUTBOX_DIR: &str = "outbox";

/// Process exit codes, one per error class.
pub mod exit {
    pub const OK: u8 = 0;
    pub const FAILURE: u8 = 1;
    pub const USAGE: u8 = 2;
    pub const IO: u8 = 3;
    pub const CONNECTION: u8 = 4;
    pub const AUTH_FAILED: u8 = 5;
    pub const SESSION_REJECTED: u8 = 6;
    pub const ACCESS_DENIED: u8 = 7;
    pub const RESOURCE: u8 = 8;
    pub const SCENARIO_MISMATCH: u8 = 9;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("authentication failed: {0}")]
    AuthFailed(ClientError),
    #[error(transparent)]
    Client(#[from] ClientError),
    #[error(transparent)]
    Node(#[from] NodeError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("scenario {0} did not meet its expectations")]
    ScenarioMismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Usage(_) => exit::USAGE,
            Self::Io(_) | Self::Node(NodeError::Io(_)) => exit::IO,
            Self::AuthFailed(_) => exit::AUTH_FAILED,
            Self::Client(e) => client_code(e),
            Self::Node(e) => code_class(e.code()).unwrap_or(exit::FAILURE),
            Self::Scenario(ScenarioError::Io(_)) => exit::IO,
            Self::Scenario(_) => exit::USAGE,
            Self::ScenarioMismatch(_) => exit::SCENARIO_MISMATCH,
        }
    }
}

fn code_class(code: ErrorCode) -> Option<u8> {
    use ErrorCode::*;
    Some(match code {
        NothingAuthorizable | TooFewValidity | NotValidity | BadTtl => exit::AUTH_FAILED,
        UnknownIssuer | BadSignature | SealOpenFailed | SealedMismatch | Expired => exit::SESSION_REJECTED,
        PolicyUnsatisfied | BadOwnerSignature => exit::ACCESS_DENIED,
        NoSuchResource | RangeOutOfBounds | DuplicateResource | VersionConflict | PolicyChange | InvalidResourceId => {
            exit::RESOURCE
        }
        Malformed | UnsupportedRequest | Internal => return None,
    })
}

fn client_code(e: &ClientError) -> u8 {
    match e {
        ClientError::Channel(_) => exit::CONNECTION,
        ClientError::Remote { code, .. } => code_class(*code).unwrap_or(exit::FAILURE),
        ClientError::KeyRecovery(_) => exit::AUTH_FAILED,
        ClientError::PolicyUnsatisfied => exit::ACCESS_DENIED,
        ClientError::RangeOutOfBounds { .. } => exit::RESOURCE,
        ClientError::Node(n) => code_class(n.code()).unwrap_or(exit::FAILURE),
        _ => exit::FAILURE,
    }
}

/// Optional settings file; flags and environment variables override it.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CliConfig {
    /// System directory, or host:port of any node.
    pub registry: Option<String>,
    pub credentials: Option<PathBuf>,
    pub session: Option<PathBuf>,
    pub suite: Option<SuiteId>,
    #[serde(default)]
    pub node: NodeConfig,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub role: Option<RoleArg>,
    pub id: Option<String>,
    pub listen: Option<String>,
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}

#[derive(Debug, Parser)]
#[command(name = "cpabe-dss", version, about = "Attribute-based access control for distributed storage")]
pub struct Cli {
    /// Settings file (TOML).
    #[arg(long, global = true, env = ENV_CONFIG)]
    pub config: Option<PathBuf>,
    /// System directory, or host:port of any node for consumer commands.
    #[arg(long, global = true, env = ENV_REGISTRY)]
    pub registry: Option<String>,
    /// Channel suite used to reach a remote registry.
    #[arg(long, global = true)]
    pub suite: Option<SuiteId>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a new system in the registry directory.
    Init(InitArgs),
    /// Run a node daemon.
    #[command(subcommand)]
    Node(NodeCommand),
    /// Operator actions on the system directory.
    #[command(subcommand)]
    Admin(AdminCommand),
    /// The four routines, plus enrollment.
    #[command(subcommand)]
    Consumer(ConsumerCommand),
    /// Simulated network scenarios.
    #[command(subcommand)]
    Sim(SimCommand),
}

#[derive(Debug, Args)]
pub struct InitArgs {
    #[arg(long, default_value = "waters08")]
    pub scheme: SchemeId,
    #[arg(long, default_value = "paper-default-v1")]
    pub suite_id: SuiteId,
    #[arg(long, default_value_t = 128)]
    pub security_bits: u16,
    /// Generic attribute names, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub generic: Vec<String>,
    /// Number of validity attributes.
    #[arg(long, default_value_t = 4)]
    pub x: u32,
    /// Validity attributes a consumer must advertise.
    #[arg(long, default_value_t = 2)]
    pub u: u32,
    /// Longest session, in seconds.
    #[arg(long, default_value_t = 3600)]
    pub ttl_max: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RoleArg {
    Authority,
    Authz,
    Service,
}

#[derive(Debug, Subcommand)]
pub enum NodeCommand {
    /// Serve one node over TCP until killed.
    Run {
        #[arg(long)]
        role: Option<RoleArg>,
        /// Node id; not used by the authority.
        #[arg(long)]
        id: Option<String>,
        /// Listen address; defaults to the node's registered address.
        #[arg(long)]
        listen: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum AdminCommand {
    /// Register a new authorization or service node.
    Provision {
        #[arg(long)]
        role: RoleArg,
        #[arg(long)]
        id: String,
        #[arg(long)]
        address: String,
        /// Responsibility of an authorization node, comma separated.
        #[arg(long, value_delimiter = ',')]
        scope: Vec<String>,
    },
    /// Revoke one validity attribute and re-key its holders.
    RevokeValidity { attribute: String },
    /// Remove a consumer by revoking enough of its validity attributes.
    RemoveConsumer { id: String },
    /// Replace a compromised authorization or service node.
    RecoverNode {
        id: String,
        /// Id of the replacement; defaults to `<id>-r`.
        #[arg(long)]
        replacement: Option<String>,
    },
    /// Print the public index.
    ListIndex {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Args)]
pub struct ConsumerFiles {
    /// Credentials file.
    #[arg(long, env = ENV_CREDENTIALS)]
    pub cred: Option<PathBuf>,
    /// Session file (K' and MST' only).
    #[arg(long, env = ENV_SESSION)]
    pub session: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ConsumerCommand {
    /// Enroll a consumer and write its credentials file (operator side).
    Enroll {
        #[arg(long)]
        id: String,
        #[arg(long, value_delimiter = ',')]
        attributes: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        validity: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Install a re-issued key into the credentials file.
    InstallKey {
        #[command(flatten)]
        files: ConsumerFiles,
        #[arg(long)]
        key: PathBuf,
    },
    /// Attribute-Authenticate and store the session.
    Auth {
        #[command(flatten)]
        files: ConsumerFiles,
        /// Authorization node id or address.
        #[arg(long)]
        authz: String,
        /// Service node id or address the session is for.
        #[arg(long)]
        service: String,
        #[arg(long)]
        ttl: Option<i64>,
        /// Generic attributes to advertise; defaults to all held.
        #[arg(long, value_delimiter = ',')]
        attributes: Option<Vec<String>>,
        /// Validity attributes to advertise; defaults to all held.
        #[arg(long, value_delimiter = ',')]
        validity: Option<Vec<String>>,
    },
    /// Encrypt a file under a policy and store it.
    Put {
        #[command(flatten)]
        files: ConsumerFiles,
        #[arg(long)]
        id: String,
        #[arg(long)]
        policy: String,
        #[arg(long)]
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CHUNK_SIZE)]
        chunk_size: u32,
    },
    /// Fetch and decrypt a resource or a byte range of it.
    Get {
        #[command(flatten)]
        files: ConsumerFiles,
        #[arg(long)]
        id: String,
        /// Byte range `start..end`.
        #[arg(long, value_parser = parse_range)]
        range: Option<Range<u64>>,
        /// Output file; standard output if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Overwrite bytes of a resource in place.
    Write {
        #[command(flatten)]
        files: ConsumerFiles,
        #[arg(long)]
        id: String,
        #[arg(long)]
        offset: u64,
        #[arg(long)]
        file: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum SimCommand {
    /// Run a scenario script in the simulated network.
    Run {
        scenario: PathBuf,
        /// Also write the transcript dump here.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
}

fn parse_range(s: &str) -> Result<Range<u64>, String> {
    let (a, b) = s.split_once("..").ok_or("expected start..end")?;
    let start = a.trim().parse::<u64>().map_err(|e| e.to_string())?;
    let end = b.trim().parse::<u64>().map_err(|e| e.to_string())?;
    if end < start {
        return Err("end before start".into());
    }
    Ok(start..end)
}

/// Entry point for the binary.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

/// Settings after merging flags, environment and the config file.
struct Resolved {
    config: CliConfig,
    registry: Option<String>,
    suite: SuiteId,
}

impl Resolved {
    fn registry(&self) -> Result<&str, CliError> {
        self.registry.as_deref().ok_or_else(|| {
            CliError::Usage(format!(
                "no registry: pass --registry, set {ENV_REGISTRY}, or add `registry = \"...\"` to the config file"
            ))
        })
    }

    fn registry_dir(&self) -> Result<PathBuf, CliError> {
        Ok(PathBuf::from(self.registry()?))
    }

    fn open(&self) -> Result<Deployment, CliError> {
        let dir = self.registry_dir()?;
        if !dir.join("system.toml").exists() {
            return Err(CliError::Usage(format!(
                "{} holds no system: run `cpabe-dss init` there first",
                dir.display()
            )));
        }
        Ok(Deployment::open(&dir)?)
    }

    /// A local system directory is read directly; anything else is a node
    /// address asked for an index snapshot.
    fn index(&self) -> Result<PublicIndex, CliError> {
        let reg = self.registry()?;
        let dir = Path::new(reg);
        if dir.is_dir() {
            return Ok(PublicIndex::open(&dir.join("index.jsonl"))?);
        }
        let mut conn = connector();
        Ok(fetch_index(&mut conn, CryptoSuite::by_id(self.suite), reg, &mut OsRng)?)
    }

    fn cred_path(&self, files: &ConsumerFiles) -> Result<PathBuf, CliError> {
        files.cred.clone().or_else(|| self.config.credentials.clone()).ok_or_else(|| {
            CliError::Usage(format!(
                "no credentials file: pass --cred, set {ENV_CREDENTIALS}, or add `credentials = \"...\"` to the config file"
            ))
        })
    }

    fn session_path(&self, files: &ConsumerFiles) -> Result<PathBuf, CliError> {
        files.session.clone().or_else(|| self.config.session.clone()).ok_or_else(|| {
            CliError::Usage(format!(
                "no session file: pass --session, set {ENV_SESSION}, or add `session = \"...\"` to the config file"
            ))
        })
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(p) => CliConfig::load(p)?,
        None => CliConfig::default(),
    };
    let r = Resolved {
        registry: cli.registry.clone().or_else(|| config.registry.clone()),
        suite: cli.suite.or(config.suite).unwrap_or(SuiteId::PaperDefault),
        config,
    };
    match cli.command {
        Command::Init(a) => init(&r, a),
        Command::Node(NodeCommand::Run { role, id, listen }) => node_run(&r, role, id, listen),
        Command::Admin(a) => admin(&r, a),
        Command::Consumer(c) => consumer(&r, c),
        Command::Sim(SimCommand::Run { scenario, transcript }) => sim_run(&scenario, transcript.as_deref()),
    }
}

fn init(r: &Resolved, a: InitArgs) -> Result<(), CliError> {
    let dir = r.registry_dir()?;
    let d = Deployment::create(
        &dir,
        Abe::for_scheme(a.scheme),
        CryptoSuite::by_id(a.suite_id),
        InitConfig {
            security_bits: a.security_bits,
            generic: a.generic,
        },
        ProtocolParams {
            x: a.x,
            u: a.u,
            ttl_max: a.ttl_max,
        },
        &mut OsRng,
    )?;
    println!(
        "initialized {} ({}, {}), index version {}",
        dir.display(),
        a.scheme,
        a.suite_id,
        d.index().version()
    );
    Ok(())
}

fn node_run(r: &Resolved, role: Option<RoleArg>, id: Option<String>, listen: Option<String>) -> Result<(), CliError> {
    let cfg = &r.config.node;
    let role = role
        .or(cfg.role)
        .ok_or_else(|| CliError::Usage("no role: pass --role or set [node] role in the config file".into()))?;
    let id = id.or_else(|| cfg.id.clone());
    let d = r.open()?;
    let suite = *d.suite();
    let (service, default_addr) = match role {
        RoleArg::Authority => (DeploymentService::registry(d), None),
        RoleArg::Authz | RoleArg::Service => {
            let id = id.ok_or_else(|| CliError::Usage("no node id: pass --id or set [node] id".into()))?;
            let want = if role == RoleArg::Authz { NodeRole::Authorization } else { NodeRole::Service };
            let entry = d
                .index()
                .node(&id)
                .filter(|n| n.role == want && !n.blacklisted)
                .ok_or_else(|| CliError::Usage(format!("{id:?} is not a live {} node", want.as_str())))?;
            let addr = entry.address.clone();
            (DeploymentService::node(d, &id)?, Some(addr))
        }
    };
    let listen = listen
        .or_else(|| cfg.listen.clone())
        .or(default_addr)
        .ok_or_else(|| CliError::Usage("no listen address: pass --listen".into()))?;
    let listener = TcpListener::bind(&listen).map_err(|e| CliError::Io(format!("bind {listen}: {e}")))?;
    let local = listener.local_addr().map_err(|e| CliError::Io(e.to_string()))?;
    println!("listening on {local}");
    let _ = std::io::stdout().flush();
    serve_tcp(listener, suite, Arc::new(Mutex::new(service))).map_err(|e| CliError::Io(e.to_string()))
}

fn set(names: &[String]) -> AttributeSet {
    names.iter().map(String::as_str).collect()
}

/// Leaves each consumer's re-issued key in the outbox.
fn deliver(dir: &Path, rekey: &Rekey) -> Result<(), CliError> {
    let out = dir.join(OUTBOX_DIR);
    fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    for (id, key) in &rekey.consumers {
        let path = out.join(format!("{id}.key"));
        write_secret(&path, &key.to_bytes())?;
        println!("re-issued key for {id}: {}", path.display());
    }
    for id in rekey.service_nodes.keys() {
        println!("re-keyed service node {id}");
    }
    Ok(())
}

fn admin(r: &Resolved, a: AdminCommand) -> Result<(), CliError> {
    let mut d = r.open()?;
    match a {
        AdminCommand::Provision { role, id, address, scope } => {
            match role {
                RoleArg::Authz => {
                    d.provision_authorization_node(&id, &address, &set(&scope), &mut OsRng)?;
                }
                RoleArg::Service => {
                    d.provision_service_node(&id, &address, &mut OsRng)?;
                }
                RoleArg::Authority => d.add_authority()?,
            }
            println!("provisioned {id} at {address}, index version {}", d.index().version());
        }
        AdminCommand::RevokeValidity { attribute } => {
            let rekey = d.revoke_validity_attribute(&attribute, unix_now(), &mut OsRng)?;
            println!("revoked {attribute}, index version {}", d.index().version());
            deliver(&r.registry_dir()?, &rekey)?;
        }
        AdminCommand::RemoveConsumer { id } => {
            let rekey = d.remove_consumer(&id, unix_now(), &mut OsRng)?;
            println!("removed {id}; revoked {}", rekey.revoked.join(", "));
            deliver(&r.registry_dir()?, &rekey)?;
        }
        AdminCommand::RecoverNode { id, replacement } => {
            let replacement = replacement.unwrap_or_else(|| format!("{id}-r"));
            let role = d.index().node(&id).map(|n| n.role);
            let report = match role {
                Some(NodeRole::Authorization) => d.recover_authorization_node(&id, &replacement, &mut OsRng)?,
                Some(NodeRole::Service) => d.recover_service_node(&id, &replacement, unix_now(), &mut OsRng)?,
                _ => return Err(CliError::Usage(format!("{id:?} is not a registered node"))),
            };
            for s in &report.steps {
                println!("{s}");
            }
        }
        AdminCommand::ListIndex { json } => {
            let ix = d.index();
            if json {
                println!("{}", ix.to_json());
            } else {
                println!("version {} suite {} scheme {}", ix.version(), ix.suite(), ix.pk().scheme());
                let p = ix.params();
                println!("x {} u {} ttl_max {}", p.x, p.u, p.ttl_max);
                for n in ix.nodes() {
                    println!(
                        "{:<12} {:<14} {:<22} {}{}",
                        n.id,
                        n.role.as_str(),
                        n.address,
                        n.responsibility,
                        if n.blacklisted { " blacklisted" } else { "" }
                    );
                }
            }
        }
    }
    Ok(())
}

fn connector() -> TcpConnector {
    TcpConnector {
        timeout: Some(Duration::from_secs(30)),
    }
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_creds(path: &Path) -> Result<ConsumerCredentials, CliError> {
    if !path.exists() {
        return Err(CliError::Usage(format!(
            "no credentials at {}: ask the operator to run `consumer enroll`",
            path.display()
        )));
    }
    ConsumerCredentials::from_bytes(&read(path)?).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Registered node address for an id; anything else is taken as an address.
fn resolve(index: &PublicIndex, name: &str) -> String {
    index.node(name).map(|n| n.address.clone()).unwrap_or_else(|| name.to_owned())
}

struct Consumer {
    client: Client<TcpConnector>,
    session_path: PathBuf,
}

impl Consumer {
    fn open(r: &Resolved, files: &ConsumerFiles) -> Result<Self, CliError> {
        let creds = load_creds(&r.cred_path(files)?)?;
        let index = r.index()?;
        let abe = Abe::for_scheme(index.pk().scheme());
        Ok(Self {
            client: Client::new(abe, index, creds, connector()),
            session_path: r.session_path(files)?,
        })
    }

    fn session(&self) -> Result<SessionState, CliError> {
        if !self.session_path.exists() {
            return Err(CliError::Usage(format!(
                "no session at {}: run `consumer auth` first",
                self.session_path.display()
            )));
        }
        let buf = read(&self.session_path)?;
        let index = self.client.index();
        let suite = CryptoSuite::by_id(index.suite());
        let abe = Abe::for_scheme(index.pk().scheme());
        Ok(SessionState::from_bytes(&buf, &abe, index, &suite, self.client.credentials())?)
    }
}

fn consumer(r: &Resolved, c: ConsumerCommand) -> Result<(), CliError> {
    match c {
        ConsumerCommand::Enroll {
            id,
            attributes,
            validity,
            out,
        } => {
            let mut d = r.open()?;
            let creds = d.enroll_consumer(&id, &set(&attributes), &set(&validity), &mut OsRng)?;
            write_secret(&out, &creds.to_bytes())?;
            println!("enrolled {id}: {}", out.display());
        }
        ConsumerCommand::InstallKey { files, key } => {
            let path = r.cred_path(&files)?;
            let mut creds = load_creds(&path)?;
            let key = AbePrivateKey::from_bytes(&read(&key)?).map_err(|e| CliError::Io(format!("{}: {e}", key.display())))?;
            creds.install_key(key)?;
            write_secret(&path, &creds.to_bytes())?;
            println!("installed re-issued key for {}", creds.id);
        }
        ConsumerCommand::Auth {
            files,
            authz,
            service,
            ttl,
            attributes,
            validity,
        } => {
            let mut c = Consumer::open(r, &files)?;
            let index = c.client.index();
            let creds = c.client.credentials();
            let args = AuthArgs {
                attributes: attributes.as_deref().map(set).unwrap_or_else(|| creds.attributes()),
                validity: validity.as_deref().map(set).unwrap_or_else(|| creds.validity.clone()),
                ttl: ttl.unwrap_or(index.params().ttl_max as i64),
            };
            let (authz, service) = (resolve(index, &authz), resolve(index, &service));
            let state = c
                .client
                .authenticate(&args, &authz, &service, &mut OsRng)
                .map_err(|e| match e {
                    e @ ClientError::Channel(_) => CliError::Client(e),
                    e => CliError::AuthFailed(e),
                })?;
            write_secret(&c.session_path, &state.to_bytes())?;
            println!(
                "session for {service}: A'={} expires {}",
                state.authorized(),
                state.expiry()
            );
        }
        ConsumerCommand::Put {
            files,
            id,
            policy,
            file,
            chunk_size,
        } => {
            let policy = policy::parse(&policy).map_err(|e| CliError::Usage(format!("policy: {e}")))?;
            let data = read(&file)?;
            let mut c = Consumer::open(r, &files)?;
            let mut s = c.session()?;
            let mut client = c.client.with_chunk_size(chunk_size);
            let v = client.put(&mut s, &id, &policy, &data, &mut OsRng)?;
            println!("stored {id} ({} bytes) version {v}", data.len());
            c.client = client;
        }
        ConsumerCommand::Get { files, id, range, out } => {
            let mut c = Consumer::open(r, &files)?;
            let mut s = c.session()?;
            let data = c.client.get(&mut s, &id, range, &mut OsRng)?;
            match out {
                Some(p) => fs::write(&p, &data).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
                None => std::io::stdout()
                    .write_all(&data)
                    .map_err(|e| CliError::Io(e.to_string()))?,
            }
        }
        ConsumerCommand::Write { files, id, offset, file } => {
            let data = read(&file)?;
            let mut c = Consumer::open(r, &files)?;
            let mut s = c.session()?;
            let v = c.client.write(&mut s, &id, offset, &data, &mut OsRng)?;
            println!("wrote {} bytes at {offset} of {id}, version {v}", data.len());
        }
    }
    Ok(())
}

fn sim_run(path: &Path, transcript: Option<&Path>) -> Result<(), CliError> {
    let scenario = Scenario::load(path)?;
    let out = run_scenario(&scenario)?;
    print!("{}", out.summary());
    println!(
        "{} frames, transcript digest {}",
        out.transcript.len(),
        hex::encode(out.transcript.digest())
    );
    if let Some(p) = transcript {
        fs::write(p, out.transcript.dump()).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    }
    if !out.passed() {
        return Err(CliError::ScenarioMismatch(out.name));
    }
    Ok(())
}
