//! Drives the binary end to end: a persisted mock-scheme system, real node
//! daemons on loopback TCP, and the consumer routines.

use std::io::{BufRead, BufReader};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

const BIN: &str = env!("CARGO_BIN_EXE_cpabe-dss");

struct Daemon(Child);

impl Drop for Daemon {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn free_port() -> String {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    l.local_addr().unwrap().to_string()
}

struct Env {
    _dir: tempfile::TempDir,
    root: PathBuf,
    registry: PathBuf,
}

impl Env {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_owned();
        Self {
            registry: root.join("sys"),
            root,
            _dir: dir,
        }
    }

    fn cmd(&self, args: &[&str]) -> Command {
        let mut c = Command::new(BIN);
        c.args(args)
            .env("CPABE_DSS_REGISTRY", &self.registry)
            .env_remove("CPABE_DSS_CONFIG")
            .env_remove("CPABE_DSS_CREDENTIALS")
            .env_remove("CPABE_DSS_SESSION");
        c
    }

    fn run(&self, args: &[&str]) -> Output {
        self.cmd(args).output().unwrap()
    }

    fn ok(&self, args: &[&str]) -> Output {
        let out = self.run(args);
        assert!(
            out.status.success(),
            "{args:?}: {}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        );
        out
    }

    fn path(&self, name: &str) -> String {
        self.root.join(name).to_string_lossy().into_owned()
    }

    fn daemon(&self, role: &str, id: &str) -> Daemon {
        let mut child = self
            .cmd(&["node", "run", "--role", role, "--id", id])
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .unwrap();
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
        assert!(line.starts_with("listening on"), "{id}: {line:?}");
        Daemon(child)
    }
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn write_file(path: &str, data: &[u8]) {
    std::fs::write(Path::new(path), data).unwrap();
}

#[test]
fn routines_over_tcp() {
    let env = Env::new();
    env.ok(&[
        "init",
        "--scheme",
        "mock",
        "--suite-id",
        "modern-fast-v1",
        "--generic",
        "a1,a2,v-any-ok",
        "--ttl-max",
        "600",
    ]);
    let (an, sn) = (free_port(), free_port());
    env.ok(&["admin", "provision", "--role", "authz", "--id", "an1", "--address", &an, "--scope", "a1,a2,v-any-ok"]);
    env.ok(&["admin", "provision", "--role", "service", "--id", "sn1", "--address", &sn]);
    let (alice, bob) = (env.path("alice.cred"), env.path("bob.cred"));
    let (sa, sb) = (env.path("alice.session"), env.path("bob.session"));
    env.ok(&["consumer", "enroll", "--id", "alice", "--attributes", "a1,v-any-ok", "--validity", "v1,v2", "--out", &alice]);
    env.ok(&["consumer", "enroll", "--id", "bob", "--attributes", "a2", "--validity", "v3,v4", "--out", &bob]);

    let listing = String::from_utf8(env.ok(&["admin", "list-index"]).stdout).unwrap();
    assert!(listing.contains("an1") && listing.contains("sn1"), "{listing}");

    // No session yet: usage error.
    let out = env.run(&["consumer", "get", "--cred", &alice, "--session", &sa, "--id", "f1"]);
    assert_eq!(code(&out), 2);

    let _an = env.daemon("authz", "an1");
    let _sn = env.daemon("service", "sn1");

    let a = |args: &[&str]| {
        let mut v = vec!["consumer", args[0], "--cred", alice.as_str(), "--session", sa.as_str()];
        v.extend_from_slice(&args[1..]);
        v.into_iter().map(str::to_owned).collect::<Vec<_>>()
    };
    let run = |v: Vec<String>| env.run(&v.iter().map(String::as_str).collect::<Vec<_>>());

    let out = run(a(&["auth", "--authz", "an1", "--service", "sn1"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let x: Vec<u8> = (0..200_000u32).map(|i| (i * 7 + i / 251) as u8).collect();
    let xfile = env.path("x.bin");
    write_file(&xfile, &x);
    let out = run(a(&["put", "--id", "f1", "--policy", "a1 and v-any-ok", "--file", &xfile, "--chunk-size", "4096"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let got = env.path("got.bin");
    assert!(run(a(&["get", "--id", "f1", "--out", &got])).status.success());
    assert_eq!(std::fs::read(&got).unwrap(), x);

    let patch = env.path("patch.bin");
    write_file(&patch, b"PATCHED");
    assert!(run(a(&["write", "--id", "f1", "--offset", "5000", "--file", &patch])).status.success());
    let out = run(a(&["get", "--id", "f1", "--range", "4998..5009"]));
    assert!(out.status.success());
    let mut want = x[4998..5000].to_vec();
    want.extend_from_slice(b"PATCHED");
    want.extend_from_slice(&x[5007..5009]);
    assert_eq!(out.stdout, want);

    // Duplicate put and out-of-range get are resource errors.
    assert_eq!(code(&run(a(&["put", "--id", "f1", "--policy", "a1", "--file", &xfile]))), 8);
    assert_eq!(code(&run(a(&["get", "--id", "f1", "--range", "0..999999"]))), 8);

    // Bob authenticates but cannot read alice's resource.
    let b = |args: &[&str]| {
        let mut v = vec!["consumer", args[0], "--cred", bob.as_str(), "--session", sb.as_str()];
        v.extend_from_slice(&args[1..]);
        v.into_iter().map(str::to_owned).collect::<Vec<_>>()
    };
    assert!(run(b(&["auth", "--authz", "an1", "--service", "sn1"])).status.success());
    assert_eq!(code(&run(b(&["get", "--id", "f1"]))), 7);
    assert_eq!(code(&run(b(&["write", "--id", "f1", "--offset", "0", "--file", &patch]))), 7);
    assert_eq!(code(&run(b(&["put", "--id", "g", "--policy", "a1", "--file", &patch]))), 7);
    // Advertising an attribute bob does not hold fails authentication.
    assert_eq!(code(&run(b(&["auth", "--authz", "an1", "--service", "sn1", "--attributes", "a1"]))), 5);

    // Revocation: alice's old key no longer authenticates.
    let out = env.ok(&["admin", "revoke-validity", "v1"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("alice") && !text.contains("bob"), "{text}");
    assert_eq!(code(&run(a(&["auth", "--authz", "an1", "--service", "sn1"]))), 5);
    // Bob is outside v1's partition and keeps working.
    assert!(run(b(&["auth", "--authz", "an1", "--service", "sn1"])).status.success());

    let key = env.registry.join("outbox").join("alice.key");
    let key = key.to_string_lossy();
    assert!(run(a(&["install-key", "--key", &key])).status.success());
    assert!(run(a(&["auth", "--authz", "an1", "--service", "sn1"])).status.success());
    assert!(run(a(&["get", "--id", "f1", "--out", &got])).status.success());
    assert_eq!(std::fs::read(&got).unwrap().len(), x.len());
}

#[test]
fn usage_errors_exit_with_two() {
    let env = Env::new();
    assert_eq!(code(&env.run(&["consumer", "frobnicate"])), 2);
    assert_eq!(code(&env.run(&["admin", "list-index"])), 2);
    let out = env.cmd(&["admin", "list-index"]).env_remove("CPABE_DSS_REGISTRY").output().unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("CPABE_DSS_REGISTRY"));
}

#[test]
fn config_file_supplies_defaults() {
    let env = Env::new();
    let cfg = env.path("cli.toml");
    let other = env.root.join("elsewhere");
    write_file(&cfg, format!("registry = {:?}\n", other.to_string_lossy()).as_bytes());
    let out = Command::new(BIN)
        .args(["--config", &cfg, "init", "--scheme", "mock", "--generic", "a1"])
        .env_remove("CPABE_DSS_REGISTRY")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(other.join("system.toml").exists());
    // The environment overrides the file.
    env.ok(&["--config", &cfg, "init", "--scheme", "mock", "--generic", "a1"]);
    assert!(env.registry.join("system.toml").exists());
}

#[test]
fn sim_run_reports_scenarios() {
    let env = Env::new();
    let script = concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/weak-tamper.toml");
    let out = env.ok(&["sim", "run", script]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("transcript digest"));

    let bad = env.path("bad.toml");
    let body = std::fs::read_to_string(script).unwrap().replace("id = \"f1\"\n\n[[step]]\naction = \"adversary\"", "id = \"f1\"\nexpect = \"expired\"\n\n[[step]]\naction = \"adversary\"");
    write_file(&bad, body.as_bytes());
    assert_eq!(code(&env.run(&["sim", "run", &bad])), 9);
}
