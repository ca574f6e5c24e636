//! Scripted scenarios run against in-process map servers and a client.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::certmodel::{
    sha256, Authority, CertChain, FailureMode, KeyId, MapServerInfo, RevocationMessage,
    RevocationScope, SigningKey, TrustConfig, TrustStore, TrustTuple, Validity,
};
use crate::certmodel::{Canonical, DomainPolicy};
use crate::client::{
    http_downgrade_check, legacy_accepts, verify_bundles, Client, DowngradeStatus, Verdict,
};
use crate::mapserver::{is_split_view, Auditor, MapItem, MapServer, MapServerConfig};
use crate::merkle::ConsistencyTree;
use crate::naming::{parse_domain, DomainName, NameRealm};
use crate::Cost;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("scenario file: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("step {step}: {msg}")]
    Setup { step: usize, msg: String },
}

fn setup(step: usize, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Setup {
        step,
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaSpec {
    pub name: String,
    /// Issuing CA; absent for a root.
    #[serde(default)]
    pub parent: Option<String>,
    /// Names an intermediate may certify.
    #[serde(default)]
    pub realm: Option<String>,
    /// Realms for which the client highly trusts this CA's root.
    #[serde(default)]
    pub highly_trusted: Vec<String>,
    /// Whether the root is in the client's trust store.
    #[serde(default = "yes")]
    pub trusted: bool,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServerSpec {
    pub name: String,
    /// CAs whose roots the server supports.
    pub supports: Vec<String>,
    /// Whether the client knows this server.
    #[serde(default = "yes")]
    pub trusted: bool,
    #[serde(default = "one")]
    pub cost: i64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    #[serde(default)]
    pub issuers: Option<Vec<String>>,
    #[serde(default)]
    pub subdomains: Option<String>,
    #[serde(default)]
    pub wildcard_forbidden: Option<bool>,
    #[serde(default)]
    pub max_lifetime: Option<u64>,
    /// Applies to every attribute given.
    #[serde(default)]
    pub inherited: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScopeSpec {
    Certificate,
    PolicyOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Tamper {
    None,
    DropItem,
    RewriteHistory,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "action", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Step {
    /// Sets the clock.
    Time { now: u64 },
    Issue {
        id: String,
        ca: String,
        names: Vec<String>,
        #[serde(default)]
        not_before: u64,
        #[serde(default = "default_not_after")]
        not_after: u64,
        #[serde(default)]
        policy: Option<PolicySpec>,
    },
    /// Submits a certificate; by default to every server supporting its root.
    Ingest {
        cert: String,
        #[serde(default)]
        servers: Option<Vec<String>>,
        #[serde(default)]
        expect: Option<Accepted>,
    },
    Revoke {
        cert: String,
        scope: ScopeSpec,
        /// CA name, or `subject` for the certificate's own key. Defaults to
        /// the issuing CA.
        #[serde(default)]
        signer: Option<String>,
        #[serde(default)]
        servers: Option<Vec<String>>,
        #[serde(default)]
        expect: Option<Accepted>,
    },
    Prune {
        #[serde(default)]
        servers: Option<Vec<String>>,
    },
    /// Commits a revision on the listed (default all) servers.
    Commit {
        #[serde(default)]
        servers: Option<Vec<String>>,
    },
    /// TLS connection to `name` presenting `cert`, with bundles from
    /// `servers` (default all).
    Connect {
        name: String,
        cert: String,
        expect: Expect,
        #[serde(default)]
        legacy: Option<Expect>,
        #[serde(default)]
        servers: Option<Vec<String>>,
    },
    /// Plain-HTTP connection to `name`.
    HttpConnect {
        name: String,
        expect: Downgrade,
        #[serde(default)]
        servers: Option<Vec<String>>,
    },
    /// The server signs a second head for its latest revision; a client
    /// comparing heads should notice.
    Equivocate { server: String, expect: Detect },
    /// Audits every revision of a server, tampering with the latest.
    Audit {
        server: String,
        #[serde(default = "no_tamper")]
        tamper: Tamper,
        expect: Detect,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expect {
    Accept,
    Reject,
    Unavailable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Accepted {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Downgrade {
    Flagged,
    Clean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Detect {
    /// No problem reported.
    Pass,
    /// The check reports misbehaviour.
    Detected,
}

fn yes() -> bool {
    true
}
fn one() -> i64 {
    1
}
fn default_not_after() -> u64 {
    1_000_000
}
fn default_quorum() -> usize {
    1
}
fn no_tamper() -> Tamper {
    Tamper::None
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_quorum")]
    pub quorum: usize,
    #[serde(default)]
    pub failure_mode: FailureMode,
    /// Attributes overriding the permissive browser default.
    #[serde(default)]
    pub browser_policy: Option<PolicySpec>,
    #[serde(default)]
    pub ca: Vec<CaSpec>,
    #[serde(default)]
    pub map_server: Vec<ServerSpec>,
    #[serde(default)]
    pub step: Vec<Step>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub step: usize,
    pub what: String,
    pub expected: String,
    pub actual: String,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.expected == self.actual
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioReport {
    pub name: String,
    pub checks: Vec<Check>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }
}

impl fmt::Display for ScenarioReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario {}", self.name)?;
        for c in &self.checks {
            let tag = if c.passed() { "PASS" } else { "FAIL" };
            writeln!(
                f,
                "  [{tag}] step {}: {} expected={} actual={}",
                c.step, c.what, c.expected, c.actual
            )?;
        }
        let n = self.checks.iter().filter(|c| c.passed()).count();
        write!(f, "{}/{} checks passed", n, self.checks.len())
    }
}

fn verdict_str(v: &Verdict) -> &'static str {
    match v {
        Verdict::Accept => "accept",
        Verdict::Reject => "reject",
        Verdict::Unavailable(_) => "unavailable",
    }
}

fn expect_str(e: Expect) -> &'static str {
    match e {
        Expect::Accept => "accept",
        Expect::Reject => "reject",
        Expect::Unavailable => "unavailable",
    }
}

fn detect_str(d: Detect) -> &'static str {
    match d {
        Detect::Pass => "pass",
        Detect::Detected => "detected",
    }
}

fn accepted_str(ok: bool) -> &'static str {
    if ok {
        "accepted"
    } else {
        "rejected"
    }
}

struct World {
    seed: u64,
    now: u64,
    cas: BTreeMap<String, Authority>,
    servers: BTreeMap<String, MapServer>,
    certs: BTreeMap<String, (CertChain, String, SigningKey)>,
    client: Client,
}

impl World {
    fn build(s: &Scenario) -> Result<World, ScenarioError> {
        let validity = Validity::new(0, u64::MAX / 2);
        let mut cas: BTreeMap<String, Authority> = BTreeMap::new();
        let mut pending: Vec<&CaSpec> = s.ca.iter().collect();
        // Parents may be declared after their children.
        while !pending.is_empty() {
            let before = pending.len();
            let mut rest = Vec::new();
            for c in pending {
                if cas.contains_key(&c.name) {
                    return Err(setup(0, format!("duplicate CA {}", c.name)));
                }
                let key = SigningKey::derive(s.seed, &format!("ca/{}", c.name));
                match &c.parent {
                    None => {
                        cas.insert(c.name.clone(), Authority::root(key, validity));
                    }
                    Some(p) => match cas.get(p) {
                        Some(parent) => {
                            let realm = match &c.realm {
                                Some(r) => r
                                    .parse::<NameRealm>()
                                    .map_err(|e| setup(0, format!("realm {r}: {e}")))?,
                                None => NameRealm::All,
                            };
                            let a = parent.intermediate(key, realm, validity);
                            cas.insert(c.name.clone(), a);
                        }
                        None => rest.push(c),
                    },
                }
            }
            if rest.len() == before {
                return Err(setup(0, format!("unknown parent CA for {}", rest[0].name)));
            }
            pending = rest;
        }

        let root_of = |name: &str| -> Result<KeyId, ScenarioError> {
            cas.get(name)
                .map(Authority::root_key_id)
                .ok_or_else(|| setup(0, format!("unknown CA {name}")))
        };

        let mut servers = BTreeMap::new();
        let mut infos = Vec::new();
        for m in &s.map_server {
            let supported: BTreeSet<KeyId> = m
                .supports
                .iter()
                .map(|c| root_of(c))
                .collect::<Result<_, _>>()?;
            let key = SigningKey::derive(s.seed, &format!("server/{}", m.name));
            if m.trusted {
                infos.push(MapServerInfo {
                    id: m.name.clone(),
                    key: key.public(),
                    supported: supported.clone(),
                    cost: Cost::from_integer(m.cost),
                    address: None,
                });
            }
            let config = MapServerConfig::new(m.name.clone(), supported);
            if servers
                .insert(m.name.clone(), MapServer::new(config, key))
                .is_some()
            {
                return Err(setup(0, format!("duplicate map server {}", m.name)));
            }
        }

        let roots =
            s.ca.iter()
                .filter(|c| c.parent.is_none() && c.trusted)
                .map(|c| cas[&c.name].cert.clone());
        let mut config = TrustConfig::new(TrustStore::new(roots));
        config.quorum = s.quorum;
        config.failure_mode = s.failure_mode;
        let known: BTreeSet<String> = infos.iter().map(|m| m.id.clone()).collect();
        config.tuples.push(TrustTuple {
            names: NameRealm::All,
            highly_trusted: BTreeSet::new(),
            map_servers: known.clone(),
        });
        for c in &s.ca {
            for r in &c.highly_trusted {
                let names = r
                    .parse::<NameRealm>()
                    .map_err(|e| setup(0, format!("realm {r}: {e}")))?;
                config.tuples.push(TrustTuple {
                    names,
                    highly_trusted: [root_of(&c.name)?].into(),
                    map_servers: known.clone(),
                });
            }
        }
        config.map_servers = infos;

        let mut w = World {
            seed: s.seed,
            now: 0,
            cas,
            servers,
            certs: BTreeMap::new(),
            client: Client::new(config),
        };
        if let Some(p) = &s.browser_policy {
            let over = w.policy(0, p)?;
            let bp = &mut w.client.config.browser_policy;
            if over.issuers.is_some() {
                bp.issuers = over.issuers;
            }
            if over.subdomains.is_some() {
                bp.subdomains = over.subdomains;
            }
            if over.wildcard_forbidden.is_some() {
                bp.wildcard_forbidden = over.wildcard_forbidden;
            }
            if over.max_lifetime.is_some() {
                bp.max_lifetime = over.max_lifetime;
            }
        }
        Ok(w)
    }

    fn server_names(
        &self,
        step: usize,
        sel: &Option<Vec<String>>,
    ) -> Result<Vec<String>, ScenarioError> {
        match sel {
            None => Ok(self.servers.keys().cloned().collect()),
            Some(v) => {
                for s in v {
                    if !self.servers.contains_key(s) {
                        return Err(setup(step, format!("unknown map server {s}")));
                    }
                }
                Ok(v.clone())
            }
        }
    }

    fn cert(
        &self,
        step: usize,
        id: &str,
    ) -> Result<&(CertChain, String, SigningKey), ScenarioError> {
        self.certs
            .get(id)
            .ok_or_else(|| setup(step, format!("unknown certificate {id}")))
    }

    fn name(step: usize, s: &str) -> Result<DomainName, ScenarioError> {
        parse_domain(s).map_err(|e| setup(step, format!("name {s}: {e}")))
    }

    fn policy(&self, step: usize, p: &PolicySpec) -> Result<DomainPolicy, ScenarioError> {
        let mut out = DomainPolicy::default();
        if let Some(iss) = &p.issuers {
            let ids = iss
                .iter()
                .map(|c| {
                    self.cas
                        .get(c)
                        .map(Authority::root_key_id)
                        .ok_or_else(|| setup(step, format!("unknown CA {c}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            out = out.with_issuers(ids, p.inherited);
        }
        if let Some(r) = &p.subdomains {
            let realm = r
                .parse::<NameRealm>()
                .map_err(|e| setup(step, format!("realm {r}: {e}")))?;
            out = out.with_subdomains(realm, p.inherited);
        }
        if let Some(w) = p.wildcard_forbidden {
            out = out.with_wildcard_forbidden(w, p.inherited);
        }
        if let Some(l) = p.max_lifetime {
            out = out.with_max_lifetime(l, p.inherited);
        }
        Ok(out)
    }

    fn submit(
        &mut self,
        step: usize,
        servers: &Option<Vec<String>>,
        root: KeyId,
        item: MapItem,
    ) -> Result<bool, ScenarioError> {
        let targets: Vec<String> = match servers {
            Some(_) => self.server_names(step, servers)?,
            None => self
                .servers
                .iter()
                .filter(|(_, s)| s.config().supported.contains(&root))
                .map(|(n, _)| n.clone())
                .collect(),
        };
        let mut all_ok = !targets.is_empty();
        for t in targets {
            let s = self.servers.get_mut(&t).expect("checked");
            all_ok &= s.ingest(item.clone()).is_ok();
        }
        Ok(all_ok)
    }

    fn bundles(
        &self,
        step: usize,
        name: &DomainName,
        sel: &Option<Vec<String>>,
    ) -> Result<Vec<crate::mapserver::DomainProofBundle>, ScenarioError> {
        Ok(self
            .server_names(step, sel)?
            .iter()
            .filter_map(|s| self.servers[s].lookup(name).ok())
            .collect())
    }
}

/// Executes the scenario and compares every expectation.
pub fn run_scenario(s: &Scenario) -> Result<ScenarioReport, ScenarioError> {
    let mut w = World::build(s)?;
    let mut checks = Vec::new();
    for (i, st) in s.step.iter().enumerate() {
        let step = i + 1;
        match st {
            Step::Time { now } => w.now = *now,
            Step::Issue {
                id,
                ca,
                names,
                not_before,
                not_after,
                policy,
            } => {
                let names = names
                    .iter()
                    .map(|n| World::name(step, n))
                    .collect::<Result<Vec<_>, _>>()?;
                let policy = policy.as_ref().map(|p| w.policy(step, p)).transpose()?;
                let auth = w
                    .cas
                    .get(ca)
                    .ok_or_else(|| setup(step, format!("unknown CA {ca}")))?;
                let subject = SigningKey::derive(w.seed, &format!("cert/{id}"));
                let serial = w.certs.len() as u64 + 1;
                let chain = auth.issue(
                    &names,
                    subject.public(),
                    Validity::new(*not_before, *not_after),
                    policy,
                    serial,
                );
                if w.certs
                    .insert(id.clone(), (chain, ca.clone(), subject))
                    .is_some()
                {
                    return Err(setup(step, format!("duplicate certificate {id}")));
                }
            }
            Step::Ingest {
                cert,
                servers,
                expect,
            } => {
                let (chain, _, _) = w.cert(step, cert)?.clone();
                let root = chain.root_key_id();
                let ok = w.submit(step, servers, root, MapItem::Certificate(chain))?;
                if let Some(e) = expect {
                    checks.push(Check {
                        step,
                        what: format!("ingest {cert}"),
                        expected: accepted_str(*e == Accepted::Accepted).into(),
                        actual: accepted_str(ok).into(),
                    });
                }
            }
            Step::Revoke {
                cert,
                scope,
                signer,
                servers,
                expect,
            } => {
                let (chain, issuer, subject) = w.cert(step, cert)?.clone();
                let key = match signer.as_deref() {
                    Some("subject") => subject,
                    Some(ca) => w
                        .cas
                        .get(ca)
                        .ok_or_else(|| setup(step, format!("unknown CA {ca}")))?
                        .key
                        .clone(),
                    None => w.cas[&issuer].key.clone(),
                };
                let scope = match scope {
                    ScopeSpec::Certificate => RevocationScope::Certificate,
                    ScopeSpec::PolicyOnly => RevocationScope::PolicyOnly,
                };
                let r = RevocationMessage::sign(&chain.leaf, scope, &key);
                let ok = w.submit(step, servers, chain.root_key_id(), MapItem::Revocation(r))?;
                if let Some(e) = expect {
                    checks.push(Check {
                        step,
                        what: format!("revoke {cert}"),
                        expected: accepted_str(*e == Accepted::Accepted).into(),
                        actual: accepted_str(ok).into(),
                    });
                }
            }
            Step::Prune { servers } => {
                let now = w.now;
                for t in w.server_names(step, servers)? {
                    w.servers.get_mut(&t).expect("checked").prune_expired(now);
                }
            }
            Step::Commit { servers } => {
                let now = w.now;
                for t in w.server_names(step, servers)? {
                    w.servers.get_mut(&t).expect("checked").commit(now);
                }
            }
            Step::Connect {
                name,
                cert,
                expect,
                legacy,
                servers,
            } => {
                let n = World::name(step, name)?;
                let chain = w.cert(step, cert)?.0.clone();
                let bundles = w.bundles(step, &n, servers)?;
                let v = w.client.connect(&n, &chain, &bundles, w.now);
                checks.push(Check {
                    step,
                    what: format!("connect {name} with {cert}"),
                    expected: expect_str(*expect).into(),
                    actual: verdict_str(&v).into(),
                });
                if let Some(l) = legacy {
                    let ok = legacy_accepts(&n, &chain, &w.client.config, w.now);
                    checks.push(Check {
                        step,
                        what: format!("legacy connect {name} with {cert}"),
                        expected: expect_str(*l).into(),
                        actual: if ok { "accept" } else { "reject" }.into(),
                    });
                }
            }
            Step::HttpConnect {
                name,
                expect,
                servers,
            } => {
                let n = World::name(step, name)?;
                let bundles = w.bundles(step, &n, servers)?;
                let actual = match verify_bundles(&bundles, &w.client.config, &n) {
                    Err(_) => "unavailable",
                    Ok(data) => match http_downgrade_check(&n, &data, &w.client.config, w.now) {
                        DowngradeStatus::CertificatesExist => "flagged",
                        DowngradeStatus::NoCertificates => "clean",
                    },
                };
                checks.push(Check {
                    step,
                    what: format!("http connect {name}"),
                    expected: match expect {
                        Downgrade::Flagged => "flagged",
                        Downgrade::Clean => "clean",
                    }
                    .into(),
                    actual: actual.into(),
                });
            }
            Step::Equivocate { server, expect } => {
                let s = w
                    .servers
                    .get(server)
                    .ok_or_else(|| setup(step, format!("unknown map server {server}")))?;
                let head = s
                    .latest_head()
                    .ok_or_else(|| setup(step, "equivocation needs a committed revision"))?
                    .clone();
                let forged = s.sign_forged_head(sha256(&[b"forged", &head.root]), w.now);
                let flagged = is_split_view(&head, &forged, &s.public_key());
                checks.push(Check {
                    step,
                    what: format!("split-view check on {server}"),
                    expected: detect_str(*expect).into(),
                    actual: detect_str(if flagged {
                        Detect::Detected
                    } else {
                        Detect::Pass
                    })
                    .into(),
                });
            }
            Step::Audit {
                server,
                tamper,
                expect,
            } => {
                let s = w
                    .servers
                    .get(server)
                    .ok_or_else(|| setup(step, format!("unknown map server {server}")))?;
                let ok = audit_with_tamper(s, *tamper, w.now).map_err(|m| setup(step, m))?;
                checks.push(Check {
                    step,
                    what: format!("audit {server} ({tamper:?})"),
                    expected: detect_str(*expect).into(),
                    actual: detect_str(if ok { Detect::Pass } else { Detect::Detected }).into(),
                });
            }
        }
    }
    Ok(ScenarioReport {
        name: s.name.clone(),
        checks,
    })
}

/// Audits all revisions from genesis; the latest record is tampered with
/// first. Returns whether every revision passed.
pub fn audit_with_tamper(s: &MapServer, tamper: Tamper, now: u64) -> Result<bool, String> {
    let revisions = s.heads().len() as u64;
    if revisions == 0 {
        return Err("audit needs a committed revision".into());
    }
    let mut auditor = Auditor::new(s.config(), s.public_key());
    for r in 0..revisions {
        let mut rec = s.audit_record(r).map_err(|e| e.to_string())?;
        if r + 1 == revisions {
            match tamper {
                Tamper::None => {}
                Tamper::DropItem => {
                    if rec.delta.is_empty() {
                        return Err("drop-item needs a non-empty latest delta".into());
                    }
                    rec.delta.remove(0);
                }
                Tamper::RewriteHistory => {
                    if r == 0 {
                        return Err("rewrite-history needs two revisions".into());
                    }
                    // Same latest head, but the proof comes from a log whose
                    // first head was replaced.
                    let mut fake = ConsistencyTree::new();
                    for (i, h) in s.heads().iter().enumerate() {
                        if i == 0 {
                            let f = s.sign_forged_head(sha256(&[b"rewrite", &h.root]), now);
                            fake.append(f.to_bytes());
                        } else {
                            fake.append(h.to_bytes());
                        }
                    }
                    rec.log_root = fake.root();
                    rec.consistency = fake
                        .prove_consistency(r as usize, r as usize + 1)
                        .expect("sizes within the log");
                }
            }
        }
        if auditor.audit(&rec).is_err() {
            return Ok(false);
        }
    }
    Ok(true)
}
