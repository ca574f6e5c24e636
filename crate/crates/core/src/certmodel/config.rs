//! The relying party's validation policy ("trust package").

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::cert::{Certificate, TrustStore};
use super::keys::{KeyId, PublicKey};
use super::policy::DomainPolicy;
use super::tlv::Canonical;
use crate::naming::{DomainName, NameRealm, PublicSuffixList, WildcardMode};
use crate::Cost;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("quorum must be at least 1")]
    ZeroQuorum,
    #[error("trust store entry {0}: {1}")]
    TrustStore(usize, String),
    #[error("tuple references unknown map server {0:?}")]
    UnknownServer(String),
    #[error("public suffix rules: {0}")]
    PublicSuffix(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One `⟨names, highly trusted CAs, map servers⟩` line of the policy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrustTuple {
    pub names: NameRealm,
    pub highly_trusted: BTreeSet<KeyId>,
    pub map_servers: BTreeSet<String>,
}

/// What the client knows about a map server.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapServerInfo {
    pub id: String,
    pub key: PublicKey,
    pub supported: BTreeSet<KeyId>,
    pub cost: Cost,
    pub address: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    /// Missing map-server data blocks the connection.
    #[default]
    Hard,
    /// Missing data falls back to cached bundles, then to legacy validation.
    Soft,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustConfig {
    pub tuples: Vec<TrustTuple>,
    pub quorum: usize,
    /// Default policy every resolution starts from; all attributes present.
    pub browser_policy: DomainPolicy,
    pub trust_store: TrustStore,
    pub map_servers: Vec<MapServerInfo>,
    pub failure_mode: FailureMode,
    pub wildcard_mode: WildcardMode,
    /// Splits queried names into e2LD and subdomain levels.
    pub psl: PublicSuffixList,
}

impl TrustConfig {
    pub fn new(trust_store: TrustStore) -> Self {
        TrustConfig {
            tuples: Vec::new(),
            quorum: 1,
            browser_policy: DomainPolicy::permissive(),
            trust_store,
            map_servers: Vec::new(),
            failure_mode: FailureMode::Hard,
            wildcard_mode: WildcardMode::Strict,
            psl: PublicSuffixList::builtin(),
        }
    }

    /// `f(N)`: CAs highly trusted for `name`.
    pub fn highly_trusted(&self, name: &DomainName) -> BTreeSet<KeyId> {
        self.tuples
            .iter()
            .filter(|t| t.names.contains(name))
            .flat_map(|t| t.highly_trusted.iter().copied())
            .collect()
    }

    /// Map servers configured for `name`.
    pub fn servers_for(&self, name: &DomainName) -> Vec<&MapServerInfo> {
        let ids: BTreeSet<&String> = self
            .tuples
            .iter()
            .filter(|t| t.names.contains(name))
            .flat_map(|t| t.map_servers.iter())
            .collect();
        self.map_servers
            .iter()
            .filter(|m| ids.contains(&m.id))
            .collect()
    }

    pub fn server(&self, id: &str) -> Option<&MapServerInfo> {
        self.map_servers.iter().find(|m| m.id == id)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let file: TrustConfigFile = toml::from_str(text)?;
        file.try_into()
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(&TrustConfigFile::from(self)).expect("config serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapServerFile {
    id: String,
    key: PublicKey,
    #[serde(default)]
    supported: BTreeSet<KeyId>,
    #[serde(default = "default_cost")]
    cost: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    address: Option<String>,
}

fn default_cost() -> String {
    "1".into()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrustConfigFile {
    quorum: usize,
    #[serde(default)]
    failure_mode: FailureMode,
    #[serde(default)]
    wildcard_mode: WildcardMode,
    /// Public-suffix rules; the builtin list when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    public_suffixes: Option<Vec<String>>,
    /// Hex-encoded canonical root certificates.
    #[serde(default)]
    trust_store: Vec<String>,
    #[serde(default)]
    browser_policy: DomainPolicy,
    #[serde(default, rename = "tuple")]
    tuples: Vec<TrustTuple>,
    #[serde(default, rename = "map_server")]
    map_servers: Vec<MapServerFile>,
}

impl TryFrom<TrustConfigFile> for TrustConfig {
    type Error = ConfigError;

    fn try_from(f: TrustConfigFile) -> Result<Self, ConfigError> {
        if f.quorum == 0 {
            return Err(ConfigError::ZeroQuorum);
        }
        let mut store = TrustStore::default();
        for (i, h) in f.trust_store.iter().enumerate() {
            let bytes =
                hex::decode(h.trim()).map_err(|e| ConfigError::TrustStore(i, e.to_string()))?;
            let c = Certificate::from_bytes(&bytes)
                .map_err(|e| ConfigError::TrustStore(i, e.to_string()))?;
            store.insert(c);
        }
        // Missing browser attributes default to unrestricted.
        let mut browser_policy = DomainPolicy::permissive();
        let bp = f.browser_policy;
        browser_policy.issuers = bp.issuers.or(browser_policy.issuers);
        browser_policy.subdomains = bp.subdomains.or(browser_policy.subdomains);
        browser_policy.wildcard_forbidden =
            bp.wildcard_forbidden.or(browser_policy.wildcard_forbidden);
        browser_policy.max_lifetime = bp.max_lifetime.or(browser_policy.max_lifetime);

        let psl = match &f.public_suffixes {
            None => PublicSuffixList::builtin(),
            Some(rules) => PublicSuffixList::parse(&rules.join("\n"))
                .map_err(|e| ConfigError::PublicSuffix(e.to_string()))?,
        };
        let mut map_servers = Vec::new();
        for m in f.map_servers {
            let cost: Cost = m.cost.trim().parse().map_err(|_| {
                ConfigError::UnknownServer(format!("{}: bad cost {:?}", m.id, m.cost))
            })?;
            map_servers.push(MapServerInfo {
                id: m.id,
                key: m.key,
                supported: m.supported,
                cost,
                address: m.address,
            });
        }
        for t in &f.tuples {
            for id in &t.map_servers {
                if !map_servers.iter().any(|m| &m.id == id) {
                    return Err(ConfigError::UnknownServer(id.clone()));
                }
            }
        }
        Ok(TrustConfig {
            tuples: f.tuples,
            quorum: f.quorum,
            browser_policy,
            trust_store: store,
            map_servers,
            failure_mode: f.failure_mode,
            wildcard_mode: f.wildcard_mode,
            psl,
        })
    }
}

/// Unrestricted attributes are left out; reading fills them back in. This
/// also keeps the unbounded lifetime out of TOML's signed integers.
fn written_browser_policy(p: &DomainPolicy) -> DomainPolicy {
    let open = DomainPolicy::permissive();
    let mut out = p.clone();
    if out.issuers == open.issuers {
        out.issuers = None;
    }
    if out.subdomains == open.subdomains {
        out.subdomains = None;
    }
    if out.wildcard_forbidden == open.wildcard_forbidden {
        out.wildcard_forbidden = None;
    }
    if out.max_lifetime == open.max_lifetime {
        out.max_lifetime = None;
    }
    out
}

impl From<&TrustConfig> for TrustConfigFile {
    fn from(c: &TrustConfig) -> Self {
        TrustConfigFile {
            quorum: c.quorum,
            failure_mode: c.failure_mode,
            wildcard_mode: c.wildcard_mode,
            public_suffixes: (c.psl.rules() != PublicSuffixList::builtin().rules())
                .then(|| c.psl.rules()),
            trust_store: c
                .trust_store
                .roots()
                .map(|r| hex::encode(r.to_bytes()))
                .collect(),
            browser_policy: written_browser_policy(&c.browser_policy),
            tuples: c.tuples.clone(),
            map_servers: c
                .map_servers
                .iter()
                .map(|m| MapServerFile {
                    id: m.id.clone(),
                    key: m.key,
                    supported: m.supported.clone(),
                    cost: m.cost.to_string(),
                    address: m.address.clone(),
                })
                .collect(),
        }
    }
}
