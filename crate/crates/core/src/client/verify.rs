//! Checking proof bundles and collecting what they prove.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::certmodel::{
    Canonical, CertChain, Hash, KeyId, MapServerInfo, RevocationMessage, TrustConfig,
};
use crate::mapserver::DomainProofBundle;
use crate::merkle::{smt_verify, SMT_DEPTH};
use crate::naming::{classify, DomainName, NameClass, PublicSuffixList};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BundleError {
    #[error("bundle is from {found}, expected {expected}")]
    WrongServer { expected: String, found: String },
    #[error("map head signature does not verify")]
    BadSignature,
    #[error("{0} has no map entry level")]
    InvalidName(DomainName),
    #[error("bundle has no levels")]
    Empty,
    #[error("bundle has {found} levels, name has {max}")]
    TooManyLevels { found: usize, max: usize },
    #[error("level {0} proves the wrong key")]
    WrongKey(usize),
    #[error("level {0} entry does not match the proven value")]
    EntryMismatch(usize),
    #[error("level {0} proof does not verify")]
    BadProof(usize),
    #[error("level {0} has a subtree but the next level is missing")]
    Incomplete(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClientError {
    #[error("only {have} of {need} map servers vouch for CA {ca}")]
    QuorumUnmet { ca: KeyId, have: usize, need: usize },
    #[error("{0} cannot be looked up")]
    InvalidName(DomainName),
}

/// Keys of the map levels for `n`: the e2LD, then one label per level.
pub fn level_keys(n: &DomainName, psl: &PublicSuffixList) -> Option<Vec<Vec<u8>>> {
    match classify(&n.base(), psl) {
        NameClass::PublicSuffixOrInvalid => None,
        NameClass::E2ld => Some(vec![n.base().to_string().into_bytes()]),
        NameClass::Subdomain { e2ld, chain } => Some(
            std::iter::once(e2ld.to_string().into_bytes())
                .chain(chain.into_iter().map(String::into_bytes))
                .collect(),
        ),
    }
}

/// Verifies the head signature and the chain of proofs down to `n`.
///
/// The bundle must not stop early: a level whose entry has a subtree root
/// is followed by the next label's level as long as labels remain.
pub fn verify_bundle(
    bundle: &DomainProofBundle,
    server: &MapServerInfo,
    n: &DomainName,
    psl: &PublicSuffixList,
) -> Result<(), BundleError> {
    if bundle.server_id != server.id {
        return Err(BundleError::WrongServer {
            expected: server.id.clone(),
            found: bundle.server_id.clone(),
        });
    }
    if !bundle.smh.verify(&server.key) {
        return Err(BundleError::BadSignature);
    }
    let keys = level_keys(n, psl).ok_or_else(|| BundleError::InvalidName(n.clone()))?;
    if bundle.levels.is_empty() {
        return Err(BundleError::Empty);
    }
    if bundle.levels.len() > keys.len() {
        return Err(BundleError::TooManyLevels {
            found: bundle.levels.len(),
            max: keys.len(),
        });
    }
    let mut root: Hash = bundle.smh.root;
    for (k, level) in bundle.levels.iter().enumerate() {
        if level.proof.key != keys[k] || level.proof.depth != SMT_DEPTH {
            return Err(BundleError::WrongKey(k));
        }
        if level.entry.as_ref().map(Canonical::to_bytes) != level.proof.leaf_value {
            return Err(BundleError::EntryMismatch(k));
        }
        if !smt_verify(&level.proof, &root, bundle.smh.nonce.as_ref()) {
            return Err(BundleError::BadProof(k));
        }
        let sub = level.entry.as_ref().and_then(|e| e.subtree_root);
        let last = k + 1 == bundle.levels.len();
        match (sub, last) {
            (Some(_), true) if k + 1 < keys.len() => return Err(BundleError::Incomplete(k)),
            (Some(r), false) => root = r,
            (None, false) => {
                return Err(BundleError::TooManyLevels {
                    found: bundle.levels.len(),
                    max: k + 1,
                })
            }
            _ => {}
        }
    }
    Ok(())
}

/// Certificates and revocations proven by verifying bundles.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerifiedData {
    /// `C_list`: certificates stored for `n` and its parent domains.
    pub certs: BTreeMap<Hash, CertChain>,
    /// `R`: revocations keyed by the hash of the certificate they target.
    pub revocations: BTreeMap<Hash, Vec<RevocationMessage>>,
    /// Servers whose bundles verified.
    pub servers: BTreeSet<String>,
}

impl VerifiedData {
    pub fn add_bundle(&mut self, b: &DomainProofBundle) {
        for e in b.entries() {
            for c in e.certificates() {
                self.certs.insert(c.hash(), c.clone());
            }
            for r in e.revocations() {
                let v = self.revocations.entry(r.cert_hash).or_default();
                if !v.contains(r) {
                    v.push(r.clone());
                }
            }
        }
        self.servers.insert(b.server_id.clone());
    }

    pub fn revocations_for(&self, h: &Hash) -> &[RevocationMessage] {
        self.revocations.get(h).map_or(&[], Vec::as_slice)
    }
}

/// Verifies every bundle, drops the invalid ones, enforces the quorum for
/// each CA in `f(n)` and unions the rest.
pub fn verify_bundles(
    bundles: &[DomainProofBundle],
    config: &TrustConfig,
    n: &DomainName,
) -> Result<VerifiedData, ClientError> {
    if level_keys(n, &config.psl).is_none() {
        return Err(ClientError::InvalidName(n.clone()));
    }
    let mut data = VerifiedData::default();
    let mut good: Vec<&MapServerInfo> = Vec::new();
    for b in bundles {
        if data.servers.contains(&b.server_id) {
            continue;
        }
        let Some(server) = config.server(&b.server_id) else {
            continue;
        };
        if verify_bundle(b, server, n, &config.psl).is_ok() {
            data.add_bundle(b);
            good.push(server);
        }
    }
    for ca in config.highly_trusted(n) {
        let have = good.iter().filter(|s| s.supported.contains(&ca)).count();
        if have < config.quorum {
            return Err(ClientError::QuorumUnmet {
                ca,
                have,
                need: config.quorum,
            });
        }
    }
    Ok(data)
}
