//! The map server: staging, revisions, lookups and persistence.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::{Arc, RwLock};

use thiserror::Error;

use super::core::{MapCore, RejectReason};
use super::entry::{BundleLevel, DomainProofBundle, MapItem, SignedMapHead};
use crate::certmodel::tlv::{Canonical, DecodeError, Decoder, Encoder, TAG_SNAPSHOT};
use crate::certmodel::{Hash, KeyId, PublicKey, SigningKey};
use crate::merkle::{ConsistencyTree, SparseMerkleTree};
use crate::naming::{classify, DomainName, NameClass, PublicSuffixList};

/// Default revision cadence in seconds.
pub const DEFAULT_MMD: u64 = 3600;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("{0} is a public suffix or invalid name")]
    InvalidQuery(DomainName),
    #[error("no revision has been committed")]
    NoRevision,
    #[error("unknown revision {0}")]
    UnknownRevision(u64),
    #[error("rejected: {0}")]
    Rejected(#[from] RejectReason),
    #[error("snapshot: {0}")]
    Decode(#[from] DecodeError),
    #[error("snapshot replay diverged at revision {0}")]
    Replay(u64),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct MapServerConfig {
    pub id: String,
    pub supported: BTreeSet<KeyId>,
    pub mmd: u64,
    pub psl: PublicSuffixList,
    pub nonce: Option<Hash>,
}

impl MapServerConfig {
    pub fn new(id: impl Into<String>, supported: BTreeSet<KeyId>) -> Self {
        MapServerConfig {
            id: id.into(),
            supported,
            mmd: DEFAULT_MMD,
            psl: PublicSuffixList::builtin(),
            nonce: None,
        }
    }
}

/// Immutable state of one committed revision, served to clients.
#[derive(Debug, Clone)]
pub struct MapView {
    pub server_id: String,
    pub smh: SignedMapHead,
    pub mmd: u64,
    psl: PublicSuffixList,
    e2ld_tree: SparseMerkleTree,
    subtrees: Arc<BTreeMap<DomainName, SparseMerkleTree>>,
}

impl MapView {
    /// Bundle of proofs from the e2LD of `name` down to `name`, stopping at
    /// the first absent level or at an entry without subdomains.
    pub fn lookup(&self, name: &DomainName) -> Result<DomainProofBundle, MapError> {
        let name = name.base();
        let (e2ld, chain) = match classify(&name, &self.psl) {
            NameClass::PublicSuffixOrInvalid => return Err(MapError::InvalidQuery(name)),
            NameClass::E2ld => (name.clone(), Vec::new()),
            NameClass::Subdomain { e2ld, chain } => (e2ld, chain),
        };
        let mut levels = Vec::with_capacity(chain.len() + 1);
        let first = BundleLevel::from_proof(self.e2ld_tree.prove(e2ld.to_string().as_bytes()))?;
        let mut more = first
            .entry
            .as_ref()
            .is_some_and(|e| e.subtree_root.is_some());
        levels.push(first);
        let mut owner = e2ld;
        for label in chain {
            if !more {
                break;
            }
            let tree = self
                .subtrees
                .get(&owner)
                .expect("entry with a subtree root has a subtree");
            let level = BundleLevel::from_proof(tree.prove(label.as_bytes()))?;
            more = level
                .entry
                .as_ref()
                .is_some_and(|e| e.subtree_root.is_some());
            levels.push(level);
            owner = owner.child(&label).expect("label from a valid name");
        }
        Ok(DomainProofBundle {
            server_id: self.server_id.clone(),
            smh: self.smh.clone(),
            levels,
        })
    }

    /// Seconds until the next revision is due.
    pub fn ttl(&self, now: u64) -> u32 {
        (self.smh.timestamp + self.mmd)
            .saturating_sub(now)
            .min(u32::MAX as u64) as u32
    }
}

/// Shared pointer to the latest view; swapped atomically at commit.
#[derive(Debug, Clone, Default)]
pub struct ViewHandle(Arc<RwLock<Option<Arc<MapView>>>>);

impl ViewHandle {
    pub fn current(&self) -> Option<Arc<MapView>> {
        self.0.read().expect("view lock").clone()
    }

    fn set(&self, v: Arc<MapView>) {
        *self.0.write().expect("view lock") = Some(v);
    }
}

/// Everything an auditor needs to check one revision.
#[derive(Debug, Clone)]
pub struct AuditRecord {
    pub old: Option<SignedMapHead>,
    pub new: SignedMapHead,
    pub delta: Vec<MapItem>,
    /// Root of the server's head log once `new` is appended.
    pub log_root: Hash,
    /// Consistency proof of the head log from `r` to `r + 1` entries.
    pub consistency: Vec<Hash>,
}

#[derive(Debug)]
pub struct MapServer {
    config: MapServerConfig,
    key: SigningKey,
    core: MapCore,
    pending: Vec<MapItem>,
    heads: Vec<SignedMapHead>,
    deltas: Vec<Vec<MapItem>>,
    log: ConsistencyTree,
    view: ViewHandle,
}

impl MapServer {
    pub fn new(config: MapServerConfig, key: SigningKey) -> Self {
        let core = MapCore::new(config.psl.clone(), config.supported.clone(), config.nonce);
        MapServer {
            config,
            key,
            core,
            pending: Vec::new(),
            heads: Vec::new(),
            deltas: Vec::new(),
            log: ConsistencyTree::new(),
            view: ViewHandle::default(),
        }
    }

    pub fn id(&self) -> &str {
        &self.config.id
    }

    pub fn config(&self) -> &MapServerConfig {
        &self.config
    }

    pub fn public_key(&self) -> PublicKey {
        self.key.public()
    }

    pub fn core(&self) -> &MapCore {
        &self.core
    }

    pub fn pending(&self) -> &[MapItem] {
        &self.pending
    }

    pub fn heads(&self) -> &[SignedMapHead] {
        &self.heads
    }

    pub fn latest_head(&self) -> Option<&SignedMapHead> {
        self.heads.last()
    }

    pub fn log(&self) -> &ConsistencyTree {
        &self.log
    }

    pub fn view_handle(&self) -> ViewHandle {
        self.view.clone()
    }

    pub fn view(&self) -> Result<Arc<MapView>, MapError> {
        self.view.current().ok_or(MapError::NoRevision)
    }

    /// Stages a certificate chain or revocation for the next revision.
    pub fn ingest(&mut self, item: MapItem) -> Result<(), RejectReason> {
        if let MapItem::Prune { now } = item {
            self.prune_expired(now);
            return Ok(());
        }
        self.core.apply(&item)?;
        self.pending.push(item);
        Ok(())
    }

    pub fn ingest_all<I: IntoIterator<Item = MapItem>>(
        &mut self,
        items: I,
    ) -> Vec<(MapItem, RejectReason)> {
        let mut rejected = Vec::new();
        for i in items {
            if let Err(e) = self.ingest(i.clone()) {
                rejected.push((i, e));
            }
        }
        rejected
    }

    pub fn add_revocation(
        &mut self,
        r: crate::certmodel::RevocationMessage,
    ) -> Result<(), RejectReason> {
        self.ingest(MapItem::Revocation(r))
    }

    /// Removes certificates expired before `now`; the removal is staged.
    pub fn prune_expired(&mut self, now: u64) -> usize {
        let item = MapItem::Prune { now };
        let n = self.core.apply(&item).expect("prune always applies");
        if n > 0 {
            self.pending.push(item);
        }
        n
    }

    /// Rebuilds the trees, signs a new map head and publishes it.
    pub fn commit(&mut self, now: u64) -> SignedMapHead {
        let root = self.core.rebuild();
        let revision = self.heads.len() as u64;
        let smh = SignedMapHead::sign(root, revision, now, self.config.nonce, &self.key);
        self.log.append(smh.to_bytes());
        self.heads.push(smh.clone());
        self.deltas.push(std::mem::take(&mut self.pending));
        self.publish(smh.clone());
        smh
    }

    fn publish(&mut self, smh: SignedMapHead) {
        self.view.set(Arc::new(MapView {
            server_id: self.config.id.clone(),
            smh,
            mmd: self.config.mmd,
            psl: self.config.psl.clone(),
            e2ld_tree: self.core.e2ld_tree.clone(),
            subtrees: Arc::new(self.core.subtrees.clone()),
        }));
    }

    pub fn lookup(&self, name: &DomainName) -> Result<DomainProofBundle, MapError> {
        self.view()?.lookup(name)
    }

    /// Audit data for `revision`.
    pub fn audit_record(&self, revision: u64) -> Result<AuditRecord, MapError> {
        let r = revision as usize;
        let new = self
            .heads
            .get(r)
            .ok_or(MapError::UnknownRevision(revision))?
            .clone();
        Ok(AuditRecord {
            old: r.checked_sub(1).map(|p| self.heads[p].clone()),
            new,
            delta: self.deltas[r].clone(),
            log_root: self.log.root_at(r + 1).expect("size within the log"),
            consistency: self
                .log
                .prove_consistency(r, r + 1)
                .expect("sizes within the log"),
        })
    }

    pub fn delta(&self, revision: u64) -> Option<&[MapItem]> {
        self.deltas.get(revision as usize).map(Vec::as_slice)
    }

    /// Snapshot bytes: config, key seed, per-revision deltas with their
    /// heads, and the staged items.
    pub fn snapshot(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.nested(TAG_SNAPSHOT, |e| {
            e.bytes(self.config.id.as_bytes());
            e.bytes(&self.key.seed());
            e.list(self.config.supported.len(), |e| {
                for k in &self.config.supported {
                    e.bytes(&k.0);
                }
            });
            e.int(self.config.mmd);
            let rules = self.config.psl.rules();
            e.list(rules.len(), |e| {
                for r in &rules {
                    e.bytes(r.as_bytes());
                }
            });
            e.option(self.config.nonce.as_ref(), |e, n| e.bytes(n));
            e.list(self.heads.len(), |e| {
                for (h, d) in self.heads.iter().zip(&self.deltas) {
                    e.list(2, |e| {
                        h.encode(e);
                        e.raw(&super::entry::encode_delta(d));
                    });
                }
            });
            e.raw(&super::entry::encode_delta(&self.pending));
        });
        e.into_bytes()
    }

    /// Rebuilds a server by replaying a snapshot; every replayed revision
    /// must reproduce its recorded root.
    pub fn restore(bytes: &[u8]) -> Result<Self, MapError> {
        let mut outer = Decoder::new(bytes);
        let mut d = outer.nested(TAG_SNAPSHOT)?;
        let id = d.string()?;
        let key = SigningKey::from_seed(d.array32()?);
        let supported: BTreeSet<KeyId> =
            d.list_of(|d| d.array32().map(KeyId))?.into_iter().collect();
        let mmd = d.int()?;
        let rules = d.list_of(|d| d.string())?;
        let psl = PublicSuffixList::parse(&rules.join("\n"))
            .map_err(|e| DecodeError::Invalid(e.to_string()))?;
        let nonce = d.option(|d| d.array32())?;
        let revisions = d.list_of(|d| {
            let (count, mut inner) = d.list()?;
            if count != 2 {
                return Err(DecodeError::Invalid("revision record".into()));
            }
            let head = SignedMapHead::decode(&mut inner)?;
            let delta = inner.list_of(MapItem::decode)?;
            inner.finish()?;
            Ok((head, delta))
        })?;
        let pending = d.list_of(MapItem::decode)?;
        d.finish()?;
        outer.finish()?;

        let config = MapServerConfig {
            id,
            supported,
            mmd,
            psl,
            nonce,
        };
        let mut s = MapServer::new(config, key);
        for (head, delta) in revisions {
            for item in &delta {
                s.core.apply(item)?;
            }
            if s.core.rebuild() != head.root
                || head.revision != s.heads.len() as u64
                || !head.verify(&s.key.public())
            {
                return Err(MapError::Replay(head.revision));
            }
            s.log.append(head.to_bytes());
            s.heads.push(head.clone());
            s.deltas.push(delta);
        }
        if let Some(h) = s.heads.last().cloned() {
            s.publish(h);
        }
        for item in pending {
            s.core.apply(&item)?;
            s.pending.push(item);
        }
        Ok(s)
    }

    pub fn save(&self, path: &Path) -> Result<(), MapError> {
        std::fs::write(path, self.snapshot())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, MapError> {
        Self::restore(&std::fs::read(path)?)
    }

    /// Replaces the head of the latest revision with one over `root`,
    /// without touching the stored data. Models a server equivocating.
    pub fn sign_forged_head(&self, root: Hash, now: u64) -> SignedMapHead {
        let revision = self.heads.len().saturating_sub(1) as u64;
        SignedMapHead::sign(root, revision, now, self.config.nonce, &self.key)
    }
}
