//! Independent replay of map-server revisions.

use thiserror::Error;

use super::core::{MapCore, RejectReason};
use super::entry::{MapItem, SignedMapHead};
use super::server::{AuditRecord, MapServerConfig};
use crate::certmodel::{Canonical, Hash, PublicKey};
use crate::merkle::{verify_consistency, ConsistencyTree};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuditError {
    #[error("map head signature does not verify")]
    BadSignature,
    #[error("old head does not match the last audited head")]
    UnknownOldHead,
    #[error("expected revision {expected}, got {found}")]
    RevisionGap { expected: u64, found: u64 },
    #[error("tree identifier changed")]
    NonceChanged,
    #[error("delta item {0} rejected: {1}")]
    RejectedItem(usize, RejectReason),
    #[error("replayed root differs from the signed root")]
    RootMismatch,
    #[error("head log is not an extension of the audited history")]
    Inconsistent,
}

/// Keeps a replica of one server's map and its head log.
#[derive(Debug, Clone)]
pub struct Auditor {
    key: PublicKey,
    replica: MapCore,
    heads: Vec<SignedMapHead>,
    log: ConsistencyTree,
}

impl Auditor {
    pub fn new(config: &MapServerConfig, key: PublicKey) -> Self {
        Auditor {
            key,
            replica: MapCore::new(config.psl.clone(), config.supported.clone(), config.nonce),
            heads: Vec::new(),
            log: ConsistencyTree::new(),
        }
    }

    pub fn heads(&self) -> &[SignedMapHead] {
        &self.heads
    }

    pub fn replica_root(&self) -> Hash {
        self.replica.root()
    }

    /// Checks one revision without changing the auditor.
    fn check(
        &self,
        old: Option<&SignedMapHead>,
        new: &SignedMapHead,
        delta: &[MapItem],
        log_root: &Hash,
        consistency: &[Hash],
    ) -> Result<(MapCore, ConsistencyTree), AuditError> {
        if !new.verify(&self.key) {
            return Err(AuditError::BadSignature);
        }
        if old != self.heads.last() {
            return Err(AuditError::UnknownOldHead);
        }
        let expected = self.heads.len() as u64;
        if new.revision != expected {
            return Err(AuditError::RevisionGap {
                expected,
                found: new.revision,
            });
        }
        if new.nonce != self.replica.nonce() {
            return Err(AuditError::NonceChanged);
        }
        let mut replica = self.replica.clone();
        for (i, item) in delta.iter().enumerate() {
            replica
                .apply(item)
                .map_err(|e| AuditError::RejectedItem(i, e))?;
        }
        if replica.rebuild() != new.root {
            return Err(AuditError::RootMismatch);
        }
        let mut log = self.log.clone();
        let (size_a, root_a) = (log.len() as u64, log.root());
        let root_b = log.append(new.to_bytes());
        if !verify_consistency(size_a, size_a + 1, &root_a, log_root, consistency)
            || *log_root != root_b
        {
            return Err(AuditError::Inconsistent);
        }
        Ok((replica, log))
    }

    /// Audits the step `old → new` and, on success, advances the replica.
    pub fn audit_step(
        &mut self,
        old: Option<&SignedMapHead>,
        new: &SignedMapHead,
        delta: &[MapItem],
        log_root: &Hash,
        consistency: &[Hash],
    ) -> Result<(), AuditError> {
        let (replica, log) = self.check(old, new, delta, log_root, consistency)?;
        self.replica = replica;
        self.log = log;
        self.heads.push(new.clone());
        Ok(())
    }

    pub fn audit_revision(
        &mut self,
        old: Option<&SignedMapHead>,
        new: &SignedMapHead,
        delta: &[MapItem],
        log_root: &Hash,
        consistency: &[Hash],
    ) -> bool {
        self.audit_step(old, new, delta, log_root, consistency)
            .is_ok()
    }

    pub fn audit(&mut self, rec: &AuditRecord) -> Result<(), AuditError> {
        self.audit_step(
            rec.old.as_ref(),
            &rec.new,
            &rec.delta,
            &rec.log_root,
            &rec.consistency,
        )
    }
}

/// Two heads from the same server for the same revision but different
/// roots prove the server showed different views.
pub fn is_split_view(a: &SignedMapHead, b: &SignedMapHead, key: &PublicKey) -> bool {
    a.verify(key) && b.verify(key) && a.revision == b.revision && a.root != b.root
}
