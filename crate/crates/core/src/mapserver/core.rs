//! Domain-indexed storage and the nested trees built from it.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::entry::{MapEntry, MapItem};
use crate::certmodel::{
    revocation_applies, CertChain, Certificate, Hash, KeyId, RevocationEffect, RevocationMessage,
};
use crate::merkle::SparseMerkleTree;
use crate::naming::{classify, DomainName, NameClass, PublicSuffixList};

/// Why an item was not accepted.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RejectReason {
    #[error("name {0} is a public suffix or invalid")]
    InvalidName(DomainName),
    #[error("certificate has no names")]
    NoNames,
    #[error("root CA {0} is not supported")]
    UnsupportedCa(KeyId),
    #[error("certificate chain does not verify")]
    BadChain,
    #[error("item already stored")]
    Duplicate,
    #[error("revoked certificate is unknown")]
    UnknownCertificate,
    #[error("revocation is not signed by an authorized key")]
    BadRevocationSignature,
}

/// Domains an item is stored under: `(base domain, is wildcard)`.
pub fn route_certificate(
    cert: &Certificate,
    psl: &PublicSuffixList,
) -> Result<Vec<(DomainName, bool)>, RejectReason> {
    let names = cert.names();
    if names.is_empty() {
        return Err(RejectReason::NoNames);
    }
    let mut out = Vec::new();
    for n in names {
        let base = n.base();
        if classify(&base, psl) == NameClass::PublicSuffixOrInvalid {
            return Err(RejectReason::InvalidName(n));
        }
        let r = (base, n.is_wildcard());
        if !out.contains(&r) {
            out.push(r);
        }
    }
    Ok(out)
}

/// Signatures along the chain, ending at a self-signed root.
pub fn chain_verifies(c: &CertChain) -> bool {
    let Some(root) = c.chain.last() else {
        return false;
    };
    if !root.is_self_signed() || c.leaf.check_invariants().is_err() {
        return false;
    }
    let path: Vec<&Certificate> = std::iter::once(&c.leaf).chain(c.chain.iter()).collect();
    path.iter().enumerate().all(|(i, cert)| {
        let issuer = path.get(i + 1).copied().unwrap_or(cert);
        cert.verify_signature(&issuer.subject_key) && (i == 0 || cert.is_ca)
    })
}

/// Result of building entries directly from an item list.
#[derive(Debug, Clone, Default)]
pub struct BuiltIndex {
    /// Entries by domain; subtree roots are not filled in.
    pub domains: BTreeMap<DomainName, MapEntry>,
    pub rejected: Vec<(MapItem, RejectReason)>,
}

/// Groups certificates and revocations by the domains they belong to.
///
/// Wildcard names go to the wildcard lists of their base domain and
/// revocations follow the names of the certificate they revoke.
pub fn build_index(items: &[MapItem], psl: &PublicSuffixList) -> BuiltIndex {
    let mut out = BuiltIndex::default();
    let mut certs: BTreeMap<Hash, (CertChain, Vec<(DomainName, bool)>)> = BTreeMap::new();
    let mut revs: BTreeMap<Hash, RevocationMessage> = BTreeMap::new();
    for item in items {
        match item {
            MapItem::Certificate(c) => match route_certificate(&c.leaf, psl) {
                Ok(routes) => {
                    certs.insert(c.hash(), (c.clone(), routes));
                }
                Err(e) => out.rejected.push((item.clone(), e)),
            },
            MapItem::Revocation(r) => {
                revs.insert(r.hash(), r.clone());
            }
            MapItem::Prune { .. } => {}
        }
    }
    for (c, routes) in certs.values() {
        for (d, wild) in routes {
            let e = out.domains.entry(d.clone()).or_default();
            if *wild {
                e.certs_wildcard.push(c.clone());
            } else {
                e.certs_exact.push(c.clone());
            }
        }
    }
    for (_, r) in revs {
        let Some((c, routes)) = certs.get(&r.cert_hash) else {
            out.rejected
                .push((MapItem::Revocation(r), RejectReason::UnknownCertificate));
            continue;
        };
        if revocation_applies(&r, &c.leaf, &c.chain) == RevocationEffect::No {
            out.rejected
                .push((MapItem::Revocation(r), RejectReason::BadRevocationSignature));
            continue;
        }
        for (d, wild) in routes {
            let e = out.domains.get_mut(d).expect("routed above");
            if *wild {
                e.revs_wildcard.push(r.clone());
            } else {
                e.revs_exact.push(r.clone());
            }
        }
    }
    out
}

#[derive(Debug, Clone, Default)]
struct DomainContent {
    certs_exact: BTreeSet<Hash>,
    certs_wildcard: BTreeSet<Hash>,
    revs_exact: BTreeSet<Hash>,
    revs_wildcard: BTreeSet<Hash>,
}

impl DomainContent {
    fn is_empty(&self) -> bool {
        self.certs_exact.is_empty()
            && self.certs_wildcard.is_empty()
            && self.revs_exact.is_empty()
            && self.revs_wildcard.is_empty()
    }
}

/// Stored items and the tree hierarchy over them.
///
/// Items are applied immediately; trees only change in [`MapCore::rebuild`],
/// so between rebuilds the trees describe the last committed revision.
#[derive(Debug, Clone)]
pub struct MapCore {
    psl: PublicSuffixList,
    supported: BTreeSet<KeyId>,
    nonce: Option<Hash>,
    certs: BTreeMap<Hash, CertChain>,
    cert_routes: BTreeMap<Hash, Vec<(DomainName, bool)>>,
    revocations: BTreeMap<Hash, RevocationMessage>,
    domains: BTreeMap<DomainName, DomainContent>,
    dirty: BTreeSet<DomainName>,
    pub(crate) e2ld_tree: SparseMerkleTree,
    /// Tree of child labels, keyed by the owning domain.
    pub(crate) subtrees: BTreeMap<DomainName, SparseMerkleTree>,
}

impl MapCore {
    pub fn new(psl: PublicSuffixList, supported: BTreeSet<KeyId>, nonce: Option<Hash>) -> Self {
        MapCore {
            psl,
            supported,
            nonce,
            certs: BTreeMap::new(),
            cert_routes: BTreeMap::new(),
            revocations: BTreeMap::new(),
            domains: BTreeMap::new(),
            dirty: BTreeSet::new(),
            e2ld_tree: SparseMerkleTree::with_nonce(nonce),
            subtrees: BTreeMap::new(),
        }
    }

    pub fn psl(&self) -> &PublicSuffixList {
        &self.psl
    }

    pub fn supported(&self) -> &BTreeSet<KeyId> {
        &self.supported
    }

    pub fn nonce(&self) -> Option<Hash> {
        self.nonce
    }

    /// Root of the last rebuild.
    pub fn root(&self) -> Hash {
        self.e2ld_tree.root()
    }

    pub fn certificate_count(&self) -> usize {
        self.certs.len()
    }

    pub fn certificates(&self) -> impl Iterator<Item = &CertChain> {
        self.certs.values()
    }

    pub fn revocations(&self) -> impl Iterator<Item = &RevocationMessage> {
        self.revocations.values()
    }

    pub fn has_pending_changes(&self) -> bool {
        !self.dirty.is_empty()
    }

    /// Checks an item against the current contents without applying it.
    pub fn check(&self, item: &MapItem) -> Result<(), RejectReason> {
        match item {
            MapItem::Certificate(c) => {
                let h = c.hash();
                if self.certs.contains_key(&h) {
                    return Err(RejectReason::Duplicate);
                }
                route_certificate(&c.leaf, &self.psl)?;
                if !chain_verifies(c) {
                    return Err(RejectReason::BadChain);
                }
                let root = c.root_key_id();
                if !self.supported.contains(&root) {
                    return Err(RejectReason::UnsupportedCa(root));
                }
                Ok(())
            }
            MapItem::Revocation(r) => {
                if self.revocations.contains_key(&r.hash()) {
                    return Err(RejectReason::Duplicate);
                }
                let c = self
                    .certs
                    .get(&r.cert_hash)
                    .ok_or(RejectReason::UnknownCertificate)?;
                match revocation_applies(r, &c.leaf, &c.chain) {
                    RevocationEffect::No => Err(RejectReason::BadRevocationSignature),
                    _ => Ok(()),
                }
            }
            MapItem::Prune { .. } => Ok(()),
        }
    }

    /// Applies an item; returns the number of certificates a prune removed.
    pub fn apply(&mut self, item: &MapItem) -> Result<usize, RejectReason> {
        self.check(item)?;
        match item {
            MapItem::Certificate(c) => {
                let h = c.hash();
                let routes = route_certificate(&c.leaf, &self.psl)?;
                for (d, wild) in &routes {
                    let content = self.domains.entry(d.clone()).or_default();
                    if *wild {
                        content.certs_wildcard.insert(h);
                    } else {
                        content.certs_exact.insert(h);
                    }
                    self.dirty.insert(d.clone());
                }
                self.certs.insert(h, c.clone());
                self.cert_routes.insert(h, routes);
                Ok(0)
            }
            MapItem::Revocation(r) => {
                let rh = r.hash();
                for (d, wild) in &self.cert_routes[&r.cert_hash] {
                    let content = self.domains.entry(d.clone()).or_default();
                    if *wild {
                        content.revs_wildcard.insert(rh);
                    } else {
                        content.revs_exact.insert(rh);
                    }
                    self.dirty.insert(d.clone());
                }
                self.revocations.insert(rh, r.clone());
                Ok(0)
            }
            MapItem::Prune { now } => Ok(self.prune(*now)),
        }
    }

    fn prune(&mut self, now: u64) -> usize {
        let expired: Vec<Hash> = self
            .certs
            .iter()
            .filter(|(_, c)| c.leaf.validity.not_after < now)
            .map(|(h, _)| *h)
            .collect();
        for h in &expired {
            self.certs.remove(h);
            let revs: Vec<Hash> = self
                .revocations
                .iter()
                .filter(|(_, r)| r.cert_hash == *h)
                .map(|(rh, _)| *rh)
                .collect();
            for rh in &revs {
                self.revocations.remove(rh);
            }
            for (d, _) in self.cert_routes.remove(h).unwrap_or_default() {
                if let Some(content) = self.domains.get_mut(&d) {
                    content.certs_exact.remove(h);
                    content.certs_wildcard.remove(h);
                    for rh in &revs {
                        content.revs_exact.remove(rh);
                        content.revs_wildcard.remove(rh);
                    }
                    if content.is_empty() {
                        self.domains.remove(&d);
                    }
                }
                self.dirty.insert(d);
            }
        }
        expired.len()
    }

    /// Entry for `d` from current contents and subtree roots.
    fn entry_for(&self, d: &DomainName) -> MapEntry {
        let mut e = MapEntry {
            subtree_root: self
                .subtrees
                .get(d)
                .filter(|t| !t.is_empty())
                .map(SparseMerkleTree::root),
            ..MapEntry::default()
        };
        if let Some(c) = self.domains.get(d) {
            e.certs_exact = c
                .certs_exact
                .iter()
                .map(|h| self.certs[h].clone())
                .collect();
            e.certs_wildcard = c
                .certs_wildcard
                .iter()
                .map(|h| self.certs[h].clone())
                .collect();
            e.revs_exact = c
                .revs_exact
                .iter()
                .map(|h| self.revocations[h].clone())
                .collect();
            e.revs_wildcard = c
                .revs_wildcard
                .iter()
                .map(|h| self.revocations[h].clone())
                .collect();
        }
        e
    }

    /// Rebuilds changed entries deepest first and returns the new root.
    pub fn rebuild(&mut self) -> Hash {
        let mut todo: BTreeSet<(std::cmp::Reverse<usize>, DomainName)> = BTreeSet::new();
        for d in std::mem::take(&mut self.dirty) {
            let mut cur = d;
            loop {
                let class = classify(&cur, &self.psl);
                todo.insert((std::cmp::Reverse(cur.depth()), cur.clone()));
                match class {
                    NameClass::Subdomain { .. } => {
                        cur = cur.parent().expect("subdomain has a parent");
                    }
                    _ => break,
                }
            }
        }
        for (_, d) in todo {
            let entry = self.entry_for(&d);
            let value = (!entry.is_empty()).then(|| crate::certmodel::canonical_encode(&entry));
            match classify(&d, &self.psl) {
                NameClass::E2ld => {
                    self.e2ld_tree
                        .update(d.to_string().as_bytes(), value.as_deref())
                        .expect("entries are non-empty");
                }
                NameClass::Subdomain { .. } => {
                    let parent = d.parent().expect("subdomain has a parent");
                    let nonce = self.nonce;
                    let t = self
                        .subtrees
                        .entry(parent.clone())
                        .or_insert_with(|| SparseMerkleTree::with_nonce(nonce));
                    t.update(d.leaf_label().as_bytes(), value.as_deref())
                        .expect("entries are non-empty");
                    if t.is_empty() {
                        self.subtrees.remove(&parent);
                    }
                }
                NameClass::PublicSuffixOrInvalid => unreachable!("rejected at ingest"),
            }
        }
        self.root()
    }

    /// Stored entry for `d` as of the last rebuild.
    pub fn committed_entry(&self, d: &DomainName) -> Option<MapEntry> {
        let bytes = match classify(d, &self.psl) {
            NameClass::E2ld => self.e2ld_tree.get(d.to_string().as_bytes()),
            NameClass::Subdomain { .. } => self
                .subtrees
                .get(&d.parent()?)?
                .get(d.leaf_label().as_bytes()),
            NameClass::PublicSuffixOrInvalid => None,
        }?;
        Some(
            <MapEntry as crate::certmodel::Canonical>::from_bytes(bytes)
                .expect("stored entries decode"),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certmodel::{Authority, RevocationScope, SigningKey, Validity};
    use crate::naming::parse_domain;

    fn dn(s: &str) -> DomainName {
        parse_domain(s).unwrap()
    }

    fn ca() -> Authority {
        Authority::root(SigningKey::derive(11, "ca"), Validity::new(0, 1000))
    }

    fn cert(ca: &Authority, names: &[&str], serial: u64, not_after: u64) -> CertChain {
        let names: Vec<DomainName> = names.iter().map(|n| dn(n)).collect();
        ca.issue(
            &names,
            SigningKey::derive(serial, "leaf").public(),
            Validity::new(0, not_after),
            None,
            serial,
        )
    }

    #[test]
    fn index_routes_names() {
        let a = ca();
        let psl = PublicSuffixList::builtin();
        let items = vec![
            MapItem::Certificate(cert(&a, &["example.com", "www.example.com"], 1, 100)),
            MapItem::Certificate(cert(&a, &["*.example.com"], 2, 100)),
            MapItem::Certificate(cert(&a, &["ac.jp"], 3, 100)),
        ];
        let idx = build_index(&items, &psl);
        assert_eq!(idx.domains[&dn("example.com")].certs_exact.len(), 1);
        assert_eq!(idx.domains[&dn("www.example.com")].certs_exact.len(), 1);
        assert_eq!(idx.domains[&dn("example.com")].certs_wildcard.len(), 1);
        assert_eq!(idx.rejected.len(), 1);
        assert!(matches!(idx.rejected[0].1, RejectReason::InvalidName(_)));
    }

    #[test]
    fn order_independent_root_and_prune_cascade() {
        let a = ca();
        let psl = PublicSuffixList::builtin();
        let items: Vec<MapItem> = vec![
            MapItem::Certificate(cert(&a, &["example.com"], 1, 100)),
            MapItem::Certificate(cert(&a, &["a.b.example.com"], 2, 50)),
            MapItem::Certificate(cert(&a, &["x.org", "y.x.org"], 3, 100)),
        ];
        let mut c1 = MapCore::new(psl.clone(), [a.key_id()].into(), None);
        let mut c2 = c1.clone();
        for i in &items {
            c1.apply(i).unwrap();
        }
        for i in items.iter().rev() {
            c2.apply(i).unwrap();
        }
        assert_eq!(c1.rebuild(), c2.rebuild());
        assert!(c1
            .committed_entry(&dn("b.example.com"))
            .unwrap()
            .subtree_root
            .is_some());

        // Expire the deep certificate: b.example.com loses its only content.
        assert_eq!(c1.apply(&MapItem::Prune { now: 60 }).unwrap(), 1);
        c1.rebuild();
        assert!(c1.committed_entry(&dn("b.example.com")).is_none());
        assert!(c1
            .committed_entry(&dn("example.com"))
            .unwrap()
            .subtree_root
            .is_none());

        let mut fresh = MapCore::new(psl, [a.key_id()].into(), None);
        fresh.apply(&items[0]).unwrap();
        fresh.apply(&items[2]).unwrap();
        assert_eq!(fresh.rebuild(), c1.root());

        c1.apply(&MapItem::Prune { now: 1000 }).unwrap();
        assert_eq!(c1.rebuild(), SparseMerkleTree::new().root());
    }

    #[test]
    fn rejections() {
        let a = ca();
        let other = Authority::root(SigningKey::derive(11, "other"), Validity::new(0, 1000));
        let mut core = MapCore::new(PublicSuffixList::builtin(), [a.key_id()].into(), None);
        let c = cert(&a, &["example.com"], 1, 100);
        core.apply(&MapItem::Certificate(c.clone())).unwrap();
        assert_eq!(
            core.apply(&MapItem::Certificate(c.clone())),
            Err(RejectReason::Duplicate)
        );
        assert!(matches!(
            core.apply(&MapItem::Certificate(cert(
                &other,
                &["example.com"],
                2,
                100
            ))),
            Err(RejectReason::UnsupportedCa(_))
        ));
        let mut forged = cert(&a, &["evil.com"], 3, 100);
        forged.leaf.serial = 99;
        assert_eq!(
            core.apply(&MapItem::Certificate(forged)),
            Err(RejectReason::BadChain)
        );

        let stranger = RevocationMessage::sign(
            &c.leaf,
            RevocationScope::Certificate,
            &SigningKey::derive(0, "x"),
        );
        assert_eq!(
            core.apply(&MapItem::Revocation(stranger)),
            Err(RejectReason::BadRevocationSignature)
        );
        let unknown = RevocationMessage::sign(
            &cert(&a, &["z.com"], 4, 100).leaf,
            RevocationScope::Certificate,
            &a.key,
        );
        assert_eq!(
            core.apply(&MapItem::Revocation(unknown)),
            Err(RejectReason::UnknownCertificate)
        );
        let ok = RevocationMessage::sign(&c.leaf, RevocationScope::PolicyOnly, &a.key);
        core.apply(&MapItem::Revocation(ok)).unwrap();
        core.rebuild();
        let e = core.committed_entry(&dn("example.com")).unwrap();
        assert_eq!((e.certs_exact.len(), e.revs_exact.len()), (1, 1));
    }
}
