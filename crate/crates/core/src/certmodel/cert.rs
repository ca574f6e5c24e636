//! Canonical certificates, chains and legacy path validation.

use std::collections::BTreeMap;

use super::keys::{sha256, Hash, KeyId, PublicKey, SigningKey};
use super::policy::{decode_realm, encode_realm, DomainPolicy};
use super::tlv::{Canonical, DecodeError, Decoder, Encoder, TAG_CERTIFICATE, TAG_CHAIN};
use crate::naming::{name_matches, parse_domain, DomainName, NameRealm, WildcardMode};

/// Validity period in unix seconds, inclusive at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Validity {
    pub not_before: u64,
    pub not_after: u64,
}

impl Validity {
    pub fn new(not_before: u64, not_after: u64) -> Self {
        Validity {
            not_before,
            not_after,
        }
    }

    pub fn contains(&self, t: u64) -> bool {
        self.not_before <= t && t <= self.not_after
    }

    pub fn lifetime(&self) -> u64 {
        self.not_after.saturating_sub(self.not_before)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Certificate {
    pub subject_cn: Option<DomainName>,
    pub san: Vec<DomainName>,
    pub subject_key: PublicKey,
    pub issuer_key_id: KeyId,
    pub validity: Validity,
    pub is_ca: bool,
    /// Names this key may certify. Empty for end entities.
    pub issuance_realm: NameRealm,
    pub policy: Option<DomainPolicy>,
    pub serial: u64,
    pub signature: Vec<u8>,
}

impl Certificate {
    /// `{subject_cn} ∪ san`, deduplicated, in first-seen order.
    pub fn names(&self) -> Vec<DomainName> {
        let mut out: Vec<DomainName> = Vec::with_capacity(self.san.len() + 1);
        for n in self.subject_cn.iter().chain(self.san.iter()) {
            if !out.contains(n) {
                out.push(n.clone());
            }
        }
        out
    }

    /// True if the certificate is valid for `name`, directly or through a
    /// wildcard name.
    pub fn covers(&self, name: &DomainName, mode: WildcardMode) -> bool {
        self.subject_cn
            .iter()
            .chain(self.san.iter())
            .any(|n| name_matches(n, name, mode))
    }

    pub fn is_wildcard(&self) -> bool {
        self.subject_cn
            .iter()
            .chain(self.san.iter())
            .any(DomainName::is_wildcard)
    }

    pub fn key_id(&self) -> KeyId {
        self.subject_key.key_id()
    }

    pub fn is_self_signed(&self) -> bool {
        self.issuer_key_id == self.key_id()
    }

    /// SHA-256 of the full canonical encoding.
    pub fn hash(&self) -> Hash {
        sha256(&[&self.to_bytes()])
    }

    /// The encoding covered by the signature: every field but the signature.
    pub fn tbs_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.nested(TAG_CERTIFICATE, |e| self.encode_tbs_fields(e));
        e.into_bytes()
    }

    pub fn verify_signature(&self, issuer: &PublicKey) -> bool {
        issuer.key_id() == self.issuer_key_id && issuer.verify(&self.tbs_bytes(), &self.signature)
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        if self.validity.not_before >= self.validity.not_after {
            return Err("not_before must precede not_after".into());
        }
        if !self.is_ca && !self.issuance_realm.is_empty() {
            return Err("end-entity certificate with an issuance realm".into());
        }
        if !self.is_ca && self.names().is_empty() {
            return Err("end-entity certificate without names".into());
        }
        Ok(())
    }

    fn encode_tbs_fields(&self, e: &mut Encoder) {
        e.option(self.subject_cn.as_ref(), |e, n| {
            e.bytes(n.to_string().as_bytes())
        });
        e.list(self.san.len(), |e| {
            for n in &self.san {
                e.bytes(n.to_string().as_bytes());
            }
        });
        e.bytes(&self.subject_key.0);
        e.bytes(&self.issuer_key_id.0);
        e.int(self.validity.not_before);
        e.int(self.validity.not_after);
        e.bool(self.is_ca);
        encode_realm(e, &self.issuance_realm);
        e.option(self.policy.as_ref(), |e, p| p.encode(e));
        e.int(self.serial);
    }
}

fn decode_name(d: &mut Decoder<'_>) -> Result<DomainName, DecodeError> {
    let s = d.string()?;
    parse_domain(&s).map_err(|e| DecodeError::Invalid(e.to_string()))
}

impl Canonical for Certificate {
    fn encode(&self, e: &mut Encoder) {
        e.nested(TAG_CERTIFICATE, |e| {
            self.encode_tbs_fields(e);
            e.bytes(&self.signature);
        });
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let mut d = d.nested(TAG_CERTIFICATE)?;
        let subject_cn = d.option(decode_name)?;
        let san = d.list_of(decode_name)?;
        let subject_key = PublicKey(d.array32()?);
        let issuer_key_id = KeyId(d.array32()?);
        let not_before = d.int()?;
        let not_after = d.int()?;
        let is_ca = d.bool()?;
        let issuance_realm = decode_realm(&mut d)?;
        let policy = d.option(DomainPolicy::decode)?;
        let serial = d.int()?;
        let signature = d.bytes()?.to_vec();
        d.finish()?;
        Ok(Certificate {
            subject_cn,
            san,
            subject_key,
            issuer_key_id,
            validity: Validity::new(not_before, not_after),
            is_ca,
            issuance_realm,
            policy,
            serial,
            signature,
        })
    }
}

/// A certificate with its issuing path, leaf-adjacent first and ending at
/// a self-signed root.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CertChain {
    pub leaf: Certificate,
    pub chain: Vec<Certificate>,
}

impl CertChain {
    pub fn new(leaf: Certificate, chain: Vec<Certificate>) -> Self {
        CertChain { leaf, chain }
    }

    /// Hash of the leaf certificate.
    pub fn hash(&self) -> Hash {
        self.leaf.hash()
    }

    /// Key identifier of the root that terminates the path.
    pub fn root_key_id(&self) -> KeyId {
        root_key_id(&self.leaf, &self.chain)
    }
}

/// Key identifier of the topmost issuer of `cert` given its `chain`.
pub fn root_key_id(cert: &Certificate, chain: &[Certificate]) -> KeyId {
    chain.last().unwrap_or(cert).issuer_key_id
}

impl Canonical for CertChain {
    fn encode(&self, e: &mut Encoder) {
        e.nested(TAG_CHAIN, |e| {
            self.leaf.encode(e);
            e.list(self.chain.len(), |e| {
                for c in &self.chain {
                    c.encode(e);
                }
            });
        });
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let mut d = d.nested(TAG_CHAIN)?;
        let leaf = Certificate::decode(&mut d)?;
        let chain = d.list_of(Certificate::decode)?;
        d.finish()?;
        Ok(CertChain { leaf, chain })
    }
}

/// Trusted root certificates keyed by their key identifier.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrustStore {
    roots: BTreeMap<KeyId, Certificate>,
}

impl TrustStore {
    pub fn new<I: IntoIterator<Item = Certificate>>(roots: I) -> Self {
        TrustStore {
            roots: roots.into_iter().map(|c| (c.key_id(), c)).collect(),
        }
    }

    pub fn insert(&mut self, root: Certificate) {
        self.roots.insert(root.key_id(), root);
    }

    pub fn contains(&self, cert: &Certificate) -> bool {
        self.roots.get(&cert.key_id()) == Some(cert)
    }

    pub fn roots(&self) -> impl Iterator<Item = &Certificate> {
        self.roots.values()
    }

    pub fn key_ids(&self) -> impl Iterator<Item = &KeyId> {
        self.roots.keys()
    }
}

/// Legacy path validation: signatures, CA bits, a trusted self-signed root,
/// validity at `now`, and the leaf's names inside every CA's realm.
pub fn legacy_validate(
    cert: &Certificate,
    chain: &[Certificate],
    trust_store: &TrustStore,
    now: u64,
) -> bool {
    let Some(root) = chain.last() else {
        return false;
    };
    if !root.is_self_signed() || !trust_store.contains(root) {
        return false;
    }
    if cert.check_invariants().is_err() {
        return false;
    }
    let path: Vec<&Certificate> = std::iter::once(cert).chain(chain.iter()).collect();
    for (i, c) in path.iter().enumerate() {
        let issuer = path.get(i + 1).copied().unwrap_or(c);
        if !c.verify_signature(&issuer.subject_key) {
            return false;
        }
        if !c.validity.contains(now) {
            return false;
        }
    }
    let names = cert.names();
    chain.iter().all(|ca| {
        ca.is_ca
            && names.iter().all(|n| {
                // A wildcard name is inside a realm when its base is.
                ca.issuance_realm.contains(n) || ca.issuance_realm.contains(&n.base())
            })
    })
}

/// Builder for certificates signed by a given key.
#[derive(Debug, Clone)]
pub struct CertificateBuilder {
    cert: Certificate,
}

impl CertificateBuilder {
    pub fn end_entity(names: &[DomainName], subject_key: PublicKey, validity: Validity) -> Self {
        CertificateBuilder {
            cert: Certificate {
                subject_cn: names.first().cloned(),
                san: names.to_vec(),
                subject_key,
                issuer_key_id: KeyId([0; 32]),
                validity,
                is_ca: false,
                issuance_realm: NameRealm::empty(),
                policy: None,
                serial: 0,
                signature: Vec::new(),
            },
        }
    }

    pub fn ca(subject_key: PublicKey, realm: NameRealm, validity: Validity) -> Self {
        CertificateBuilder {
            cert: Certificate {
                subject_cn: None,
                san: Vec::new(),
                subject_key,
                issuer_key_id: KeyId([0; 32]),
                validity,
                is_ca: true,
                issuance_realm: realm,
                policy: None,
                serial: 0,
                signature: Vec::new(),
            },
        }
    }

    pub fn subject_cn(mut self, cn: Option<DomainName>) -> Self {
        self.cert.subject_cn = cn;
        self
    }

    pub fn san(mut self, san: Vec<DomainName>) -> Self {
        self.cert.san = san;
        self
    }

    pub fn policy(mut self, p: Option<DomainPolicy>) -> Self {
        self.cert.policy = p;
        self
    }

    pub fn serial(mut self, s: u64) -> Self {
        self.cert.serial = s;
        self
    }

    pub fn sign(mut self, issuer: &SigningKey) -> Certificate {
        self.cert.issuer_key_id = issuer.key_id();
        self.cert.signature = issuer.sign(&self.cert.tbs_bytes());
        self.cert
    }
}

/// A certification authority with its key and path to a root.
#[derive(Debug, Clone)]
pub struct Authority {
    pub key: SigningKey,
    pub cert: Certificate,
    /// Issuers above this CA, nearest first, ending at the root. Empty for a root.
    pub parents: Vec<Certificate>,
}

impl Authority {
    /// A self-signed root with an unrestricted realm.
    pub fn root(key: SigningKey, validity: Validity) -> Self {
        let cert = CertificateBuilder::ca(key.public(), NameRealm::All, validity).sign(&key);
        Authority {
            key,
            cert,
            parents: Vec::new(),
        }
    }

    /// An intermediate CA certified by `self`.
    pub fn intermediate(&self, key: SigningKey, realm: NameRealm, validity: Validity) -> Self {
        let cert = CertificateBuilder::ca(key.public(), realm, validity).sign(&self.key);
        Authority {
            key,
            cert,
            parents: self.path(),
        }
    }

    pub fn key_id(&self) -> KeyId {
        self.key.key_id()
    }

    /// Key identifier of this authority's root.
    pub fn root_key_id(&self) -> KeyId {
        self.parents.last().unwrap_or(&self.cert).key_id()
    }

    pub fn root_cert(&self) -> &Certificate {
        self.parents.last().unwrap_or(&self.cert)
    }

    /// `self.cert` followed by its parents: the chain for certificates it issues.
    pub fn path(&self) -> Vec<Certificate> {
        std::iter::once(self.cert.clone())
            .chain(self.parents.iter().cloned())
            .collect()
    }

    /// Issues an end-entity certificate and returns it with its chain.
    pub fn issue(
        &self,
        names: &[DomainName],
        subject_key: PublicKey,
        validity: Validity,
        policy: Option<DomainPolicy>,
        serial: u64,
    ) -> CertChain {
        let leaf = CertificateBuilder::end_entity(names, subject_key, validity)
            .policy(policy)
            .serial(serial)
            .sign(&self.key);
        CertChain::new(leaf, self.path())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> DomainName {
        parse_domain(s).unwrap()
    }

    fn setup() -> (Authority, TrustStore, SigningKey) {
        let root = Authority::root(SigningKey::derive(1, "root"), Validity::new(0, 1000));
        let store = TrustStore::new([root.cert.clone()]);
        (root, store, SigningKey::derive(1, "leaf"))
    }

    #[test]
    fn minimal_chain_validates() {
        let (root, store, leaf_key) = setup();
        let c = root.issue(
            &[n("example.com")],
            leaf_key.public(),
            Validity::new(10, 100),
            None,
            1,
        );
        assert!(legacy_validate(&c.leaf, &c.chain, &store, 50));
        assert_eq!(c.root_key_id(), root.key_id());
    }

    #[test]
    fn expired_leaf_rejected() {
        let (root, store, leaf_key) = setup();
        let c = root.issue(
            &[n("example.com")],
            leaf_key.public(),
            Validity::new(10, 100),
            None,
            1,
        );
        assert!(!legacy_validate(&c.leaf, &c.chain, &store, 101));
        assert!(!legacy_validate(&c.leaf, &c.chain, &store, 9));
    }

    #[test]
    fn untrusted_issuer_rejected() {
        let (_, store, leaf_key) = setup();
        let rogue = Authority::root(SigningKey::derive(1, "rogue"), Validity::new(0, 1000));
        let c = rogue.issue(
            &[n("example.com")],
            leaf_key.public(),
            Validity::new(10, 100),
            None,
            1,
        );
        assert!(!legacy_validate(&c.leaf, &c.chain, &store, 50));
        assert!(!legacy_validate(&c.leaf, &[], &store, 50));
    }

    #[test]
    fn intermediate_realm_and_ca_bit() {
        let (root, store, leaf_key) = setup();
        let inter = root.intermediate(
            SigningKey::derive(1, "inter"),
            "{.example.com}".parse().unwrap(),
            Validity::new(0, 1000),
        );
        let ok = inter.issue(
            &[n("www.example.com")],
            leaf_key.public(),
            Validity::new(10, 100),
            None,
            2,
        );
        assert!(legacy_validate(&ok.leaf, &ok.chain, &store, 50));
        let bad = inter.issue(
            &[n("www.example.org")],
            leaf_key.public(),
            Validity::new(10, 100),
            None,
            3,
        );
        assert!(!legacy_validate(&bad.leaf, &bad.chain, &store, 50));

        // An end-entity key acting as an issuer.
        let ee = Authority {
            key: leaf_key.clone(),
            cert: ok.leaf.clone(),
            parents: ok.chain.clone(),
        };
        let sub = ee.issue(
            &[n("a.example.com")],
            leaf_key.public(),
            Validity::new(10, 100),
            None,
            4,
        );
        assert!(!legacy_validate(&sub.leaf, &sub.chain, &store, 50));
    }

    #[test]
    fn tampered_signature_rejected() {
        let (root, store, leaf_key) = setup();
        let mut c = root.issue(
            &[n("example.com")],
            leaf_key.public(),
            Validity::new(10, 100),
            None,
            1,
        );
        c.leaf.serial = 99;
        assert!(!legacy_validate(&c.leaf, &c.chain, &store, 50));
    }

    #[test]
    fn encoding_is_deterministic_and_round_trips() {
        let (root, _, leaf_key) = setup();
        let mut c = root.issue(
            &[n("example.com")],
            leaf_key.public(),
            Validity::new(10, 100),
            None,
            1,
        );
        assert_eq!(c.leaf.to_bytes(), c.leaf.clone().to_bytes());
        assert_eq!(Certificate::from_bytes(&c.leaf.to_bytes()).unwrap(), c.leaf);
        assert_eq!(CertChain::from_bytes(&c.to_bytes()).unwrap(), c);
        c.leaf.san.clear();
        let bytes = c.leaf.to_bytes();
        // subject_cn option, then the SAN list: tag 0x03, length 4, count 0.
        let cn_len = 5 + 4 + 5 + "example.com".len();
        let san_at = 5 + cn_len;
        assert_eq!(&bytes[san_at..san_at + 9], &[0x03, 0, 0, 0, 4, 0, 0, 0, 0]);
    }
}
