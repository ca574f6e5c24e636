//! Map entries, signed map heads, proof bundles and delta items.

use crate::certmodel::tlv::{
    Canonical, DecodeError, Decoder, Encoder, TAG_BUNDLE, TAG_ENTRY, TAG_SMH,
};
use crate::certmodel::{sha256, CertChain, Hash, KeyId, PublicKey, RevocationMessage, SigningKey};
use crate::merkle::CompressedProof;

/// Everything a map server stores for one domain.
///
/// Lists are sorted by item hash so the encoding does not depend on
/// ingestion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MapEntry {
    pub certs_exact: Vec<CertChain>,
    pub revs_exact: Vec<RevocationMessage>,
    pub certs_wildcard: Vec<CertChain>,
    pub revs_wildcard: Vec<RevocationMessage>,
    pub subtree_root: Option<Hash>,
}

impl MapEntry {
    pub fn is_empty(&self) -> bool {
        self.certs_exact.is_empty()
            && self.revs_exact.is_empty()
            && self.certs_wildcard.is_empty()
            && self.revs_wildcard.is_empty()
            && self.subtree_root.is_none()
    }

    pub fn certificates(&self) -> impl Iterator<Item = &CertChain> {
        self.certs_exact.iter().chain(self.certs_wildcard.iter())
    }

    pub fn revocations(&self) -> impl Iterator<Item = &RevocationMessage> {
        self.revs_exact.iter().chain(self.revs_wildcard.iter())
    }
}

fn encode_list<T: Canonical>(e: &mut Encoder, items: &[T]) {
    e.list(items.len(), |e| {
        for i in items {
            i.encode(e);
        }
    });
}

impl Canonical for MapEntry {
    fn encode(&self, e: &mut Encoder) {
        e.nested(TAG_ENTRY, |e| {
            encode_list(e, &self.certs_exact);
            encode_list(e, &self.revs_exact);
            encode_list(e, &self.certs_wildcard);
            encode_list(e, &self.revs_wildcard);
            e.option(self.subtree_root.as_ref(), |e, h| e.bytes(h));
        });
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let mut d = d.nested(TAG_ENTRY)?;
        let entry = MapEntry {
            certs_exact: d.list_of(CertChain::decode)?,
            revs_exact: d.list_of(RevocationMessage::decode)?,
            certs_wildcard: d.list_of(CertChain::decode)?,
            revs_wildcard: d.list_of(RevocationMessage::decode)?,
            subtree_root: d.option(|d| d.array32())?,
        };
        d.finish()?;
        Ok(entry)
    }
}

/// Signed root of a map server's top-level tree at one revision.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SignedMapHead {
    pub root: Hash,
    pub revision: u64,
    pub timestamp: u64,
    pub server_key_id: KeyId,
    /// Tree identifier mixed into every leaf index.
    pub nonce: Option<Hash>,
    pub signature: Vec<u8>,
}

impl SignedMapHead {
    fn encode_fields(&self, e: &mut Encoder) {
        e.bytes(&self.root);
        e.int(self.revision);
        e.int(self.timestamp);
        e.bytes(&self.server_key_id.0);
        e.option(self.nonce.as_ref(), |e, n| e.bytes(n));
    }

    pub fn tbs_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        e.raw(b"fpki-smh");
        self.encode_fields(&mut e);
        e.into_bytes()
    }

    pub fn sign(
        root: Hash,
        revision: u64,
        timestamp: u64,
        nonce: Option<Hash>,
        key: &SigningKey,
    ) -> Self {
        let mut smh = SignedMapHead {
            root,
            revision,
            timestamp,
            server_key_id: key.key_id(),
            nonce,
            signature: Vec::new(),
        };
        smh.signature = key.sign(&smh.tbs_bytes());
        smh
    }

    pub fn verify(&self, key: &PublicKey) -> bool {
        key.key_id() == self.server_key_id && key.verify(&self.tbs_bytes(), &self.signature)
    }
}

impl Canonical for SignedMapHead {
    fn encode(&self, e: &mut Encoder) {
        e.nested(TAG_SMH, |e| {
            self.encode_fields(e);
            e.bytes(&self.signature);
        });
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let mut d = d.nested(TAG_SMH)?;
        let smh = SignedMapHead {
            root: d.array32()?,
            revision: d.int()?,
            timestamp: d.int()?,
            server_key_id: KeyId(d.array32()?),
            nonce: d.option(|d| d.array32())?,
            signature: d.bytes()?.to_vec(),
        };
        d.finish()?;
        Ok(smh)
    }
}

/// One level of a bundle: a proof for one label and the entry it proves.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundleLevel {
    pub proof: CompressedProof,
    pub entry: Option<MapEntry>,
}

impl BundleLevel {
    pub fn from_proof(proof: CompressedProof) -> Result<Self, DecodeError> {
        let entry = proof
            .leaf_value
            .as_deref()
            .map(MapEntry::from_bytes)
            .transpose()?;
        Ok(BundleLevel { proof, entry })
    }
}

/// Proofs from the e2LD down towards a queried name, anchored at an SMH.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainProofBundle {
    pub server_id: String,
    pub smh: SignedMapHead,
    pub levels: Vec<BundleLevel>,
}

impl DomainProofBundle {
    pub fn entries(&self) -> impl Iterator<Item = &MapEntry> {
        self.levels.iter().filter_map(|l| l.entry.as_ref())
    }
}

impl Canonical for DomainProofBundle {
    fn encode(&self, e: &mut Encoder) {
        e.nested(TAG_BUNDLE, |e| {
            e.bytes(self.server_id.as_bytes());
            self.smh.encode(e);
            e.list(self.levels.len(), |e| {
                for l in &self.levels {
                    e.bytes(&l.proof.to_wire());
                }
            });
        });
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let mut d = d.nested(TAG_BUNDLE)?;
        let server_id = d.string()?;
        let smh = SignedMapHead::decode(&mut d)?;
        let levels = d.list_of(|d| {
            let proof = CompressedProof::from_wire(d.bytes()?)?;
            BundleLevel::from_proof(proof)
        })?;
        d.finish()?;
        Ok(DomainProofBundle {
            server_id,
            smh,
            levels,
        })
    }
}

/// A change recorded in a revision's delta.
#[derive(Debug, Clone, PartialEq, Eq)]
#[allow(clippy::large_enum_variant)]
pub enum MapItem {
    Certificate(CertChain),
    Revocation(RevocationMessage),
    /// Removal of everything expired before `now`.
    Prune {
        now: u64,
    },
}

impl MapItem {
    pub fn hash(&self) -> Hash {
        sha256(&[&self.to_bytes()])
    }
}

impl Canonical for MapItem {
    fn encode(&self, e: &mut Encoder) {
        e.list(2, |e| match self {
            MapItem::Certificate(c) => {
                e.int(0);
                c.encode(e);
            }
            MapItem::Revocation(r) => {
                e.int(1);
                r.encode(e);
            }
            MapItem::Prune { now } => {
                e.int(2);
                e.int(*now);
            }
        });
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let (count, mut inner) = d.list()?;
        if count != 2 {
            return Err(DecodeError::Invalid("delta item arity".into()));
        }
        let item = match inner.int()? {
            0 => MapItem::Certificate(CertChain::decode(&mut inner)?),
            1 => MapItem::Revocation(RevocationMessage::decode(&mut inner)?),
            2 => MapItem::Prune { now: inner.int()? },
            k => return Err(DecodeError::Invalid(format!("delta item kind {k}"))),
        };
        inner.finish()?;
        Ok(item)
    }
}

/// Encodes a delta as a TLV list of items.
pub fn encode_delta(items: &[MapItem]) -> Vec<u8> {
    let mut e = Encoder::new();
    encode_list(&mut e, items);
    e.into_bytes()
}

pub fn decode_delta(buf: &[u8]) -> Result<Vec<MapItem>, DecodeError> {
    let mut d = Decoder::new(buf);
    let items = d.list_of(MapItem::decode)?;
    d.finish()?;
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smh_sign_verify_round_trip() {
        let k = SigningKey::derive(1, "map");
        let smh = SignedMapHead::sign([7; 32], 3, 100, Some([1; 32]), &k);
        assert!(smh.verify(&k.public()));
        assert!(!smh.verify(&SigningKey::derive(1, "other").public()));
        let mut bad = smh.clone();
        bad.revision = 4;
        assert!(!bad.verify(&k.public()));
        assert_eq!(SignedMapHead::from_bytes(&smh.to_bytes()).unwrap(), smh);
    }

    #[test]
    fn delta_round_trip() {
        let items = vec![MapItem::Prune { now: 5 }, MapItem::Prune { now: 9 }];
        assert_eq!(decode_delta(&encode_delta(&items)).unwrap(), items);
        assert_eq!(decode_delta(&encode_delta(&[])).unwrap(), vec![]);
    }
}
