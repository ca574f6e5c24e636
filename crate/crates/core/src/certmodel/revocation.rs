//! Revocation messages for certificates and their embedded policies.

use super::cert::Certificate;
use super::keys::{Hash, KeyId, SigningKey};
use super::tlv::{Canonical, DecodeError, Decoder, Encoder, TAG_REVOCATION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum RevocationScope {
    Certificate = 0x01,
    PolicyOnly = 0x02,
}

impl RevocationScope {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0x01 => Some(RevocationScope::Certificate),
            0x02 => Some(RevocationScope::PolicyOnly),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RevocationMessage {
    pub cert_hash: Hash,
    pub scope: RevocationScope,
    pub signer_key_id: KeyId,
    pub signature: Vec<u8>,
}

/// What a revocation message does to a particular certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RevocationEffect {
    No,
    RevokesCertificate,
    RevokesPolicyOnly,
}

fn signed_bytes(cert_hash: &Hash, scope: RevocationScope) -> Vec<u8> {
    let mut m = Vec::with_capacity(32 + 6 + 1);
    m.extend_from_slice(cert_hash);
    m.extend_from_slice(b"revoke");
    m.push(scope as u8);
    m
}

impl RevocationMessage {
    /// Signs `Sig_k(H(C) ‖ "revoke" ‖ scope)`.
    pub fn sign(cert: &Certificate, scope: RevocationScope, key: &SigningKey) -> Self {
        let cert_hash = cert.hash();
        RevocationMessage {
            cert_hash,
            scope,
            signer_key_id: key.key_id(),
            signature: key.sign(&signed_bytes(&cert_hash, scope)),
        }
    }

    pub fn hash(&self) -> Hash {
        super::keys::sha256(&[&self.to_bytes()])
    }
}

/// Whether `r` revokes `cert` (or only its policy). The signer must be a CA
/// on the certification path or the certificate's own subject key.
pub fn revocation_applies(
    r: &RevocationMessage,
    cert: &Certificate,
    chain: &[Certificate],
) -> RevocationEffect {
    if r.cert_hash != cert.hash() {
        return RevocationEffect::No;
    }
    let msg = signed_bytes(&r.cert_hash, r.scope);
    let verified = chain
        .iter()
        .filter(|c| c.is_ca)
        .map(|c| &c.subject_key)
        .chain(std::iter::once(&cert.subject_key))
        .filter(|k| k.key_id() == r.signer_key_id)
        .any(|k| k.verify(&msg, &r.signature));
    match (verified, r.scope) {
        (false, _) => RevocationEffect::No,
        (true, RevocationScope::Certificate) => RevocationEffect::RevokesCertificate,
        (true, RevocationScope::PolicyOnly) => RevocationEffect::RevokesPolicyOnly,
    }
}

impl Canonical for RevocationMessage {
    fn encode(&self, e: &mut Encoder) {
        e.nested(TAG_REVOCATION, |e| {
            e.bytes(&self.cert_hash);
            e.int(self.scope as u64);
            e.bytes(&self.signer_key_id.0);
            e.bytes(&self.signature);
        });
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let mut d = d.nested(TAG_REVOCATION)?;
        let cert_hash = d.array32()?;
        let scope = u8::try_from(d.int()?)
            .ok()
            .and_then(RevocationScope::from_byte)
            .ok_or_else(|| DecodeError::Invalid("revocation scope".into()))?;
        let signer_key_id = KeyId(d.array32()?);
        let signature = d.bytes()?.to_vec();
        d.finish()?;
        Ok(RevocationMessage {
            cert_hash,
            scope,
            signer_key_id,
            signature,
        })
    }
}
