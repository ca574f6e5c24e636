//! Certificates, domain policies, revocations and their canonical encoding.

mod cert;
mod config;
mod keys;
mod policy;
mod revocation;
pub mod tlv;

pub use cert::{
    legacy_validate, root_key_id, Authority, CertChain, Certificate, CertificateBuilder,
    TrustStore, Validity,
};
pub use config::{ConfigError, FailureMode, MapServerInfo, TrustConfig, TrustTuple};
pub use keys::{sha256, Hash, KeyId, PublicKey, SigningKey};
pub use policy::{fold_policies, Applicability, Attribute, DomainPolicy, IssuerSet};
pub use revocation::{revocation_applies, RevocationEffect, RevocationMessage, RevocationScope};
pub use tlv::{Canonical, DecodeError};

/// Canonical bytes of any encodable object.
pub fn canonical_encode<T: Canonical>(obj: &T) -> Vec<u8> {
    obj.to_bytes()
}
