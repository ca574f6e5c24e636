//! Certificate validation against map-server data.

use super::verify::{verify_bundles, ClientError, VerifiedData};
use crate::certmodel::{
    fold_policies, legacy_validate, revocation_applies, Applicability, CertChain, DomainPolicy,
    RevocationEffect, TrustConfig,
};
use crate::mapserver::DomainProofBundle;
use crate::naming::{DomainName, NameRealm};

fn revocation_state(c: &CertChain, data: &VerifiedData) -> RevocationEffect {
    let mut out = RevocationEffect::No;
    for r in data.revocations_for(&c.hash()) {
        match revocation_applies(r, &c.leaf, &c.chain) {
            RevocationEffect::RevokesCertificate => return RevocationEffect::RevokesCertificate,
            RevocationEffect::RevokesPolicyOnly => out = RevocationEffect::RevokesPolicyOnly,
            RevocationEffect::No => {}
        }
    }
    out
}

/// The policy `c` contributes, with its SUBDOMAINS realm widened by the
/// certificate's own names so the defining domain stays covered.
fn contributed_policy(c: &CertChain) -> Option<DomainPolicy> {
    let mut p = c.leaf.policy.clone()?;
    if let Some(a) = &mut p.subdomains {
        let own: Vec<DomainName> = c.leaf.names().iter().map(DomainName::base).collect();
        a.value = a.value.union(&NameRealm::from_names(own.iter()));
    }
    Some(p)
}

/// The policy in force for `n`: the browser default folded with every
/// applicable policy from legacy-valid, non-revoked certificates issued
/// under a CA highly trusted for `n`.
pub fn resolve_policy(
    n: &DomainName,
    data: &VerifiedData,
    config: &TrustConfig,
    now: u64,
) -> DomainPolicy {
    let f_n = config.highly_trusted(n);
    let mut contributions: Vec<(DomainPolicy, Applicability)> = Vec::new();
    for c in data.certs.values() {
        if !legacy_validate(&c.leaf, &c.chain, &config.trust_store, now) {
            continue;
        }
        if !f_n.contains(&c.root_key_id()) {
            continue;
        }
        if revocation_state(c, data) != RevocationEffect::No {
            continue;
        }
        if let Some(p) = contributed_policy(c) {
            let own = c.leaf.covers(n, config.wildcard_mode);
            let applies = Applicability::for_name(&p, own);
            contributions.push((p, applies));
        }
    }
    fold_policies(
        &config.browser_policy,
        contributions.iter().map(|(p, a)| (p, *a)),
    )
}

/// Whether `c` breaks the resolved policy `p` for `n`.
pub fn violates_policy(c: &CertChain, p: &DomainPolicy, n: &DomainName) -> bool {
    !p.issuers_value().contains(&c.root_key_id())
        || !p.subdomains_value().contains(&n.base())
        || (c.leaf.is_wildcard() && p.wildcard_forbidden_value())
        || c.leaf.validity.lifetime() > p.max_lifetime_value()
}

/// Full validation of the certificate `c` presented for `n`.
pub fn validate(
    n: &DomainName,
    c: &CertChain,
    data: &VerifiedData,
    config: &TrustConfig,
    now: u64,
) -> bool {
    if !legacy_validate(&c.leaf, &c.chain, &config.trust_store, now)
        || !c.leaf.covers(n, config.wildcard_mode)
    {
        return false;
    }
    if revocation_state(c, data) == RevocationEffect::RevokesCertificate {
        return false;
    }
    let p = resolve_policy(n, data, config, now);
    !violates_policy(c, &p, n)
}

/// Legacy checks only: path validation plus name coverage.
pub fn legacy_accepts(n: &DomainName, c: &CertChain, config: &TrustConfig, now: u64) -> bool {
    legacy_validate(&c.leaf, &c.chain, &config.trust_store, now)
        && c.leaf.covers(n, config.wildcard_mode)
}

/// [`verify_bundles`] followed by [`validate`].
pub fn validate_with_bundles(
    n: &DomainName,
    c: &CertChain,
    bundles: &[DomainProofBundle],
    config: &TrustConfig,
    now: u64,
) -> Result<bool, ClientError> {
    let data = verify_bundles(bundles, config, n)?;
    Ok(validate(n, c, &data, config, now))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DowngradeStatus {
    /// Plain HTTP is acceptable.
    NoCertificates,
    /// A usable certificate exists, so a plain-HTTP connection is suspicious.
    CertificatesExist,
}

/// Whether any unexpired, unrevoked, trusted certificate covers `n`.
pub fn http_downgrade_check(
    n: &DomainName,
    data: &VerifiedData,
    config: &TrustConfig,
    now: u64,
) -> DowngradeStatus {
    let exists = data.certs.values().any(|c| {
        c.leaf.covers(n, config.wildcard_mode)
            && legacy_validate(&c.leaf, &c.chain, &config.trust_store, now)
            && revocation_state(c, data) != RevocationEffect::RevokesCertificate
    });
    if exists {
        DowngradeStatus::CertificatesExist
    } else {
        DowngradeStatus::NoCertificates
    }
}
