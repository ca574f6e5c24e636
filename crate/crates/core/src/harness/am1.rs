//! Random instances where the attacker controls every CA that is not
//! highly trusted for the target, plus some map servers.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::certmodel::DomainPolicy;
use crate::certmodel::{
    Authority, CertChain, KeyId, MapServerInfo, RevocationMessage, RevocationScope, SigningKey,
    TrustConfig, TrustStore, TrustTuple, Validity,
};
use crate::client::Client;
use crate::mapserver::{MapItem, MapServer, MapServerConfig};
use crate::naming::{parse_domain, DomainName, NameRealm};
use crate::Cost;

/// The attribute the legitimate owner restricts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    Issuers,
    Subdomains,
    WildcardForbidden,
    MaxLifetime,
}

#[derive(Debug, Clone)]
pub struct Am1Outcome {
    pub seed: u64,
    pub target: DomainName,
    pub kind: PolicyKind,
    pub inherited: bool,
    /// Whether the legitimate policy applies to the target and forbids the
    /// attacker certificate.
    pub conflict: bool,
    pub attacker_accepted: bool,
    pub legit_accepted: bool,
}

const NOW: u64 = 1_000;
const LEGIT_LIFETIME: u64 = 90 * 86_400;

/// Builds and evaluates one instance.
pub fn run_am1(seed: u64) -> Am1Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let forever = Validity::new(0, u64::MAX / 2);

    let n_ht = rng.gen_range(1..=3);
    let n_other = rng.gen_range(1..=3);
    let ht: Vec<Authority> = (0..n_ht)
        .map(|i| Authority::root(SigningKey::derive(seed, &format!("ht{i}")), forever))
        .collect();
    let evil: Vec<Authority> = (0..n_other)
        .map(|i| Authority::root(SigningKey::derive(seed, &format!("evil{i}")), forever))
        .collect();
    // The attacker may also use an intermediate under its own root.
    let evil_ca = if rng.gen_bool(0.3) {
        evil[0].intermediate(
            SigningKey::derive(seed, "evil-int"),
            NameRealm::All,
            forever,
        )
    } else {
        evil.choose(&mut rng).expect("non-empty").clone()
    };
    let ht_ids: BTreeSet<KeyId> = ht.iter().map(Authority::key_id).collect();
    let all_ids: BTreeSet<KeyId> = ht.iter().chain(&evil).map(Authority::key_id).collect();

    let base = parse_domain("example.com").expect("literal");
    let target = match rng.gen_range(0..3) {
        0 => base.clone(),
        1 => parse_domain("www.example.com").expect("literal"),
        _ => parse_domain("a.b.example.com").expect("literal"),
    };

    // Legitimate certificate for the e2LD from a highly trusted CA.
    let kind = *[
        PolicyKind::Issuers,
        PolicyKind::Subdomains,
        PolicyKind::WildcardForbidden,
        PolicyKind::MaxLifetime,
    ]
    .choose(&mut rng)
    .expect("non-empty");
    let inherited = rng.gen_bool(0.5);
    let legit_ca = ht.choose(&mut rng).expect("non-empty");
    let policy = match kind {
        PolicyKind::Issuers => {
            DomainPolicy::default().with_issuers(ht_ids.iter().copied(), inherited)
        }
        PolicyKind::Subdomains => DomainPolicy::default()
            .with_subdomains("{mail.example.com}".parse().expect("literal"), inherited),
        PolicyKind::WildcardForbidden => {
            DomainPolicy::default().with_wildcard_forbidden(true, inherited)
        }
        PolicyKind::MaxLifetime => {
            DomainPolicy::default().with_max_lifetime(LEGIT_LIFETIME, inherited)
        }
    };
    let legit_key = SigningKey::derive(seed, "legit");
    let legit = legit_ca.issue(
        std::slice::from_ref(&base),
        legit_key.public(),
        Validity::new(0, LEGIT_LIFETIME),
        Some(policy),
        1,
    );

    // Attacker certificate for the target; it tries to slip past whichever
    // attribute is restricted.
    let wildcard = kind == PolicyKind::WildcardForbidden || (rng.gen_bool(0.3) && target != base);
    let attack_name = if wildcard {
        target
            .parent()
            .filter(|p| p.depth() >= 2)
            .map_or(target.clone(), |p| p.to_wildcard())
    } else {
        target.clone()
    };
    let lifetime = if kind == PolicyKind::MaxLifetime || rng.gen_bool(0.3) {
        LEGIT_LIFETIME * 4
    } else {
        LEGIT_LIFETIME
    };
    let permissive = if rng.gen_bool(0.5) {
        Some(DomainPolicy::permissive())
    } else {
        None
    };
    let attacker = evil_ca.issue(
        std::slice::from_ref(&attack_name),
        SigningKey::derive(seed, "attacker").public(),
        Validity::new(0, lifetime),
        permissive,
        2,
    );

    // Servers: at least `quorum` honest ones for every highly trusted CA;
    // malicious ones omit the legitimate certificate.
    let quorum = rng.gen_range(1..=2);
    let n_honest = quorum + rng.gen_range(0..=1);
    let n_evil = rng.gen_range(0..=2);
    let mut servers = Vec::new();
    for i in 0..n_honest + n_evil {
        let honest = i < n_honest;
        let id = format!("{}{i}", if honest { "honest" } else { "evil" });
        let cfg = MapServerConfig::new(id.clone(), all_ids.clone());
        let mut s = MapServer::new(cfg, SigningKey::derive(seed, &id));
        if honest {
            s.ingest(MapItem::Certificate(legit.clone()))
                .expect("legit cert accepted");
        }
        let _ = s.ingest(MapItem::Certificate(attacker.clone()));
        // A forged revocation of the legitimate certificate signed by the
        // attacker; a valid server refuses it.
        let forged = RevocationMessage::sign(
            &legit.leaf,
            if rng.gen_bool(0.5) {
                RevocationScope::Certificate
            } else {
                RevocationScope::PolicyOnly
            },
            &evil_ca.key,
        );
        let _ = s.ingest(MapItem::Revocation(forged));
        s.commit(NOW);
        servers.push(s);
    }

    let mut config = TrustConfig::new(TrustStore::new(
        ht.iter().chain(&evil).map(|a| a.cert.clone()),
    ));
    config.quorum = quorum;
    let ids: BTreeSet<String> = servers.iter().map(|s| s.id().to_string()).collect();
    config.tuples.push(TrustTuple {
        names: ".example.com".parse().expect("literal"),
        highly_trusted: ht_ids.clone(),
        map_servers: ids,
    });
    config.map_servers = servers
        .iter()
        .map(|s| MapServerInfo {
            id: s.id().to_string(),
            key: s.public_key(),
            supported: all_ids.clone(),
            cost: Cost::from_integer(1),
            address: None,
        })
        .collect();

    let client = Client::new(config);
    let connect = |c: &CertChain, n: &DomainName| {
        let bundles: Vec<_> = servers.iter().filter_map(|s| s.lookup(n).ok()).collect();
        client.connect(n, c, &bundles, NOW).is_accept()
    };

    let own = target == base;
    let applies = own || inherited;
    let conflict = applies
        && match kind {
            PolicyKind::Issuers => !ht_ids.contains(&attacker.root_key_id()),
            PolicyKind::Subdomains => target != base && target.to_string() != "mail.example.com",
            PolicyKind::WildcardForbidden => attacker.leaf.is_wildcard(),
            PolicyKind::MaxLifetime => lifetime > LEGIT_LIFETIME,
        };

    Am1Outcome {
        seed,
        target: target.clone(),
        kind,
        inherited,
        conflict,
        attacker_accepted: connect(&attacker, &target),
        legit_accepted: connect(&legit, &base),
    }
}
