mod common;

use std::collections::BTreeSet;

use common::*;
use fpki::certmodel::{
    Authority, CertChain, DomainPolicy, FailureMode, KeyId, RevocationMessage, RevocationScope,
    SigningKey, Validity,
};
use fpki::client::{
    http_downgrade_check, is_multicover, legacy_accepts, resolve_policy, select_map_servers,
    selection_cost, validate, verify_bundles, Client, ClientError, DowngradeStatus,
    MapServerDescriptor, Verdict, VerifiedData,
};
use fpki::mapserver::MapItem;
use fpki::naming::NameRealm;
use fpki::Cost;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DAY: u64 = 86_400;

fn issue(
    ca: &Authority,
    names: &[&str],
    serial: u64,
    lifetime: u64,
    policy: Option<DomainPolicy>,
) -> CertChain {
    let names: Vec<_> = names.iter().map(|s| n(s)).collect();
    ca.issue(
        &names,
        SigningKey::derive(serial, "leaf").public(),
        Validity::new(0, lifetime),
        policy,
        serial,
    )
}

fn data(certs: &[&CertChain], revs: &[RevocationMessage]) -> VerifiedData {
    let mut d = VerifiedData::default();
    for c in certs {
        d.certs.insert(c.hash(), (*c).clone());
    }
    for r in revs {
        d.revocations
            .entry(r.cert_hash)
            .or_default()
            .push(r.clone());
    }
    d
}

#[test]
fn quorum_and_union() {
    let ca = root("ca");
    let mut m1 = server("m1", &[&ca]);
    let mut m2 = server("m2", &[&ca]);
    let a = leaf(&ca, &["example.com"], 1);
    let b = leaf(&ca, &["example.com"], 2);
    m1.ingest(MapItem::Certificate(a.clone())).unwrap();
    m2.ingest(MapItem::Certificate(b.clone())).unwrap();
    m1.commit(1);
    m2.commit(1);
    let mut cfg = config(&[&ca], &[&ca], &[&m1, &m2]);
    let name = n("example.com");
    let b1 = m1.lookup(&name).unwrap();
    let b2 = m2.lookup(&name).unwrap();

    let d = verify_bundles(&[b1.clone(), b2.clone()], &cfg, &name).unwrap();
    assert_eq!(d.certs.len(), 2);
    assert!(d.certs.contains_key(&a.hash()) && d.certs.contains_key(&b.hash()));
    assert_eq!(d.servers.len(), 2);

    cfg.quorum = 2;
    assert!(matches!(
        verify_bundles(std::slice::from_ref(&b1), &cfg, &name),
        Err(ClientError::QuorumUnmet {
            have: 1,
            need: 2,
            ..
        })
    ));
    // The same server twice only counts once.
    assert!(verify_bundles(&[b1.clone(), b1.clone()], &cfg, &name).is_err());
    // A bundle with a broken signature does not count either.
    let mut bad = b2.clone();
    bad.smh.signature[0] ^= 1;
    assert!(verify_bundles(&[b1.clone(), bad], &cfg, &name).is_err());
    assert!(verify_bundles(&[b1, b2], &cfg, &name).is_ok());

    assert!(matches!(
        verify_bundles(&[], &cfg, &n("co.uk")),
        Err(ClientError::InvalidName(_))
    ));
}

#[test]
fn policy_blocks_other_issuers() {
    let good = root("good");
    let rogue = root("rogue");
    let cfg = config(&[&good, &rogue], &[&good], &[]);
    let policy = DomainPolicy::default().with_issuers([good.root_key_id()], true);
    let pc = issue(&good, &["example.com"], 1, 365 * DAY, Some(policy));
    let honest = issue(&good, &["www.example.com"], 2, 90 * DAY, None);
    let attack = issue(&rogue, &["www.example.com"], 3, 90 * DAY, None);
    let d = data(&[&pc], &[]);
    let name = n("www.example.com");
    assert!(validate(&name, &honest, &d, &cfg, 10));
    assert!(!validate(&name, &attack, &d, &cfg, 10));
    assert!(legacy_accepts(&name, &attack, &cfg, 10));
    // Without the policy certificate the attack is indistinguishable.
    assert!(validate(&name, &attack, &data(&[], &[]), &cfg, 10));

    // A policy from a CA that is not highly trusted is ignored.
    let decoy = DomainPolicy::default().with_issuers([rogue.root_key_id()], true);
    let dc = issue(&rogue, &["example.com"], 4, 365 * DAY, Some(decoy));
    assert!(validate(&name, &honest, &data(&[&dc], &[]), &cfg, 10));

    // Revoking the policy only lifts it; the certificate stays.
    let r = RevocationMessage::sign(&pc.leaf, RevocationScope::PolicyOnly, &good.key);
    assert!(validate(&name, &attack, &data(&[&pc], &[r]), &cfg, 10));
    assert!(validate(
        &n("example.com"),
        &pc,
        &data(&[&pc], &[]),
        &cfg,
        10
    ));
    let r = RevocationMessage::sign(&pc.leaf, RevocationScope::Certificate, &good.key);
    assert!(!validate(
        &n("example.com"),
        &pc,
        &data(&[&pc], &[r]),
        &cfg,
        10
    ));
}

#[test]
fn lifetime_and_wildcard_limits() {
    let ca = root("ca");
    let cfg = config(&[&ca], &[&ca], &[]);
    let p = DomainPolicy::default()
        .with_max_lifetime(90 * DAY, true)
        .with_wildcard_forbidden(true, true);
    let pc = issue(&ca, &["example.com"], 1, 90 * DAY, Some(p));
    let d = data(&[&pc], &[]);
    let name = n("www.example.com");
    let resolved = resolve_policy(&name, &d, &cfg, 10);
    let long = issue(&ca, &["www.example.com"], 2, 100 * DAY, None);
    let short = issue(&ca, &["www.example.com"], 3, 90 * DAY, None);
    let wild = issue(&ca, &["*.example.com"], 4, 30 * DAY, None);
    assert!(fpki::client::violates_policy(&long, &resolved, &name));
    assert!(!fpki::client::violates_policy(&short, &resolved, &name));
    assert!(fpki::client::violates_policy(&wild, &resolved, &name));
    assert!(!validate(&name, &long, &d, &cfg, 10));
    assert!(validate(&name, &short, &d, &cfg, 10));
    assert!(!validate(&name, &wild, &d, &cfg, 10));
}

#[test]
fn subdomain_realm() {
    let ca = root("ca");
    let cfg = config(&[&ca], &[&ca], &[]);
    let realm: NameRealm = "{www.example.com}".parse().unwrap();
    let p = DomainPolicy::default().with_subdomains(realm, true);
    let pc = issue(&ca, &["example.com"], 1, 90 * DAY, Some(p));
    let d = data(&[&pc], &[]);
    let www = issue(&ca, &["www.example.com"], 2, 90 * DAY, None);
    let mail = issue(&ca, &["mail.example.com"], 3, 90 * DAY, None);
    let apex = issue(&ca, &["example.com"], 4, 90 * DAY, None);
    assert!(validate(&n("www.example.com"), &www, &d, &cfg, 10));
    assert!(!validate(&n("mail.example.com"), &mail, &d, &cfg, 10));
    assert!(validate(&n("example.com"), &apex, &d, &cfg, 10));
}

#[test]
fn downgrade_examples() {
    let ca = root("ca");
    let cfg = config(&[&ca], &[&ca], &[]);
    let name = n("example.com");
    assert_eq!(
        http_downgrade_check(&name, &data(&[], &[]), &cfg, 10),
        DowngradeStatus::NoCertificates
    );
    let c = issue(&ca, &["example.com"], 1, 1000, None);
    assert_eq!(
        http_downgrade_check(&name, &data(&[&c], &[]), &cfg, 10),
        DowngradeStatus::CertificatesExist
    );
    assert_eq!(
        http_downgrade_check(&name, &data(&[&c], &[]), &cfg, 5000),
        DowngradeStatus::NoCertificates
    );
    let r = RevocationMessage::sign(&c.leaf, RevocationScope::Certificate, &ca.key);
    assert_eq!(
        http_downgrade_check(&name, &data(&[&c], &[r]), &cfg, 10),
        DowngradeStatus::NoCertificates
    );
    let r = RevocationMessage::sign(&c.leaf, RevocationScope::PolicyOnly, &ca.key);
    assert_eq!(
        http_downgrade_check(&name, &data(&[&c], &[r]), &cfg, 10),
        DowngradeStatus::CertificatesExist
    );
}

#[test]
fn soft_fail_uses_cached_bundles() {
    let good = root("good");
    let rogue = root("rogue");
    let mut m1 = server("m1", &[&good]);
    let policy = DomainPolicy::default().with_issuers([good.root_key_id()], true);
    let pc = issue(&good, &["example.com"], 1, 1000, Some(policy));
    m1.ingest(MapItem::Certificate(pc.clone())).unwrap();
    m1.commit(1);
    let name = n("example.com");
    let bundles = vec![m1.lookup(&name).unwrap()];
    let attack = issue(&rogue, &["example.com"], 9, 2000, None);

    let mut cfg = config(&[&good, &rogue], &[&good], &[&m1]);
    let hard = Client::new(cfg.clone());
    assert_eq!(hard.connect(&name, &pc, &bundles, 10), Verdict::Accept);
    assert!(matches!(
        hard.connect(&name, &attack, &[], 10),
        Verdict::Unavailable(_)
    ));

    cfg.failure_mode = FailureMode::Soft;
    let soft = Client::new(cfg);
    // Nothing cached yet: legacy behaviour.
    assert_eq!(soft.connect(&name, &attack, &[], 10), Verdict::Accept);
    assert_eq!(soft.connect(&name, &pc, &bundles, 10), Verdict::Accept);
    assert_eq!(soft.connect(&name, &attack, &[], 20), Verdict::Reject);
    // The cache lapses with the certificate that filled it.
    assert_eq!(soft.connect(&name, &attack, &[], 1000), Verdict::Reject);
    assert_eq!(soft.connect(&name, &attack, &[], 1001), Verdict::Accept);
}

#[test]
fn selection_examples() {
    let k = |b: u8| KeyId([b; 32]);
    let d = |id: &str, s: &[u8], cost: i64| MapServerDescriptor {
        id: id.into(),
        supported: s.iter().map(|b| k(*b)).collect(),
        cost: Cost::from_integer(cost),
    };
    let servers = vec![
        d("m1", &[1, 2], 1),
        d("m2", &[2, 3], 1),
        d("m3", &[1, 2, 3], 3),
    ];
    let all: BTreeSet<KeyId> = [k(1), k(2), k(3)].into();
    let got = select_map_servers(&servers, &all, 1);
    assert_eq!(got, BTreeSet::from(["m1".to_string(), "m2".to_string()]));
    assert_eq!(selection_cost(&servers, &got), Cost::from_integer(2));

    let one = vec![d("only", &[1, 2, 3], 5)];
    assert_eq!(
        select_map_servers(&one, &all, 1),
        BTreeSet::from(["only".to_string()])
    );
    assert!(select_map_servers(&one, &all, 2).is_empty());

    let two = select_map_servers(&servers, &all, 2);
    assert!(is_multicover(&servers, &two, &all, 2));
}

fn names_pool() -> Vec<&'static str> {
    vec![
        "example.com",
        "www.example.com",
        "a.example.com",
        "*.example.com",
        "b.a.example.com",
    ]
}

/// Issuer bits, wildcard ban, max lifetime and realm index.
type PolicyChoice = (u8, bool, u64, u8);

/// A small random world: three trusted roots of which two are highly
/// trusted, certificates with optional policies and a target certificate.
#[derive(Debug, Clone)]
struct World {
    certs: Vec<(usize, Vec<usize>, u64, Option<PolicyChoice>)>,
    target: (usize, usize, u64),
    name: usize,
}

fn world() -> impl Strategy<Value = World> {
    let cert = (
        0usize..3,
        prop::collection::vec(0usize..5, 1..3),
        prop::sample::select(vec![30 * DAY, 100 * DAY, 400 * DAY]),
        prop::option::of((
            0u8..4,
            any::<bool>(),
            prop::sample::select(vec![60 * DAY, 200 * DAY]),
            0u8..3,
        )),
    );
    (
        prop::collection::vec(cert, 0..6),
        (
            0usize..3,
            0usize..5,
            prop::sample::select(vec![30 * DAY, 100 * DAY, 400 * DAY]),
        ),
        0usize..5,
    )
        .prop_map(|(certs, target, name)| World {
            certs,
            target,
            name,
        })
}

fn build(
    w: &World,
) -> (
    fpki::certmodel::TrustConfig,
    Vec<CertChain>,
    CertChain,
    fpki::naming::DomainName,
) {
    let cas = [root("a"), root("b"), root("c")];
    let cfg = config(&[&cas[0], &cas[1], &cas[2]], &[&cas[0], &cas[1]], &[]);
    let pool = names_pool();
    let realms = ["*", ".example.com", "{www.example.com}"];
    let certs = w
        .certs
        .iter()
        .enumerate()
        .map(|(i, (ca, names, life, pol))| {
            let names: Vec<&str> = names.iter().map(|j| pool[*j]).collect();
            let policy = pol.map(|(iss, wf, ml, realm)| {
                let ids: Vec<KeyId> = cas
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| iss & (1 << j) != 0)
                    .map(|(_, a)| a.root_key_id())
                    .collect();
                DomainPolicy::default()
                    .with_issuers(ids, true)
                    .with_wildcard_forbidden(wf, true)
                    .with_max_lifetime(ml, true)
                    .with_subdomains(realms[realm as usize].parse().unwrap(), true)
            });
            issue(&cas[*ca], &names, 100 + i as u64, *life, policy)
        })
        .collect();
    let target = issue(&cas[w.target.0], &[pool[w.target.1]], 1, w.target.2, None);
    let name = pool[w.name];
    let name = if name.starts_with('*') {
        "x.example.com"
    } else {
        name
    };
    (cfg, certs, target, n(name))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn adding_certificates_never_accepts_more(w in world()) {
        let (cfg, certs, target, name) = build(&w);
        for k in 0..certs.len() {
            let small: Vec<&CertChain> = certs[..k].iter().collect();
            let big: Vec<&CertChain> = certs[..=k].iter().collect();
            let before = validate(&name, &target, &data(&small, &[]), &cfg, 10);
            let after = validate(&name, &target, &data(&big, &[]), &cfg, 10);
            prop_assert!(before || !after);
        }
    }

    #[test]
    fn without_policies_validate_is_legacy(w in world()) {
        let (cfg, certs, target, name) = build(&w);
        let plain: Vec<CertChain> = certs.into_iter().filter(|c| c.leaf.policy.is_none()).collect();
        let refs: Vec<&CertChain> = plain.iter().collect();
        for now in [10, 50 * DAY, 500 * DAY] {
            prop_assert_eq!(
                validate(&name, &target, &data(&refs, &[]), &cfg, now),
                legacy_accepts(&name, &target, &cfg, now)
            );
        }
    }

    #[test]
    fn greedy_stays_within_bound(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (servers, c_in, q) = random_cover_instance(&mut rng, 12, 5);
        let got = select_map_servers(&servers, &c_in, q);
        match brute_force_cover(&servers, &c_in, q) {
            None => prop_assert!(got.is_empty()),
            Some(opt) => {
                prop_assert!(is_multicover(&servers, &got, &c_in, q));
                let bound = (1.0 + ((c_in.len() * q).max(1) as f64).ln()) * opt;
                prop_assert!(selection_cost(&servers, &got) <= bound + 1e-9);
            }
        }
    }

    #[test]
    fn exact_and_float_costs_agree(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (servers, c_in, q) = random_cover_instance(&mut rng, 12, 5);
        let exact: Vec<MapServerDescriptor<Cost>> = servers
            .iter()
            .map(|m| MapServerDescriptor {
                id: m.id.clone(),
                supported: m.supported.clone(),
                cost: Cost::from_integer(m.cost as i64),
            })
            .collect();
        prop_assert_eq!(select_map_servers(&exact, &c_in, q), select_map_servers(&servers, &c_in, q));
    }
}
