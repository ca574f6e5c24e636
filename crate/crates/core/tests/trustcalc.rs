mod common;

use std::collections::BTreeSet;

use common::*;
use fpki::certmodel::{SigningKey, Validity};
use fpki::client::Client;
use fpki::naming::NameRealm;
use fpki::trustcalc::{derive_closure, is_authentic, Interval, Key, Statement, View};
use proptest::prelude::*;

#[test]
fn fixtures_derive_exactly_the_expected_statements() {
    let results = trustcalc_fixtures();
    assert!(results.len() >= 10);
    for (name, ok) in results {
        assert!(ok, "{name}");
    }
}

#[test]
fn authenticity_queries() {
    let v = View::parse(&fixture("trustcalc/rule3-two-level.view")).unwrap();
    let x = Key::named("X");
    let name = n("example.com");
    assert!(is_authentic(&v, &x, &name, 10));
    assert!(is_authentic(&v, &x, &name, 39));
    assert!(!is_authentic(&v, &x, &name, 40));
    assert!(!is_authentic(&v, &x, &n("example.org"), 20));
    let cut = View::parse(&fixture("trustcalc/rule3-two-level-missing.view")).unwrap();
    assert!(!is_authentic(&cut, &x, &name, 20));
}

#[test]
fn parse_errors_name_the_line() {
    let e = View::parse("LogTrust(L, {A})\nAut(A, example.com, *, [5,5))").unwrap_err();
    assert_eq!(e.line, 2);
    assert!(View::parse("Nonsense(1)").is_err());
    assert!(View::parse("Proof(L, X, example.com)").is_err());
}

fn symbol() -> impl Strategy<Value = Key> {
    prop_oneof![
        Just(Key::Null),
        prop::sample::select(vec!["A", "B", "I", "X"]).prop_map(Key::named)
    ]
}

fn interval() -> impl Strategy<Value = Interval> {
    (0u64..4, 1u64..4).prop_map(|(a, w)| Interval::new(a * 10, (a + w) * 10).unwrap())
}

fn dom() -> impl Strategy<Value = fpki::naming::DomainName> {
    prop::sample::select(vec!["example.com", "ca.example", "www.example.com"]).prop_map(n)
}

fn realm() -> impl Strategy<Value = NameRealm> {
    prop::sample::select(vec![
        "*",
        "{example.com}",
        ".example.com",
        "{ca.example, example.com}",
    ])
    .prop_map(|s| s.parse().unwrap())
}

fn cas() -> impl Strategy<Value = BTreeSet<Key>> {
    prop::collection::btree_set(
        prop::sample::select(vec!["A", "B"]).prop_map(Key::named),
        0..3,
    )
}

fn statement() -> impl Strategy<Value = Statement> {
    let log = prop::sample::select(vec!["L1".to_string(), "L2".to_string()]);
    prop_oneof![
        (symbol(), dom(), realm(), interval()).prop_map(|(key, name, realm, interval)| {
            Statement::Aut {
                key,
                name,
                realm,
                interval,
            }
        }),
        (symbol(), symbol(), dom(), realm(), interval()).prop_map(
            |(issuer, subject, name, realm, interval)| Statement::Cert {
                issuer,
                subject,
                name,
                realm,
                interval
            }
        ),
        (log.clone(), cas()).prop_map(|(log, cas)| Statement::LogTrust { log, cas }),
        (log, symbol(), dom(), interval()).prop_map(|(log, key, name, interval)| {
            Statement::Proof {
                log,
                key,
                name,
                interval,
            }
        }),
        (symbol(), dom(), cas(), interval()).prop_map(|(key, name, cas, interval)| {
            Statement::Compliant {
                key,
                name,
                cas,
                interval,
            }
        }),
    ]
}

fn view() -> impl Strategy<Value = View> {
    (prop::collection::btree_set(statement(), 0..12), cas()).prop_map(|(statements, f)| View {
        statements,
        highly_trusted: vec![(NameRealm::All, f)],
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn enlarging_the_view_keeps_derivations(v in view(), extra in prop::collection::vec(statement(), 1..4)) {
        let small = derive_closure(&v);
        let mut big = v.clone();
        big.statements.extend(extra);
        let large = derive_closure(&big);
        prop_assert!(small.is_subset(&large));
    }

    #[test]
    fn derived_authenticity_comes_from_a_certificate(v in view()) {
        let closure = derive_closure(&v);
        for s in closure.difference(&v.statements) {
            if let Statement::Aut { key, name, realm, interval } = s {
                // Some certificate for this binding covers the interval, and
                // the realm is no wider than the certificate's.
                let backed = closure.iter().any(|c| matches!(c,
                    Statement::Cert { subject, name: cn, realm: cr, interval: ci, .. }
                    if subject == key && cn == name
                        && ci.start <= interval.start && interval.end <= ci.end
                        && realm.intersect(cr) == *realm));
                prop_assert!(backed, "{s}");
            }
        }
    }
}

/// Client verdicts and trust-calculus authenticity on the same small world,
/// without policies or revocations: roots A, B, C of which `trusted` are in
/// the trust store, `ht` are highly trusted, the map server supports
/// `supported`, and the presented certificate comes from `issuer`.
fn agree(
    trusted: u8,
    ht: u8,
    supported: u8,
    issuer: usize,
    not_before: u64,
    now: u64,
) -> (bool, bool) {
    let labels = ["A", "B", "C"];
    let roots: Vec<_> = labels.iter().map(|l| root(l)).collect();
    let pick = |mask: u8| -> Vec<usize> { (0..3).filter(|i| mask & (1 << i) != 0).collect() };
    let m = server(
        "L",
        &pick(supported)
            .iter()
            .map(|i| &roots[*i])
            .collect::<Vec<_>>(),
    );
    let mut m = m;
    m.commit(1);
    let cfg = config(
        &pick(trusted).iter().map(|i| &roots[*i]).collect::<Vec<_>>(),
        &pick(ht).iter().map(|i| &roots[*i]).collect::<Vec<_>>(),
        &[&m],
    );
    let name = n("example.com");
    let c = roots[issuer].issue(
        std::slice::from_ref(&name),
        SigningKey::derive(1, "leaf").public(),
        Validity::new(not_before, 1000),
        None,
        1,
    );
    let accepted = Client::new(cfg)
        .connect(&name, &c, &[m.lookup(&name).unwrap()], now)
        .is_accept();

    let set = |mask: u8| {
        pick(mask)
            .iter()
            .map(|i| labels[*i])
            .collect::<Vec<_>>()
            .join(", ")
    };
    let mut text = format!("f(*) = {{{}}}\n", set(ht));
    for i in pick(trusted) {
        text += &format!("Aut({0}, root-{0}.example, *, [0,1000000))\n", labels[i]);
    }
    text += &format!(
        "Cert({}, X, example.com, {{example.com}}, [{not_before},1001))\n",
        labels[issuer]
    );
    text += &format!(
        "LogTrust(L, {{{}}})\nProof(L, X, example.com, [0,1000000))\n",
        set(supported)
    );
    let view = View::parse(&text).unwrap();
    (accepted, is_authentic(&view, &Key::named("X"), &name, now))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn client_and_calculus_agree(
        trusted in 0u8..8,
        ht in 0u8..8,
        supported in 0u8..8,
        issuer in 0usize..3,
        not_before in prop::sample::select(vec![0u64, 500]),
        now in prop::sample::select(vec![100u64, 700, 1500]),
    ) {
        let (client, calculus) = agree(trusted, ht, supported, issuer, not_before, now);
        prop_assert_eq!(client, calculus);
    }
}
