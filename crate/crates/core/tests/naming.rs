use fpki::naming::{
    classify, parse_domain, wildcard_matches, DomainName, NameClass, NameRealm, PublicSuffixList,
};
use proptest::prelude::*;

fn label() -> impl Strategy<Value = String> {
    "[a-z0-9]([a-z0-9-]{0,10}[a-z0-9])?"
}

fn name() -> impl Strategy<Value = DomainName> {
    (
        prop::sample::select(vec!["com", "net", "org", "jp", "uk", "io"]),
        prop::collection::vec(label(), 1..5),
        any::<bool>(),
    )
        .prop_map(|(tld, mut rest, wildcard)| {
            rest.insert(0, tld.to_string());
            DomainName::from_labels(rest, wildcard).expect("generated labels are valid")
        })
}

fn psl() -> PublicSuffixList {
    PublicSuffixList::parse(
        "// test list\ncom\nnet\norg\nuk\nco.uk\nblogspot.co.uk\njp\nac.jp\n*.kawasaki.jp\n!city.kawasaki.jp\nio\n",
    )
    .unwrap()
}

#[test]
fn spec_examples() {
    let n = parse_domain("www.Example.COM").unwrap();
    assert_eq!(n.labels(), ["com", "example", "www"]);
    assert!(!n.is_wildcard());
    let w = parse_domain("*.example.com").unwrap();
    assert_eq!(w.labels(), ["com", "example"]);
    assert!(w.is_wildcard());
    assert!(parse_domain("a..com").is_err());
    assert!(parse_domain("").is_err());
    assert!(parse_domain("a.*.com").is_err());
    assert!(parse_domain("-a.com").is_err());
    assert!(parse_domain(&format!("{}.com", "a".repeat(64))).is_err());
}

#[test]
fn length_limit() {
    let long = vec!["a".repeat(60); 4].join(".") + ".com";
    assert_eq!(long.len(), 247);
    assert!(parse_domain(&long).is_ok());
    let too_long = vec!["a".repeat(62); 4].join(".") + ".com";
    assert!(parse_domain(&too_long).is_err());
}

#[test]
fn classify_examples() {
    let p = psl();
    let c = |s: &str| classify(&parse_domain(s).unwrap(), &p);
    assert_eq!(c("u-tokyo.ac.jp"), NameClass::E2ld);
    assert_eq!(c("ac.jp"), NameClass::PublicSuffixOrInvalid);
    assert_eq!(c("example.blogspot.co.uk"), NameClass::E2ld);
    assert_eq!(c("blogspot.co.uk"), NameClass::PublicSuffixOrInvalid);
    assert_eq!(
        c("a.b.example.com"),
        NameClass::Subdomain {
            e2ld: parse_domain("example.com").unwrap(),
            chain: vec!["b".into(), "a".into()],
        }
    );
    assert_eq!(c("foo.kawasaki.jp"), NameClass::PublicSuffixOrInvalid);
    assert_eq!(c("x.foo.kawasaki.jp"), NameClass::E2ld);
    assert_eq!(c("city.kawasaki.jp"), NameClass::E2ld);
    assert_eq!(c("example.test"), NameClass::PublicSuffixOrInvalid);
}

#[test]
fn builtin_list() {
    let p = PublicSuffixList::builtin();
    let c = |s: &str| classify(&parse_domain(s).unwrap(), &p);
    for s in ["com", "net", "org", "co.uk", "ac.jp", "gov", "us"] {
        assert_eq!(c(s), NameClass::PublicSuffixOrInvalid, "{s}");
    }
    assert_eq!(c("test.invalid"), NameClass::PublicSuffixOrInvalid);
    assert_eq!(c("example.co.uk"), NameClass::E2ld);
}

#[test]
fn psl_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("psl.dat");
    std::fs::write(&path, "// c\ncom\n\nco.uk\n").unwrap();
    let p = PublicSuffixList::from_file(&path).unwrap();
    assert!(p.is_public_suffix(&parse_domain("co.uk").unwrap()));
    assert!(!p.is_public_suffix(&parse_domain("net").unwrap()));
}

#[test]
fn wildcard_examples() {
    let w = |p: &str, n: &str| {
        wildcard_matches(&parse_domain(p).unwrap(), &parse_domain(n).unwrap()).unwrap()
    };
    assert!(w("*.example.com", "www.example.com"));
    assert!(!w("*.example.com", "a.b.example.com"));
    assert!(!w("*.example.com", "example.com"));
    assert!(w("*.sub.example.com", "x.sub.example.com"));
    assert!(wildcard_matches(
        &parse_domain("example.com").unwrap(),
        &parse_domain("www.example.com").unwrap()
    )
    .is_err());
}

#[test]
fn realm_syntax() {
    let r: NameRealm = ".example.com".parse().unwrap();
    assert!(r.contains(&parse_domain("example.com").unwrap()));
    assert!(r.contains(&parse_domain("a.b.example.com").unwrap()));
    assert!(!r.contains(&parse_domain("example.org").unwrap()));
    let one: NameRealm = "*.example.com".parse().unwrap();
    assert!(one.contains(&parse_domain("www.example.com").unwrap()));
    assert!(!one.contains(&parse_domain("a.b.example.com").unwrap()));
    assert!("*"
        .parse::<NameRealm>()
        .unwrap()
        .contains(&parse_domain("x.org").unwrap()));
}

proptest! {
    #[test]
    fn parse_display_round_trip(n in name()) {
        let s = n.to_string();
        let back = parse_domain(&s).unwrap();
        prop_assert_eq!(&back, &n);
        prop_assert_eq!(back.to_string(), s.clone());
        prop_assert_eq!(parse_domain(&s.to_uppercase()).unwrap(), n);
    }

    #[test]
    fn classify_is_a_partition(n in name()) {
        let p = psl();
        let n = n.base();
        match classify(&n, &p) {
            NameClass::PublicSuffixOrInvalid => {}
            NameClass::E2ld => {
                prop_assert!(p.is_public_suffix(&n.parent().unwrap()));
            }
            NameClass::Subdomain { e2ld, chain } => {
                prop_assert_eq!(classify(&e2ld, &p), NameClass::E2ld);
                prop_assert!(n.is_below(&e2ld));
                prop_assert_eq!(chain.len(), n.depth() - e2ld.depth());
                let mut rebuilt = e2ld.clone();
                for l in &chain {
                    rebuilt = rebuilt.child(l).unwrap();
                }
                prop_assert_eq!(rebuilt, n);
            }
        }
    }

    #[test]
    fn wildcard_goes_one_level_deeper(base in name(), l in label()) {
        let base = base.base();
        let pattern = base.to_wildcard();
        let n = base.child(&l).unwrap();
        prop_assert!(wildcard_matches(&pattern, &n).unwrap());
        if let Ok(deeper) = n.child("x") {
            prop_assert!(!wildcard_matches(&pattern, &deeper).unwrap());
        }
        let p = psl();
        if let NameClass::E2ld = classify(&base, &p) {
            let is_sub = matches!(classify(&n, &p), NameClass::Subdomain { ref chain, .. } if chain.len() == 1);
            prop_assert!(is_sub);
        }
    }
}
