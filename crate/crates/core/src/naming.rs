//! Domain names, public-suffix classification and name patterns.
//!
//! Names are stored root-most label first (`www.example.com` becomes
//! `["com", "example", "www"]`). A leading `*.` is stripped and recorded
//! in the `wildcard` flag, so a wildcard name and its base share labels.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

/// Maximum length of an encoded name, in characters.
pub const MAX_NAME_LEN: usize = 253;
/// Maximum length of a single label.
pub const MAX_LABEL_LEN: usize = 63;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NamingError {
    #[error("empty domain name")]
    Empty,
    #[error("empty label in {0:?}")]
    EmptyLabel(String),
    #[error("label {0:?} is longer than 63 characters")]
    LabelTooLong(String),
    #[error("invalid character {1:?} in label {0:?}")]
    InvalidCharacter(String, char),
    #[error("label {0:?} starts or ends with a hyphen")]
    HyphenEdge(String),
    #[error("name exceeds 253 characters")]
    NameTooLong,
    #[error("wildcard is only allowed as the leaf-most label: {0:?}")]
    MisplacedWildcard(String),
    #[error("pattern {0} is not a wildcard")]
    NotWildcard(DomainName),
    #[error("io error reading public suffix list: {0}")]
    Io(String),
}

/// A validated, lowercase, LDH-only domain name.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DomainName {
    labels: Vec<String>,
    wildcard: bool,
}

impl DomainName {
    /// Builds a name from root-most-first labels, validating every label.
    pub fn from_labels<I, S>(labels: I, wildcard: bool) -> Result<Self, NamingError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out = Vec::new();
        for l in labels {
            let l = l.as_ref().to_ascii_lowercase();
            check_label(&l)?;
            out.push(l);
        }
        if out.is_empty() {
            return Err(NamingError::Empty);
        }
        let name = DomainName {
            labels: out,
            wildcard,
        };
        if name.encoded_len() > MAX_NAME_LEN {
            return Err(NamingError::NameTooLong);
        }
        Ok(name)
    }

    /// Labels, root-most first.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn is_wildcard(&self) -> bool {
        self.wildcard
    }

    pub fn depth(&self) -> usize {
        self.labels.len()
    }

    /// The leaf-most label (`www` for `www.example.com`).
    pub fn leaf_label(&self) -> &str {
        self.labels.last().expect("names are never empty")
    }

    /// The name with the wildcard flag cleared.
    pub fn base(&self) -> DomainName {
        DomainName {
            labels: self.labels.clone(),
            wildcard: false,
        }
    }

    /// The wildcard pattern `*.self`.
    pub fn to_wildcard(&self) -> DomainName {
        DomainName {
            labels: self.labels.clone(),
            wildcard: true,
        }
    }

    /// Immediate parent, ignoring the wildcard flag. `None` for a TLD.
    pub fn parent(&self) -> Option<DomainName> {
        if self.labels.len() <= 1 {
            return None;
        }
        Some(DomainName {
            labels: self.labels[..self.labels.len() - 1].to_vec(),
            wildcard: false,
        })
    }

    /// `self` extended by one leaf-most label.
    pub fn child(&self, label: &str) -> Result<DomainName, NamingError> {
        let mut labels = self.labels.clone();
        labels.push(label.to_string());
        DomainName::from_labels(labels, false)
    }

    /// True if `self` equals `other` or lies below it (labels only).
    pub fn is_at_or_below(&self, other: &DomainName) -> bool {
        self.labels.len() >= other.labels.len() && self.labels.starts_with(&other.labels)
    }

    /// True if `self` lies strictly below `other`.
    pub fn is_below(&self, other: &DomainName) -> bool {
        self.labels.len() > other.labels.len() && self.labels.starts_with(&other.labels)
    }

    fn encoded_len(&self) -> usize {
        let dots = self.labels.len() - 1;
        let body: usize = self.labels.iter().map(String::len).sum();
        body + dots + if self.wildcard { 2 } else { 0 }
    }
}

fn check_label(l: &str) -> Result<(), NamingError> {
    if l.is_empty() {
        return Err(NamingError::EmptyLabel(l.to_string()));
    }
    if l.len() > MAX_LABEL_LEN {
        return Err(NamingError::LabelTooLong(l.to_string()));
    }
    if let Some(c) = l
        .chars()
        .find(|c| !(c.is_ascii_lowercase() || c.is_ascii_digit() || *c == '-'))
    {
        if c == '*' {
            return Err(NamingError::MisplacedWildcard(l.to_string()));
        }
        return Err(NamingError::InvalidCharacter(l.to_string(), c));
    }
    if l.starts_with('-') || l.ends_with('-') {
        return Err(NamingError::HyphenEdge(l.to_string()));
    }
    Ok(())
}

/// Parses a dot-separated name, optionally prefixed by `*.`.
pub fn parse_domain(raw: &str) -> Result<DomainName, NamingError> {
    let trimmed = raw.trim();
    let trimmed = trimmed.strip_suffix('.').unwrap_or(trimmed);
    if trimmed.is_empty() {
        return Err(NamingError::Empty);
    }
    let (wildcard, rest) = match trimmed.strip_prefix("*.") {
        Some(rest) => (true, rest),
        None => (false, trimmed),
    };
    if rest.is_empty() || rest == "*" {
        return Err(NamingError::MisplacedWildcard(raw.to_string()));
    }
    let mut labels = Vec::new();
    for label in rest.split('.').rev() {
        if label.is_empty() {
            return Err(NamingError::EmptyLabel(raw.to_string()));
        }
        labels.push(label.to_ascii_lowercase());
    }
    DomainName::from_labels(labels, wildcard)
}

impl FromStr for DomainName {
    type Err = NamingError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_domain(s)
    }
}

impl fmt::Display for DomainName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.wildcard {
            f.write_str("*.")?;
        }
        for (i, l) in self.labels.iter().rev().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            f.write_str(l)?;
        }
        Ok(())
    }
}

impl fmt::Debug for DomainName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DomainName({self})")
    }
}

impl serde::Serialize for DomainName {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for DomainName {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_domain(&s).map_err(serde::de::Error::custom)
    }
}

/// Single-level wildcard match: `*.example.com` matches `www.example.com`
/// but neither `example.com` nor `a.b.example.com`.
pub fn wildcard_matches(pattern: &DomainName, name: &DomainName) -> Result<bool, NamingError> {
    if !pattern.wildcard {
        return Err(NamingError::NotWildcard(pattern.clone()));
    }
    Ok(!name.wildcard
        && name.labels.len() == pattern.labels.len() + 1
        && name.labels.starts_with(&pattern.labels))
}

/// How a wildcard pattern treats its own base name.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WildcardMode {
    /// `*.p` matches exactly one extra label.
    #[default]
    Strict,
    /// `*.p` additionally matches `p` itself.
    IncludeBase,
}

/// True if `name` is `pattern` or, for a wildcard pattern, matches it.
pub fn name_matches(pattern: &DomainName, name: &DomainName, mode: WildcardMode) -> bool {
    if pattern == name {
        return true;
    }
    if !pattern.wildcard {
        return false;
    }
    if mode == WildcardMode::IncludeBase && !name.wildcard && name.labels == pattern.labels {
        return true;
    }
    wildcard_matches(pattern, name).unwrap_or(false)
}

/// One element of a [`NameRealm`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NamePattern {
    /// A single name. Wildcard names (`*.p`) cover one extra label below `p`.
    Name(DomainName),
    /// A name and everything below it. Written `.example.com`.
    Subtree(DomainName),
}

impl NamePattern {
    pub fn covers(&self, name: &DomainName) -> bool {
        match self {
            NamePattern::Name(p) => name_matches(p, name, WildcardMode::Strict),
            NamePattern::Subtree(root) => name.is_at_or_below(root),
        }
    }

    /// Intersection of two patterns, as a set of patterns.
    fn intersect(&self, other: &NamePattern) -> Option<NamePattern> {
        use NamePattern::*;
        match (self, other) {
            (Subtree(a), Subtree(b)) => {
                if a.is_at_or_below(b) {
                    Some(Subtree(a.clone()))
                } else if b.is_at_or_below(a) {
                    Some(Subtree(b.clone()))
                } else {
                    None
                }
            }
            (Subtree(root), Name(n)) | (Name(n), Subtree(root)) => {
                if n.wildcard && root.is_below(&n.base()) {
                    // *.p ∩ subtree(x.p) = {x.p} when root is exactly one label below.
                    (root.labels.len() == n.labels.len() + 1).then(|| Name(root.clone()))
                } else if n.base().is_at_or_below(root) {
                    // Every name covered by `n` lies below `root` unless `n` is
                    // the wildcard of `root` itself, which is still below it.
                    Some(Name(n.clone()))
                } else {
                    None
                }
            }
            (Name(a), Name(b)) => {
                if a == b {
                    Some(Name(a.clone()))
                } else if a.wildcard && !b.wildcard && self.covers(b) {
                    Some(Name(b.clone()))
                } else if b.wildcard && !a.wildcard && other.covers(a) {
                    Some(Name(a.clone()))
                } else {
                    None
                }
            }
        }
    }
}

impl fmt::Display for NamePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NamePattern::Name(n) => write!(f, "{n}"),
            NamePattern::Subtree(n) => write!(f, ".{n}"),
        }
    }
}

impl FromStr for NamePattern {
    type Err = NamingError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s.strip_prefix('.') {
            Some(rest) => {
                let n = parse_domain(rest)?;
                if n.wildcard {
                    return Err(NamingError::MisplacedWildcard(s.to_string()));
                }
                Ok(NamePattern::Subtree(n))
            }
            None => Ok(NamePattern::Name(parse_domain(s)?)),
        }
    }
}

/// A set of names: either every name, or a finite union of patterns.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NameRealm {
    All,
    Patterns(BTreeSet<NamePattern>),
}

impl Default for NameRealm {
    fn default() -> Self {
        NameRealm::empty()
    }
}

impl NameRealm {
    pub fn empty() -> Self {
        NameRealm::Patterns(BTreeSet::new())
    }

    pub fn from_patterns<I: IntoIterator<Item = NamePattern>>(it: I) -> Self {
        NameRealm::Patterns(it.into_iter().collect())
    }

    pub fn from_names<'a, I: IntoIterator<Item = &'a DomainName>>(it: I) -> Self {
        NameRealm::Patterns(it.into_iter().cloned().map(NamePattern::Name).collect())
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, NameRealm::Patterns(p) if p.is_empty())
    }

    pub fn contains(&self, name: &DomainName) -> bool {
        match self {
            NameRealm::All => true,
            NameRealm::Patterns(ps) => ps.iter().any(|p| p.covers(name)),
        }
    }

    pub fn intersect(&self, other: &NameRealm) -> NameRealm {
        match (self, other) {
            (NameRealm::All, r) | (r, NameRealm::All) => r.clone(),
            (NameRealm::Patterns(a), NameRealm::Patterns(b)) => {
                let mut out = BTreeSet::new();
                for x in a {
                    for y in b {
                        if let Some(p) = x.intersect(y) {
                            out.insert(p);
                        }
                    }
                }
                NameRealm::Patterns(out)
            }
        }
    }

    pub fn union(&self, other: &NameRealm) -> NameRealm {
        match (self, other) {
            (NameRealm::All, _) | (_, NameRealm::All) => NameRealm::All,
            (NameRealm::Patterns(a), NameRealm::Patterns(b)) => {
                NameRealm::Patterns(a.union(b).cloned().collect())
            }
        }
    }
}

impl fmt::Display for NameRealm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NameRealm::All => f.write_str("*"),
            NameRealm::Patterns(ps) => {
                f.write_str("{")?;
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{p}")?;
                }
                f.write_str("}")
            }
        }
    }
}

impl FromStr for NameRealm {
    type Err = NamingError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "*" {
            return Ok(NameRealm::All);
        }
        let inner = s
            .strip_prefix('{')
            .and_then(|r| r.strip_suffix('}'))
            .unwrap_or(s);
        let mut out = BTreeSet::new();
        for part in inner.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            out.insert(part.parse()?);
        }
        Ok(NameRealm::Patterns(out))
    }
}

impl serde::Serialize for NameRealm {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> serde::Deserialize<'de> for NameRealm {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Where a name sits in the map-server hierarchy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NameClass {
    PublicSuffixOrInvalid,
    E2ld,
    /// `chain` lists the labels below the e2LD, e2LD-adjacent first.
    Subdomain {
        e2ld: DomainName,
        chain: Vec<String>,
    },
}

impl NameClass {
    /// The e2LD owning `name`, if any.
    pub fn e2ld_of(&self, name: &DomainName) -> Option<DomainName> {
        match self {
            NameClass::PublicSuffixOrInvalid => None,
            NameClass::E2ld => Some(name.base()),
            NameClass::Subdomain { e2ld, .. } => Some(e2ld.clone()),
        }
    }
}

/// Public-suffix rules in the standard list format.
#[derive(Debug, Clone)]
pub struct PublicSuffixList {
    rules: HashSet<Vec<String>>,
    wildcard_rules: HashSet<Vec<String>>,
    exceptions: HashSet<Vec<String>>,
    reserved: HashSet<Vec<String>>,
    source: String,
}

impl PartialEq for PublicSuffixList {
    fn eq(&self, other: &Self) -> bool {
        self.rules == other.rules
            && self.wildcard_rules == other.wildcard_rules
            && self.exceptions == other.exceptions
            && self.reserved == other.reserved
    }
}

impl Eq for PublicSuffixList {}

const BUILTIN_SUFFIXES: &[&str] = &["com", "net", "org", "co.uk", "ac.jp", "gov", "us"];
const BUILTIN_RESERVED: &[&str] = &["invalid"];

impl Default for PublicSuffixList {
    fn default() -> Self {
        Self::builtin()
    }
}

impl PublicSuffixList {
    /// Small deterministic list used by tests and the default configuration.
    pub fn builtin() -> Self {
        let mut psl = PublicSuffixList {
            rules: HashSet::new(),
            wildcard_rules: HashSet::new(),
            exceptions: HashSet::new(),
            reserved: HashSet::new(),
            source: "builtin".into(),
        };
        for s in BUILTIN_SUFFIXES {
            psl.add_rule(s).expect("builtin rule");
        }
        for s in BUILTIN_RESERVED {
            psl.reserved.insert(labels_of(s));
        }
        psl
    }

    /// Parses list text: one rule per line, `//` comments, `*.` wildcard
    /// rules and `!` exception rules.
    pub fn parse(text: &str) -> Result<Self, NamingError> {
        let mut psl = PublicSuffixList {
            rules: HashSet::new(),
            wildcard_rules: HashSet::new(),
            exceptions: HashSet::new(),
            reserved: BUILTIN_RESERVED.iter().map(|s| labels_of(s)).collect(),
            source: "text".into(),
        };
        for line in text.lines() {
            let line = line.split_whitespace().next().unwrap_or("");
            if line.is_empty() || line.starts_with("//") {
                continue;
            }
            psl.add_rule(line)?;
        }
        Ok(psl)
    }

    pub fn from_file(path: &Path) -> Result<Self, NamingError> {
        let text = std::fs::read_to_string(path).map_err(|e| NamingError::Io(e.to_string()))?;
        let mut psl = Self::parse(&text)?;
        psl.source = path.display().to_string();
        Ok(psl)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Rules in list syntax, sorted; reserved names are not included.
    pub fn rules(&self) -> Vec<String> {
        fn text(labels: &[String]) -> String {
            labels.iter().rev().cloned().collect::<Vec<_>>().join(".")
        }
        let mut out: Vec<String> = self
            .rules
            .iter()
            .map(|l| text(l))
            .chain(self.wildcard_rules.iter().map(|l| format!("*.{}", text(l))))
            .chain(self.exceptions.iter().map(|l| format!("!{}", text(l))))
            .collect();
        out.sort();
        out
    }

    /// Adds one rule in list syntax.
    pub fn add_rule(&mut self, rule: &str) -> Result<(), NamingError> {
        if let Some(rest) = rule.strip_prefix('!') {
            self.exceptions.insert(parse_domain(rest)?.labels);
        } else {
            let n = parse_domain(rule)?;
            if n.wildcard {
                self.wildcard_rules.insert(n.labels);
            } else {
                self.rules.insert(n.labels);
            }
        }
        Ok(())
    }

    /// Number of labels in the public suffix of `name`, or `None` when no
    /// rule covers the name's TLD.
    fn suffix_len(&self, labels: &[String]) -> Option<usize> {
        let mut best = None;
        for k in (1..=labels.len()).rev() {
            let cand = &labels[..k];
            if self.exceptions.contains(cand) {
                return Some(k - 1);
            }
            if best.is_none()
                && (self.rules.contains(cand)
                    || (k >= 2 && self.wildcard_rules.contains(&labels[..k - 1])))
            {
                best = Some(k);
            }
        }
        best
    }

    pub fn is_public_suffix(&self, name: &DomainName) -> bool {
        self.suffix_len(&name.labels) == Some(name.labels.len())
    }

    fn is_reserved(&self, labels: &[String]) -> bool {
        (1..=labels.len()).any(|k| self.reserved.contains(&labels[..k]))
    }
}

fn labels_of(s: &str) -> Vec<String> {
    s.split('.').rev().map(str::to_string).collect()
}

/// Classifies `name` (wildcard flag ignored) against `psl`.
pub fn classify(name: &DomainName, psl: &PublicSuffixList) -> NameClass {
    let labels = &name.labels;
    if psl.is_reserved(labels) {
        return NameClass::PublicSuffixOrInvalid;
    }
    let Some(k) = psl.suffix_len(labels) else {
        return NameClass::PublicSuffixOrInvalid;
    };
    if k == 0 || labels.len() <= k {
        return NameClass::PublicSuffixOrInvalid;
    }
    if labels.len() == k + 1 {
        return NameClass::E2ld;
    }
    NameClass::Subdomain {
        e2ld: DomainName {
            labels: labels[..k + 1].to_vec(),
            wildcard: false,
        },
        chain: labels[k + 1..].to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> DomainName {
        parse_domain(s).unwrap()
    }

    #[test]
    fn parse_normalizes_case() {
        let d = n("www.Example.COM");
        assert_eq!(d.labels(), ["com", "example", "www"]);
        assert!(!d.is_wildcard());
        assert_eq!(d.to_string(), "www.example.com");
    }

    #[test]
    fn parse_wildcard() {
        let d = n("*.example.com");
        assert_eq!(d.labels(), ["com", "example"]);
        assert!(d.is_wildcard());
        assert_eq!(d.to_string(), "*.example.com");
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(
            parse_domain("a..com"),
            Err(NamingError::EmptyLabel(_))
        ));
        assert_eq!(parse_domain(""), Err(NamingError::Empty));
        assert!(parse_domain("www.*.com").is_err());
        assert!(parse_domain("*").is_err());
        assert!(parse_domain("-a.com").is_err());
        assert!(parse_domain("a_b.com").is_err());
        assert!(parse_domain(&format!("{}.com", "a".repeat(64))).is_err());
        let long = vec!["abcdefghi"; 26].join(".");
        assert_eq!(parse_domain(&long), Err(NamingError::NameTooLong));
    }

    #[test]
    fn classify_examples() {
        let mut psl = PublicSuffixList::builtin();
        assert_eq!(classify(&n("u-tokyo.ac.jp"), &psl), NameClass::E2ld);
        assert_eq!(
            classify(&n("ac.jp"), &psl),
            NameClass::PublicSuffixOrInvalid
        );
        assert_eq!(classify(&n("jp"), &psl), NameClass::PublicSuffixOrInvalid);
        assert_eq!(
            classify(&n("test.invalid"), &psl),
            NameClass::PublicSuffixOrInvalid
        );
        assert_eq!(
            classify(&n("example.zz"), &psl),
            NameClass::PublicSuffixOrInvalid
        );
        assert_eq!(
            classify(&n("a.b.example.com"), &psl),
            NameClass::Subdomain {
                e2ld: n("example.com"),
                chain: vec!["b".into(), "a".into()]
            }
        );
        psl.add_rule("blogspot.co.uk").unwrap();
        assert_eq!(
            classify(&n("example.blogspot.co.uk"), &psl),
            NameClass::E2ld
        );
        assert_eq!(
            classify(&n("blogspot.co.uk"), &psl),
            NameClass::PublicSuffixOrInvalid
        );
    }

    #[test]
    fn psl_wildcard_and_exception_rules() {
        let psl = PublicSuffixList::parse("// comment\ncom\n*.ck\n!www.ck\n").unwrap();
        assert_eq!(classify(&n("foo.bar.ck"), &psl), NameClass::E2ld);
        assert_eq!(
            classify(&n("bar.ck"), &psl),
            NameClass::PublicSuffixOrInvalid
        );
        assert_eq!(classify(&n("www.ck"), &psl), NameClass::E2ld);
        assert_eq!(classify(&n("example.com"), &psl), NameClass::E2ld);
    }

    #[test]
    fn wildcard_matching() {
        let p = n("*.example.com");
        assert!(wildcard_matches(&p, &n("www.example.com")).unwrap());
        assert!(!wildcard_matches(&p, &n("a.b.example.com")).unwrap());
        assert!(!wildcard_matches(&p, &n("example.com")).unwrap());
        assert!(wildcard_matches(&n("*.sub.example.com"), &n("x.sub.example.com")).unwrap());
        assert!(matches!(
            wildcard_matches(&n("example.com"), &n("www.example.com")),
            Err(NamingError::NotWildcard(_))
        ));
        assert!(name_matches(
            &p,
            &n("example.com"),
            WildcardMode::IncludeBase
        ));
        assert!(!name_matches(&p, &n("example.com"), WildcardMode::Strict));
    }

    #[test]
    fn realm_intersection() {
        let a: NameRealm = "{*.example.com, .org}".parse().unwrap();
        let b: NameRealm = "{www.example.com, foo.org, .example.org}".parse().unwrap();
        let i = a.intersect(&b);
        assert!(i.contains(&n("www.example.com")));
        assert!(i.contains(&n("foo.org")));
        assert!(i.contains(&n("x.y.example.org")));
        assert!(!i.contains(&n("api.example.com")));
        assert_eq!(NameRealm::All.intersect(&a), a);
        let w: NameRealm = "{*.p.com}".parse().unwrap();
        let s: NameRealm = "{.x.p.com}".parse().unwrap();
        assert_eq!(w.intersect(&s), "{x.p.com}".parse().unwrap());
        assert_eq!(a.to_string().parse::<NameRealm>().unwrap(), a);
    }
}
