//! Statements of the trust calculus and their text syntax.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::naming::{parse_domain, DomainName, NameRealm};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

/// A public key symbol, or the null key `∅` used when no certificate exists.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Key {
    Null,
    Named(String),
}

impl Key {
    pub fn named(s: &str) -> Self {
        Key::Named(s.to_string())
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Key::Null => f.write_str("∅"),
            Key::Named(s) => f.write_str(s),
        }
    }
}

fn is_symbol(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | '\''))
}

impl FromStr for Key {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "∅" | "null" => Ok(Key::Null),
            k if is_symbol(k) => Ok(Key::Named(k.to_string())),
            k => Err(format!("bad key {k:?}")),
        }
    }
}

/// Half-open time interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interval {
    pub start: u64,
    pub end: u64,
}

impl Interval {
    /// `None` for empty intervals.
    pub fn new(start: u64, end: u64) -> Option<Self> {
        (start < end).then_some(Interval { start, end })
    }

    pub fn contains(&self, t: u64) -> bool {
        self.start <= t && t < self.end
    }

    pub fn intersect(&self, o: &Interval) -> Option<Interval> {
        Interval::new(self.start.max(o.start), self.end.min(o.end))
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

impl FromStr for Interval {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| format!("interval must look like [a,b): {s:?}"))?;
        let (a, b) = inner.split_once(',').ok_or("interval needs two bounds")?;
        let a: u64 = a.trim().parse().map_err(|e| format!("{e}"))?;
        let b: u64 = b.trim().parse().map_err(|e| format!("{e}"))?;
        Interval::new(a, b).ok_or_else(|| format!("empty interval {s}"))
    }
}

pub type CaSet = BTreeSet<Key>;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Statement {
    /// `key` is bound to `name` and may certify names in `realm`.
    Aut {
        key: Key,
        name: DomainName,
        realm: NameRealm,
        interval: Interval,
    },
    /// `issuer` certified that `subject` is bound to `name` with `realm`.
    Cert {
        issuer: Key,
        subject: Key,
        name: DomainName,
        realm: NameRealm,
        interval: Interval,
    },
    /// Log (map server) `log` is trusted to record issuance by `cas`.
    LogTrust { log: String, cas: CaSet },
    /// `log` vouches that `key` complies with the policies for `name`.
    Proof {
        log: String,
        key: Key,
        name: DomainName,
        interval: Interval,
    },
    /// `key` complies with the policies set for `name` by `cas`.
    Compliant {
        key: Key,
        name: DomainName,
        cas: CaSet,
        interval: Interval,
    },
}

fn fmt_set(s: &CaSet) -> String {
    let v: Vec<String> = s.iter().map(Key::to_string).collect();
    format!("{{{}}}", v.join(", "))
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Aut {
                key,
                name,
                realm,
                interval,
            } => write!(f, "Aut({key}, {name}, {realm}, {interval})"),
            Statement::Cert {
                issuer,
                subject,
                name,
                realm,
                interval,
            } => write!(f, "Cert({issuer}, {subject}, {name}, {realm}, {interval})"),
            Statement::LogTrust { log, cas } => write!(f, "LogTrust({log}, {})", fmt_set(cas)),
            Statement::Proof {
                log,
                key,
                name,
                interval,
            } => write!(f, "Proof({log}, {key}, {name}, {interval})"),
            Statement::Compliant {
                key,
                name,
                cas,
                interval,
            } => write!(f, "Compliant({key}, {name}, {}, {interval})", fmt_set(cas)),
        }
    }
}

/// Splits on commas outside `{}` and `[)`.
fn split_args(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '{' | '[' => depth += 1,
            '}' | ')' | ']' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out
}

fn parse_name(s: &str) -> Result<DomainName, String> {
    parse_domain(s).map_err(|e| format!("{e}"))
}

fn parse_realm(s: &str) -> Result<NameRealm, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_set(s: &str) -> Result<CaSet, String> {
    let inner = s
        .trim()
        .strip_prefix('{')
        .and_then(|r| r.strip_suffix('}'))
        .ok_or_else(|| format!("expected a set {{...}}: {s:?}"))?;
    inner
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::parse)
        .collect()
}

fn parse_log(s: &str) -> Result<String, String> {
    if is_symbol(s) {
        Ok(s.to_string())
    } else {
        Err(format!("bad log id {s:?}"))
    }
}

impl FromStr for Statement {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let open = s.find('(').ok_or("missing '('")?;
        let head = s[..open].trim();
        let body = s[open + 1..]
            .strip_suffix(')')
            .ok_or("missing closing ')'")?;
        let args = split_args(body);
        let want = |n: usize| {
            if args.len() == n {
                Ok(())
            } else {
                Err(format!("{head} takes {n} arguments, got {}", args.len()))
            }
        };
        match head {
            "Aut" => {
                want(4)?;
                Ok(Statement::Aut {
                    key: args[0].parse()?,
                    name: parse_name(args[1])?,
                    realm: parse_realm(args[2])?,
                    interval: args[3].parse()?,
                })
            }
            "Cert" => {
                want(5)?;
                Ok(Statement::Cert {
                    issuer: args[0].parse()?,
                    subject: args[1].parse()?,
                    name: parse_name(args[2])?,
                    realm: parse_realm(args[3])?,
                    interval: args[4].parse()?,
                })
            }
            "LogTrust" => {
                want(2)?;
                Ok(Statement::LogTrust {
                    log: parse_log(args[0])?,
                    cas: parse_set(args[1])?,
                })
            }
            "Proof" => {
                want(4)?;
                Ok(Statement::Proof {
                    log: parse_log(args[0])?,
                    key: args[1].parse()?,
                    name: parse_name(args[2])?,
                    interval: args[3].parse()?,
                })
            }
            "Compliant" => {
                want(4)?;
                Ok(Statement::Compliant {
                    key: args[0].parse()?,
                    name: parse_name(args[1])?,
                    cas: parse_set(args[2])?,
                    interval: args[3].parse()?,
                })
            }
            other => Err(format!("unknown statement {other:?}")),
        }
    }
}

/// A relying party's view: axiomatic statements plus `f`, given as
/// realm-to-CA-set lines whose matches are unioned.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct View {
    pub statements: BTreeSet<Statement>,
    pub highly_trusted: Vec<(NameRealm, CaSet)>,
}

impl View {
    /// `f(name)`.
    pub fn f(&self, name: &DomainName) -> CaSet {
        self.highly_trusted
            .iter()
            .filter(|(r, _)| r.contains(name))
            .flat_map(|(_, s)| s.iter().cloned())
            .collect()
    }

    /// One statement or `f(realm) = {…}` per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<View, ParseError> {
        let mut v = View::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| ParseError { line: i + 1, msg };
            if let Some(rest) = line.strip_prefix("f(") {
                let (realm, set) = rest
                    .split_once(")")
                    .and_then(|(r, s)| Some((r, s.trim().strip_prefix('=')?)))
                    .ok_or_else(|| err("expected f(realm) = {...}".into()))?;
                let realm = parse_realm(realm).map_err(err)?;
                let set = parse_set(set).map_err(err)?;
                v.highly_trusted.push((realm, set));
            } else {
                v.statements.insert(line.parse().map_err(err)?);
            }
        }
        Ok(v)
    }
}

impl fmt::Display for View {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (r, s) in &self.highly_trusted {
            writeln!(f, "f({r}) = {}", fmt_set(s))?;
        }
        for s in &self.statements {
            writeln!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Parses a list of statements, one per line.
pub fn parse_statements(text: &str) -> Result<BTreeSet<Statement>, ParseError> {
    let v = View::parse(text)?;
    if !v.highly_trusted.is_empty() {
        return Err(ParseError {
            line: 0,
            msg: "statement lists cannot define f".into(),
        });
    }
    Ok(v.statements)
}
