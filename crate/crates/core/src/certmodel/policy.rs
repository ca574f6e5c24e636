//! Domain policies and the attribute-wise fold that resolves them.

use std::collections::BTreeSet;

use super::keys::KeyId;
use super::tlv::{Canonical, DecodeError, Decoder, Encoder, TAG_POLICY};
use crate::naming::{NamePattern, NameRealm};

/// A policy attribute value together with its inheritance marker.
#[derive(Debug, Clone, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Attribute<T> {
    pub value: T,
    #[serde(default)]
    pub inherited: bool,
}

impl<T> Attribute<T> {
    pub fn new(value: T, inherited: bool) -> Self {
        Attribute { value, inherited }
    }
}

/// The `ISSUERS` value: CA key identifiers allowed to issue for a domain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum IssuerSet {
    /// No restriction. Only meaningful in a browser default policy.
    Any,
    Only(BTreeSet<KeyId>),
}

impl IssuerSet {
    pub fn contains(&self, id: &KeyId) -> bool {
        match self {
            IssuerSet::Any => true,
            IssuerSet::Only(s) => s.contains(id),
        }
    }

    pub fn intersect(&self, other: &IssuerSet) -> IssuerSet {
        match (self, other) {
            (IssuerSet::Any, x) | (x, IssuerSet::Any) => x.clone(),
            (IssuerSet::Only(a), IssuerSet::Only(b)) => {
                IssuerSet::Only(a.intersection(b).copied().collect())
            }
        }
    }

    pub fn is_subset(&self, other: &IssuerSet) -> bool {
        match (self, other) {
            (_, IssuerSet::Any) => true,
            (IssuerSet::Any, IssuerSet::Only(_)) => false,
            (IssuerSet::Only(a), IssuerSet::Only(b)) => a.is_subset(b),
        }
    }
}

impl serde::Serialize for IssuerSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            IssuerSet::Any => s.serialize_str("*"),
            IssuerSet::Only(ids) => s.collect_seq(ids),
        }
    }
}

impl<'de> serde::Deserialize<'de> for IssuerSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(serde::Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Star(String),
            Ids(BTreeSet<KeyId>),
        }
        match Raw::deserialize(d)? {
            Raw::Star(s) if s == "*" => Ok(IssuerSet::Any),
            Raw::Star(s) => Err(serde::de::Error::custom(format!(
                "expected \"*\", got {s:?}"
            ))),
            Raw::Ids(ids) => Ok(IssuerSet::Only(ids)),
        }
    }
}

/// Owner-defined restrictions embedded in a certificate.
///
/// `wildcard_forbidden` is folded as the conjunction of the permission
/// "wildcards allowed", i.e. any contributor forbidding wildcards wins.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainPolicy {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub issuers: Option<Attribute<IssuerSet>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subdomains: Option<Attribute<NameRealm>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wildcard_forbidden: Option<Attribute<bool>>,
    /// Seconds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_lifetime: Option<Attribute<u64>>,
}

/// Which attributes of a contributing policy take part in a fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Applicability {
    pub issuers: bool,
    pub subdomains: bool,
    pub wildcard_forbidden: bool,
    pub max_lifetime: bool,
}

impl Applicability {
    pub const ALL: Applicability = Applicability {
        issuers: true,
        subdomains: true,
        wildcard_forbidden: true,
        max_lifetime: true,
    };

    /// Per-attribute rule: an attribute applies when it is inherited or
    /// when the name being validated is one of the certificate's own names.
    pub fn for_name(policy: &DomainPolicy, name_is_own: bool) -> Applicability {
        fn inh<T>(a: &Option<Attribute<T>>) -> bool {
            a.as_ref().is_some_and(|a| a.inherited)
        }
        Applicability {
            issuers: name_is_own || inh(&policy.issuers),
            subdomains: name_is_own || inh(&policy.subdomains),
            wildcard_forbidden: name_is_own || inh(&policy.wildcard_forbidden),
            max_lifetime: name_is_own || inh(&policy.max_lifetime),
        }
    }
}

impl DomainPolicy {
    /// A policy with every attribute present and unrestricted.
    pub fn permissive() -> Self {
        DomainPolicy {
            issuers: Some(Attribute::new(IssuerSet::Any, false)),
            subdomains: Some(Attribute::new(NameRealm::All, false)),
            wildcard_forbidden: Some(Attribute::new(false, false)),
            max_lifetime: Some(Attribute::new(u64::MAX, false)),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.issuers.is_some()
            && self.subdomains.is_some()
            && self.wildcard_forbidden.is_some()
            && self.max_lifetime.is_some()
    }

    pub fn is_empty(&self) -> bool {
        self.issuers.is_none()
            && self.subdomains.is_none()
            && self.wildcard_forbidden.is_none()
            && self.max_lifetime.is_none()
    }

    pub fn with_issuers<I: IntoIterator<Item = KeyId>>(mut self, ids: I, inherited: bool) -> Self {
        self.issuers = Some(Attribute::new(
            IssuerSet::Only(ids.into_iter().collect()),
            inherited,
        ));
        self
    }

    pub fn with_subdomains(mut self, realm: NameRealm, inherited: bool) -> Self {
        self.subdomains = Some(Attribute::new(realm, inherited));
        self
    }

    pub fn with_wildcard_forbidden(mut self, v: bool, inherited: bool) -> Self {
        self.wildcard_forbidden = Some(Attribute::new(v, inherited));
        self
    }

    pub fn with_max_lifetime(mut self, secs: u64, inherited: bool) -> Self {
        self.max_lifetime = Some(Attribute::new(secs, inherited));
        self
    }

    /// Issuers of a resolved policy. Missing means unrestricted.
    pub fn issuers_value(&self) -> IssuerSet {
        self.issuers
            .as_ref()
            .map_or(IssuerSet::Any, |a| a.value.clone())
    }

    pub fn subdomains_value(&self) -> NameRealm {
        self.subdomains
            .as_ref()
            .map_or(NameRealm::All, |a| a.value.clone())
    }

    pub fn wildcard_forbidden_value(&self) -> bool {
        self.wildcard_forbidden.as_ref().is_some_and(|a| a.value)
    }

    pub fn max_lifetime_value(&self) -> u64 {
        self.max_lifetime.as_ref().map_or(u64::MAX, |a| a.value)
    }
}

/// Resolves the strictest policy: starting from `base`, each applicable
/// attribute is combined by intersection (sets), minimum (maxima), or
/// conjunction of the wildcard permission. Absent attributes are skipped.
pub fn fold_policies<'a, I>(base: &DomainPolicy, others: I) -> DomainPolicy
where
    I: IntoIterator<Item = (&'a DomainPolicy, Applicability)>,
{
    let mut p = base.clone();
    for (other, applies) in others {
        if applies.issuers {
            if let Some(a) = &other.issuers {
                let cur = p.issuers_value();
                let inherited = p.issuers.as_ref().is_some_and(|x| x.inherited);
                p.issuers = Some(Attribute::new(cur.intersect(&a.value), inherited));
            }
        }
        if applies.subdomains {
            if let Some(a) = &other.subdomains {
                let cur = p.subdomains_value();
                let inherited = p.subdomains.as_ref().is_some_and(|x| x.inherited);
                p.subdomains = Some(Attribute::new(cur.intersect(&a.value), inherited));
            }
        }
        if applies.wildcard_forbidden {
            if let Some(a) = &other.wildcard_forbidden {
                let allowed = !p.wildcard_forbidden_value() && !a.value;
                let inherited = p.wildcard_forbidden.as_ref().is_some_and(|x| x.inherited);
                p.wildcard_forbidden = Some(Attribute::new(!allowed, inherited));
            }
        }
        if applies.max_lifetime {
            if let Some(a) = &other.max_lifetime {
                let inherited = p.max_lifetime.as_ref().is_some_and(|x| x.inherited);
                p.max_lifetime = Some(Attribute::new(
                    p.max_lifetime_value().min(a.value),
                    inherited,
                ));
            }
        }
    }
    p
}

fn encode_attr<T>(e: &mut Encoder, a: &Option<Attribute<T>>, f: impl FnOnce(&mut Encoder, &T)) {
    match a {
        None => e.list(0, |_| {}),
        Some(a) => e.list(2, |e| {
            e.bool(a.inherited);
            f(e, &a.value);
        }),
    }
}

fn decode_attr<T>(
    d: &mut Decoder<'_>,
    f: impl FnOnce(&mut Decoder<'_>) -> Result<T, DecodeError>,
) -> Result<Option<Attribute<T>>, DecodeError> {
    let (count, mut inner) = d.list()?;
    let out = match count {
        0 => None,
        2 => {
            let inherited = inner.bool()?;
            Some(Attribute::new(f(&mut inner)?, inherited))
        }
        n => return Err(DecodeError::Invalid(format!("attribute with {n} items"))),
    };
    inner.finish()?;
    Ok(out)
}

pub(crate) fn encode_realm(e: &mut Encoder, r: &NameRealm) {
    match r {
        NameRealm::All => e.list(1, |e| e.int(0)),
        NameRealm::Patterns(ps) => e.list(ps.len() + 1, |e| {
            e.int(1);
            for p in ps {
                e.bytes(p.to_string().as_bytes());
            }
        }),
    }
}

pub(crate) fn decode_realm(d: &mut Decoder<'_>) -> Result<NameRealm, DecodeError> {
    let (count, mut inner) = d.list()?;
    if count == 0 {
        return Err(DecodeError::Invalid("empty realm".into()));
    }
    let realm = match inner.int()? {
        0 if count == 1 => NameRealm::All,
        1 => {
            let mut ps = BTreeSet::new();
            for _ in 1..count {
                let s = inner.string()?;
                let p: NamePattern = s
                    .parse()
                    .map_err(|e| DecodeError::Invalid(format!("{e}")))?;
                ps.insert(p);
            }
            NameRealm::Patterns(ps)
        }
        k => return Err(DecodeError::Invalid(format!("realm kind {k}"))),
    };
    inner.finish()?;
    Ok(realm)
}

impl Canonical for DomainPolicy {
    fn encode(&self, e: &mut Encoder) {
        e.nested(TAG_POLICY, |e| {
            encode_attr(e, &self.issuers, |e, v| match v {
                IssuerSet::Any => e.list(1, |e| e.int(0)),
                IssuerSet::Only(ids) => e.list(ids.len() + 1, |e| {
                    e.int(1);
                    for id in ids {
                        e.bytes(&id.0);
                    }
                }),
            });
            encode_attr(e, &self.subdomains, encode_realm);
            encode_attr(e, &self.wildcard_forbidden, |e, v| e.bool(*v));
            encode_attr(e, &self.max_lifetime, |e, v| e.int(*v));
        });
    }

    fn decode(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        let mut d = d.nested(TAG_POLICY)?;
        let issuers = decode_attr(&mut d, |d| {
            let (count, mut inner) = d.list()?;
            if count == 0 {
                return Err(DecodeError::Invalid("empty issuer set".into()));
            }
            let set = match inner.int()? {
                0 if count == 1 => IssuerSet::Any,
                1 => {
                    let mut ids = BTreeSet::new();
                    for _ in 1..count {
                        ids.insert(KeyId(inner.array32()?));
                    }
                    IssuerSet::Only(ids)
                }
                k => return Err(DecodeError::Invalid(format!("issuer set kind {k}"))),
            };
            inner.finish()?;
            Ok(set)
        })?;
        let subdomains = decode_attr(&mut d, decode_realm)?;
        let wildcard_forbidden = decode_attr(&mut d, |d| d.bool())?;
        let max_lifetime = decode_attr(&mut d, |d| d.int())?;
        d.finish()?;
        Ok(DomainPolicy {
            issuers,
            subdomains,
            wildcard_forbidden,
            max_lifetime,
        })
    }
}
