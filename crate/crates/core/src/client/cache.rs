//! Connection decisions, including the soft-fail bundle cache.

use std::collections::HashMap;
use std::sync::Mutex;

use super::validate::{legacy_accepts, validate};
use super::verify::{verify_bundles, ClientError};
use crate::certmodel::{CertChain, FailureMode, TrustConfig};
use crate::mapserver::DomainProofBundle;
use crate::naming::DomainName;

/// Bundles remembered per domain until an expiry time.
#[derive(Debug, Default)]
pub struct BundleCache {
    inner: Mutex<HashMap<DomainName, (Vec<DomainProofBundle>, u64)>>,
}

impl BundleCache {
    pub fn put(&self, n: &DomainName, bundles: Vec<DomainProofBundle>, expires: u64) {
        self.inner
            .lock()
            .expect("cache lock")
            .insert(n.base(), (bundles, expires));
    }

    pub fn get(&self, n: &DomainName, now: u64) -> Option<Vec<DomainProofBundle>> {
        let mut map = self.inner.lock().expect("cache lock");
        match map.get(&n.base()) {
            Some((b, exp)) if now <= *exp => Some(b.clone()),
            Some(_) => {
                map.remove(&n.base());
                None
            }
            None => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Accept,
    Reject,
    /// Not enough verifying map-server data (hard-fail mode).
    Unavailable(ClientError),
}

impl Verdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Verdict::Accept)
    }
}

/// A relying party with its trust configuration.
#[derive(Debug)]
pub struct Client {
    pub config: TrustConfig,
    cache: BundleCache,
}

impl Client {
    pub fn new(config: TrustConfig) -> Self {
        Client {
            config,
            cache: BundleCache::default(),
        }
    }

    /// Decides a TLS connection to `n` presenting `c`, given the bundles
    /// that could be fetched.
    pub fn connect(
        &self,
        n: &DomainName,
        c: &CertChain,
        bundles: &[DomainProofBundle],
        now: u64,
    ) -> Verdict {
        let verdict = |data| {
            if validate(n, c, &data, &self.config, now) {
                Verdict::Accept
            } else {
                Verdict::Reject
            }
        };
        match verify_bundles(bundles, &self.config, n) {
            Ok(data) => {
                if self.config.failure_mode == FailureMode::Soft {
                    self.cache
                        .put(n, bundles.to_vec(), c.leaf.validity.not_after);
                }
                verdict(data)
            }
            Err(e) => match self.config.failure_mode {
                FailureMode::Hard => Verdict::Unavailable(e),
                FailureMode::Soft => {
                    let cached = self
                        .cache
                        .get(n, now)
                        .and_then(|b| verify_bundles(&b, &self.config, n).ok());
                    match cached {
                        Some(data) => verdict(data),
                        None if legacy_accepts(n, c, &self.config, now) => Verdict::Accept,
                        None => Verdict::Reject,
                    }
                }
            },
        }
    }
}
