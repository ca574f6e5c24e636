//! Choosing map servers: greedy weighted set multicover.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use crate::certmodel::{KeyId, MapServerInfo};
use crate::{Cost, Scalar};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapServerDescriptor<S = Cost> {
    pub id: String,
    pub supported: BTreeSet<KeyId>,
    pub cost: S,
}

impl From<&MapServerInfo> for MapServerDescriptor<Cost> {
    fn from(m: &MapServerInfo) -> Self {
        MapServerDescriptor {
            id: m.id.clone(),
            supported: m.supported.clone(),
            cost: m.cost,
        }
    }
}

/// Greedy multicover: until every CA in `c_in` is covered `q` times, add
/// the server with the lowest cost per still-needed CA it supports (ties by
/// id). Returns the empty set when no multicover exists.
pub fn select_map_servers<S: Scalar>(
    servers: &[MapServerDescriptor<S>],
    c_in: &BTreeSet<KeyId>,
    q: usize,
) -> BTreeSet<String> {
    let mut covered: BTreeMap<&KeyId, usize> = c_in.iter().map(|c| (c, 0)).collect();
    let mut chosen: BTreeSet<String> = BTreeSet::new();
    let useful = |m: &MapServerDescriptor<S>, covered: &BTreeMap<&KeyId, usize>| {
        m.supported
            .iter()
            .filter(|c| covered.get(c).is_some_and(|n| *n < q))
            .count()
    };
    while covered.values().any(|n| *n < q) {
        let mut best: Option<(&MapServerDescriptor<S>, usize)> = None;
        for m in servers {
            if chosen.contains(&m.id) {
                continue;
            }
            let n = useful(m, &covered);
            if n == 0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((b, bn)) => {
                    // cost_m / n < cost_b / bn without division.
                    let lhs = m.cost.clone() * S::from_usize(bn).expect("count fits");
                    let rhs = b.cost.clone() * S::from_usize(n).expect("count fits");
                    match lhs.partial_cmp(&rhs) {
                        Some(Ordering::Less) => true,
                        Some(Ordering::Equal) => m.id < b.id,
                        _ => false,
                    }
                }
            };
            if better {
                best = Some((m, n));
            }
        }
        let Some((m, _)) = best else {
            return BTreeSet::new();
        };
        for c in &m.supported {
            if let Some(n) = covered.get_mut(c) {
                *n += 1;
            }
        }
        chosen.insert(m.id.clone());
    }
    chosen
}

/// Total cost of the servers named in `ids`.
pub fn selection_cost<S: Scalar>(servers: &[MapServerDescriptor<S>], ids: &BTreeSet<String>) -> S {
    servers
        .iter()
        .filter(|m| ids.contains(&m.id))
        .fold(S::zero(), |acc, m| acc + m.cost.clone())
}

/// Whether `ids` covers every CA in `c_in` at least `q` times.
pub fn is_multicover<S>(
    servers: &[MapServerDescriptor<S>],
    ids: &BTreeSet<String>,
    c_in: &BTreeSet<KeyId>,
    q: usize,
) -> bool {
    c_in.iter().all(|c| {
        servers
            .iter()
            .filter(|m| ids.contains(&m.id) && m.supported.contains(c))
            .count()
            >= q
    })
}
