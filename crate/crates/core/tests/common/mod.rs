#![allow(dead_code)]

pub mod dense;

use std::collections::BTreeSet;
use std::path::PathBuf;

use fpki::certmodel::{
    Authority, CertChain, KeyId, MapServerInfo, SigningKey, TrustConfig, TrustStore, TrustTuple,
    Validity,
};
use fpki::mapserver::{MapServer, MapServerConfig};
use fpki::naming::{parse_domain, DomainName, NameRealm};
use fpki::Cost;

pub const FOREVER: Validity = Validity {
    not_before: 0,
    not_after: u64::MAX / 2,
};

pub fn n(s: &str) -> DomainName {
    parse_domain(s).unwrap()
}

pub fn root(label: &str) -> Authority {
    Authority::root(SigningKey::derive(7, label), FOREVER)
}

pub fn leaf(ca: &Authority, names: &[&str], serial: u64) -> CertChain {
    let names: Vec<_> = names.iter().map(|s| n(s)).collect();
    ca.issue(
        &names,
        SigningKey::derive(serial, "leaf").public(),
        Validity::new(0, 1_000_000),
        None,
        serial,
    )
}

pub fn server(id: &str, cas: &[&Authority]) -> MapServer {
    let ids: BTreeSet<KeyId> = cas.iter().map(|a| a.root_key_id()).collect();
    MapServer::new(
        MapServerConfig::new(id, ids),
        SigningKey::derive(7, &format!("server/{id}")),
    )
}

/// A config trusting `roots`, highly trusting `ht` for every name and
/// knowing every server in `servers`.
pub fn config(roots: &[&Authority], ht: &[&Authority], servers: &[&MapServer]) -> TrustConfig {
    let mut c = TrustConfig::new(TrustStore::new(roots.iter().map(|a| a.root_cert().clone())));
    c.tuples.push(TrustTuple {
        names: NameRealm::All,
        highly_trusted: ht.iter().map(|a| a.root_key_id()).collect(),
        map_servers: servers.iter().map(|s| s.id().to_string()).collect(),
    });
    c.map_servers = servers
        .iter()
        .map(|s| MapServerInfo {
            id: s.id().to_string(),
            key: s.public_key(),
            supported: s.config().supported.clone(),
            cost: Cost::from_integer(1),
            address: None,
        })
        .collect();
    c
}

fn fixture_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

pub fn fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture_path(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

/// Compares `bytes` with the hex golden file `name`. With `FPKI_BLESS=1`
/// the file is rewritten instead.
pub fn golden(name: &str, bytes: &[u8]) {
    let path = fixture_path(&format!("golden/{name}.hex"));
    let hex = hex::encode(bytes)
        .as_bytes()
        .chunks(64)
        .map(|c| std::str::from_utf8(c).unwrap())
        .collect::<Vec<_>>()
        .join("\n")
        + "\n";
    if std::env::var_os("FPKI_BLESS").is_some() {
        std::fs::write(&path, hex).unwrap();
        return;
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{name}: {e}"));
    assert_eq!(want, hex, "golden {name} differs");
}

/// Cheapest multicover by exhaustive search, `None` if there is none.
pub fn brute_force_cover(
    servers: &[fpki::client::MapServerDescriptor<f64>],
    c_in: &BTreeSet<KeyId>,
    q: usize,
) -> Option<f64> {
    assert!(servers.len() <= 16);
    let mut best: Option<f64> = None;
    for mask in 0u32..(1 << servers.len()) {
        let ok = c_in.iter().all(|c| {
            (0..servers.len())
                .filter(|i| mask & (1 << i) != 0 && servers[*i].supported.contains(c))
                .count()
                >= q
        });
        if ok {
            let cost: f64 = (0..servers.len())
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| servers[i].cost)
                .sum();
            best = Some(best.map_or(cost, |b: f64| b.min(cost)));
        }
    }
    best
}

/// A random selection instance: up to `max_servers` servers over `cas` CAs
/// with integer costs in 1..=10.
pub fn random_cover_instance(
    rng: &mut impl rand::Rng,
    max_servers: usize,
    cas: usize,
) -> (
    Vec<fpki::client::MapServerDescriptor<f64>>,
    BTreeSet<KeyId>,
    usize,
) {
    let ids: Vec<KeyId> = (0..cas).map(|i| KeyId([i as u8 + 1; 32])).collect();
    let count = rng.gen_range(1..=max_servers);
    let servers = (0..count)
        .map(|i| fpki::client::MapServerDescriptor {
            id: format!("m{i:02}"),
            supported: ids.iter().filter(|_| rng.gen_bool(0.4)).copied().collect(),
            cost: rng.gen_range(1..=10) as f64,
        })
        .collect();
    let c_in = ids.iter().filter(|_| rng.gen_bool(0.7)).copied().collect();
    let q = rng.gen_range(1..=3);
    (servers, c_in, q)
}

/// Runs every `trustcalc/*.view` fixture against its `.expected` file.
/// Returns `(fixture, derived == expected)` in file-name order.
pub fn trustcalc_fixtures() -> Vec<(String, bool)> {
    use fpki::trustcalc::{derived, parse_statements, View};
    let dir = fixture_path("trustcalc");
    let mut views: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "view"))
        .collect();
    views.sort();
    views
        .iter()
        .map(|p| {
            let view = View::parse(&std::fs::read_to_string(p).unwrap()).unwrap();
            let want =
                parse_statements(&std::fs::read_to_string(p.with_extension("expected")).unwrap())
                    .unwrap();
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            (name, derived(&view) == want)
        })
        .collect()
}

/// Mean longest shared index prefix with a fixed target over `m` random
/// hashes, estimated from `trials` runs.
pub fn monte_carlo_prefix(m: usize, trials: usize, seed: u64) -> f64 {
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
    let mut total = 0u64;
    for _ in 0..trials {
        let mut best = 0;
        for _ in 0..m {
            // Shared prefix with the target = leading zeros of the XOR,
            // which is itself uniform.
            best = best.max(rand::Rng::gen::<u128>(&mut rng).leading_zeros());
        }
        total += best as u64;
    }
    total as f64 / trials as f64
}
