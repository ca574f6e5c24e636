//! Proof sizes and lookup times over synthetic maps.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::certmodel::{Authority, Canonical, SigningKey, Validity};
use crate::mapserver::{MapItem, MapServer, MapServerConfig};
use crate::naming::{parse_domain, DomainName};
use crate::transport::staple;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub leaves: usize,
    pub depth: usize,
    /// Serialized bundle, including entries and certificates.
    pub mean_bundle_bytes: f64,
    /// The same bundle after stapling compression.
    pub mean_compressed_bytes: f64,
    /// Proof siblings without bitmap compression, all levels.
    pub mean_uncompressed_proof_bytes: f64,
    /// Non-default siblings in the top-level proof.
    pub mean_inclusion_hashes: f64,
    /// Uncompressed top-level absence proof.
    pub absence_proof_bytes: usize,
    pub mean_generation_us: f64,
}

pub const CSV_HEADER: &str = "leaves,depth,mean_bundle_bytes,mean_compressed_bytes,mean_uncompressed_proof_bytes,mean_inclusion_hashes,absence_proof_bytes,mean_generation_us";

impl BenchRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{:.1},{:.1},{:.1},{:.3},{},{:.3}",
            self.leaves,
            self.depth,
            self.mean_bundle_bytes,
            self.mean_compressed_bytes,
            self.mean_uncompressed_proof_bytes,
            self.mean_inclusion_hashes,
            self.absence_proof_bytes,
            self.mean_generation_us
        )
    }
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}", r.csv());
    }
    s
}

fn random_label(rng: &mut ChaCha20Rng) -> String {
    (0..12)
        .map(|_| (b'a' + rng.gen_range(0..26)) as char)
        .collect()
}

/// Name with `depth` levels below the public suffix `com`.
fn name_at(rng: &mut ChaCha20Rng, depth: usize) -> DomainName {
    let mut s = format!("{}.com", random_label(rng));
    for i in 1..depth {
        s = format!("s{i}.{s}");
    }
    parse_domain(&s).expect("generated name")
}

/// One map with `leaves` certificates at `depth`, queried `samples` times.
pub fn bench_one(leaves: usize, depth: usize, seed: u64, samples: usize) -> BenchRow {
    assert!(depth >= 1 && leaves >= 1 && samples >= 1);
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ ((leaves as u64) << 8) ^ depth as u64);
    let ca = Authority::root(
        SigningKey::derive(seed, "bench-ca"),
        Validity::new(0, u64::MAX / 2),
    );
    let subject = SigningKey::derive(seed, "bench-subject").public();
    let mut server = MapServer::new(
        MapServerConfig::new("bench", [ca.key_id()].into()),
        SigningKey::derive(seed, "bench-server"),
    );
    let mut names = Vec::with_capacity(leaves);
    for i in 0..leaves {
        let n = name_at(&mut rng, depth);
        let c = ca.issue(
            std::slice::from_ref(&n),
            subject,
            Validity::new(0, 1 << 40),
            None,
            i as u64,
        );
        if server.ingest(MapItem::Certificate(c)).is_ok() {
            names.push(n);
        }
    }
    server.commit(0);
    let view = server.view().expect("committed");

    let (mut bytes, mut comp, mut unc, mut hashes, mut micros) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..samples {
        let n = &names[rng.gen_range(0..names.len())];
        let t = Instant::now();
        let b = view.lookup(n).expect("valid name");
        micros += t.elapsed().as_secs_f64() * 1e6;
        bytes += b.to_bytes().len() as f64;
        comp += staple(std::slice::from_ref(&b)).compressed_len() as f64;
        unc += b
            .levels
            .iter()
            .map(|l| l.proof.uncompressed_len())
            .sum::<usize>() as f64;
        hashes += b.levels[0].proof.siblings.len() as f64;
    }
    let absent = name_at(&mut rng, 1);
    let absence = view.lookup(&absent).expect("valid name");
    let k = samples as f64;
    BenchRow {
        leaves,
        depth,
        mean_bundle_bytes: bytes / k,
        mean_compressed_bytes: comp / k,
        mean_uncompressed_proof_bytes: unc / k,
        mean_inclusion_hashes: hashes / k,
        absence_proof_bytes: absence.levels[0].proof.uncompressed_len(),
        mean_generation_us: micros / k,
    }
}

/// Every combination of leaf count and depth.
pub fn bench(leaves: &[usize], depths: &[usize], seed: u64, samples: usize) -> Vec<BenchRow> {
    let mut rows = Vec::new();
    for &l in leaves {
        for &d in depths {
            rows.push(bench_one(l, d, seed, samples));
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_bench() {
        let rows = bench(&[64], &[1, 2], 3, 20);
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert_eq!(r.absence_proof_bytes, 8192);
            assert_eq!(r.mean_uncompressed_proof_bytes, 8192.0 * r.depth as f64);
            assert!(r.mean_compressed_bytes < r.mean_bundle_bytes);
        }
        let csv = to_csv(&rows);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.starts_with("leaves,depth"));
    }
}
