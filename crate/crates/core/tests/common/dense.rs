//! A fully materialized binary Merkle tree over 16-bit indices, written
//! without reference to the sparse implementation.

use sha2::{Digest, Sha256};

pub const DEPTH: usize = 16;
const LEAVES: usize = 1 << DEPTH;

fn h(parts: &[&[u8]]) -> [u8; 32] {
    let mut s = Sha256::new();
    for p in parts {
        s.update(p);
    }
    s.finalize().into()
}

/// First 16 bits of SHA-256(key).
pub fn index(key: &[u8]) -> usize {
    let d = h(&[key]);
    ((d[0] as usize) << 8) | d[1] as usize
}

#[derive(Clone)]
pub struct Dense {
    /// Heap layout: node 1 is the root, leaves at LEAVES..2*LEAVES.
    nodes: Vec<[u8; 32]>,
    values: Vec<Option<Vec<u8>>>,
}

impl Dense {
    pub fn new() -> Self {
        let mut nodes = vec![[0u8; 32]; 2 * LEAVES];
        let empty = h(&[&[0x00]]);
        for n in nodes.iter_mut().skip(LEAVES) {
            *n = empty;
        }
        for i in (1..LEAVES).rev() {
            nodes[i] = h(&[&[0x01], &nodes[2 * i], &nodes[2 * i + 1]]);
        }
        Dense {
            nodes,
            values: vec![None; LEAVES],
        }
    }

    pub fn root(&self) -> [u8; 32] {
        self.nodes[1]
    }

    pub fn set(&mut self, key: &[u8], value: Option<&[u8]>) {
        let i = index(key);
        self.values[i] = value.map(<[u8]>::to_vec);
        let mut n = LEAVES + i;
        self.nodes[n] = match value {
            Some(v) => h(&[&[0x00], v]),
            None => h(&[&[0x00]]),
        };
        while n > 1 {
            n /= 2;
            self.nodes[n] = h(&[&[0x01], &self.nodes[2 * n], &self.nodes[2 * n + 1]]);
        }
    }

    pub fn get(&self, key: &[u8]) -> Option<&[u8]> {
        self.values[index(key)].as_deref()
    }

    /// The 16 siblings from just below the root down to the leaf.
    pub fn siblings(&self, key: &[u8]) -> Vec<[u8; 32]> {
        let mut n = LEAVES + index(key);
        let mut out = Vec::with_capacity(DEPTH);
        while n > 1 {
            out.push(self.nodes[n ^ 1]);
            n /= 2;
        }
        out.reverse();
        out
    }

    /// Recomputes the root from scratch.
    pub fn full_root(&self) -> [u8; 32] {
        let mut level: Vec<[u8; 32]> = self.nodes[LEAVES..].to_vec();
        while level.len() > 1 {
            level = level
                .chunks(2)
                .map(|c| h(&[&[0x01], &c[0], &c[1]]))
                .collect();
        }
        level[0]
    }
}

/// `count` keys with pairwise distinct 16-bit indices.
pub fn key_pool(count: usize, salt: u64) -> Vec<Vec<u8>> {
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    let mut i = 0u64;
    while out.len() < count {
        let k = format!("key-{salt}-{i}").into_bytes();
        if seen.insert(index(&k)) {
            out.push(k);
        }
        i += 1;
    }
    out
}
