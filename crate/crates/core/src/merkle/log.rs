//! Append-only Merkle hash tree with inclusion and consistency proofs,
//! using the RFC 6962 tree shape and hashing.

use super::sparse::{leaf_hash, node_hash};
use super::MerkleError;
use crate::certmodel::{sha256, Hash};

/// Root of the tree over `leaves` (already leaf-hashed).
pub fn mth(leaves: &[Hash]) -> Hash {
    match leaves.len() {
        0 => sha256(&[]),
        1 => leaves[0],
        n => {
            let k = split(n);
            node_hash(&mth(&leaves[..k]), &mth(&leaves[k..]))
        }
    }
}

/// Largest power of two strictly below `n` (n ≥ 2).
fn split(n: usize) -> usize {
    1 << (usize::BITS - 1 - (n - 1).leading_zeros())
}

pub fn inclusion_path(index: usize, leaves: &[Hash]) -> Vec<Hash> {
    let n = leaves.len();
    if n <= 1 {
        return Vec::new();
    }
    let k = split(n);
    if index < k {
        let mut p = inclusion_path(index, &leaves[..k]);
        p.push(mth(&leaves[k..]));
        p
    } else {
        let mut p = inclusion_path(index - k, &leaves[k..]);
        p.push(mth(&leaves[..k]));
        p
    }
}

fn subproof(m: usize, leaves: &[Hash], whole: bool) -> Vec<Hash> {
    let n = leaves.len();
    if m == n {
        return if whole { Vec::new() } else { vec![mth(leaves)] };
    }
    let k = split(n);
    if m <= k {
        let mut p = subproof(m, &leaves[..k], whole);
        p.push(mth(&leaves[k..]));
        p
    } else {
        let mut p = subproof(m - k, &leaves[k..], false);
        p.push(mth(&leaves[..k]));
        p
    }
}

pub fn consistency_path(m: usize, leaves: &[Hash]) -> Vec<Hash> {
    if m == 0 || m == leaves.len() {
        return Vec::new();
    }
    subproof(m, leaves, true)
}

pub fn verify_inclusion(leaf: &Hash, index: u64, size: u64, proof: &[Hash], root: &Hash) -> bool {
    if index >= size {
        return false;
    }
    let (mut fnode, mut snode) = (index, size - 1);
    let mut r = *leaf;
    for p in proof {
        if snode == 0 {
            return false;
        }
        if fnode & 1 == 1 || fnode == snode {
            r = node_hash(p, &r);
            while fnode & 1 == 0 && fnode != 0 {
                fnode >>= 1;
                snode >>= 1;
            }
        } else {
            r = node_hash(&r, p);
        }
        fnode >>= 1;
        snode >>= 1;
    }
    snode == 0 && r == *root
}

pub fn verify_consistency(
    size_a: u64,
    size_b: u64,
    root_a: &Hash,
    root_b: &Hash,
    proof: &[Hash],
) -> bool {
    if size_a > size_b {
        return false;
    }
    if size_a == size_b {
        return proof.is_empty() && root_a == root_b;
    }
    if size_a == 0 {
        return proof.is_empty() && *root_a == sha256(&[]);
    }
    let mut path: Vec<Hash> = Vec::with_capacity(proof.len() + 1);
    if size_a.is_power_of_two() {
        path.push(*root_a);
    }
    path.extend_from_slice(proof);
    let Some((first, rest)) = path.split_first() else {
        return false;
    };
    let (mut fnode, mut snode) = (size_a - 1, size_b - 1);
    while fnode & 1 == 1 {
        fnode >>= 1;
        snode >>= 1;
    }
    let (mut fr, mut sr) = (*first, *first);
    for c in rest {
        if snode == 0 {
            return false;
        }
        if fnode & 1 == 1 || fnode == snode {
            fr = node_hash(c, &fr);
            sr = node_hash(c, &sr);
            while fnode & 1 == 0 && fnode != 0 {
                fnode >>= 1;
                snode >>= 1;
            }
        } else {
            sr = node_hash(&sr, c);
        }
        fnode >>= 1;
        snode >>= 1;
    }
    snode == 0 && fr == *root_a && sr == *root_b
}

/// Chronological log of signed map heads (their canonical encodings).
#[derive(Debug, Clone, Default)]
pub struct ConsistencyTree {
    entries: Vec<Vec<u8>>,
    leaf_hashes: Vec<Hash>,
}

impl ConsistencyTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, i: usize) -> Option<&[u8]> {
        self.entries.get(i).map(Vec::as_slice)
    }

    /// Appends an entry and returns the new head.
    pub fn append(&mut self, entry: Vec<u8>) -> Hash {
        self.leaf_hashes.push(leaf_hash(&entry));
        self.entries.push(entry);
        self.root()
    }

    pub fn root(&self) -> Hash {
        mth(&self.leaf_hashes)
    }

    pub fn root_at(&self, size: usize) -> Result<Hash, MerkleError> {
        self.check(size)?;
        Ok(mth(&self.leaf_hashes[..size]))
    }

    fn check(&self, size: usize) -> Result<(), MerkleError> {
        if size > self.len() {
            return Err(MerkleError::OutOfRange {
                requested: size,
                size: self.len(),
            });
        }
        Ok(())
    }

    /// Inclusion of entry `index` in the tree of the first `size` entries.
    pub fn prove_inclusion(&self, index: usize, size: usize) -> Result<Vec<Hash>, MerkleError> {
        self.check(size)?;
        if index >= size {
            return Err(MerkleError::OutOfRange {
                requested: index,
                size,
            });
        }
        Ok(inclusion_path(index, &self.leaf_hashes[..size]))
    }

    pub fn prove_consistency(
        &self,
        size_a: usize,
        size_b: usize,
    ) -> Result<Vec<Hash>, MerkleError> {
        self.check(size_b)?;
        if size_a > size_b {
            return Err(MerkleError::OutOfRange {
                requested: size_a,
                size: size_b,
            });
        }
        Ok(consistency_path(size_a, &self.leaf_hashes[..size_b]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree(n: usize) -> ConsistencyTree {
        let mut t = ConsistencyTree::new();
        for i in 0..n {
            t.append(format!("smh-{i}").into_bytes());
        }
        t
    }

    #[test]
    fn inclusion_all_sizes() {
        let t = tree(13);
        for size in 1..=13 {
            let root = t.root_at(size).unwrap();
            for i in 0..size {
                let p = t.prove_inclusion(i, size).unwrap();
                let leaf = leaf_hash(t.entry(i).unwrap());
                assert!(verify_inclusion(&leaf, i as u64, size as u64, &p, &root));
                let mut bad = leaf;
                bad[3] ^= 0x40;
                assert!(!verify_inclusion(&bad, i as u64, size as u64, &p, &root));
                if size > 1 {
                    assert!(!verify_inclusion(
                        &leaf,
                        ((i + 1) % size) as u64,
                        size as u64,
                        &p,
                        &root
                    ));
                }
            }
        }
        assert_eq!(tree(8).prove_inclusion(5, 8).unwrap().len(), 3);
    }

    #[test]
    fn consistency_all_pairs() {
        let t = tree(12);
        for b in 0..=12 {
            for a in 0..=b {
                let p = t.prove_consistency(a, b).unwrap();
                let (ra, rb) = (t.root_at(a).unwrap(), t.root_at(b).unwrap());
                assert!(
                    verify_consistency(a as u64, b as u64, &ra, &rb, &p),
                    "{a} {b}"
                );
                if a > 0 && a < b {
                    let mut bad = rb;
                    bad[0] ^= 1;
                    assert!(!verify_consistency(a as u64, b as u64, &ra, &bad, &p));
                }
            }
        }
        assert!(t.prove_consistency(5, 5).unwrap().is_empty());
    }

    #[test]
    fn out_of_range() {
        let t = tree(3);
        assert!(t.prove_consistency(2, 4).is_err());
        assert!(t.prove_consistency(3, 2).is_err());
        assert!(t.prove_inclusion(3, 3).is_err());
        assert!(t.root_at(4).is_err());
    }
}
