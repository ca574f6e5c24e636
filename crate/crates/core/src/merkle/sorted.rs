//! Sorted-list Merkle tree: each leaf links a domain to its lexicographic
//! successor, so absence is shown by the leaf whose link brackets the name.
//!
//! Domains are ordered by their text form. A sentinel `ε` (the empty
//! string) is always stored and sorts first, so the links form one cycle
//! `ε → first → … → last → ε` and every query has a bracketing leaf.

use std::collections::{BTreeMap, BTreeSet};

use super::log::verify_inclusion;
use super::sparse::node_hash;
use crate::certmodel::tlv::Encoder;
use crate::certmodel::{sha256, Hash};
use crate::naming::DomainName;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortedLeaf {
    pub d1: String,
    pub entry: Vec<u8>,
    pub d2: String,
}

impl SortedLeaf {
    pub fn hash(&self) -> Hash {
        let mut e = Encoder::new();
        e.bytes(self.d1.as_bytes());
        e.bytes(self.d2.as_bytes());
        sha256(&[&[0x00], &e.into_bytes(), &self.entry])
    }

    /// Whether this leaf's link skips over `d`.
    pub fn brackets(&self, d: &str) -> bool {
        self.d1.as_str() < d && (self.d2.is_empty() || d < self.d2.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SortedProof {
    pub leaf: SortedLeaf,
    pub index: u64,
    pub size: u64,
    pub path: Vec<Hash>,
}

impl SortedProof {
    /// The entry proven for `domain`, or `None` if the proof shows absence.
    pub fn entry_for(&self, domain: &DomainName) -> Option<&[u8]> {
        (self.leaf.d1 == domain.to_string()).then_some(self.leaf.entry.as_slice())
    }

    /// Proof size: path hashes plus the adjacent domain.
    pub fn byte_len(&self) -> usize {
        32 * self.path.len() + self.leaf.d2.len()
    }
}

#[derive(Debug, Clone)]
pub struct SortedListTree {
    order: BTreeMap<String, usize>,
    leaves: Vec<SortedLeaf>,
    /// `levels[0]` are leaf hashes; an unpaired last node is promoted.
    levels: Vec<Vec<Hash>>,
}

impl Default for SortedListTree {
    fn default() -> Self {
        Self::new()
    }
}

impl SortedListTree {
    pub fn new() -> Self {
        let sentinel = SortedLeaf {
            d1: String::new(),
            entry: Vec::new(),
            d2: String::new(),
        };
        SortedListTree {
            order: [(String::new(), 0)].into(),
            levels: vec![vec![sentinel.hash()]],
            leaves: vec![sentinel],
        }
    }

    /// Number of leaves, sentinel included.
    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.len() == 1
    }

    pub fn root(&self) -> Hash {
        self.levels.last().expect("at least one level")[0]
    }

    pub fn leaves(&self) -> &[SortedLeaf] {
        &self.leaves
    }

    pub fn get(&self, domain: &DomainName) -> Option<&[u8]> {
        let i = *self.order.get(&domain.to_string())?;
        Some(&self.leaves[i].entry)
    }

    fn predecessor(&self, d: &str) -> usize {
        *self
            .order
            .range::<str, _>((std::ops::Bound::Unbounded, std::ops::Bound::Excluded(d)))
            .next_back()
            .expect("sentinel precedes every domain")
            .1
    }

    /// Sets (`Some`) or removes (`None`) the entry of `domain` and returns
    /// the number of tree nodes whose value changed.
    pub fn update(&mut self, domain: &DomainName, entry: Option<Vec<u8>>) -> usize {
        let d = domain.to_string();
        let mut dirty = BTreeSet::new();
        match (self.order.get(&d).copied(), entry) {
            (Some(i), Some(e)) => {
                self.leaves[i].entry = e;
                dirty.insert(i);
            }
            (None, Some(e)) => {
                let p = self.predecessor(&d);
                let succ = std::mem::replace(&mut self.leaves[p].d2, d.clone());
                let i = self.leaves.len();
                self.leaves.push(SortedLeaf {
                    d1: d.clone(),
                    entry: e,
                    d2: succ,
                });
                self.order.insert(d, i);
                dirty.extend([p, i]);
            }
            (Some(i), None) => {
                let removed = self.leaves.swap_remove(i);
                self.order.remove(&d);
                if i < self.leaves.len() {
                    self.order.insert(self.leaves[i].d1.clone(), i);
                    dirty.insert(i);
                }
                let p = self.predecessor(&d);
                self.leaves[p].d2 = removed.d2;
                dirty.insert(p);
                dirty.insert(self.leaves.len() - 1);
            }
            (None, None) => return 0,
        }
        self.rehash(dirty)
    }

    fn rehash(&mut self, mut dirty: BTreeSet<usize>) -> usize {
        let mut changed = 0;
        let mut width = self.leaves.len();
        let mut level = 0;
        loop {
            if self.levels.len() <= level {
                self.levels.push(Vec::new());
            }
            let old_len = self.levels[level].len();
            self.levels[level].resize(width, [0; 32]);
            if width < old_len || (width > old_len && width > 0) {
                // The unpaired tail may switch between promoted and hashed.
                dirty.insert(width - 1);
            }
            let mut next = BTreeSet::new();
            for &i in &dirty {
                let h = if level == 0 {
                    self.leaves[i].hash()
                } else {
                    let below = &self.levels[level - 1];
                    if 2 * i + 1 < below.len() {
                        node_hash(&below[2 * i], &below[2 * i + 1])
                    } else {
                        below[2 * i]
                    }
                };
                let slot = &mut self.levels[level][i];
                if *slot != h || i >= old_len {
                    changed += 1;
                    *slot = h;
                }
                next.insert(i / 2);
            }
            if width == 1 {
                self.levels.truncate(level + 1);
                return changed;
            }
            dirty = next;
            width = width.div_ceil(2);
            level += 1;
        }
    }

    fn path(&self, mut i: usize) -> Vec<Hash> {
        let mut p = Vec::new();
        for level in &self.levels[..self.levels.len() - 1] {
            let sib = i ^ 1;
            if sib < level.len() {
                p.push(level[sib]);
            }
            i /= 2;
        }
        p
    }

    /// Presence proof for a stored domain, else the bracketing leaf.
    pub fn prove(&self, domain: &DomainName) -> SortedProof {
        let d = domain.to_string();
        let i = match self.order.get(&d) {
            Some(&i) => i,
            None => self.predecessor(&d),
        };
        SortedProof {
            leaf: self.leaves[i].clone(),
            index: i as u64,
            size: self.leaves.len() as u64,
            path: self.path(i),
        }
    }

    /// Domains in link order starting after the sentinel.
    pub fn walk_cycle(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = &self.leaves[0].d2;
        while !cur.is_empty() && out.len() < self.leaves.len() {
            out.push(cur.clone());
            cur = &self.leaves[self.order[cur]].d2;
        }
        out
    }
}

/// Checks inclusion and that the leaf either names `domain` or brackets it.
pub fn slt_verify(proof: &SortedProof, root: &Hash, domain: &DomainName) -> bool {
    let d = domain.to_string();
    (proof.leaf.d1 == d || proof.leaf.brackets(&d))
        && verify_inclusion(
            &proof.leaf.hash(),
            proof.index,
            proof.size,
            &proof.path,
            root,
        )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::merkle::log::mth;
    use crate::naming::parse_domain;

    fn dn(s: &str) -> DomainName {
        parse_domain(s).unwrap()
    }

    #[test]
    fn bracketing_leaf_for_absent_name() {
        let mut t = SortedListTree::new();
        for d in ["a.c.com", "b.c.com", "c.c.com", "d.c.com"] {
            t.update(&dn(d), Some(d.as_bytes().to_vec()));
        }
        let p = t.prove(&dn("bb.c.com"));
        assert_eq!(
            (p.leaf.d1.as_str(), p.leaf.d2.as_str()),
            ("b.c.com", "c.c.com")
        );
        assert!(p.entry_for(&dn("bb.c.com")).is_none());
        assert!(slt_verify(&p, &t.root(), &dn("bb.c.com")));
        assert!(!slt_verify(&p, &t.root(), &dn("d.c.com")));

        let q = t.prove(&dn("c.c.com"));
        assert_eq!(q.entry_for(&dn("c.c.com")), Some(&b"c.c.com"[..]));
        assert!(slt_verify(&q, &t.root(), &dn("c.c.com")));

        let tail = t.prove(&dn("z.com"));
        assert_eq!(tail.leaf.d1, "d.c.com");
        assert!(slt_verify(&tail, &t.root(), &dn("z.com")));
    }

    #[test]
    fn empty_tree_sentinel() {
        let t = SortedListTree::new();
        let p = t.prove(&dn("x.com"));
        assert_eq!(p.leaf.d1, "");
        assert!(p.path.is_empty());
        assert!(slt_verify(&p, &t.root(), &dn("x.com")));
    }

    #[test]
    fn levels_match_rfc_tree_after_updates() {
        let mut t = SortedListTree::new();
        for i in 0..40 {
            t.update(&dn(&format!("n{i}.com")), Some(vec![i as u8 + 1]));
            let hs: Vec<Hash> = t.leaves().iter().map(SortedLeaf::hash).collect();
            assert_eq!(t.root(), mth(&hs));
        }
        for i in (0..40).step_by(3) {
            t.update(&dn(&format!("n{i}.com")), None);
            let hs: Vec<Hash> = t.leaves().iter().map(SortedLeaf::hash).collect();
            assert_eq!(t.root(), mth(&hs));
            assert_eq!(t.walk_cycle().len(), t.len() - 1);
        }
        for l in t.leaves() {
            if !l.d1.is_empty() {
                let d = dn(&l.d1);
                assert!(slt_verify(&t.prove(&d), &t.root(), &d));
            }
        }
    }
}
