//! Sparse Merkle tree keyed by the hash of a key.
//!
//! Logically a complete binary tree of fixed depth (256 by default) whose
//! leaf for key `k` sits at index `SHA-256([nonce ‖] k)`, with bit `i`
//! (most significant first) choosing the right child at level `i` when set.
//! Physically only leaves and nodes with two non-empty children are kept,
//! in a path-copied trie, so clones are cheap snapshots.

use std::sync::{Arc, OnceLock};

use super::MerkleError;
use crate::certmodel::tlv::{DecodeError, Decoder, Encoder};
use crate::certmodel::{sha256, Hash};

/// Depth of map-server trees.
pub const SMT_DEPTH: usize = 256;

pub fn leaf_hash(value: &[u8]) -> Hash {
    sha256(&[&[0x00], value])
}

pub fn node_hash(left: &Hash, right: &Hash) -> Hash {
    sha256(&[&[0x01], left, right])
}

/// `ladder()[h]` is the hash of an empty subtree of height `h`.
fn ladder() -> &'static [Hash] {
    static LADDER: OnceLock<Vec<Hash>> = OnceLock::new();
    LADDER.get_or_init(|| {
        let mut v = Vec::with_capacity(SMT_DEPTH + 1);
        v.push(leaf_hash(&[]));
        for h in 1..=SMT_DEPTH {
            v.push(node_hash(&v[h - 1], &v[h - 1]));
        }
        v
    })
}

/// Hash of an empty node at `node_depth` in a tree of depth `tree_depth`.
pub fn default_hash(tree_depth: usize, node_depth: usize) -> Hash {
    ladder()[tree_depth - node_depth]
}

fn bit(index: &Hash, i: usize) -> bool {
    (index[i / 8] >> (7 - i % 8)) & 1 == 1
}

fn common_prefix(a: &Hash, b: &Hash, cap: usize) -> usize {
    let mut n = 0;
    for (x, y) in a.iter().zip(b.iter()) {
        let d = x ^ y;
        if d == 0 {
            n += 8;
        } else {
            n += d.leading_zeros() as usize;
            break;
        }
        if n >= cap {
            break;
        }
    }
    n.min(cap)
}

/// Leaf index of `key`, truncated to the first `depth` bits.
pub fn key_index(key: &[u8], nonce: Option<&Hash>, depth: usize) -> Hash {
    let mut idx = match nonce {
        Some(n) => sha256(&[n, key]),
        None => sha256(&[key]),
    };
    if depth < SMT_DEPTH {
        for (i, byte) in idx.iter_mut().enumerate() {
            let lo = i * 8;
            if lo >= depth {
                *byte = 0;
            } else if lo + 8 > depth {
                *byte &= 0xffu8 << (lo + 8 - depth);
            }
        }
    }
    idx
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        index: Hash,
        key: Vec<u8>,
        value: Vec<u8>,
        hash: Hash,
    },
    /// Children split on bit `depth`; `*_up` are the children's hashes
    /// lifted to `depth + 1`, `hash` is this node's hash at `depth`.
    Branch {
        index: Hash,
        depth: usize,
        left: Arc<Node>,
        right: Arc<Node>,
        left_up: Hash,
        right_up: Hash,
        hash: Hash,
    },
}

impl Node {
    fn index(&self) -> &Hash {
        match self {
            Node::Leaf { index, .. } | Node::Branch { index, .. } => index,
        }
    }

    fn depth(&self, tree_depth: usize) -> usize {
        match self {
            Node::Leaf { .. } => tree_depth,
            Node::Branch { depth, .. } => *depth,
        }
    }

    fn hash(&self) -> &Hash {
        match self {
            Node::Leaf { hash, .. } | Node::Branch { hash, .. } => hash,
        }
    }
}

/// Hash of the logical node at `to` on the path to `node`.
fn lift(node: &Node, to: usize, tree_depth: usize) -> Hash {
    let idx = node.index();
    let mut h = *node.hash();
    for level in (to..node.depth(tree_depth)).rev() {
        let sib = default_hash(tree_depth, level + 1);
        h = if bit(idx, level) {
            node_hash(&sib, &h)
        } else {
            node_hash(&h, &sib)
        };
    }
    h
}

fn branch(depth: usize, left: Arc<Node>, right: Arc<Node>, tree_depth: usize) -> Node {
    let left_up = lift(&left, depth + 1, tree_depth);
    let right_up = lift(&right, depth + 1, tree_depth);
    Node::Branch {
        index: *left.index(),
        depth,
        hash: node_hash(&left_up, &right_up),
        left,
        right,
        left_up,
        right_up,
    }
}

/// Root hash and the number of stored interior nodes rehashed by an update.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UpdateStats {
    pub root: Hash,
    pub changed_nodes: usize,
}

#[derive(Debug, Clone)]
pub struct SparseMerkleTree {
    depth: usize,
    nonce: Option<Hash>,
    root: Option<Arc<Node>>,
    root_hash: Hash,
    len: usize,
}

impl Default for SparseMerkleTree {
    fn default() -> Self {
        Self::new()
    }
}

impl SparseMerkleTree {
    pub fn new() -> Self {
        Self::with_params(SMT_DEPTH, None)
    }

    pub fn with_nonce(nonce: Option<Hash>) -> Self {
        Self::with_params(SMT_DEPTH, nonce)
    }

    /// A tree of reduced depth whose indices are truncated hashes.
    pub fn with_params(depth: usize, nonce: Option<Hash>) -> Self {
        assert!((1..=SMT_DEPTH).contains(&depth), "depth must be in 1..=256");
        SparseMerkleTree {
            depth,
            nonce,
            root: None,
            root_hash: default_hash(depth, 0),
            len: 0,
        }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn nonce(&self) -> Option<&Hash> {
        self.nonce.as_ref()
    }

    pub fn root(&self) -> Hash {
        self.root_hash
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn index_of(&self, key: &[u8]) -> Hash {
        key_index(key, self.nonce.as_ref(), self.depth)
    }

    /// Inserts, replaces (`Some`) or deletes (`None`) the value under `key`.
    pub fn update(&mut self, key: &[u8], value: Option<&[u8]>) -> Result<Hash, MerkleError> {
        self.update_with_stats(key, value).map(|s| s.root)
    }

    pub fn update_with_stats(
        &mut self,
        key: &[u8],
        value: Option<&[u8]>,
    ) -> Result<UpdateStats, MerkleError> {
        let index = self.index_of(key);
        let mut changed = 0;
        match value {
            Some([]) => return Err(MerkleError::EmptyValue),
            Some(v) => {
                let leaf = Arc::new(Node::Leaf {
                    index,
                    key: key.to_vec(),
                    value: v.to_vec(),
                    hash: leaf_hash(v),
                });
                let (root, added) = match &self.root {
                    None => (leaf, true),
                    Some(r) => self.insert(r, leaf, &mut changed),
                };
                if added {
                    self.len += 1;
                }
                self.root = Some(root);
            }
            None => {
                if let Some(r) = &self.root {
                    if let Some(replacement) = self.remove(r, &index, &mut changed) {
                        self.root = replacement;
                        self.len -= 1;
                    }
                }
            }
        }
        self.root_hash = match &self.root {
            None => default_hash(self.depth, 0),
            Some(r) => lift(r, 0, self.depth),
        };
        Ok(UpdateStats {
            root: self.root_hash,
            changed_nodes: changed,
        })
    }

    /// Returns the new subtree and whether a leaf was added.
    fn insert(&self, node: &Arc<Node>, leaf: Arc<Node>, changed: &mut usize) -> (Arc<Node>, bool) {
        let d = self.depth;
        let nd = node.depth(d);
        let common = common_prefix(node.index(), leaf.index(), nd);
        if common < nd {
            *changed += 1;
            let (l, r) = if bit(leaf.index(), common) {
                (node.clone(), leaf)
            } else {
                (leaf, node.clone())
            };
            return (Arc::new(branch(common, l, r, d)), true);
        }
        match node.as_ref() {
            Node::Leaf { .. } => (leaf, false),
            Node::Branch {
                depth, left, right, ..
            } => {
                *changed += 1;
                let go_right = bit(leaf.index(), *depth);
                let child = if go_right { right } else { left };
                let (new_child, added) = self.insert(child, leaf, changed);
                let (l, r) = if go_right {
                    (left.clone(), new_child)
                } else {
                    (new_child, right.clone())
                };
                (Arc::new(branch(*depth, l, r, d)), added)
            }
        }
    }

    /// `None` if the index is absent, otherwise the replacement subtree.
    fn remove(
        &self,
        node: &Arc<Node>,
        index: &Hash,
        changed: &mut usize,
    ) -> Option<Option<Arc<Node>>> {
        let d = self.depth;
        let nd = node.depth(d);
        if common_prefix(node.index(), index, nd) < nd {
            return None;
        }
        match node.as_ref() {
            Node::Leaf { .. } => Some(None),
            Node::Branch {
                depth, left, right, ..
            } => {
                let go_right = bit(index, *depth);
                let (child, other) = if go_right {
                    (right, left)
                } else {
                    (left, right)
                };
                let replacement = self.remove(child, index, changed)?;
                *changed += 1;
                Some(Some(match replacement {
                    None => other.clone(),
                    Some(c) => {
                        let (l, r) = if go_right {
                            (other.clone(), c)
                        } else {
                            (c, other.clone())
                        };
                        Arc::new(branch(*depth, l, r, d))
                    }
                }))
            }
        }
    }

    pub fn get(&self, key: &[u8]) -> Option<&[u8]> {
        let index = self.index_of(key);
        let mut node = self.root.as_ref()?;
        loop {
            match node.as_ref() {
                Node::Leaf {
                    index: i, value, ..
                } => {
                    return (*i == index).then_some(value.as_slice());
                }
                Node::Branch {
                    depth, left, right, ..
                } => {
                    node = if bit(&index, *depth) { right } else { left };
                }
            }
        }
    }

    /// Stored `(key, value)` pairs in index order.
    pub fn entries(&self) -> Vec<(&[u8], &[u8])> {
        fn walk<'a>(n: &'a Node, out: &mut Vec<(&'a [u8], &'a [u8])>) {
            match n {
                Node::Leaf { key, value, .. } => out.push((key, value)),
                Node::Branch { left, right, .. } => {
                    walk(left, out);
                    walk(right, out);
                }
            }
        }
        let mut out = Vec::with_capacity(self.len);
        if let Some(r) = &self.root {
            walk(r, &mut out);
        }
        out
    }

    /// Presence or absence proof for `key` against the current root.
    pub fn prove(&self, key: &[u8]) -> CompressedProof {
        let d = self.depth;
        let index = self.index_of(key);
        let mut siblings: Vec<Option<Hash>> = vec![None; d];
        let mut leaf_value = None;
        let mut cur = self.root.as_ref();
        while let Some(node) = cur {
            let nd = node.depth(d);
            let common = common_prefix(node.index(), &index, nd);
            if common < nd {
                siblings[common] = Some(lift(node, common + 1, d));
                break;
            }
            match node.as_ref() {
                Node::Leaf { value, .. } => {
                    leaf_value = Some(value.clone());
                    break;
                }
                Node::Branch {
                    depth,
                    left,
                    right,
                    left_up,
                    right_up,
                    ..
                } => {
                    if bit(&index, *depth) {
                        siblings[*depth] = Some(*left_up);
                        cur = Some(right);
                    } else {
                        siblings[*depth] = Some(*right_up);
                        cur = Some(left);
                    }
                }
            }
        }
        let mut bitmap = [0u8; 32];
        let mut hashes = Vec::new();
        for (level, s) in siblings.into_iter().enumerate() {
            if let Some(h) = s {
                if h != default_hash(d, level + 1) {
                    bitmap[level / 8] |= 0x80 >> (level % 8);
                    hashes.push(h);
                }
            }
        }
        CompressedProof {
            key: key.to_vec(),
            leaf_value,
            depth: d,
            bitmap,
            siblings: hashes,
        }
    }
}

/// Proof of presence (`leaf_value` set) or absence of a key.
///
/// `bitmap` marks, root-adjacent first, the levels whose sibling is not the
/// default hash; those siblings are listed in `siblings` in the same order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompressedProof {
    pub key: Vec<u8>,
    pub leaf_value: Option<Vec<u8>>,
    pub depth: usize,
    pub bitmap: [u8; 32],
    pub siblings: Vec<Hash>,
}

impl CompressedProof {
    pub fn is_presence(&self) -> bool {
        self.leaf_value.is_some()
    }

    pub fn bitmap_bit(&self, level: usize) -> bool {
        self.bitmap[level / 8] & (0x80 >> (level % 8)) != 0
    }

    fn popcount(&self) -> usize {
        self.bitmap.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// All `depth` siblings, root-adjacent first, defaults filled in.
    pub fn expand(&self) -> Option<Vec<Hash>> {
        if self.depth == 0
            || self.depth > SMT_DEPTH
            || self.popcount() != self.siblings.len()
            || (self.depth..SMT_DEPTH).any(|l| self.bitmap_bit(l))
        {
            return None;
        }
        let mut it = self.siblings.iter();
        Some(
            (0..self.depth)
                .map(|l| {
                    if self.bitmap_bit(l) {
                        *it.next().expect("popcount checked")
                    } else {
                        default_hash(self.depth, l + 1)
                    }
                })
                .collect(),
        )
    }

    /// Size of the proof without compression: one hash per level.
    pub fn uncompressed_len(&self) -> usize {
        self.depth * 32
    }

    /// Recomputes the root from the leaf (or the empty leaf).
    pub fn compute_root(&self, nonce: Option<&Hash>) -> Option<Hash> {
        let full = self.expand()?;
        let index = key_index(&self.key, nonce, self.depth);
        let mut h = match &self.leaf_value {
            Some(v) if v.is_empty() => return None,
            Some(v) => leaf_hash(v),
            None => default_hash(self.depth, self.depth),
        };
        for level in (0..self.depth).rev() {
            h = if bit(&index, level) {
                node_hash(&full[level], &h)
            } else {
                node_hash(&h, &full[level])
            };
        }
        Some(h)
    }
}

impl CompressedProof {
    /// `len(key) ‖ key ‖ presence ‖ [value TLV] ‖ bitmap ‖ siblings`.
    pub fn to_wire(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(4 + self.key.len() + 33 + 32 * self.siblings.len());
        out.extend_from_slice(&(self.key.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.key);
        match &self.leaf_value {
            Some(v) => {
                out.push(1);
                let mut e = Encoder::new();
                e.bytes(v);
                out.extend_from_slice(&e.into_bytes());
            }
            None => out.push(0),
        }
        out.extend_from_slice(&self.bitmap);
        for s in &self.siblings {
            out.extend_from_slice(s);
        }
        out
    }

    /// Parses a full-depth proof; the sibling count follows from the bitmap.
    pub fn from_wire(buf: &[u8]) -> Result<Self, DecodeError> {
        let mut d = Decoder::new(buf);
        let klen = u32::from_be_bytes(d.take(4)?.try_into().expect("4 bytes")) as usize;
        let key = d.take(klen)?.to_vec();
        let leaf_value = match d.take(1)?[0] {
            0 => None,
            1 => Some(d.bytes()?.to_vec()),
            _ => return Err(DecodeError::Invalid("presence byte".into())),
        };
        let bitmap: [u8; 32] = d.take(32)?.try_into().expect("32 bytes");
        let n: usize = bitmap.iter().map(|b| b.count_ones() as usize).sum();
        let siblings = (0..n)
            .map(|_| d.take(32).map(|s| s.try_into().expect("32 bytes")))
            .collect::<Result<Vec<Hash>, _>>()?;
        d.finish()?;
        Ok(CompressedProof {
            key,
            leaf_value,
            depth: SMT_DEPTH,
            bitmap,
            siblings,
        })
    }
}

pub fn smt_verify(proof: &CompressedProof, root: &Hash, nonce: Option<&Hash>) -> bool {
    proof.compute_root(nonce).as_ref() == Some(root)
}
