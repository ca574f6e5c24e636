//! Verifiable structures: the sparse Merkle tree behind map servers, the
//! append-only log of signed map heads, and a sorted-list tree variant.

mod inflation;
pub mod log;
mod sorted;
mod sparse;

use thiserror::Error;

pub use inflation::{expected_max_prefix, expected_proof_inflation};
pub use log::{verify_consistency, verify_inclusion, ConsistencyTree};
pub use sorted::{slt_verify, SortedLeaf, SortedListTree, SortedProof};
pub use sparse::{
    default_hash, key_index, leaf_hash, node_hash, smt_verify, CompressedProof, SparseMerkleTree,
    UpdateStats, SMT_DEPTH,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MerkleError {
    #[error("leaf values must be non-empty")]
    EmptyValue,
    #[error("position {requested} out of range for size {size}")]
    OutOfRange { requested: usize, size: usize },
}
