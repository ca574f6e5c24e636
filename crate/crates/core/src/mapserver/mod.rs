//! Map server: stores every certificate and revocation of its supported
//! CAs under the domains they name, in one sparse tree of e2LDs with a
//! nested tree per domain for its child labels.

mod audit;
mod core;
mod entry;
mod server;

pub use self::core::{
    build_index, chain_verifies, route_certificate, BuiltIndex, MapCore, RejectReason,
};
pub use audit::{is_split_view, AuditError, Auditor};
pub use entry::{
    decode_delta, encode_delta, BundleLevel, DomainProofBundle, MapEntry, MapItem, SignedMapHead,
};
pub use server::{
    AuditRecord, MapError, MapServer, MapServerConfig, MapView, ViewHandle, DEFAULT_MMD,
};
