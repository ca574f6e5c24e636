//! Client side: verifying bundles, validating certificates against the
//! policies they prove, downgrade detection and map-server selection.

mod cache;
mod select;
mod validate;
mod verify;

pub use cache::{BundleCache, Client, Verdict};
pub use select::{is_multicover, select_map_servers, selection_cost, MapServerDescriptor};
pub use validate::{
    http_downgrade_check, legacy_accepts, resolve_policy, validate, validate_with_bundles,
    violates_policy, DowngradeStatus,
};
pub use verify::{
    level_keys, verify_bundle, verify_bundles, BundleError, ClientError, VerifiedData,
};
