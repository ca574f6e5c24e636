//! Proof delivery: DNS-style lookups over UDP with a TCP fallback, and
//! stapled bundles.

mod net;
mod staple;
mod wire;

pub use net::{
    fetch, fetch_with_failover, serve, system_clock, Clock, FetchError, FetchOptions, Fetched,
    ServerAddr, TransportMode, TransportServer,
};
pub use staple::{encode_bundles, staple, unstaple, StapleBlob, StapleError, STAPLE_VERSION};
pub use wire::{
    chunk_txt, decode_query_name, encode_query_name, read_frame, unchunk_txt, write_frame, Request,
    Response, Status, WireError, MAX_DATAGRAM, MAX_TXT_CHUNK,
};
