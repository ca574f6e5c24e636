//! Stapling: the bundles of several map servers in one compressed blob.
//!
//! Layout: `version ‖ DEFLATE(TLV list of bundles)`.

use std::io::{Read, Write};

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;
use thiserror::Error;

use crate::certmodel::tlv::{Canonical, DecodeError, Decoder, Encoder};
use crate::mapserver::DomainProofBundle;

pub const STAPLE_VERSION: u8 = 1;
/// Upper bound on the decompressed size accepted by [`unstaple`].
pub const MAX_STAPLE_PLAIN: u64 = 64 << 20;

#[derive(Debug, Error)]
pub enum StapleError {
    #[error("empty staple")]
    Empty,
    #[error("unsupported staple version {0}")]
    Version(u8),
    #[error("corrupt compressed data")]
    Inflate,
    #[error("decompressed staple exceeds the size limit")]
    TooLarge,
    #[error("decode: {0}")]
    Decode(#[from] DecodeError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StapleBlob {
    pub bytes: Vec<u8>,
    /// Size of the TLV payload before compression.
    pub uncompressed_len: usize,
}

impl StapleBlob {
    pub fn compressed_len(&self) -> usize {
        self.bytes.len()
    }
}

pub fn encode_bundles(bundles: &[DomainProofBundle]) -> Vec<u8> {
    let mut e = Encoder::new();
    e.list(bundles.len(), |e| bundles.iter().for_each(|b| b.encode(e)));
    e.into_bytes()
}

pub fn staple(bundles: &[DomainProofBundle]) -> StapleBlob {
    let plain = encode_bundles(bundles);
    let mut z = DeflateEncoder::new(vec![STAPLE_VERSION], Compression::best());
    z.write_all(&plain).expect("writing to a Vec");
    StapleBlob {
        bytes: z.finish().expect("writing to a Vec"),
        uncompressed_len: plain.len(),
    }
}

pub fn unstaple(blob: &[u8]) -> Result<Vec<DomainProofBundle>, StapleError> {
    let (&version, body) = blob.split_first().ok_or(StapleError::Empty)?;
    if version != STAPLE_VERSION {
        return Err(StapleError::Version(version));
    }
    let mut plain = Vec::new();
    DeflateDecoder::new(body)
        .take(MAX_STAPLE_PLAIN + 1)
        .read_to_end(&mut plain)
        .map_err(|_| StapleError::Inflate)?;
    if plain.len() as u64 > MAX_STAPLE_PLAIN {
        return Err(StapleError::TooLarge);
    }
    let mut d = Decoder::new(&plain);
    let out = d.list_of(DomainProofBundle::decode)?;
    if !d.is_empty() {
        return Err(DecodeError::Trailing(d.remaining().len()).into());
    }
    Ok(out)
}
