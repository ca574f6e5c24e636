//! DNS-shaped framing: query names, TXT chunks, requests and responses.
//!
//! Request:  `"FPKI" ‖ version ‖ op ‖ query`, where the query is the ASCII
//! query name for [`OP_LOOKUP`] or a TLV string holding the bare target for
//! [`OP_LOOKUP_BINARY`].
//! Response: `status ‖ ttl (u32 BE) ‖ chunks`, each chunk a length byte
//! followed by up to 255 payload bytes.
//! Stream mode prefixes every message with a 4-byte big-endian length.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::certmodel::tlv::{Decoder, Encoder};
use crate::naming::{parse_domain, DomainName, NamingError, MAX_NAME_LEN};

pub const MAGIC: &[u8; 4] = b"FPKI";
pub const VERSION: u8 = 1;
pub const OP_LOOKUP: u8 = 1;
pub const OP_LOOKUP_BINARY: u8 = 2;
/// Largest datagram either side will send.
pub const MAX_DATAGRAM: usize = 4096;
pub const MAX_TXT_CHUNK: usize = 255;
/// Refuse stream messages above this size.
pub const MAX_STREAM_MESSAGE: usize = 64 << 20;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("bad magic or version")]
    BadHeader,
    #[error("unknown op {0}")]
    UnknownOp(u8),
    #[error("unknown status {0}")]
    UnknownStatus(u8),
    #[error("truncated message")]
    Truncated,
    #[error("query name does not end in .{0}")]
    SuffixMismatch(DomainName),
    #[error("query name too long for the name form")]
    TooLong,
    #[error("name: {0}")]
    Name(#[from] NamingError),
    #[error("stream message of {0} bytes exceeds the limit")]
    Oversized(usize),
    #[error("io: {0}")]
    Io(#[from] io::Error),
}

/// `target.server_suffix`, or [`WireError::TooLong`] past 253 characters.
pub fn encode_query_name(target: &DomainName, suffix: &DomainName) -> Result<String, WireError> {
    let q = format!("{target}.{suffix}");
    if q.len() > MAX_NAME_LEN {
        return Err(WireError::TooLong);
    }
    Ok(q)
}

pub fn decode_query_name(query: &str, suffix: &DomainName) -> Result<DomainName, WireError> {
    let q = query
        .strip_suffix('.')
        .unwrap_or(query)
        .to_ascii_lowercase();
    let tail = format!(".{suffix}");
    let target = q
        .strip_suffix(&tail)
        .ok_or_else(|| WireError::SuffixMismatch(suffix.clone()))?;
    Ok(parse_domain(target)?)
}

/// Splits into maximal 255-byte TXT strings; empty input gives one empty chunk.
pub fn chunk_txt(payload: &[u8]) -> Vec<Vec<u8>> {
    if payload.is_empty() {
        return vec![Vec::new()];
    }
    payload.chunks(MAX_TXT_CHUNK).map(<[u8]>::to_vec).collect()
}

pub fn unchunk_txt(chunks: &[Vec<u8>]) -> Vec<u8> {
    chunks.concat()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Request {
    /// Query name `target.suffix`.
    Lookup(String),
    /// Target name sent as-is when the query name would be too long.
    LookupBinary(DomainName),
}

impl Request {
    pub fn for_name(target: &DomainName, suffix: &DomainName) -> Request {
        match encode_query_name(target, suffix) {
            Ok(q) => Request::Lookup(q),
            Err(_) => Request::LookupBinary(target.clone()),
        }
    }

    /// The looked-up name, for a server answering under `suffix`.
    pub fn target(&self, suffix: &DomainName) -> Result<DomainName, WireError> {
        match self {
            Request::Lookup(q) => decode_query_name(q, suffix),
            Request::LookupBinary(n) => Ok(n.clone()),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = MAGIC.to_vec();
        out.push(VERSION);
        match self {
            Request::Lookup(q) => {
                out.push(OP_LOOKUP);
                out.extend_from_slice(q.as_bytes());
            }
            Request::LookupBinary(n) => {
                out.push(OP_LOOKUP_BINARY);
                let mut e = Encoder::new();
                e.bytes(n.to_string().as_bytes());
                out.extend(e.into_bytes());
            }
        }
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Request, WireError> {
        if b.len() < 6 || &b[..4] != MAGIC || b[4] != VERSION {
            return Err(WireError::BadHeader);
        }
        let body = &b[6..];
        match b[5] {
            OP_LOOKUP => {
                let q = std::str::from_utf8(body).map_err(|_| WireError::BadHeader)?;
                Ok(Request::Lookup(q.to_string()))
            }
            OP_LOOKUP_BINARY => {
                let mut d = Decoder::new(body);
                let s = d.string().map_err(|_| WireError::Truncated)?;
                if !d.is_empty() {
                    return Err(WireError::Truncated);
                }
                Ok(Request::LookupBinary(parse_domain(&s)?))
            }
            op => Err(WireError::UnknownOp(op)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Status {
    Ok = 0,
    /// Too large for a datagram; retry in stream mode.
    Truncated = 1,
    /// Public suffix, invalid name or wrong server suffix.
    InvalidName = 2,
    NoRevision = 3,
    BadRequest = 4,
}

impl TryFrom<u8> for Status {
    type Error = WireError;
    fn try_from(v: u8) -> Result<Self, WireError> {
        Ok(match v {
            0 => Status::Ok,
            1 => Status::Truncated,
            2 => Status::InvalidName,
            3 => Status::NoRevision,
            4 => Status::BadRequest,
            other => return Err(WireError::UnknownStatus(other)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: Status,
    pub ttl: u32,
    pub payload: Vec<u8>,
}

impl Response {
    pub fn error(status: Status) -> Response {
        Response {
            status,
            ttl: 0,
            payload: Vec::new(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let chunks = chunk_txt(&self.payload);
        let mut out = Vec::with_capacity(5 + self.payload.len() + chunks.len());
        out.push(self.status as u8);
        out.extend_from_slice(&self.ttl.to_be_bytes());
        for c in chunks {
            out.push(c.len() as u8);
            out.extend(c);
        }
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Response, WireError> {
        if b.len() < 5 {
            return Err(WireError::Truncated);
        }
        let status = Status::try_from(b[0])?;
        let ttl = u32::from_be_bytes(b[1..5].try_into().expect("4 bytes"));
        let mut chunks = Vec::new();
        let mut rest = &b[5..];
        while let Some((&len, tail)) = rest.split_first() {
            let len = len as usize;
            if tail.len() < len {
                return Err(WireError::Truncated);
            }
            chunks.push(tail[..len].to_vec());
            rest = &tail[len..];
        }
        Ok(Response {
            status,
            ttl,
            payload: unchunk_txt(&chunks),
        })
    }
}

pub fn write_frame<W: Write>(w: &mut W, msg: &[u8]) -> Result<(), WireError> {
    if msg.len() > MAX_STREAM_MESSAGE {
        return Err(WireError::Oversized(msg.len()));
    }
    w.write_all(&(msg.len() as u32).to_be_bytes())?;
    w.write_all(msg)?;
    w.flush()?;
    Ok(())
}

/// `None` on a clean end of stream.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<Vec<u8>>, WireError> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_STREAM_MESSAGE {
        return Err(WireError::Oversized(len));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(Some(buf))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> DomainName {
        parse_domain(s).unwrap()
    }

    #[test]
    fn query_name_example() {
        let q = encode_query_name(&n("www.example.com"), &n("mapserver1.net")).unwrap();
        assert_eq!(q, "www.example.com.mapserver1.net");
        assert_eq!(
            decode_query_name(&q, &n("mapserver1.net")).unwrap(),
            n("www.example.com")
        );
        assert!(matches!(
            decode_query_name(&q, &n("mapserver2.net")),
            Err(WireError::SuffixMismatch(_))
        ));
    }

    #[test]
    fn long_name_falls_back() {
        let label = "a".repeat(60);
        let target = n(&format!("{label}.{label}.{label}.{label}.com"));
        let suffix = n("mapserver1.net");
        assert!(matches!(
            encode_query_name(&target, &suffix),
            Err(WireError::TooLong)
        ));
        let r = Request::for_name(&target, &suffix);
        assert_eq!(r, Request::LookupBinary(target.clone()));
        assert_eq!(
            Request::from_bytes(&r.to_bytes())
                .unwrap()
                .target(&suffix)
                .unwrap(),
            target
        );
    }

    #[test]
    fn chunk_sizes() {
        let c = chunk_txt(&[7u8; 300]);
        assert_eq!(c.iter().map(Vec::len).collect::<Vec<_>>(), vec![255, 45]);
        assert_eq!(chunk_txt(&[]), vec![Vec::<u8>::new()]);
    }

    #[test]
    fn golden_request() {
        let r = Request::Lookup("a.com.m.net".into());
        assert_eq!(r.to_bytes(), b"FPKI\x01\x01a.com.m.net".to_vec());
        let b = Request::LookupBinary(n("a.com")).to_bytes();
        assert_eq!(b, b"FPKI\x01\x02\x01\x00\x00\x00\x05a.com".to_vec());
    }

    #[test]
    fn golden_response() {
        let r = Response {
            status: Status::Ok,
            ttl: 0x0102_0304,
            payload: b"hi".to_vec(),
        };
        assert_eq!(r.to_bytes(), vec![0, 1, 2, 3, 4, 2, b'h', b'i']);
        assert_eq!(
            Response::error(Status::Truncated).to_bytes(),
            vec![1, 0, 0, 0, 0, 0]
        );
        assert_eq!(Response::from_bytes(&r.to_bytes()).unwrap(), r);
    }

    #[test]
    fn frames() {
        let mut buf = Vec::new();
        write_frame(&mut buf, b"abc").unwrap();
        assert_eq!(buf, vec![0, 0, 0, 3, b'a', b'b', b'c']);
        let mut r = &buf[..];
        assert_eq!(read_frame(&mut r).unwrap(), Some(b"abc".to_vec()));
        assert_eq!(read_frame(&mut r).unwrap(), None);
    }
}
