//! Deterministic tag-length-value encoding.
//!
//! Every element is `tag (1 byte) ‖ length (4 bytes, big-endian) ‖ payload`.
//! Integers are 8-byte big-endian. A list payload starts with a 4-byte
//! big-endian item count followed by the encoded items.

use thiserror::Error;

pub const TAG_BYTES: u8 = 0x01;
pub const TAG_INT: u8 = 0x02;
pub const TAG_LIST: u8 = 0x03;
pub const TAG_CERTIFICATE: u8 = 0x10;
pub const TAG_POLICY: u8 = 0x11;
pub const TAG_REVOCATION: u8 = 0x12;
pub const TAG_ENTRY: u8 = 0x13;
pub const TAG_SMH: u8 = 0x14;
pub const TAG_BUNDLE: u8 = 0x15;
pub const TAG_CHAIN: u8 = 0x16;
pub const TAG_SNAPSHOT: u8 = 0x17;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("unexpected end of input")]
    Truncated,
    #[error("expected tag {expected:#04x}, found {found:#04x}")]
    UnexpectedTag { expected: u8, found: u8 },
    #[error("integer field has length {0}, expected 8")]
    BadIntLength(usize),
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error("invalid value: {0}")]
    Invalid(String),
}

/// Appends TLV elements to a buffer.
#[derive(Debug, Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.buf
    }

    fn header(&mut self, tag: u8, len: usize) {
        self.buf.push(tag);
        self.buf
            .extend_from_slice(&u32::try_from(len).expect("element too large").to_be_bytes());
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.header(TAG_BYTES, b.len());
        self.buf.extend_from_slice(b);
    }

    pub fn int(&mut self, v: u64) {
        self.header(TAG_INT, 8);
        self.buf.extend_from_slice(&v.to_be_bytes());
    }

    pub fn bool(&mut self, v: bool) {
        self.int(u64::from(v));
    }

    /// Writes a list of `count` items produced by `f`.
    pub fn list(&mut self, count: usize, f: impl FnOnce(&mut Encoder)) {
        let mut inner = Encoder::new();
        inner
            .buf
            .extend_from_slice(&u32::try_from(count).expect("list too long").to_be_bytes());
        f(&mut inner);
        self.header(TAG_LIST, inner.buf.len());
        self.buf.extend_from_slice(&inner.buf);
    }

    /// Writes an optional value as a list of zero or one items.
    pub fn option<T>(&mut self, v: Option<&T>, f: impl FnOnce(&mut Encoder, &T)) {
        self.list(usize::from(v.is_some()), |e| {
            if let Some(v) = v {
                f(e, v)
            }
        });
    }

    /// Writes a composite element with its own tag.
    pub fn nested(&mut self, tag: u8, f: impl FnOnce(&mut Encoder)) {
        let mut inner = Encoder::new();
        f(&mut inner);
        self.header(tag, inner.buf.len());
        self.buf.extend_from_slice(&inner.buf);
    }

    pub fn raw(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
}

/// Reads TLV elements from a slice.
#[derive(Debug, Clone)]
pub struct Decoder<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Decoder { buf, pos: 0 }
    }

    pub fn is_empty(&self) -> bool {
        self.pos >= self.buf.len()
    }

    pub fn remaining(&self) -> &'a [u8] {
        &self.buf[self.pos..]
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        let end = self.pos.checked_add(n).ok_or(DecodeError::Truncated)?;
        if end > self.buf.len() {
            return Err(DecodeError::Truncated);
        }
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn peek_tag(&self) -> Option<u8> {
        self.buf.get(self.pos).copied()
    }

    fn element(&mut self, tag: u8) -> Result<&'a [u8], DecodeError> {
        let h = self.take(5)?;
        if h[0] != tag {
            return Err(DecodeError::UnexpectedTag {
                expected: tag,
                found: h[0],
            });
        }
        let len = u32::from_be_bytes([h[1], h[2], h[3], h[4]]) as usize;
        self.take(len)
    }

    pub fn bytes(&mut self) -> Result<&'a [u8], DecodeError> {
        self.element(TAG_BYTES)
    }

    pub fn array32(&mut self) -> Result<[u8; 32], DecodeError> {
        let b = self.bytes()?;
        b.try_into()
            .map_err(|_| DecodeError::Invalid(format!("expected 32 bytes, got {}", b.len())))
    }

    pub fn string(&mut self) -> Result<String, DecodeError> {
        String::from_utf8(self.bytes()?.to_vec()).map_err(|e| DecodeError::Invalid(e.to_string()))
    }

    pub fn int(&mut self) -> Result<u64, DecodeError> {
        let p = self.element(TAG_INT)?;
        let arr: [u8; 8] = p
            .try_into()
            .map_err(|_| DecodeError::BadIntLength(p.len()))?;
        Ok(u64::from_be_bytes(arr))
    }

    pub fn bool(&mut self) -> Result<bool, DecodeError> {
        match self.int()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(DecodeError::Invalid(format!("boolean {v}"))),
        }
    }

    /// Opens a list, returning its item count and a decoder over the items.
    pub fn list(&mut self) -> Result<(usize, Decoder<'a>), DecodeError> {
        let p = self.element(TAG_LIST)?;
        if p.len() < 4 {
            return Err(DecodeError::Truncated);
        }
        let count = u32::from_be_bytes([p[0], p[1], p[2], p[3]]) as usize;
        Ok((count, Decoder::new(&p[4..])))
    }

    /// Reads a list whose items are decoded by `f`.
    pub fn list_of<T>(
        &mut self,
        mut f: impl FnMut(&mut Decoder<'a>) -> Result<T, DecodeError>,
    ) -> Result<Vec<T>, DecodeError> {
        let (count, mut d) = self.list()?;
        // Each item takes at least one header.
        if count > d.buf.len() / 5 + 1 {
            return Err(DecodeError::Truncated);
        }
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            out.push(f(&mut d)?);
        }
        d.finish()?;
        Ok(out)
    }

    pub fn option<T>(
        &mut self,
        f: impl FnOnce(&mut Decoder<'a>) -> Result<T, DecodeError>,
    ) -> Result<Option<T>, DecodeError> {
        let (count, mut d) = self.list()?;
        let out = match count {
            0 => None,
            1 => Some(f(&mut d)?),
            n => {
                return Err(DecodeError::Invalid(format!(
                    "optional field with {n} items"
                )))
            }
        };
        d.finish()?;
        Ok(out)
    }

    pub fn nested(&mut self, tag: u8) -> Result<Decoder<'a>, DecodeError> {
        Ok(Decoder::new(self.element(tag)?))
    }

    pub fn finish(&self) -> Result<(), DecodeError> {
        match self.buf.len() - self.pos.min(self.buf.len()) {
            0 => Ok(()),
            n => Err(DecodeError::Trailing(n)),
        }
    }
}

/// Objects with a canonical byte encoding.
pub trait Canonical: Sized {
    fn encode(&self, enc: &mut Encoder);
    fn decode(dec: &mut Decoder<'_>) -> Result<Self, DecodeError>;

    fn to_bytes(&self) -> Vec<u8> {
        let mut e = Encoder::new();
        self.encode(&mut e);
        e.into_bytes()
    }

    fn from_bytes(b: &[u8]) -> Result<Self, DecodeError> {
        let mut d = Decoder::new(b);
        let v = Self::decode(&mut d)?;
        d.finish()?;
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitive_layout() {
        let mut e = Encoder::new();
        e.bytes(b"ab");
        e.int(5);
        e.list(0, |_| {});
        assert_eq!(
            e.into_bytes(),
            [
                vec![0x01, 0, 0, 0, 2, b'a', b'b'],
                vec![0x02, 0, 0, 0, 8, 0, 0, 0, 0, 0, 0, 0, 5],
                vec![0x03, 0, 0, 0, 4, 0, 0, 0, 0],
            ]
            .concat()
        );
    }

    #[test]
    fn decode_rejects_garbage() {
        assert_eq!(
            Decoder::new(&[0x01, 0, 0]).bytes(),
            Err(DecodeError::Truncated)
        );
        assert!(matches!(
            Decoder::new(&[0x02, 0, 0, 0, 0]).bytes(),
            Err(DecodeError::UnexpectedTag { .. })
        ));
        assert_eq!(
            Decoder::new(&[0x02, 0, 0, 0, 1, 9]).int(),
            Err(DecodeError::BadIntLength(1))
        );
        // Claims a billion items in a tiny list.
        let mut d = Decoder::new(&[0x03, 0, 0, 0, 4, 0x3b, 0x9a, 0xca, 0x00]);
        assert!(d.list_of(|d| d.int()).is_err());
    }
}
