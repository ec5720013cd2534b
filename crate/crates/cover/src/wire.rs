//! Canonical byte encoding shared by every wire format in the crate.
//!
//! Conventions: all multi-byte integers are little-endian; variable-length
//! byte strings are length-prefixed with an unsigned 32-bit length.

use crate::hash::Digest;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("truncated input while reading {0}")]
    Truncated(&'static str),
    #[error("trailing bytes after decoding")]
    Trailing,
    #[error("malformed field: {0}")]
    Malformed(&'static str),
}

pub struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    pub fn new() -> Self {
        Writer { buf: Vec::new() }
    }

    pub fn put_u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn put_u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn put_digest(&mut self, d: &Digest) {
        self.buf.extend_from_slice(&d.0);
    }

    /// Length-prefixed byte string (u32 length).
    pub fn put_bytes(&mut self, b: &[u8]) {
        self.put_u32(b.len() as u32);
        self.buf.extend_from_slice(b);
    }

    pub fn put_raw(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

impl Default for Writer {
    fn default() -> Self {
        Self::new()
    }
}

pub struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Reader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], WireError> {
        if self.pos + n > self.buf.len() {
            return Err(WireError::Truncated(what));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn get_u8(&mut self, what: &'static str) -> Result<u8, WireError> {
        Ok(self.take(1, what)?[0])
    }

    pub fn get_u16(&mut self, what: &'static str) -> Result<u16, WireError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    pub fn get_u32(&mut self, what: &'static str) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    pub fn get_u64(&mut self, what: &'static str) -> Result<u64, WireError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    pub fn get_digest(&mut self, what: &'static str) -> Result<Digest, WireError> {
        Ok(Digest(self.take(32, what)?.try_into().unwrap()))
    }

    pub fn get_bytes(&mut self, what: &'static str) -> Result<Vec<u8>, WireError> {
        let len = self.get_u32(what)? as usize;
        Ok(self.take(len, what)?.to_vec())
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    /// Fails unless the whole input was consumed.
    pub fn expect_end(&self) -> Result<(), WireError> {
        if self.remaining() == 0 {
            Ok(())
        } else {
            Err(WireError::Trailing)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_primitives() {
        let mut w = Writer::new();
        w.put_u16(0x1234);
        w.put_u32(0xdeadbeef);
        w.put_u64(42);
        w.put_bytes(b"abc");
        let bytes = w.finish();
        assert_eq!(&bytes[..2], &[0x34, 0x12]);

        let mut r = Reader::new(&bytes);
        assert_eq!(r.get_u16("a").unwrap(), 0x1234);
        assert_eq!(r.get_u32("b").unwrap(), 0xdeadbeef);
        assert_eq!(r.get_u64("c").unwrap(), 42);
        assert_eq!(r.get_bytes("d").unwrap(), b"abc");
        assert!(r.expect_end().is_ok());
    }

    #[test]
    fn truncated_read_fails() {
        let mut r = Reader::new(&[1, 2]);
        assert_eq!(r.get_u32("x"), Err(WireError::Truncated("x")));
    }
}
