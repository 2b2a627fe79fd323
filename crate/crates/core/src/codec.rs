//! Canonical byte encoding and SHA-256 digests.
//!
//! Every digest in the system is computed over the same encoding: fields in
//! declaration order, integers as 8-byte big-endian, byte strings prefixed
//! with their 8-byte big-endian length. Two values digest equal iff their
//! canonical encodings are byte-identical.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use sha2::{Digest as _, Sha256};

/// A 32-byte SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Digest32(pub [u8; 32]);

impl Digest32 {
    pub const ZERO: Digest32 = Digest32([0u8; 32]);

    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(64);
        for b in self.0.iter() {
            s.push(HEX[(b >> 4) as usize]);
            s.push(HEX[(b & 0xf) as usize]);
        }
        s
    }

    pub fn from_hex(s: &str) -> Option<Digest32> {
        let bytes = s.as_bytes();
        if bytes.len() != 64 {
            return None;
        }
        let mut out = [0u8; 32];
        for (i, chunk) in bytes.chunks(2).enumerate() {
            out[i] = (unhex(chunk[0])? << 4) | unhex(chunk[1])?;
        }
        Some(Digest32(out))
    }

    /// First eight bytes as a big-endian integer, used to derive RNG streams.
    pub fn prefix_u64(&self) -> u64 {
        u64::from_be_bytes(self.0[..8].try_into().unwrap())
    }
}

const HEX: [char; 16] = [
    '0', '1', '2', '3', '4', '5', '6', '7', '8', '9', 'a', 'b', 'c', 'd', 'e', 'f',
];

fn unhex(b: u8) -> Option<u8> {
    match b {
        b'0'..=b'9' => Some(b - b'0'),
        b'a'..=b'f' => Some(b - b'a' + 10),
        b'A'..=b'F' => Some(b - b'A' + 10),
        _ => None,
    }
}

impl fmt::Debug for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest32({})", &self.to_hex()[..12])
    }
}

impl fmt::Display for Digest32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl serde::Serialize for Digest32 {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        ser.serialize_str(&self.to_hex())
    }
}

impl<'de> serde::Deserialize<'de> for Digest32 {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let s = <&str as serde::Deserialize>::deserialize(de)?;
        Digest32::from_hex(s).ok_or_else(|| serde::de::Error::custom("invalid digest hex"))
    }
}

/// SHA-256 over raw bytes.
pub fn sha256(bytes: &[u8]) -> Digest32 {
    let mut h = Sha256::new();
    h.update(bytes);
    Digest32(h.finalize().into())
}

/// Canonical encoder. Append fields in declaration order, then take the
/// bytes or their digest.
#[derive(Default)]
pub struct Enc {
    buf: Vec<u8>,
}

impl Enc {
    pub fn new() -> Self {
        Enc { buf: Vec::new() }
    }

    pub fn u64(mut self, v: u64) -> Self {
        self.buf.extend_from_slice(&v.to_be_bytes());
        self
    }

    pub fn bytes(mut self, b: &[u8]) -> Self {
        self.buf.extend_from_slice(&(b.len() as u64).to_be_bytes());
        self.buf.extend_from_slice(b);
        self
    }

    pub fn str(self, s: &str) -> Self {
        self.bytes(s.as_bytes())
    }

    pub fn digest(self, d: &Digest32) -> Self {
        self.bytes(&d.0)
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }

    pub fn into_digest(self) -> Digest32 {
        sha256(&self.buf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_round_trip() {
        let d = sha256(b"abc");
        assert_eq!(Digest32::from_hex(&d.to_hex()), Some(d));
        assert_eq!(
            d.to_hex(),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn length_prefix_disambiguates() {
        // ("ab", "c") and ("a", "bc") must encode differently.
        let x = Enc::new().str("ab").str("c").finish();
        let y = Enc::new().str("a").str("bc").finish();
        assert_ne!(x, y);
    }
}
