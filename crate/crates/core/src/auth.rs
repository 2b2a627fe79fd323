//! Simulated signatures.
//!
//! A tag is `sha256(secret(issuer) || payload)` where `secret(id)` is a
//! keyed derivation the harness controls. Verification recomputes the tag.
//! Unforgeability is structural rather than cryptographic: the simulator
//! only ever signs on behalf of the acting node, and adversary scripts have
//! no way to request a tag for another identity. A real signature scheme
//! can be slotted behind these two functions without touching callers.

use crate::codec::{sha256, Digest32, Enc};

fn secret_for(id: &str) -> Digest32 {
    sha256(&Enc::new().str("govsim/secret").str(id).finish())
}

pub fn sign(issuer: &str, payload: &[u8]) -> Digest32 {
    sha256(
        &Enc::new()
            .digest(&secret_for(issuer))
            .bytes(payload)
            .finish(),
    )
}

pub fn verify(issuer: &str, payload: &[u8], tag: &Digest32) -> bool {
    sign(issuer, payload) == *tag
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tag_binds_issuer_and_payload() {
        let tag = sign("alice", b"hello");
        assert!(verify("alice", b"hello", &tag));
        assert!(!verify("bob", b"hello", &tag));
        assert!(!verify("alice", b"hello!", &tag));
    }

    #[test]
    fn flipped_byte_rejected() {
        let mut tag = sign("alice", b"hello");
        tag.0[0] ^= 0x01;
        assert!(!verify("alice", b"hello", &tag));
    }
}
