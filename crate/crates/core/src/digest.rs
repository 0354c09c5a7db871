//! Content digests over canonical JSON.

use serde::Serialize;
use sha2::{Digest, Sha256};

/// Hex SHA-256 of the compact JSON encoding of `value`.
///
/// Struct fields serialize in declaration order and floats in shortest
/// round-trip form, so equal values give equal digests.
pub fn digest_json<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("value serializes to JSON");
    digest_bytes(&bytes)
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_vector() {
        assert_eq!(digest_bytes(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn equal_values_equal_digests() {
        #[derive(Serialize)]
        struct S {
            a: f64,
            b: Vec<u32>,
        }
        let x = S { a: 0.1 + 0.2, b: vec![1, 2] };
        let y = S { a: 0.30000000000000004, b: vec![1, 2] };
        assert_eq!(digest_json(&x), digest_json(&y));
        assert_ne!(digest_json(&x), digest_json(&S { a: 0.3, b: vec![1, 2] }));
    }
}
