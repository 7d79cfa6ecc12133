//! 64-bit FNV-1a.
//!
//! Used for bigram bucketing and for taxonomy checksums. The output must be
//! bit-exact across runs and platforms, so the standard offset basis and
//! prime are fixed here rather than going through `std::hash`.

pub const OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
pub const PRIME: u64 = 0x0000_0100_0000_01b3;

/// Continues an FNV-1a hash from `state` over `bytes`.
#[inline]
pub fn fnv1a64_extend(mut state: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        state ^= u64::from(b);
        state = state.wrapping_mul(PRIME);
    }
    state
}

#[inline]
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    fnv1a64_extend(OFFSET_BASIS, bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference vectors from the FNV specification.
    #[test]
    fn known_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn extend_matches_concatenation() {
        let whole = fnv1a64(b"the\x1fcat");
        let split = fnv1a64_extend(fnv1a64_extend(fnv1a64(b"the"), b"\x1f"), b"cat");
        assert_eq!(whole, split);
    }
}
