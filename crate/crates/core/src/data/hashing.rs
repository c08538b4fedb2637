const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Raw token substituted for empty feature cells before hashing.
pub const MISSING_TOKEN: &str = "__missing__";

pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// Hashing trick with per-slot salting: FNV-1a 64 of `"slot=value"` modulo `vocab_size`.
pub fn hash_feature(slot_name: &str, raw_value: &str, vocab_size: usize) -> usize {
    debug_assert!(vocab_size >= 2);
    let mut h = FNV_OFFSET;
    for &b in slot_name.as_bytes().iter().chain(b"=").chain(raw_value.as_bytes()) {
        h = (h ^ u64::from(b)).wrapping_mul(FNV_PRIME);
    }
    (h % vocab_size as u64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_bounded() {
        assert_eq!(hash_feature("C1", "1005", 1000), hash_feature("C1", "1005", 1000));
        for v in ["a", "b", "c", "d", "e", "f"] {
            assert!(hash_feature("s", v, 2) < 2);
        }
    }

    #[test]
    fn salted_form_equals_plain_hash_of_joined_string() {
        assert_eq!(
            hash_feature("site_id", "85f751fd", 1 << 20) as u64,
            fnv1a_64(b"site_id=85f751fd") % (1 << 20)
        );
    }

    #[test]
    fn fnv_reference_vectors() {
        // published FNV-1a 64 test vectors
        assert_eq!(fnv1a_64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a_64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a_64(b"foobar"), 0x85944171f73967e8);
    }
}
