use std::collections::{BTreeSet, HashSet};

use super::schema::Sample;

/// Stand-in for the output of a private set intersection: the exact set of
/// keys held by both parties, in sorted order. Only keys cross this boundary.
pub fn intersect_keys<'a, H, G>(host_keys: H, guest_keys: G) -> Vec<String>
where
    H: IntoIterator<Item = &'a str>,
    G: IntoIterator<Item = &'a str>,
{
    let guest: HashSet<&str> = guest_keys.into_iter().collect();
    host_keys
        .into_iter()
        .filter(|k| guest.contains(k))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_owned)
        .collect()
}

/// Partition host samples into (aligned, unaligned), keeping input order.
pub fn split_by_alignment(host: Vec<Sample>, aligned_keys: &HashSet<String>) -> (Vec<Sample>, Vec<Sample>) {
    host.into_iter().partition(|s| aligned_keys.contains(s.key()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureSchema, Party};

    #[test]
    fn set_semantics() {
        assert_eq!(intersect_keys(["a", "b", "c"], ["b", "c", "d"]), vec!["b", "c"]);
        assert!(intersect_keys(["a"], ["z"]).is_empty());
        assert_eq!(intersect_keys(["c", "a", "c"], ["c", "a"]), vec!["a", "c"]);
    }

    #[test]
    fn degenerate_partitions() {
        let schema = FeatureSchema::uniform(Party::Host, &["h".into()], 4, "key", Some("y")).unwrap();
        let samples: Vec<Sample> = ["x", "y", "z"]
            .iter()
            .map(|k| Sample::new(&schema, *k, vec![0], Some(1)).unwrap())
            .collect();
        let all: HashSet<String> = ["x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let (a, u) = split_by_alignment(samples.clone(), &all);
        assert_eq!((a.len(), u.len()), (3, 0));
        let (a, u) = split_by_alignment(samples, &HashSet::new());
        assert_eq!((a.len(), u.len()), (0, 3));
    }
}
