use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::CallPath;
use crate::signature::strip_ws;

pub const DEFAULT_SEED: u64 = 42;

/// Keep one path per (source method, sink): a longest one, with ties
/// broken by a generator seeded with `seed`. Unverified or rejected
/// inputs are ignored. Output is ordered by group key.
pub fn sample_tasks(paths: &[CallPath], seed: u64) -> Vec<CallPath> {
    let mut groups: BTreeMap<(String, String, String), Vec<&CallPath>> = BTreeMap::new();
    for p in paths.iter().filter(|p| p.verification.is_verified()) {
        let Some(src) = p.source() else { continue };
        let key = (
            strip_ws(&src.method_signature.to_string()),
            src.file_rel_path.clone(),
            strip_ws(&p.sink.to_string()),
        );
        groups.entry(key).or_default().push(p);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    groups
        .into_values()
        .map(|group| {
            let best = group.iter().map(|p| p.length).max().expect("groups are non-empty");
            let mut ties: Vec<&CallPath> = group.into_iter().filter(|p| p.length == best).collect();
            ties.sort_by_key(|p| p.identity());
            ties.dedup_by_key(|p| p.identity());
            let pick = if ties.len() > 1 { rng.gen_range(0..ties.len()) } else { 0 };
            ties[pick].clone()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::callpath::{CallPathNode, Verification};
    use crate::javasrc::{EnclosingKind, Visibility};
    use crate::signature::validate_signature;
    use proptest::prelude::*;

    fn path(names: &[&str]) -> CallPath {
        let nodes = names
            .iter()
            .enumerate()
            .map(|(i, n)| CallPathNode {
                method_signature: validate_signature(&format!("p.A.{n}()")).unwrap(),
                visibility: if i == 0 { Visibility::Public } else { Visibility::Private },
                file_rel_path: "A.java".into(),
                line: i + 1,
                enclosing_kind: EnclosingKind::NamedType,
            })
            .collect();
        let mut p = CallPath::new(nodes, validate_signature("Lib.sink()").unwrap());
        p.verification = Verification::Verified;
        p
    }

    #[test]
    fn longest_wins() {
        let short = path(&["src"]);
        let long = path(&["src", "a", "b"]);
        let picked = sample_tasks(&[short, long.clone()], DEFAULT_SEED);
        assert_eq!(picked, vec![long]);
    }

    #[test]
    fn single_path_is_identity() {
        let only = path(&["src", "x"]);
        assert_eq!(sample_tasks(std::slice::from_ref(&only), 1), vec![only]);
    }

    #[test]
    fn ties_are_seeded_and_reproducible() {
        let a = path(&["src", "viaA"]);
        let b = path(&["src", "viaB"]);
        let input = vec![a.clone(), b.clone()];
        let mut picks = std::collections::HashSet::new();
        for seed in 0..32u64 {
            let first = sample_tasks(&input, seed);
            let second = sample_tasks(&input, seed);
            assert_eq!(first, second, "seed {seed}");
            // input order must not matter
            assert_eq!(first, sample_tasks(&[b.clone(), a.clone()], seed));
            picks.insert(first[0].nodes[1].method_name().to_string());
        }
        assert_eq!(picks.len(), 2, "both tied paths should be reachable over seeds");
    }

    #[test]
    fn unverified_paths_ignored() {
        let mut p = path(&["src"]);
        p.verification = Verification::Unverified;
        assert!(sample_tasks(&[p], 0).is_empty());
    }

    proptest! {
        #[test]
        fn one_maximal_path_per_group(
            shapes in proptest::collection::vec((0usize..4, 1usize..5, 0usize..3), 1..20),
            seed in any::<u64>(),
        ) {
            let paths: Vec<CallPath> = shapes
                .iter()
                .map(|&(src, len, variant)| {
                    let mut names = vec![format!("src{src}")];
                    names.extend((1..len).map(|k| format!("n{k}v{variant}")));
                    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
                    path(&refs)
                })
                .collect();
            let out = sample_tasks(&paths, seed);
            let groups: std::collections::BTreeSet<usize> = shapes.iter().map(|s| s.0).collect();
            prop_assert_eq!(out.len(), groups.len());
            for p in &out {
                let src = p.nodes[0].method_name();
                let max = paths.iter().filter(|q| q.nodes[0].method_name() == src).map(|q| q.length).max().unwrap();
                prop_assert_eq!(p.length, max);
            }
        }
    }
}
