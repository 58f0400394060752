use std::collections::BTreeMap;

use super::{GroupMembership, SocialGraph};
use crate::error::{Error, Result};

/// User similarity from shared group membership.
///
/// `sim(a, b) = |G(a) ∩ G(b)| / |G(a) ∪ G(b)|`; pairs without a shared group
/// are left unobserved.
pub fn social_similarity_from_groups(groups: &GroupMembership) -> SocialGraph {
    let n = groups.n_users();
    // invert membership so only co-members are compared
    let mut members_of: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for u in 0..n {
        for &g in groups.groups_of(u) {
            members_of.entry(g).or_default().push(u);
        }
    }
    let mut candidates: Vec<(usize, usize)> = members_of
        .values()
        .flat_map(|users| {
            users
                .iter()
                .enumerate()
                .flat_map(move |(k, &a)| users[k + 1..].iter().map(move |&b| (a, b)))
        })
        .collect();
    candidates.sort_unstable();
    candidates.dedup();

    let links = candidates.into_iter().map(|(a, b)| {
        let ga = groups.groups_of(a);
        let gb = groups.groups_of(b);
        let inter = ga.intersection(gb).count();
        let union = ga.len() + gb.len() - inter;
        (a, b, inter as f64 / union as f64)
    });
    SocialGraph::new(n, links).expect("jaccard similarities are symmetric and bounded")
}

/// Cosine similarity between two bag-of-words count vectors.
pub fn tag_similarity(bag_a: &[(usize, f64)], bag_b: &[(usize, f64)]) -> Result<f64> {
    let dense = |bag: &[(usize, f64)]| {
        let mut m: BTreeMap<usize, f64> = BTreeMap::new();
        for &(t, c) in bag {
            *m.entry(t).or_insert(0.0) += c;
        }
        m
    };
    let a = dense(bag_a);
    let b = dense(bag_b);
    let norm = |m: &BTreeMap<usize, f64>| m.values().map(|c| c * c).sum::<f64>().sqrt();
    let (na, nb) = (norm(&a), norm(&b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Argument("tag similarity of an empty bag is undefined".into()));
    }
    let dot: f64 = a.iter().filter_map(|(t, ca)| b.get(t).map(|cb| ca * cb)).sum();
    Ok(dot / (na * nb))
}
