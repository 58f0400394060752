//! Ratings, item content, and social side information.
//!
//! Everything here is immutable once built; trainers take shared references
//! and work on restricted views (see [`Dataset::with_ratings`]).

mod io;
mod similarity;
mod split;

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use io::{
    ingest_dataset, read_features, write_dataset, write_features_binary, write_features_csv, write_groups,
    write_ratings, write_social, DataPaths, FeatureScaling, FEATURES_BIN_FILE, FEATURES_CSV_FILE, GROUPS_FILE,
    RATINGS_FILE, SOCIAL_FILE,
};
pub use similarity::{social_similarity_from_groups, tag_similarity};
pub use split::{block_split, SplitMasks};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rating {
    pub user: usize,
    pub item: usize,
    pub value: f64,
}

/// Sparse rating matrix `R` together with its observation mask.
///
/// An entry is observed exactly when it is stored. Entries are kept sorted by
/// `(user, item)` and indexed both by row and by column.
#[derive(Clone, Debug, PartialEq)]
pub struct RatingMatrix {
    n_users: usize,
    n_items: usize,
    entries: Vec<Rating>,
    by_user: Vec<Vec<(usize, f64)>>,
    by_item: Vec<Vec<(usize, f64)>>,
}

impl RatingMatrix {
    pub fn new(n_users: usize, n_items: usize, ratings: impl IntoIterator<Item = Rating>) -> Result<Self> {
        let mut entries: Vec<Rating> = ratings.into_iter().collect();
        for r in &entries {
            if r.user >= n_users || r.item >= n_items {
                return Err(Error::Schema(format!(
                    "rating ({}, {}) outside a {}x{} matrix",
                    r.user, r.item, n_users, n_items
                )));
            }
            if !r.value.is_finite() {
                return Err(Error::Schema(format!("rating ({}, {}) is not finite", r.user, r.item)));
            }
        }
        entries.sort_by_key(|r| (r.user, r.item));
        if let Some(w) = entries
            .windows(2)
            .find(|w| w[0].user == w[1].user && w[0].item == w[1].item)
        {
            return Err(Error::Schema(format!(
                "duplicate rating for user {} item {}",
                w[0].user, w[0].item
            )));
        }

        let mut by_user = vec![Vec::new(); n_users];
        let mut by_item = vec![Vec::new(); n_items];
        for r in &entries {
            by_user[r.user].push((r.item, r.value));
            by_item[r.item].push((r.user, r.value));
        }
        Ok(RatingMatrix {
            n_users,
            n_items,
            entries,
            by_user,
            by_item,
        })
    }

    /// Binary "like" matrix: every listed pair is observed with value 1.
    pub fn from_likes(n_users: usize, n_items: usize, likes: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::new(
            n_users,
            n_items,
            likes.into_iter().map(|(user, item)| Rating { user, item, value: 1.0 }),
        )
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_observed(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[Rating] {
        &self.entries
    }

    /// Items rated by `user` with their values, sorted by item.
    pub fn user_ratings(&self, user: usize) -> &[(usize, f64)] {
        &self.by_user[user]
    }

    /// Users who rated `item` with their values, sorted by user.
    pub fn item_ratings(&self, item: usize) -> &[(usize, f64)] {
        &self.by_item[item]
    }

    pub fn get(&self, user: usize, item: usize) -> Option<f64> {
        let row = self.by_user.get(user)?;
        row.binary_search_by_key(&item, |&(j, _)| j).ok().map(|k| row[k].1)
    }

    /// `I^R(i, j)`.
    pub fn is_observed(&self, user: usize, item: usize) -> bool {
        self.get(user, item).is_some()
    }

    pub fn is_binary(&self) -> bool {
        self.entries.iter().all(|r| r.value == 1.0)
    }

    pub fn density(&self) -> f64 {
        let cells = (self.n_users * self.n_items) as f64;
        if cells == 0.0 {
            0.0
        } else {
            self.entries.len() as f64 / cells
        }
    }

    /// Same shape, keeping only the entries accepted by `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&Rating) -> bool) -> RatingMatrix {
        let kept: Vec<Rating> = self.entries.iter().copied().filter(|r| keep(r)).collect();
        // entries were already validated
        RatingMatrix::new(self.n_users, self.n_items, kept).expect("subset of a valid matrix")
    }
}

/// Dense `d x M` item content matrix, one column per item.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    columns: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn new(columns: DMatrix<f64>) -> Result<Self> {
        if let Some(pos) = columns.iter().position(|v| !v.is_finite()) {
            let d = columns.nrows().max(1);
            return Err(Error::Schema(format!(
                "feature {} of item {} is not finite",
                pos % d,
                pos / d
            )));
        }
        Ok(FeatureMatrix { columns })
    }

    pub fn from_columns(dim: usize, columns: &[Vec<f64>]) -> Result<Self> {
        for (j, c) in columns.iter().enumerate() {
            if c.len() != dim {
                return Err(Error::Schema(format!(
                    "item {} has {} features, expected {}",
                    j,
                    c.len(),
                    dim
                )));
            }
        }
        let flat: Vec<f64> = columns.iter().flatten().copied().collect();
        Self::new(DMatrix::from_vec(dim, columns.len(), flat))
    }

    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn n_items(&self) -> usize {
        self.columns.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.columns
    }

    pub fn column(&self, item: usize) -> DVector<f64> {
        self.columns.column(item).into_owned()
    }

    /// Per-dimension zero mean and unit variance over items. Constant
    /// dimensions become all zeros.
    pub fn standardize(&mut self) {
        let m = self.n_items();
        if m == 0 {
            return;
        }
        for mut row in self.columns.row_iter_mut() {
            let mean = row.iter().sum::<f64>() / m as f64;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / m as f64;
            let sd = var.sqrt();
            if sd > 1e-12 * (1.0 + mean.abs()) {
                row.apply(|v| *v = (*v - mean) / sd);
            } else {
                row.fill(0.0);
            }
        }
    }

    pub fn select_items(&self, items: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            columns: self.columns.select_columns(items),
        }
    }
}

/// Symmetric user-user similarity matrix `S` with its observation mask `I^S`.
#[derive(Clone, Debug, PartialEq)]
pub struct SocialGraph {
    n_users: usize,
    links: Vec<Vec<(usize, f64)>>,
}

impl SocialGraph {
    /// Builds the graph from undirected links. A pair may be listed once or in
    /// both directions, but both listings must agree.
    pub fn new(n_users: usize, links: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_users];
        for (a, b, s) in links {
            if a >= n_users || b >= n_users {
                return Err(Error::Schema(format!("social link ({a}, {b}) outside {n_users} users")));
            }
            if a == b {
                return Err(Error::Schema(format!("self link on user {a}")));
            }
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Schema(format!("similarity {s} of ({a}, {b}) outside [0, 1]")));
            }
            adj[a].push((b, s));
            adj[b].push((a, s));
        }
        for (a, row) in adj.iter_mut().enumerate() {
            row.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
            let mut deduped: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(b, s) in row.iter() {
                match deduped.last() {
                    Some(&(pb, ps)) if pb == b => {
                        if ps != s {
                            return Err(Error::Schema(format!(
                                "conflicting similarities {ps} and {s} for users ({a}, {b})"
                            )));
                        }
                    }
                    _ => deduped.push((b, s)),
                }
            }
            *row = deduped;
        }
        Ok(SocialGraph { n_users, links: adj })
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    /// Linked users of `user` with similarities, sorted by user index.
    pub fn neighbors(&self, user: usize) -> &[(usize, f64)] {
        &self.links[user]
    }

    pub fn get(&self, a: usize, b: usize) -> Option<f64> {
        let row = self.links.get(a)?;
        row.binary_search_by_key(&b, |&(m, _)| m).ok().map(|k| row[k].1)
    }

    /// Number of unordered linked pairs.
    pub fn n_pairs(&self) -> usize {
        self.links.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Each unordered pair once, as `(a, b, s)` with `a < b`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.links
            .iter()
            .enumerate()
            .flat_map(|(a, row)| row.iter().filter(move |(b, _)| *b > a).map(move |&(b, s)| (a, b, s)))
    }
}

/// Group identifiers per user, drawn from a declared universe.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupMembership {
    universe: Vec<String>,
    members: Vec<BTreeSet<usize>>,
}

impl GroupMembership {
    pub fn new(universe: Vec<String>, members: Vec<BTreeSet<usize>>) -> Result<Self> {
        for (u, set) in members.iter().enumerate() {
            if let Some(g) = set.iter().find(|&&g| g >= universe.len()) {
                return Err(Error::Schema(format!("user {u} belongs to undeclared group {g}")));
            }
        }
        Ok(GroupMembership { universe, members })
    }

    pub fn n_users(&self) -> usize {
        self.members.len()
    }

    pub fn universe(&self) -> &[String] {
        &self.universe
    }

    pub fn groups_of(&self, user: usize) -> &BTreeSet<usize> {
        &self.members[user]
    }
}

/// Ratings plus item features and optional social side information.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub ratings: RatingMatrix,
    pub features: FeatureMatrix,
    pub social: Option<SocialGraph>,
    pub groups: Option<GroupMembership>,
    /// External identifiers, index-aligned with users and items.
    pub user_labels: Vec<String>,
    pub item_labels: Vec<String>,
}

impl Dataset {
    pub fn new(ratings: RatingMatrix, features: FeatureMatrix) -> Result<Self> {
        let user_labels = (0..ratings.n_users()).map(|i| i.to_string()).collect();
        let item_labels = (0..ratings.n_items()).map(|j| j.to_string()).collect();
        let ds = Dataset {
            ratings,
            features,
            social: None,
            groups: None,
            user_labels,
            item_labels,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_social(mut self, social: SocialGraph) -> Result<Self> {
        self.social = Some(social);
        self.validate()?;
        Ok(self)
    }

    pub fn with_groups(mut self, groups: GroupMembership) -> Result<Self> {
        self.groups = Some(groups);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ratings.n_items() != self.features.n_items() {
            return Err(Error::Schema(format!(
                "ratings cover {} items but features describe {}",
                self.ratings.n_items(),
                self.features.n_items()
            )));
        }
        if let Some(s) = &self.social {
            if s.n_users() != self.ratings.n_users() {
                return Err(Error::Schema(format!(
                    "social graph has {} users, ratings have {}",
                    s.n_users(),
                    self.ratings.n_users()
                )));
            }
        }
        if let Some(g) = &self.groups {
            if g.n_users() != self.ratings.n_users() {
                return Err(Error::Schema(format!(
                    "group membership has {} users, ratings have {}",
                    g.n_users(),
                    self.ratings.n_users()
                )));
            }
        }
        if self.user_labels.len() != self.n_users() || self.item_labels.len() != self.n_items() {
            return Err(Error::Schema("label count does not match matrix shape".into()));
        }
        Ok(())
    }

    pub fn n_users(&self) -> usize {
        self.ratings.n_users()
    }

    pub fn n_items(&self) -> usize {
        self.ratings.n_items()
    }

    /// Same dataset with the rating matrix swapped, e.g. for a training view.
    pub fn with_ratings(&self, ratings: RatingMatrix) -> Dataset {
        assert_eq!(ratings.n_users(), self.n_users());
        assert_eq!(ratings.n_items(), self.n_items());
        Dataset {
            ratings,
            ..self.clone()
        }
    }

    /// Sub-dataset over the listed items (in the given order), keeping all users.
    pub fn select_items(&self, items: &[usize]) -> Dataset {
        let mut position = vec![usize::MAX; self.n_items()];
        for (new, &old) in items.iter().enumerate() {
            position[old] = new;
        }
        let ratings = self
            .ratings
            .entries()
            .iter()
            .filter(|r| position[r.item] != usize::MAX)
            .map(|r| Rating {
                item: position[r.item],
                ..*r
            });
        Dataset {
            ratings: RatingMatrix::new(self.n_users(), items.len(), ratings).expect("reindexed subset"),
            features: self.features.select_items(items),
            social: self.social.clone(),
            groups: self.groups.clone(),
            user_labels: self.user_labels.clone(),
            item_labels: items.iter().map(|&j| self.item_labels[j].clone()).collect(),
        }
    }

    /// The social graph, or one derived from group co-membership.
    pub fn social_graph(&self) -> Option<SocialGraph> {
        match (&self.social, &self.groups) {
            (Some(s), _) => Some(s.clone()),
            (None, Some(g)) => Some(social_similarity_from_groups(g)),
            (None, None) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rating_matrix_rejects_duplicates_and_out_of_range() {
        let dup = RatingMatrix::from_likes(2, 2, [(0, 1), (0, 1)]);
        assert!(matches!(dup, Err(Error::Schema(_))));
        let oob = RatingMatrix::from_likes(2, 2, [(2, 0)]);
        assert!(matches!(oob, Err(Error::Schema(_))));
    }

    #[test]
    fn mask_matches_entries() {
        let r = RatingMatrix::from_likes(3, 4, [(0, 0), (0, 3), (1, 2), (2, 1), (2, 3)]).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                let listed = r.entries().iter().any(|e| e.user == i && e.item == j);
                assert_eq!(r.is_observed(i, j), listed);
            }
        }
        assert!(r.is_binary());
        assert_eq!(r.item_ratings(3), &[(0, 1.0), (2, 1.0)]);
    }

    #[test]
    fn social_graph_is_symmetric_and_validated() {
        let g = SocialGraph::new(3, [(0, 1, 0.5), (1, 0, 0.5), (2, 1, 1.0)]).unwrap();
        assert_eq!(g.get(1, 0), Some(0.5));
        assert_eq!(g.get(1, 2), Some(1.0));
        assert_eq!(g.n_pairs(), 2);
        assert!(SocialGraph::new(2, [(0, 0, 0.5)]).is_err());
        assert!(SocialGraph::new(2, [(0, 1, 1.5)]).is_err());
        assert!(SocialGraph::new(2, [(0, 1, 0.5), (1, 0, 0.25)]).is_err());
    }

    #[test]
    fn standardize_leaves_constant_rows_at_zero() {
        let mut f = FeatureMatrix::new(DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 5.0, 5.0, 5.0])).unwrap();
        f.standardize();
        let m = f.matrix();
        assert!(m.row(0).sum().abs() < 1e-12);
        let var: f64 = m.row(0).iter().map(|v| v * v).sum::<f64>() / 3.0;
        assert!((var - 1.0).abs() < 1e-12);
        assert!(m.row(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dataset_checks_item_counts() {
        let r = RatingMatrix::from_likes(1, 3, [(0, 0)]).unwrap();
        let f = FeatureMatrix::new(DMatrix::zeros(2, 2)).unwrap();
        assert!(matches!(Dataset::new(r, f), Err(Error::Schema(_))));
    }

    #[test]
    fn select_items_reindexes() {
        let r = RatingMatrix::from_likes(2, 3, [(0, 0), (1, 2), (0, 2)]).unwrap();
        let f = FeatureMatrix::new(DMatrix::from_fn(1, 3, |_, j| j as f64)).unwrap();
        let ds = Dataset::new(r, f).unwrap();
        let sub = ds.select_items(&[2, 1]);
        assert_eq!(sub.n_items(), 2);
        assert_eq!(sub.ratings.item_ratings(0), &[(0, 1.0), (1, 1.0)]);
        assert!(sub.ratings.item_ratings(1).is_empty());
        assert_eq!(sub.features.matrix()[(0, 0)], 2.0);
        assert_eq!(sub.item_labels, vec!["2".to_string(), "1".to_string()]);
    }
}
