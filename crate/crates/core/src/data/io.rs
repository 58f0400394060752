//! Reading and writing the on-disk dataset formats.
//!
//! * ratings: CSV `user,item,value`
//! * features: CSV `item,f0,f1,...` or the `STMF` binary container
//! * social: CSV `user_a,user_b,similarity`
//! * groups: CSV `user,group`
//!
//! Identifiers are arbitrary strings. Items are indexed in feature-file order;
//! users in order of first appearance across ratings, social and groups.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureMatrix, GroupMembership, Rating, RatingMatrix, SocialGraph};
use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"STMF";
pub const FEATURE_VERSION: u32 = 1;

pub const RATINGS_FILE: &str = "ratings.csv";
pub const FEATURES_CSV_FILE: &str = "features.csv";
pub const FEATURES_BIN_FILE: &str = "features.bin";
pub const SOCIAL_FILE: &str = "social.csv";
pub const GROUPS_FILE: &str = "groups.csv";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureScaling {
    /// Zero mean, unit variance per feature dimension.
    #[default]
    Standardize,
    Raw,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataPaths {
    pub ratings: PathBuf,
    pub features: PathBuf,
    pub social: Option<PathBuf>,
    pub groups: Option<PathBuf>,
}

impl DataPaths {
    /// Conventional file names inside a data directory. Optional files are
    /// picked up only if present; a binary feature file wins over CSV.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        if !dir.is_dir() {
            return Err(Error::MissingInput(format!(
                "data directory {} does not exist",
                dir.display()
            )));
        }
        let ratings = dir.join(RATINGS_FILE);
        if !ratings.is_file() {
            return Err(Error::MissingInput(format!("{} not found", ratings.display())));
        }
        let features = [FEATURES_BIN_FILE, FEATURES_CSV_FILE]
            .iter()
            .map(|f| dir.join(f))
            .find(|p| p.is_file())
            .ok_or_else(|| {
                Error::MissingInput(format!(
                    "neither {FEATURES_BIN_FILE} nor {FEATURES_CSV_FILE} found in {}",
                    dir.display()
                ))
            })?;
        let optional = |name: &str| Some(dir.join(name)).filter(|p| p.is_file());
        Ok(DataPaths {
            ratings,
            features,
            social: optional(SOCIAL_FILE),
            groups: optional(GROUPS_FILE),
        })
    }
}

/// Loads and cross-validates a dataset.
pub fn ingest_dataset(paths: &DataPaths, scaling: FeatureScaling) -> Result<Dataset> {
    let (item_labels, mut features) = read_features(&paths.features)?;
    let item_index: HashMap<&str, usize> = item_labels.iter().enumerate().map(|(j, l)| (l.as_str(), j)).collect();
    if item_index.len() != item_labels.len() {
        return Err(Error::Schema(format!(
            "{}: duplicate item identifiers",
            paths.features.display()
        )));
    }

    let mut users = UserIndex::default();
    let ratings = read_ratings(&paths.ratings, &mut users, &item_index)?;
    let social = paths.social.as_ref().map(|p| read_social(p, &mut users)).transpose()?;
    let groups = paths.groups.as_ref().map(|p| read_groups(p, &mut users)).transpose()?;

    let n_users = users.labels.len();
    let n_items = item_labels.len();
    if scaling == FeatureScaling::Standardize {
        features.standardize();
    }
    let mut ds = Dataset::new(RatingMatrix::new(n_users, n_items, ratings)?, features)?;
    ds.user_labels = users.labels;
    ds.item_labels = item_labels;
    if let Some(links) = social {
        ds = ds.with_social(SocialGraph::new(n_users, links)?)?;
    }
    if let Some((universe, pairs)) = groups {
        let mut members = vec![BTreeSet::new(); n_users];
        for (u, g) in pairs {
            members[u].insert(g);
        }
        ds = ds.with_groups(GroupMembership::new(universe, members)?)?;
    }
    Ok(ds)
}

#[derive(Default)]
struct UserIndex {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl UserIndex {
    fn get_or_insert(&mut self, label: &str) -> usize {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        let i = self.labels.len();
        self.labels.push(label.to_string());
        self.index.insert(label.to_string(), i);
        i
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        file: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn check_header(path: &Path, rdr: &mut csv::Reader<File>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(|e| parse_error(path, 1, e.to_string()))?;
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(parse_error(
            path,
            1,
            format!("expected header `{}`, found `{}`", expected.join(","), got.join(",")),
        ));
    }
    Ok(())
}

/// Iterates records as `(line, fields)`, failing on rows with the wrong arity.
fn records(path: &Path, rdr: &mut csv::Reader<File>, arity: usize) -> Result<Vec<(usize, csv::StringRecord)>> {
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != arity {
            return Err(parse_error(
                path,
                line,
                format!("expected {arity} fields, found {}", rec.len()),
            ));
        }
        out.push((line, rec));
    }
    Ok(out)
}

fn parse_real(path: &Path, line: usize, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_error(path, line, format!("{what} `{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(parse_error(path, line, format!("{what} `{field}` is not finite")));
    }
    Ok(v)
}

fn read_ratings(path: &Path, users: &mut UserIndex, items: &HashMap<&str, usize>) -> Result<Vec<Rating>> {
    let mut rdr = csv_reader(path)?;
    check_header(path, &mut rdr, &["user", "item", "value"])?;
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    let mut out = Vec::new();
    for (line, rec) in records(path, &mut rdr, 3)? {
        let item = *items.get(&rec[1]).ok_or_else(|| {
            Error::Schema(format!(
                "{}:{line}: item `{}` has no feature vector",
                path.display(),
                &rec[1]
            ))
        })?;
        let value = parse_real(path, line, &rec[2], "rating")?;
        let user = users.get_or_insert(&rec[0]);
        if let Some(first) = seen.insert((user, item), line) {
            return Err(parse_error(
                path,
                line,
                format!(
                    "duplicate rating for ({}, {}), first given on line {first}",
                    &rec[0], &rec[1]
                ),
            ));
        }
        out.push(Rating { user, item, value });
    }
    Ok(out)
}

fn read_social(path: &Path, users: &mut UserIndex) -> Result<Vec<(usize, usize, f64)>> {
    let mut rdr = csv_reader(path)?;
    check_header(path, &mut rdr, &["user_a", "user_b", "similarity"])?;
    let mut out = Vec::new();
    for (line, rec) in records(path, &mut rdr, 3)? {
        let s = parse_real(path, line, &rec[2], "similarity")?;
        let a = users.get_or_insert(&rec[0]);
        let b = users.get_or_insert(&rec[1]);
        out.push((a, b, s));
    }
    Ok(out)
}

#[allow(clippy::type_complexity)]
fn read_groups(path: &Path, users: &mut UserIndex) -> Result<(Vec<String>, Vec<(usize, usize)>)> {
    let mut rdr = csv_reader(path)?;
    check_header(path, &mut rdr, &["user", "group"])?;
    let mut universe: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut out = Vec::new();
    for (_, rec) in records(path, &mut rdr, 2)? {
        let u = users.get_or_insert(&rec[0]);
        let g = *index.entry(rec[1].to_string()).or_insert_with(|| {
            universe.push(rec[1].to_string());
            universe.len() - 1
        });
        out.push((u, g));
    }
    Ok((universe, out))
}

/// Reads a feature file, dispatching on the binary magic.
pub fn read_features(path: &Path) -> Result<(Vec<String>, FeatureMatrix)> {
    let mut bytes = Vec::new();
    open(path)?.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(FEATURE_MAGIC) {
        read_features_binary(path, &bytes)
    } else {
        read_features_csv(path)
    }
}

fn read_features_binary(path: &Path, bytes: &[u8]) -> Result<(Vec<String>, FeatureMatrix)> {
    if bytes.len() < 16 {
        return Err(Error::Schema(format!("{}: truncated feature header", path.display())));
    }
    let word = |k: usize| u32::from_le_bytes(bytes[4 * k..4 * k + 4].try_into().unwrap());
    let (version, d, m) = (word(1), word(2) as usize, word(3) as usize);
    if version != FEATURE_VERSION {
        return Err(Error::Schema(format!(
            "{}: unsupported feature container version {version}",
            path.display()
        )));
    }
    let expected = 16 + 4 * d * m;
    if bytes.len() != expected {
        return Err(Error::Schema(format!(
            "{}: header declares {d}x{m} features ({expected} bytes) but file has {} bytes",
            path.display(),
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let labels = (0..m).map(|j| j.to_string()).collect();
    Ok((labels, FeatureMatrix::new(DMatrix::from_vec(d, m, values))?))
}

fn read_features_csv(path: &Path) -> Result<(Vec<String>, FeatureMatrix)> {
    let mut rdr = csv_reader(path)?;
    let header = rdr.headers().map_err(|e| parse_error(path, 1, e.to_string()))?.clone();
    if header.get(0) != Some("item") {
        return Err(parse_error(path, 1, "feature header must start with `item`"));
    }
    let d = header.len() - 1;
    let mut labels = Vec::new();
    let mut columns = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_error(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != d + 1 {
            return Err(Error::Schema(format!(
                "{}:{line}: item `{}` has {} features, header declares {d}",
                path.display(),
                &rec[0],
                rec.len().saturating_sub(1)
            )));
        }
        labels.push(rec[0].to_string());
        columns.push(
            rec.iter()
                .skip(1)
                .map(|f| parse_real(path, line, f, "feature"))
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    Ok((labels, FeatureMatrix::from_columns(d, &columns)?))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::io(path, std::io::Error::other(e))
}

pub fn write_ratings(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record(["user", "item", "value"]).map_err(&err)?;
    for r in data.ratings.entries() {
        w.write_record([
            data.user_labels[r.user].as_str(),
            data.item_labels[r.item].as_str(),
            &r.value.to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_features_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    let d = data.features.dim();
    let header: Vec<String> = std::iter::once("item".to_string())
        .chain((0..d).map(|k| format!("f{k}")))
        .collect();
    w.write_record(&header).map_err(&err)?;
    for (j, col) in data.features.matrix().column_iter().enumerate() {
        let row: Vec<String> = std::iter::once(data.item_labels[j].clone())
            .chain(col.iter().map(|v| v.to_string()))
            .collect();
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Binary container: `STMF`, version, d, M (little-endian u32), then
/// column-major little-endian f32 values.
pub fn write_features_binary(path: &Path, features: &FeatureMatrix) -> Result<()> {
    let mut w = create(path)?;
    let mut buf = Vec::with_capacity(16 + 4 * features.matrix().len());
    buf.extend_from_slice(FEATURE_MAGIC);
    buf.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    buf.extend_from_slice(&(features.dim() as u32).to_le_bytes());
    buf.extend_from_slice(&(features.n_items() as u32).to_le_bytes());
    for v in features.matrix().iter() {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    w.write_all(&buf).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_social(path: &Path, data: &Dataset, graph: &SocialGraph) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record(["user_a", "user_b", "similarity"]).map_err(&err)?;
    for (a, b, s) in graph.pairs() {
        w.write_record([
            data.user_labels[a].as_str(),
            data.user_labels[b].as_str(),
            &s.to_string(),
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_groups(path: &Path, data: &Dataset, groups: &GroupMembership) -> Result<()> {
    let mut w = csv_writer(path)?;
    let err = csv_err(path);
    w.write_record(["user", "group"]).map_err(&err)?;
    for u in 0..groups.n_users() {
        for &g in groups.groups_of(u) {
            w.write_record([data.user_labels[u].as_str(), groups.universe()[g].as_str()])
                .map_err(&err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes every part of `data` under `dir` using the conventional names.
pub fn write_dataset(dir: &Path, data: &Dataset, binary_features: bool) -> Result<DataPaths> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ratings = dir.join(RATINGS_FILE);
    write_ratings(&ratings, data)?;
    let features = if binary_features {
        let p = dir.join(FEATURES_BIN_FILE);
        write_features_binary(&p, &data.features)?;
        p
    } else {
        let p = dir.join(FEATURES_CSV_FILE);
        write_features_csv(&p, data)?;
        p
    };
    let social = match &data.social {
        Some(g) => {
            let p = dir.join(SOCIAL_FILE);
            write_social(&p, data, g)?;
            Some(p)
        }
        None => None,
    };
    let groups = match &data.groups {
        Some(g) => {
            let p = dir.join(GROUPS_FILE);
            write_groups(&p, data, g)?;
            Some(p)
        }
        None => None,
    };
    Ok(DataPaths {
        ratings,
        features,
        social,
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    fn features_csv(dir: &Path) -> PathBuf {
        write(dir, "features.csv", "item,f0,f1\na,1,0\nb,0,1\nc,1,1\nd,0.5,2\n")
    }

    #[test]
    fn ingests_small_csv() {
        let dir = tempfile::tempdir().unwrap();
        let paths = DataPaths {
            ratings: write(
                dir.path(),
                "ratings.csv",
                "user,item,value\nx,a,1\nx,c,1\ny,b,1\nz,d,1\nz,a,1\n",
            ),
            features: features_csv(dir.path()),
            social: None,
            groups: None,
        };
        let ds = ingest_dataset(&paths, FeatureScaling::Raw).unwrap();
        assert_eq!(ds.n_users(), 3);
        assert_eq!(ds.n_items(), 4);
        assert_eq!(ds.ratings.n_observed(), 5);
        assert_eq!(ds.user_labels, ["x", "y", "z"]);
        assert!(ds.ratings.is_observed(2, 3));
    }

    #[test]
    fn duplicate_rating_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let paths = DataPaths {
            ratings: write(dir.path(), "ratings.csv", "user,item,value\nx,a,1\ny,b,1\nx,a,1\n"),
            features: features_csv(dir.path()),
            social: None,
            groups: None,
        };
        match ingest_dataset(&paths, FeatureScaling::Raw) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.contains("line 2"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_rating_row_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let paths = DataPaths {
            ratings: write(dir.path(), "ratings.csv", "user,item,value\nx,a,1\nx,b,yes\n"),
            features: features_csv(dir.path()),
            social: None,
            groups: None,
        };
        assert!(matches!(
            ingest_dataset(&paths, FeatureScaling::Raw),
            Err(Error::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn ragged_features_are_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let paths = DataPaths {
            ratings: write(dir.path(), "ratings.csv", "user,item,value\nx,a,1\n"),
            features: write(dir.path(), "features.csv", "item,f0,f1\na,1,0\nb,0\n"),
            social: None,
            groups: None,
        };
        assert!(matches!(
            ingest_dataset(&paths, FeatureScaling::Raw),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn unknown_item_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let paths = DataPaths {
            ratings: write(dir.path(), "ratings.csv", "user,item,value\nx,zz,1\n"),
            features: features_csv(dir.path()),
            social: None,
            groups: None,
        };
        assert!(matches!(
            ingest_dataset(&paths, FeatureScaling::Raw),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn binary_features_roundtrip_and_validate_size() {
        let dir = tempfile::tempdir().unwrap();
        let f = FeatureMatrix::new(DMatrix::from_fn(3, 5, |i, j| (i * 5 + j) as f64 * 0.25)).unwrap();
        let p = dir.path().join("f.bin");
        write_features_binary(&p, &f).unwrap();
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..4], b"STMF");
        assert_eq!(bytes.len(), 16 + 4 * 15);
        let (labels, back) = read_features(&p).unwrap();
        assert_eq!(labels.len(), 5);
        assert_eq!(back, f);

        std::fs::write(&p, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(read_features(&p), Err(Error::Schema(_))));
    }

    #[test]
    fn social_and_group_only_users_are_appended() {
        let dir = tempfile::tempdir().unwrap();
        let paths = DataPaths {
            ratings: write(dir.path(), "ratings.csv", "user,item,value\nx,a,1\n"),
            features: features_csv(dir.path()),
            social: Some(write(dir.path(), "social.csv", "user_a,user_b,similarity\nx,y,0.5\n")),
            groups: Some(write(dir.path(), "groups.csv", "user,group\nw,cats\nx,cats\n")),
        };
        let ds = ingest_dataset(&paths, FeatureScaling::Raw).unwrap();
        assert_eq!(ds.user_labels, ["x", "y", "w"]);
        assert_eq!(ds.social.as_ref().unwrap().get(1, 0), Some(0.5));
        assert_eq!(ds.groups.as_ref().unwrap().groups_of(2).len(), 1);
    }
}
