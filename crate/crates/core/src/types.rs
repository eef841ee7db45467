//! Datafiles and the two representations of a bipartite matching.
//!
//! File-1 records are indexed `0..n1` and file-2 records `0..n2` internally.
//! The 1-based label convention (`i` for a link to file-1 record `i`,
//! `n1 + j` for an unmatched file-2 record `j`) is used at the boundary:
//! text exports and [`MatchingLabeling::label`].

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    String,
    Categorical,
    Integer,
    DatePart,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSchema {
    pub name: String,
    pub kind: FieldKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    /// Optional user identifier carried through for reporting.
    pub id: Option<String>,
    /// One slot per schema field; `None` is a missing value.
    pub values: Vec<Option<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataFile {
    schema: Vec<FieldSchema>,
    records: Vec<Record>,
}

impl DataFile {
    pub fn new(schema: Vec<FieldSchema>, records: Vec<Record>) -> Result<Self> {
        let mut names = HashSet::new();
        for f in &schema {
            if !names.insert(f.name.as_str()) {
                return Err(Error::Data(format!("duplicate schema field `{}`", f.name)));
            }
        }
        let mut ids = HashSet::new();
        for (k, r) in records.iter().enumerate() {
            if r.values.len() != schema.len() {
                return Err(Error::Data(format!(
                    "record {} has {} values, schema has {} fields",
                    k + 1,
                    r.values.len(),
                    schema.len()
                )));
            }
            if let Some(id) = &r.id {
                if !ids.insert(id.as_str()) {
                    return Err(Error::Data(format!("duplicate record identifier `{id}`")));
                }
            }
        }
        Ok(Self { schema, records })
    }

    pub fn schema(&self) -> &[FieldSchema] {
        &self.schema
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|f| f.name == name)
    }

    pub fn value(&self, record: usize, field: usize) -> Option<&str> {
        self.records[record].values[field].as_deref()
    }
}

/// Two datafiles oriented so that `file1` is the larger one.
#[derive(Debug, Clone)]
pub struct FilePair {
    pub file1: DataFile,
    pub file2: DataFile,
    /// True when the inputs were given as (smaller, larger) and got swapped.
    pub swapped: bool,
}

impl FilePair {
    pub fn new(a: DataFile, b: DataFile) -> Self {
        if a.len() >= b.len() {
            Self { file1: a, file2: b, swapped: false }
        } else {
            Self { file1: b, file2: a, swapped: true }
        }
    }

    pub fn n1(&self) -> usize {
        self.file1.len()
    }

    pub fn n2(&self) -> usize {
        self.file2.len()
    }
}

/// Matching labeling: for each file-2 record, its file-1 match or none.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MatchingLabeling {
    n1: usize,
    links: Vec<Option<usize>>,
}

impl MatchingLabeling {
    /// Empty matching: every file-2 record unmatched.
    pub fn empty(n1: usize, n2: usize) -> Self {
        Self { n1, links: vec![None; n2] }
    }

    pub fn from_links(n1: usize, links: Vec<Option<usize>>) -> Result<Self> {
        let mut seen = vec![false; n1];
        for (j, link) in links.iter().enumerate() {
            if let Some(i) = *link {
                if i >= n1 {
                    return Err(Error::InvalidLabeling(format!(
                        "record {} of file 2 links to {} but n1 = {n1}",
                        j + 1,
                        i + 1
                    )));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::InvalidLabeling(format!(
                        "file-1 record {} is linked more than once",
                        i + 1
                    )));
                }
            }
        }
        Ok(Self { n1, links })
    }

    /// Build from 1-based labels: `i <= n1` is a link, `n1 + j` (1-based `j`) is unmatched.
    pub fn from_labels(n1: usize, labels: &[usize]) -> Result<Self> {
        let links = labels
            .iter()
            .enumerate()
            .map(|(j, &z)| {
                if (1..=n1).contains(&z) {
                    Ok(Some(z - 1))
                } else if z == n1 + j + 1 {
                    Ok(None)
                } else {
                    Err(Error::InvalidLabeling(format!(
                        "label {z} for file-2 record {} is neither in 1..={n1} nor {}",
                        j + 1,
                        n1 + j + 1
                    )))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_links(n1, links)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.links.len()
    }

    pub fn links(&self) -> &[Option<usize>] {
        &self.links
    }

    pub fn link(&self, j: usize) -> Option<usize> {
        self.links[j]
    }

    /// 1-based label of file-2 record `j` (0-based).
    pub fn label(&self, j: usize) -> usize {
        match self.links[j] {
            Some(i) => i + 1,
            None => self.n1 + j + 1,
        }
    }

    pub fn labels(&self) -> Vec<usize> {
        (0..self.n2()).map(|j| self.label(j)).collect()
    }

    /// Number of linked file-2 records, `n12(Z)`.
    pub fn overlap_size(&self) -> usize {
        self.links.iter().filter(|l| l.is_some()).count()
    }

    pub fn to_matrix(&self) -> MatchingMatrix {
        let mut pairs: Vec<(usize, usize)> =
            self.links.iter().enumerate().filter_map(|(j, l)| l.map(|i| (i, j))).collect();
        pairs.sort_unstable();
        MatchingMatrix { n1: self.n1, n2: self.n2(), pairs }
    }
}

/// Sparse matching matrix: the `(i, j)` cells equal to one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchingMatrix {
    n1: usize,
    n2: usize,
    pairs: Vec<(usize, usize)>,
}

impl MatchingMatrix {
    pub fn from_pairs(n1: usize, n2: usize, mut pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut rows = vec![false; n1];
        let mut cols = vec![false; n2];
        for &(i, j) in &pairs {
            if i >= n1 || j >= n2 {
                return Err(Error::InvalidMatching(format!(
                    "pair ({}, {}) outside a {n1} x {n2} matrix",
                    i + 1,
                    j + 1
                )));
            }
            if std::mem::replace(&mut rows[i], true) {
                return Err(Error::InvalidMatching(format!("row {} has two ones", i + 1)));
            }
            if std::mem::replace(&mut cols[j], true) {
                return Err(Error::InvalidMatching(format!("column {} has two ones", j + 1)));
            }
        }
        pairs.sort_unstable();
        Ok(Self { n1, n2, pairs })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.pairs.binary_search(&(i, j)).is_ok()
    }

    pub fn to_labeling(&self) -> MatchingLabeling {
        let mut links = vec![None; self.n2];
        for &(i, j) in &self.pairs {
            links[j] = Some(i);
        }
        MatchingLabeling { n1: self.n1, links }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn labeling_to_matrix_examples() {
        let z = MatchingLabeling::from_labels(2, &[1, 4]).unwrap();
        assert_eq!(z.to_matrix().pairs(), &[(0, 0)]);
        let z = MatchingLabeling::from_labels(2, &[3, 4]).unwrap();
        assert!(z.to_matrix().pairs().is_empty());
        let z = MatchingLabeling::from_labels(5, &[2, 1, 8]).unwrap();
        let d = z.to_matrix();
        assert!(d.get(1, 0) && d.get(0, 1));
        assert_eq!(d.pairs().len(), 2);
    }

    #[test]
    fn matrix_to_labeling_examples() {
        let d = MatchingMatrix::from_pairs(2, 2, vec![(0, 0)]).unwrap();
        assert_eq!(d.to_labeling().labels(), vec![1, 4]);
        let d = MatchingMatrix::from_pairs(5, 3, vec![]).unwrap();
        assert_eq!(d.to_labeling().labels(), vec![6, 7, 8]);
        let d = MatchingMatrix::from_pairs(5, 3, vec![(1, 0), (0, 1)]).unwrap();
        assert_eq!(d.to_labeling().labels(), vec![2, 1, 8]);
    }

    #[test]
    fn overlap_size_examples() {
        assert_eq!(MatchingLabeling::from_labels(2, &[3, 4]).unwrap().overlap_size(), 0);
        assert_eq!(MatchingLabeling::from_labels(2, &[1, 4]).unwrap().overlap_size(), 1);
        assert_eq!(MatchingLabeling::from_labels(5, &[2, 1, 8]).unwrap().overlap_size(), 2);
    }

    #[test]
    fn validation_rejects_bad_inputs() {
        assert!(MatchingLabeling::from_labels(3, &[1, 1]).is_err());
        // n1 + j' for the wrong j
        assert!(MatchingLabeling::from_labels(2, &[4, 3]).is_err());
        assert!(MatchingLabeling::from_labels(2, &[0]).is_err());
        assert!(MatchingMatrix::from_pairs(3, 3, vec![(0, 0), (0, 1)]).is_err());
        assert!(MatchingMatrix::from_pairs(3, 3, vec![(0, 2), (1, 2)]).is_err());
        assert!(MatchingMatrix::from_pairs(3, 3, vec![(3, 0)]).is_err());
    }

    #[test]
    fn file_pair_swaps_so_file1_is_larger() {
        let schema = vec![FieldSchema { name: "a".into(), kind: FieldKind::String }];
        let rec = |v: &str| Record { id: None, values: vec![Some(v.into())] };
        let small = DataFile::new(schema.clone(), vec![rec("x")]).unwrap();
        let big = DataFile::new(schema, vec![rec("x"), rec("y")]).unwrap();
        let p = FilePair::new(small, big);
        assert!(p.swapped);
        assert_eq!((p.n1(), p.n2()), (2, 1));
    }

    #[test]
    fn datafile_rejects_duplicate_ids() {
        let schema = vec![FieldSchema { name: "a".into(), kind: FieldKind::String }];
        let rec = |id: &str| Record { id: Some(id.into()), values: vec![None] };
        assert!(DataFile::new(schema, vec![rec("1"), rec("1")]).is_err());
    }

    fn labeling_strategy() -> impl Strategy<Value = MatchingLabeling> {
        (1usize..8, 0usize..8).prop_flat_map(|(n1, n2)| {
            let n2 = n2.min(n1);
            (Just(n1), Just(n2), proptest::sample::subsequence((0..n1).collect::<Vec<_>>(), 0..=n2), any::<u64>())
        })
        .prop_map(|(n1, n2, targets, seed)| {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut links: Vec<Option<usize>> = targets.into_iter().map(Some).collect();
            links.resize(n2, None);
            links.shuffle(&mut rng);
            MatchingLabeling::from_links(n1, links).unwrap()
        })
    }

    proptest! {
        #[test]
        fn round_trip_between_representations(z in labeling_strategy()) {
            let d = z.to_matrix();
            prop_assert_eq!(d.pairs().len(), z.overlap_size());
            prop_assert_eq!(&d.to_labeling(), &z);
            let d2 = MatchingMatrix::from_pairs(d.n1(), d.n2(), d.pairs().to_vec()).unwrap();
            prop_assert_eq!(d2, d);
        }
    }
}
