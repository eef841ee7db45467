//! Comparison vectors: ordinal disagreement levels for candidate record pairs.

mod similarity;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::DataFile;

pub use similarity::{levenshtein, modified_levenshtein, normalized_levenshtein, Adjacency};

/// Maximum number of comparison fields (observed flags are a `u64` mask).
pub const MAX_FIELDS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SimilarityKind {
    NormalizedLevenshtein,
    ModifiedLevenshtein,
    AbsoluteDifference,
    BinaryAgreement,
    Adjacency,
}

impl SimilarityKind {
    /// Default level thresholds: four levels 0 | (0,.25] | (.25,.5] | (.5,1]
    /// for string distances, agree/disagree for binary fields and
    /// same/adjacent/other for regions. Absolute differences have no default.
    pub fn default_thresholds(self) -> Option<Vec<f64>> {
        match self {
            Self::NormalizedLevenshtein | Self::ModifiedLevenshtein => Some(vec![0.0, 0.25, 0.5, 1.0]),
            Self::BinaryAgreement => Some(vec![0.0, 1.0]),
            Self::Adjacency => Some(vec![0.0, 1.0, 2.0]),
            Self::AbsoluteDifference => None,
        }
    }
}

/// Absolute-difference thresholds for the date parts of a date of death:
/// year 0 | 1 | 2 | 3+, month 0 | 1 | 2-3 | 4+, day 0 | 1-2 | 3-7 | 8+.
pub fn date_part_thresholds(part: &str) -> Option<Vec<f64>> {
    match part {
        "year" => Some(vec![0.0, 1.0, 2.0, f64::INFINITY]),
        "month" => Some(vec![0.0, 1.0, 3.0, f64::INFINITY]),
        "day" => Some(vec![0.0, 2.0, 7.0, f64::INFINITY]),
        _ => None,
    }
}

/// How one field is compared and binned into disagreement levels.
///
/// Level `0` is `s <= t[0]`, level `l` is `t[l-1] < s <= t[l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparatorSpec {
    field: String,
    kind: SimilarityKind,
    thresholds: Vec<f64>,
    adjacency: Option<Adjacency>,
}

impl ComparatorSpec {
    pub fn new(field: impl Into<String>, kind: SimilarityKind, thresholds: Option<Vec<f64>>) -> Result<Self> {
        let field = field.into();
        let thresholds = match thresholds.or_else(|| kind.default_thresholds()) {
            Some(t) => t,
            None => {
                return Err(Error::Config(format!(
                    "field `{field}`: absolute-difference comparator needs thresholds"
                )))
            }
        };
        if thresholds.len() < 2 {
            return Err(Error::Config(format!("field `{field}`: at least two levels required")));
        }
        if thresholds.len() > u8::MAX as usize {
            return Err(Error::Config(format!("field `{field}`: too many levels")));
        }
        if thresholds.iter().any(|t| t.is_nan()) || thresholds[0] < 0.0 {
            return Err(Error::Config(format!(
                "field `{field}`: level 0 must contain perfect agreement (first threshold >= 0)"
            )));
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("field `{field}`: thresholds must be strictly increasing")));
        }
        Ok(Self { field, kind, thresholds, adjacency: None })
    }

    pub fn with_adjacency(mut self, adjacency: Adjacency) -> Self {
        self.adjacency = Some(adjacency);
        self
    }

    pub fn field(&self) -> &str {
        &self.field
    }

    pub fn kind(&self) -> SimilarityKind {
        self.kind
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Number of levels, `L_f + 1`.
    pub fn levels(&self) -> usize {
        self.thresholds.len()
    }

    pub fn similarity(&self, a: &str, b: &str) -> Result<f64> {
        Ok(match self.kind {
            SimilarityKind::NormalizedLevenshtein => normalized_levenshtein(a, b),
            SimilarityKind::ModifiedLevenshtein => modified_levenshtein(a, b),
            SimilarityKind::BinaryAgreement => f64::from(u8::from(a != b)),
            SimilarityKind::Adjacency => {
                let level = match &self.adjacency {
                    Some(adj) => adj.compare(a, b),
                    None if a == b => 0,
                    None => 2,
                };
                f64::from(level)
            }
            SimilarityKind::AbsoluteDifference => {
                let parse = |v: &str| {
                    v.trim().parse::<f64>().map_err(|_| {
                        Error::Data(format!("field `{}`: `{v}` is not numeric", self.field))
                    })
                };
                (parse(a)? - parse(b)?).abs()
            }
        })
    }

    /// Level of the interval containing `s`.
    pub fn bin(&self, s: f64) -> Result<u8> {
        if s.is_nan() || s < 0.0 {
            return Err(Error::Config(format!("field `{}`: similarity {s} out of range", self.field)));
        }
        self.thresholds
            .iter()
            .position(|&t| s <= t)
            .map(|l| l as u8)
            .ok_or_else(|| {
                Error::Config(format!(
                    "field `{}`: similarity {s} above the last threshold {}",
                    self.field,
                    self.thresholds[self.thresholds.len() - 1]
                ))
            })
    }

    /// Disagreement level of two values; `None` when either is missing.
    pub fn compare(&self, a: Option<&str>, b: Option<&str>) -> Result<Option<u8>> {
        match (a, b) {
            (Some(a), Some(b)) => self.bin(self.similarity(a, b)?).map(Some),
            _ => Ok(None),
        }
    }
}

/// Levels of one candidate pair: `levels[f]` is meaningful only when bit `f`
/// of `observed` is set (it is stored as 0 otherwise).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ComparisonVector {
    levels: Vec<u8>,
    observed: u64,
}

impl ComparisonVector {
    pub fn new(levels: &[Option<u8>]) -> Self {
        assert!(levels.len() <= MAX_FIELDS);
        let mut observed = 0u64;
        let levels = levels
            .iter()
            .enumerate()
            .map(|(f, l)| match l {
                Some(l) => {
                    observed |= 1 << f;
                    *l
                }
                None => 0,
            })
            .collect();
        Self { levels, observed }
    }

    pub fn num_fields(&self) -> usize {
        self.levels.len()
    }

    #[inline]
    pub fn level(&self, f: usize) -> Option<u8> {
        (self.observed >> f & 1 == 1).then(|| self.levels[f])
    }

    pub fn observed_mask(&self) -> u64 {
        self.observed
    }

    /// `(field, level)` for each observed field, in field order.
    pub fn observed_levels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.levels
            .iter()
            .enumerate()
            .filter(|(f, _)| self.observed >> f & 1 == 1)
            .map(|(f, &l)| (f, l as usize))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldLevels {
    pub name: String,
    /// Number of levels, `L_f + 1`.
    pub levels: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidatePair {
    pub i: u32,
    pub j: u32,
    /// Index into [`ComparisonData::patterns`].
    pub pattern: u32,
}

/// Comparison vectors for all candidate pairs, stored as indices into the
/// table of distinct vectors. Pairs are ordered i-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonData {
    n1: usize,
    n2: usize,
    fields: Vec<FieldLevels>,
    patterns: Vec<ComparisonVector>,
    pairs: Vec<CandidatePair>,
}

impl ComparisonData {
    /// Assemble from explicit per-pair levels. Pattern ids are assigned in
    /// order of first appearance.
    pub fn from_pairs(
        n1: usize,
        n2: usize,
        fields: Vec<FieldLevels>,
        pairs: impl IntoIterator<Item = (usize, usize, Vec<Option<u8>>)>,
    ) -> Result<Self> {
        if fields.len() > MAX_FIELDS {
            return Err(Error::Config(format!("at most {MAX_FIELDS} comparison fields")));
        }
        let mut index: HashMap<ComparisonVector, u32> = HashMap::new();
        let mut patterns = Vec::new();
        let mut out = Vec::new();
        for (i, j, levels) in pairs {
            if i >= n1 || j >= n2 {
                return Err(Error::Data(format!("pair ({}, {}) outside {n1} x {n2}", i + 1, j + 1)));
            }
            if levels.len() != fields.len() {
                return Err(Error::Data(format!(
                    "pair ({}, {}) has {} levels, expected {}",
                    i + 1,
                    j + 1,
                    levels.len(),
                    fields.len()
                )));
            }
            for (f, l) in levels.iter().enumerate() {
                if let Some(l) = l {
                    if *l as usize >= fields[f].levels {
                        return Err(Error::Data(format!(
                            "pair ({}, {}) field `{}` level {l} out of range",
                            i + 1,
                            j + 1,
                            fields[f].name
                        )));
                    }
                }
            }
            let v = ComparisonVector::new(&levels);
            let next = patterns.len() as u32;
            let id = *index.entry(v.clone()).or_insert_with(|| {
                patterns.push(v);
                next
            });
            out.push(CandidatePair { i: i as u32, j: j as u32, pattern: id });
        }
        out.sort_by_key(|p| (p.i, p.j));
        if out.windows(2).any(|w| (w[0].i, w[0].j) == (w[1].i, w[1].j)) {
            return Err(Error::Data("duplicate candidate pair".into()));
        }
        Ok(Self { n1, n2, fields, patterns, pairs: out })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn fields(&self) -> &[FieldLevels] {
        &self.fields
    }

    pub fn num_fields(&self) -> usize {
        self.fields.len()
    }

    /// `L_f + 1` for every field.
    pub fn level_counts(&self) -> Vec<usize> {
        self.fields.iter().map(|f| f.levels).collect()
    }

    pub fn patterns(&self) -> &[ComparisonVector] {
        &self.patterns
    }

    pub fn pairs(&self) -> &[CandidatePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn vector(&self, pair: &CandidatePair) -> &ComparisonVector {
        &self.patterns[pair.pattern as usize]
    }

    /// Number of candidate pairs carrying each pattern.
    pub fn pattern_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.patterns.len()];
        for p in &self.pairs {
            counts[p.pattern as usize] += 1;
        }
        counts
    }

    /// Candidates of every file-2 record: `(i, pattern)` sorted by `i`.
    pub fn by_file2(&self) -> Vec<Vec<(u32, u32)>> {
        let mut cols = vec![Vec::new(); self.n2];
        for p in &self.pairs {
            cols[p.j as usize].push((p.i, p.pattern));
        }
        cols
    }

    /// Pattern of pair `(i, j)` if it is a candidate.
    pub fn pattern_of(&self, i: usize, j: usize) -> Option<u32> {
        self.pairs
            .binary_search_by_key(&(i as u32, j as u32), |p| (p.i, p.j))
            .ok()
            .map(|k| self.pairs[k].pattern)
    }

    /// Copy with one extra field that is unobserved for every pair.
    pub fn with_unobserved_field(&self, name: impl Into<String>, levels: usize) -> Self {
        let mut fields = self.fields.clone();
        fields.push(FieldLevels { name: name.into(), levels });
        let patterns = self
            .patterns
            .iter()
            .map(|v| {
                let mut levels = v.levels.clone();
                levels.push(0);
                ComparisonVector { levels, observed: v.observed }
            })
            .collect();
        Self { n1: self.n1, n2: self.n2, fields, patterns, pairs: self.pairs.clone() }
    }
}

/// Exact-key blocking on one or more fields.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockingSpec {
    pub fields: Vec<String>,
}

impl BlockingSpec {
    /// Block key of every record; `None` when any key field is missing
    /// (such records form a residual block compared against nothing).
    fn keys(&self, file: &DataFile) -> Result<Vec<Option<Vec<String>>>> {
        let idx = self
            .fields
            .iter()
            .map(|name| file.field_index(name).ok_or_else(|| Error::UnknownField(name.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..file.len())
            .map(|r| idx.iter().map(|&f| file.value(r, f).map(str::to_owned)).collect::<Option<Vec<_>>>())
            .collect())
    }

    /// Candidate `(i, j)` pairs, i-major.
    pub fn candidate_pairs(&self, f1: &DataFile, f2: &DataFile) -> Result<Vec<(usize, usize)>> {
        let k1 = self.keys(f1)?;
        let k2 = self.keys(f2)?;
        let mut blocks: HashMap<&[String], Vec<usize>> = HashMap::new();
        for (j, k) in k2.iter().enumerate() {
            if let Some(k) = k {
                blocks.entry(k.as_slice()).or_default().push(j);
            }
        }
        let mut out = Vec::new();
        for (i, k) in k1.iter().enumerate() {
            if let Some(js) = k.as_ref().and_then(|k| blocks.get(k.as_slice())) {
                out.extend(js.iter().map(|&j| (i, j)));
            }
        }
        Ok(out)
    }
}

/// Compare every candidate pair of `f1 x f2` (or only within blocks).
pub fn build_comparison_data(
    f1: &DataFile,
    f2: &DataFile,
    specs: &[ComparatorSpec],
    blocking: Option<&BlockingSpec>,
) -> Result<ComparisonData> {
    if specs.is_empty() {
        return Err(Error::Config("no comparison fields configured".into()));
    }
    let columns = specs
        .iter()
        .map(|s| {
            let c1 = f1.field_index(s.field()).ok_or_else(|| Error::UnknownField(s.field().into()))?;
            let c2 = f2.field_index(s.field()).ok_or_else(|| Error::UnknownField(s.field().into()))?;
            Ok((c1, c2))
        })
        .collect::<Result<Vec<_>>>()?;
    let candidates: Vec<(usize, usize)> = match blocking {
        Some(b) => b.candidate_pairs(f1, f2)?,
        None => (0..f1.len()).flat_map(|i| (0..f2.len()).map(move |j| (i, j))).collect(),
    };
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let compared = candidates
        .par_iter()
        .map(|&(i, j)| {
            let levels = specs
                .iter()
                .zip(&columns)
                .map(|(s, &(c1, c2))| s.compare(f1.value(i, c1), f2.value(j, c2)))
                .collect::<Result<Vec<_>>>()?;
            Ok((i, j, levels))
        })
        .collect::<Result<Vec<_>>>()?;
    let fields = specs.iter().map(|s| FieldLevels { name: s.field().into(), levels: s.levels() }).collect();
    ComparisonData::from_pairs(f1.len(), f2.len(), fields, compared)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{FieldKind, FieldSchema, Record};

    fn file(fields: &[&str], rows: &[&[Option<&str>]]) -> DataFile {
        let schema = fields.iter().map(|f| FieldSchema { name: f.to_string(), kind: FieldKind::String }).collect();
        let records = rows
            .iter()
            .map(|r| Record { id: None, values: r.iter().map(|v| v.map(str::to_owned)).collect() })
            .collect();
        DataFile::new(schema, records).unwrap()
    }

    #[test]
    fn binning_follows_left_open_intervals() {
        let s = ComparatorSpec::new("name", SimilarityKind::NormalizedLevenshtein, None).unwrap();
        assert_eq!(s.bin(0.0).unwrap(), 0);
        assert_eq!(s.bin(1e-9).unwrap(), 1);
        assert_eq!(s.bin(0.25).unwrap(), 1);
        assert_eq!(s.bin(0.2500001).unwrap(), 2);
        assert_eq!(s.bin(0.5).unwrap(), 2);
        assert_eq!(s.bin(1.0).unwrap(), 3);
        assert!(s.bin(1.5).is_err());
    }

    #[test]
    fn compare_field_examples() {
        let s = ComparatorSpec::new("name", SimilarityKind::NormalizedLevenshtein, None).unwrap();
        assert_eq!(s.compare(Some("ANA"), Some("ANA")).unwrap(), Some(0));
        let year = ComparatorSpec::new("year", SimilarityKind::AbsoluteDifference, date_part_thresholds("year")).unwrap();
        assert_eq!(year.compare(Some("1981"), Some("1986")).unwrap(), Some(3));
        assert_eq!(year.compare(Some("1981"), Some("1982")).unwrap(), Some(1));
        assert_eq!(year.compare(None, Some("1986")).unwrap(), None);
        let month = ComparatorSpec::new("m", SimilarityKind::AbsoluteDifference, date_part_thresholds("month")).unwrap();
        assert_eq!(month.compare(Some("1"), Some("4")).unwrap(), Some(2));
        assert_eq!(month.compare(Some("1"), Some("5")).unwrap(), Some(3));
        let day = ComparatorSpec::new("d", SimilarityKind::AbsoluteDifference, date_part_thresholds("day")).unwrap();
        assert_eq!(day.compare(Some("10"), Some("12")).unwrap(), Some(1));
        assert_eq!(day.compare(Some("10"), Some("17")).unwrap(), Some(2));
        assert_eq!(day.compare(Some("10"), Some("18")).unwrap(), Some(3));
        assert!(year.compare(Some("x"), Some("1")).is_err());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        use SimilarityKind::*;
        assert!(ComparatorSpec::new("f", AbsoluteDifference, None).is_err());
        assert!(ComparatorSpec::new("f", BinaryAgreement, Some(vec![0.0])).is_err());
        assert!(ComparatorSpec::new("f", BinaryAgreement, Some(vec![0.0, 0.0])).is_err());
        assert!(ComparatorSpec::new("f", BinaryAgreement, Some(vec![-1.0, 1.0])).is_err());
    }

    #[test]
    fn adjacency_comparator() {
        let s = ComparatorSpec::new("region", SimilarityKind::Adjacency, None)
            .unwrap()
            .with_adjacency(Adjacency::from_edges([("A", "B")]));
        assert_eq!(s.compare(Some("A"), Some("A")).unwrap(), Some(0));
        assert_eq!(s.compare(Some("A"), Some("B")).unwrap(), Some(1));
        assert_eq!(s.compare(Some("A"), Some("C")).unwrap(), Some(2));
    }

    #[test]
    fn pair_counts_with_and_without_blocking() {
        let f1 = file(&["k", "n"], &[&[Some("a"), Some("x")], &[Some("b"), Some("y")]]);
        let f2 = file(&["k", "n"], &[&[Some("a"), Some("x")]]);
        let spec = [ComparatorSpec::new("n", SimilarityKind::BinaryAgreement, None).unwrap()];
        let c = build_comparison_data(&f1, &f2, &spec, None).unwrap();
        assert_eq!(c.len(), 2);

        // blocks of sizes (3,2) and (2,2), plus residual records with missing keys
        let k1 = [Some("a"), Some("a"), Some("a"), Some("b"), Some("b"), None];
        let k2 = [Some("b"), Some("a"), Some("b"), Some("a"), None];
        let rows1: Vec<Vec<Option<&str>>> = k1.iter().map(|k| vec![*k, Some("v")]).collect();
        let rows2: Vec<Vec<Option<&str>>> = k2.iter().map(|k| vec![*k, Some("v")]).collect();
        let f1 = file(&["k", "n"], &rows1.iter().map(|r| r.as_slice()).collect::<Vec<_>>());
        let f2 = file(&["k", "n"], &rows2.iter().map(|r| r.as_slice()).collect::<Vec<_>>());
        let blocking = BlockingSpec { fields: vec!["k".into()] };
        let c = build_comparison_data(&f1, &f2, &spec, Some(&blocking)).unwrap();
        assert_eq!(c.len(), 3 * 2 + 2 * 2);
        assert!(c.pairs().windows(2).all(|w| (w[0].i, w[0].j) < (w[1].i, w[1].j)));
        let c = build_comparison_data(&f1, &f2, &spec, None).unwrap();
        assert_eq!(c.len(), 6 * 5);
    }

    #[test]
    fn errors_for_unknown_field_and_empty_candidates() {
        let f1 = file(&["k"], &[&[Some("a")]]);
        let f2 = file(&["k"], &[&[Some("b")]]);
        let spec = [ComparatorSpec::new("zzz", SimilarityKind::BinaryAgreement, None).unwrap()];
        assert!(matches!(build_comparison_data(&f1, &f2, &spec, None), Err(Error::UnknownField(_))));
        let spec = [ComparatorSpec::new("k", SimilarityKind::BinaryAgreement, None).unwrap()];
        let blocking = BlockingSpec { fields: vec!["k".into()] };
        assert!(matches!(build_comparison_data(&f1, &f2, &spec, Some(&blocking)), Err(Error::EmptyCandidates)));
    }

    #[test]
    fn missing_values_are_unobserved_for_every_comparator() {
        use SimilarityKind::*;
        let kinds = [
            (NormalizedLevenshtein, None),
            (ModifiedLevenshtein, None),
            (BinaryAgreement, None),
            (Adjacency, None),
            (AbsoluteDifference, date_part_thresholds("year")),
        ];
        for (k, t) in kinds {
            let s = ComparatorSpec::new("f", k, t).unwrap();
            assert_eq!(s.compare(None, Some("1")).unwrap(), None);
            assert_eq!(s.compare(Some("1"), None).unwrap(), None);
            assert_eq!(s.compare(None, None).unwrap(), None);
        }
    }

    use proptest::prelude::*;

    proptest! {
        #[test]
        fn comparators_are_symmetric(a in "[A-Z ]{0,8}", b in "[A-Z ]{0,8}") {
            for k in [SimilarityKind::NormalizedLevenshtein, SimilarityKind::ModifiedLevenshtein, SimilarityKind::BinaryAgreement] {
                let s = ComparatorSpec::new("f", k, None).unwrap();
                prop_assert_eq!(s.compare(Some(&a), Some(&b)).unwrap(), s.compare(Some(&b), Some(&a)).unwrap());
            }
        }

        #[test]
        fn binning_is_total_on_range(s in 0.0f64..=1.0) {
            let spec = ComparatorSpec::new("f", SimilarityKind::NormalizedLevenshtein, None).unwrap();
            let l = spec.bin(s).unwrap() as usize;
            let t = spec.thresholds();
            prop_assert!(s <= t[l]);
            prop_assert!(l == 0 || s > t[l - 1]);
        }

        #[test]
        fn absolute_difference_is_symmetric(a in -50i32..3000, b in -50i32..3000) {
            let s = ComparatorSpec::new("y", SimilarityKind::AbsoluteDifference, date_part_thresholds("year")).unwrap();
            let (a, b) = (a.to_string(), b.to_string());
            prop_assert_eq!(s.compare(Some(&a), Some(&b)).unwrap(), s.compare(Some(&b), Some(&a)).unwrap());
        }
    }
}
