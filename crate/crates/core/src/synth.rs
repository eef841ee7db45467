//! Synthetic datafile pairs with controlled overlap and record corruption.
//!
//! Clean records (given name, family name, age band, occupation group) are
//! drawn from bundled frequency tables. File 1 holds clean records; the
//! file-2 copies of overlapping individuals are distorted with a fixed
//! number of erroneous fields, chosen uniformly at random, each receiving
//! one to three corruptions of a type applicable to that field.

use std::sync::OnceLock;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::comparison::{ComparatorSpec, SimilarityKind};
use crate::error::{Error, Result};
use crate::io::{FieldConfig, LinkageConfig};
use crate::types::{DataFile, FieldKind, FieldSchema, MatchingLabeling, Record};

const GIVEN_NAMES: &str = include_str!("../data/given_names.csv");
const FAMILY_NAMES: &str = include_str!("../data/family_names.csv");
const AGE_OCCUPATION: &str = include_str!("../data/age_occupation.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthField {
    GivenName,
    FamilyName,
    Age,
    Occupation,
}

impl SynthField {
    pub const ALL: [SynthField; 4] = [SynthField::GivenName, SynthField::FamilyName, SynthField::Age, SynthField::Occupation];

    pub fn name(self) -> &'static str {
        match self {
            SynthField::GivenName => "given_name",
            SynthField::FamilyName => "family_name",
            SynthField::Age => "age",
            SynthField::Occupation => "occupation",
        }
    }

    pub fn corruptions(self) -> &'static [CorruptionKind] {
        use CorruptionKind::*;
        match self {
            SynthField::GivenName | SynthField::FamilyName => &[Edit, Ocr, Keyboard, Phonetic],
            SynthField::Age | SynthField::Occupation => &[Missing, Keyboard],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorruptionKind {
    Missing,
    Edit,
    Ocr,
    Keyboard,
    Phonetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub records_per_file: usize,
    /// Fraction of file-2 records that also appear in file 1.
    pub overlap: f64,
    pub errors_per_record: usize,
    pub max_errors_per_field: usize,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn new(records_per_file: usize, overlap: f64, errors_per_record: usize, seed: u64) -> Self {
        Self { records_per_file, overlap, errors_per_record, max_errors_per_field: 3, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.overlap) {
            return Err(Error::Config(format!("overlap {} not in [0,1]", self.overlap)));
        }
        if self.errors_per_record > SynthField::ALL.len() {
            return Err(Error::Config(format!(
                "{} erroneous fields requested, records have {}",
                self.errors_per_record,
                SynthField::ALL.len()
            )));
        }
        if self.max_errors_per_field == 0 {
            return Err(Error::Config("max_errors_per_field must be at least 1".into()));
        }
        Ok(())
    }

    pub fn overlap_count(&self) -> usize {
        (self.overlap * self.records_per_file as f64).round() as usize
    }
}

/// The two files and the true matching.
#[derive(Debug, Clone)]
pub struct SyntheticPair {
    pub file1: DataFile,
    pub file2: DataFile,
    pub truth: MatchingLabeling,
}

struct Pools {
    given: (Vec<String>, WeightedIndex<f64>),
    family: (Vec<String>, WeightedIndex<f64>),
    age_occ: (Vec<(String, String)>, WeightedIndex<f64>),
}

fn parse_table(text: &str, key_cols: usize) -> (Vec<Vec<String>>, Vec<f64>) {
    let mut keys = Vec::new();
    let mut weights = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.trim().is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        keys.push(cols[..key_cols].iter().map(|s| s.to_string()).collect());
        weights.push(cols[key_cols].trim().parse().expect("bundled table weight"));
    }
    (keys, weights)
}

fn pools() -> &'static Pools {
    static POOLS: OnceLock<Pools> = OnceLock::new();
    POOLS.get_or_init(|| {
        let names = |text| {
            let (k, w) = parse_table(text, 1);
            (k.into_iter().map(|mut v| v.remove(0)).collect(), WeightedIndex::new(w).expect("bundled weights"))
        };
        let (k, w) = parse_table(AGE_OCCUPATION, 2);
        Pools {
            given: names(GIVEN_NAMES),
            family: names(FAMILY_NAMES),
            age_occ: (
                k.into_iter().map(|v| (v[0].clone(), v[1].clone())).collect(),
                WeightedIndex::new(w).expect("bundled weights"),
            ),
        }
    })
}

pub fn schema() -> Vec<FieldSchema> {
    SynthField::ALL
        .iter()
        .map(|f| FieldSchema {
            name: f.name().into(),
            kind: match f {
                SynthField::GivenName | SynthField::FamilyName => FieldKind::String,
                _ => FieldKind::Categorical,
            },
        })
        .collect()
}

/// Comparators of the simulation study: names by normalized Levenshtein
/// with levels `0`, `(0,.25]`, `(.25,.5]`, `(.5,1]`; age and occupation by
/// binary agreement.
pub fn default_comparators() -> Vec<ComparatorSpec> {
    SynthField::ALL
        .iter()
        .map(|f| {
            let kind = match f {
                SynthField::GivenName | SynthField::FamilyName => SimilarityKind::NormalizedLevenshtein,
                _ => SimilarityKind::BinaryAgreement,
            };
            ComparatorSpec::new(f.name(), kind, None).expect("default thresholds are valid")
        })
        .collect()
}

/// Linkage configuration for generated files: an `id` column, empty cells
/// for missing values and [`default_comparators`] on every field.
pub fn linkage_config() -> LinkageConfig {
    let fields = schema()
        .into_iter()
        .zip(default_comparators())
        .map(|(f, c)| FieldConfig {
            name: f.name,
            kind: f.kind,
            comparator: Some(c.kind()),
            thresholds: Some(c.thresholds().to_vec()),
            preset: None,
            adjacency: None,
        })
        .collect();
    LinkageConfig {
        id_column: Some("id".into()),
        missing_token: String::new(),
        delimiter: ',',
        fields,
        blocking: None,
        prior: None,
        base_dir: Default::default(),
    }
}

fn clean_record<R: Rng + ?Sized>(rng: &mut R) -> Vec<String> {
    let p = pools();
    let given = p.given.0[p.given.1.sample(rng)].clone();
    let family = p.family.0[p.family.1.sample(rng)].clone();
    let (age, occ) = p.age_occ.0[p.age_occ.1.sample(rng)].clone();
    vec![given, family, age, occ]
}

const KEY_ROWS: [(&str, f64); 4] = [("1234567890-", 0.0), ("QWERTYUIOP", 0.5), ("ASDFGHJKL", 0.75), ("ZXCVBNM", 1.25)];

fn key_position(c: char) -> Option<(usize, f64)> {
    let c = c.to_ascii_uppercase();
    KEY_ROWS
        .iter()
        .enumerate()
        .find_map(|(r, (keys, off))| keys.chars().position(|k| k == c).map(|x| (r, x as f64 + off)))
}

/// Keys physically next to `c` on a QWERTY layout (same row, or the rows
/// above and below within a key and a quarter).
pub fn keyboard_neighbors(c: char) -> Vec<char> {
    let Some((row, x)) = key_position(c) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for (r, (keys, off)) in KEY_ROWS.iter().enumerate() {
        for (k, key) in keys.chars().enumerate() {
            let dx = (k as f64 + off - x).abs();
            let near = if r == row { (dx - 1.0).abs() < 1e-9 } else { r.abs_diff(row) == 1 && dx <= 1.25 };
            if near {
                out.push(key);
            }
        }
    }
    out
}

const OCR_CONFUSIONS: &[(&str, &str)] = &[
    ("O", "0"),
    ("0", "O"),
    ("I", "1"),
    ("1", "I"),
    ("L", "1"),
    ("S", "5"),
    ("5", "S"),
    ("B", "8"),
    ("8", "B"),
    ("Z", "2"),
    ("G", "6"),
    ("Q", "O"),
    ("D", "O"),
    ("E", "F"),
    ("F", "E"),
    ("U", "V"),
    ("V", "U"),
    ("M", "RN"),
    ("RN", "M"),
    ("CL", "D"),
    ("VV", "W"),
    ("W", "VV"),
    ("H", "N"),
];

const PHONETIC_RULES: &[(&str, &str)] = &[
    ("PH", "F"),
    ("F", "PH"),
    ("LL", "L"),
    ("CK", "K"),
    ("C", "K"),
    ("K", "C"),
    ("TH", "T"),
    ("SCH", "SH"),
    ("GH", "G"),
    ("Y", "I"),
    ("IE", "Y"),
    ("EE", "I"),
    ("OU", "U"),
    ("SS", "S"),
    ("MM", "M"),
    ("NN", "N"),
    ("TT", "T"),
    ("Z", "S"),
    ("S", "Z"),
    ("KN", "N"),
    ("WR", "R"),
    ("EI", "IE"),
    ("AE", "E"),
    ("DT", "T"),
];

/// Replace one random occurrence of one applicable pattern.
fn apply_rule<R: Rng + ?Sized>(value: &str, rules: &[(&str, &str)], rng: &mut R) -> Option<String> {
    let mut sites = Vec::new();
    for &(from, to) in rules {
        for (pos, _) in value.match_indices(from) {
            sites.push((pos, from, to));
        }
    }
    let &(pos, from, to) = sites.choose(rng)?;
    Some(format!("{}{}{}", &value[..pos], to, &value[pos + from.len()..]))
}

const ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ";

fn random_edit<R: Rng + ?Sized>(value: &str, rng: &mut R) -> String {
    let mut chars: Vec<char> = value.chars().collect();
    let letter = |rng: &mut R| char::from(*ALPHABET.choose(rng).expect("non-empty"));
    let op = if chars.is_empty() { 0 } else { rng.random_range(0..3) };
    match op {
        0 => {
            let pos = rng.random_range(0..=chars.len());
            chars.insert(pos, letter(rng));
        }
        1 if chars.len() > 1 => {
            chars.remove(rng.random_range(0..chars.len()));
        }
        _ => {
            let pos = rng.random_range(0..chars.len());
            let old = chars[pos];
            chars[pos] = loop {
                let c = letter(rng);
                if c != old {
                    break c;
                }
            };
        }
    }
    chars.into_iter().collect()
}

/// Apply one corruption. Returns `None` for a missing value. OCR and
/// phonetic corruptions fall back to a random edit when no rule applies to
/// the value; keyboard corruptions do the same when no character has a
/// keyboard neighbour.
pub fn corrupt_value<R: Rng + ?Sized>(field: SynthField, kind: CorruptionKind, value: &str, rng: &mut R) -> Result<Option<String>> {
    if !field.corruptions().contains(&kind) {
        return Err(Error::Config(format!("{kind:?} corruption does not apply to {}", field.name())));
    }
    let out = match kind {
        CorruptionKind::Missing => return Ok(None),
        CorruptionKind::Edit => random_edit(value, rng),
        CorruptionKind::Ocr => apply_rule(value, OCR_CONFUSIONS, rng).unwrap_or_else(|| random_edit(value, rng)),
        CorruptionKind::Phonetic => apply_rule(value, PHONETIC_RULES, rng).unwrap_or_else(|| random_edit(value, rng)),
        CorruptionKind::Keyboard => {
            let chars: Vec<char> = value.chars().collect();
            let sites: Vec<usize> = (0..chars.len()).filter(|&k| !keyboard_neighbors(chars[k]).is_empty()).collect();
            match sites.choose(rng) {
                Some(&k) => {
                    let mut chars = chars;
                    chars[k] = *keyboard_neighbors(chars[k]).choose(rng).expect("site has neighbours");
                    chars.into_iter().collect()
                }
                None => random_edit(value, rng),
            }
        }
    };
    Ok(Some(out))
}

/// Distort `clean` in exactly `errors` fields, each receiving 1 to
/// `max_per_field` corruptions. A field that ends up equal to its clean
/// value is redrawn, so every selected field is erroneous.
fn distort<R: Rng + ?Sized>(clean: &[String], errors: usize, max_per_field: usize, rng: &mut R) -> Vec<Option<String>> {
    let mut values: Vec<Option<String>> = clean.iter().cloned().map(Some).collect();
    let mut fields: Vec<usize> = (0..SynthField::ALL.len()).collect();
    fields.shuffle(rng);
    for &f in &fields[..errors] {
        let field = SynthField::ALL[f];
        values[f] = loop {
            let mut v = Some(clean[f].clone());
            for _ in 0..rng.random_range(1..=max_per_field) {
                let kind = *field.corruptions().choose(rng).expect("fields have corruptions");
                v = match v {
                    Some(s) => corrupt_value(field, kind, &s, rng).expect("applicable kind"),
                    None => None,
                };
            }
            if v.as_deref() != Some(clean[f].as_str()) {
                break v;
            }
        };
    }
    values
}

fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(k);
    r
}

/// Generate a datafile pair with `round(overlap · n)` true matches.
/// Deterministic given the seed.
pub fn generate_pair(cfg: &GeneratorConfig) -> Result<SyntheticPair> {
    cfg.validate()?;
    let n = cfg.records_per_file;
    let n12 = cfg.overlap_count();
    let mut master = stream(cfg.seed, 0);
    // entities 0..n appear in file 1; entities 0..n12 and n..2n-n12 in file 2
    let entities: Vec<Vec<String>> = (0..2 * n - n12).map(|_| clean_record(&mut master)).collect();
    let mut order1: Vec<usize> = (0..n).collect();
    order1.shuffle(&mut master);
    let mut order2: Vec<usize> = (0..n12).chain(n..2 * n - n12).collect();
    order2.shuffle(&mut master);

    let file1_records = order1
        .iter()
        .enumerate()
        .map(|(pos, &e)| Record { id: Some(format!("A{:05}", pos + 1)), values: entities[e].iter().cloned().map(Some).collect() })
        .collect();
    let file2_records = order2
        .par_iter()
        .enumerate()
        .map(|(pos, &e)| {
            let values = if e < n12 {
                let mut rng = stream(cfg.seed, e as u64 + 1);
                distort(&entities[e], cfg.errors_per_record, cfg.max_errors_per_field, &mut rng)
            } else {
                entities[e].iter().cloned().map(Some).collect()
            };
            Record { id: Some(format!("B{:05}", pos + 1)), values }
        })
        .collect();

    let mut position1 = vec![0; n];
    for (pos, &e) in order1.iter().enumerate() {
        position1[e] = pos;
    }
    let links = order2.iter().map(|&e| (e < n12).then(|| position1[e])).collect();
    Ok(SyntheticPair {
        file1: DataFile::new(schema(), file1_records)?,
        file2: DataFile::new(schema(), file2_records)?,
        truth: MatchingLabeling::from_links(n, links)?,
    })
}
