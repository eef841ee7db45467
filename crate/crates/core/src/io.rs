//! Configuration documents and the delimiter-separated text formats used
//! between pipeline stages.
//!
//! Every export starts with `# key=value` metadata lines followed by a
//! header row. Record indices are 1-based; an unobserved comparison level
//! is written as `NA`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::beta_rl::PosteriorSummary;
use crate::comparison::{date_part_thresholds, Adjacency, BlockingSpec, ComparatorSpec, ComparisonData, FieldLevels, SimilarityKind};
use crate::error::{Error, Result};
use crate::estimators::{Decision, EstimateEntry, LinkageEstimate, LossConfig, Marginals};
use crate::types::{DataFile, FieldKind, FieldSchema, MatchingLabeling, Record};

const NA: &str = "NA";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub name: String,
    pub kind: FieldKind,
    /// Fields without a comparator are carried but never compared.
    pub comparator: Option<SimilarityKind>,
    pub thresholds: Option<Vec<f64>>,
    /// Date-part threshold preset: `year`, `month` or `day`.
    pub preset: Option<String>,
    /// Two-column file of adjacent region pairs, for adjacency comparators.
    pub adjacency: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorSection {
    pub alpha_pi: f64,
    pub beta_pi: f64,
}

/// Linkage configuration, read from TOML.
///
/// ```toml
/// id_column = "id"
/// missing_token = ""
///
/// [[fields]]
/// name = "given_name"
/// kind = "string"
/// comparator = "normalized-levenshtein"
///
/// [blocking]
/// fields = ["municipality"]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkageConfig {
    pub id_column: Option<String>,
    #[serde(default)]
    pub missing_token: String,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    pub fields: Vec<FieldConfig>,
    pub blocking: Option<BlockingSpec>,
    pub prior: Option<PriorSection>,
    /// Directory relative paths are resolved against; set by [`LinkageConfig::load`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_delimiter() -> char {
    ','
}

impl LinkageConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        if cfg.fields.is_empty() {
            return Err(Error::Config("no fields configured".into()));
        }
        if !cfg.delimiter.is_ascii() {
            return Err(Error::Config("delimiter must be a single ASCII character".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml_str(&fs::read_to_string(path)?)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn schema(&self) -> Vec<FieldSchema> {
        self.fields.iter().map(|f| FieldSchema { name: f.name.clone(), kind: f.kind }).collect()
    }

    pub fn comparators(&self) -> Result<Vec<ComparatorSpec>> {
        self.fields
            .iter()
            .filter_map(|f| f.comparator.map(|kind| (f, kind)))
            .map(|(f, kind)| {
                let thresholds = match (&f.thresholds, &f.preset) {
                    (Some(_), Some(_)) => {
                        return Err(Error::Config(format!("field `{}`: give thresholds or a preset, not both", f.name)))
                    }
                    (Some(t), None) => Some(t.clone()),
                    (None, Some(p)) => Some(
                        date_part_thresholds(p)
                            .ok_or_else(|| Error::Config(format!("field `{}`: unknown preset `{p}`", f.name)))?,
                    ),
                    (None, None) => None,
                };
                let spec = ComparatorSpec::new(&f.name, kind, thresholds)?;
                match &f.adjacency {
                    Some(p) => Ok(spec.with_adjacency(read_adjacency(&self.base_dir.join(p))?)),
                    None => Ok(spec),
                }
            })
            .collect()
    }

    fn csv_reader<'a>(&self, text: &'a str) -> csv::Reader<&'a [u8]> {
        csv::ReaderBuilder::new().delimiter(self.delimiter as u8).from_reader(text.as_bytes())
    }
}

fn read_adjacency(path: &Path) -> Result<Adjacency> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).from_path(path)?;
    let mut edges = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() != 2 {
            return Err(Error::Data(format!("{}: adjacency rows need two columns", path.display())));
        }
        edges.push((row[0].to_string(), row[1].to_string()));
    }
    Ok(Adjacency::from_edges(edges))
}

/// Parse a datafile with a header row; columns are matched to schema
/// fields by name and extra columns are ignored.
pub fn parse_datafile(text: &str, cfg: &LinkageConfig) -> Result<DataFile> {
    let mut rdr = cfg.csv_reader(text);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Data(format!("column `{name}` missing from header")))
    };
    let cols = cfg.fields.iter().map(|f| col(&f.name)).collect::<Result<Vec<_>>>()?;
    let id_col = cfg.id_column.as_deref().map(col).transpose()?;
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let values = cols
            .iter()
            .map(|&c| {
                let v = row.get(c).unwrap_or("").trim();
                (v != cfg.missing_token.trim()).then(|| v.to_string())
            })
            .collect();
        records.push(Record { id: id_col.map(|c| row.get(c).unwrap_or("").to_string()), values });
    }
    DataFile::new(cfg.schema(), records)
}

pub fn read_datafile(path: &Path, cfg: &LinkageConfig) -> Result<DataFile> {
    parse_datafile(&fs::read_to_string(path)?, cfg)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

pub fn write_datafile<W: Write>(w: W, file: &DataFile, id_column: Option<&str>, missing_token: &str) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = id_column.into_iter().collect();
    header.extend(file.schema().iter().map(|f| f.name.as_str()));
    wtr.write_record(&header)?;
    for r in file.records() {
        let mut row: Vec<&str> = Vec::with_capacity(header.len());
        if id_column.is_some() {
            row.push(r.id.as_deref().unwrap_or(""));
        }
        row.extend(r.values.iter().map(|v| v.as_deref().unwrap_or(missing_token)));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Metadata lines and the remaining table text.
pub fn split_metadata(text: &str) -> (BTreeMap<String, String>, &str) {
    let mut meta = BTreeMap::new();
    let mut rest = text;
    while let Some(line) = rest.lines().next() {
        let Some(body) = line.strip_prefix('#') else { break };
        if let Some((k, v)) = body.split_once('=') {
            meta.insert(k.trim().to_string(), v.trim().to_string());
        }
        rest = rest[line.len()..].strip_prefix('\n').unwrap_or(&rest[line.len()..]);
    }
    (meta, rest)
}

fn write_metadata<W: Write>(w: &mut W, meta: &[(&str, String)]) -> Result<()> {
    for (k, v) in meta {
        writeln!(w, "# {k}={v}")?;
    }
    Ok(())
}

fn meta_usize(meta: &BTreeMap<String, String>, key: &str) -> Result<usize> {
    meta.get(key)
        .ok_or_else(|| Error::Data(format!("metadata `{key}` missing")))?
        .parse()
        .map_err(|_| Error::Data(format!("metadata `{key}` is not a count")))
}

fn parse_index(s: &str, what: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::Data(format!("{what}: `{s}` is not an index")))
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Data(format!("{what}: `{s}` is not a number")))
}

fn table(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().from_reader(text.as_bytes())
}

/// Comparison data: one row per candidate pair, `i,j,<level per field>`.
pub fn write_comparisons<W: Write>(mut w: W, data: &ComparisonData) -> Result<()> {
    let fields: Vec<String> = data.fields().iter().map(|f| format!("{}:{}", f.name, f.levels)).collect();
    write_metadata(&mut w, &[("n1", data.n1().to_string()), ("n2", data.n2().to_string()), ("fields", fields.join(";"))])?;
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["i".to_string(), "j".to_string()];
    header.extend(data.fields().iter().map(|f| f.name.clone()));
    wtr.write_record(&header)?;
    for p in data.pairs() {
        let g = data.vector(p);
        let mut row = vec![(p.i + 1).to_string(), (p.j + 1).to_string()];
        row.extend((0..data.num_fields()).map(|f| g.level(f).map_or(NA.to_string(), |l| l.to_string())));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn parse_comparisons(text: &str) -> Result<ComparisonData> {
    let (meta, body) = split_metadata(text);
    let n1 = meta_usize(&meta, "n1")?;
    let n2 = meta_usize(&meta, "n2")?;
    let fields = meta
        .get("fields")
        .ok_or_else(|| Error::Data("metadata `fields` missing".into()))?
        .split(';')
        .map(|s| {
            let (name, levels) = s.rsplit_once(':').ok_or_else(|| Error::Data(format!("bad field entry `{s}`")))?;
            Ok(FieldLevels { name: name.to_string(), levels: parse_index(levels, "levels")? })
        })
        .collect::<Result<Vec<_>>>()?;
    let nf = fields.len();
    let mut pairs = Vec::new();
    for row in table(body).records() {
        let row = row?;
        if row.len() != nf + 2 {
            return Err(Error::Data(format!("comparison row has {} columns, expected {}", row.len(), nf + 2)));
        }
        let i = parse_index(&row[0], "i")?;
        let j = parse_index(&row[1], "j")?;
        if i == 0 || j == 0 {
            return Err(Error::Data("record indices are 1-based".into()));
        }
        let levels = (0..nf)
            .map(|f| match row[f + 2].trim() {
                NA => Ok(None),
                v => v.parse::<u8>().map(Some).map_err(|_| Error::Data(format!("bad level `{v}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        pairs.push((i - 1, j - 1, levels));
    }
    ComparisonData::from_pairs(n1, n2, fields, pairs)
}

/// Pair weights `i,j,w`.
pub fn write_weights<W: Write>(mut w: W, data: &ComparisonData, pattern_w: &[f64]) -> Result<()> {
    write_metadata(&mut w, &[("n1", data.n1().to_string()), ("n2", data.n2().to_string())])?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["i", "j", "w"])?;
    for p in data.pairs() {
        wtr.write_record([(p.i + 1).to_string(), (p.j + 1).to_string(), pattern_w[p.pattern as usize].to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Pairwise posterior probabilities `i,j,prob`; the row with `i = n1 + j`
/// holds the non-match probability of `j`.
pub fn write_posterior<W: Write>(mut w: W, post: &PosteriorSummary) -> Result<()> {
    let (n1, n2) = (post.n1(), post.n2());
    write_metadata(
        &mut w,
        &[("n1", n1.to_string()), ("n2", n2.to_string()), ("retained", post.retained().to_string())],
    )?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["i", "j", "prob"])?;
    let pairs = post.pairwise();
    let mut k = 0;
    for j in 0..n2 {
        while k < pairs.len() && pairs[k].1 == j {
            let (i, _, p) = pairs[k];
            wtr.write_record([(i + 1).to_string(), (j + 1).to_string(), p.to_string()])?;
            k += 1;
        }
        let pu = post.prob_unmatched(j);
        if pu > 0.0 {
            wtr.write_record([(n1 + j + 1).to_string(), (j + 1).to_string(), pu.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn parse_posterior(text: &str) -> Result<Marginals<f64>> {
    let (meta, body) = split_metadata(text);
    let n1 = meta_usize(&meta, "n1")?;
    let n2 = meta_usize(&meta, "n2")?;
    let mut links = vec![Vec::new(); n2];
    let mut unmatched = vec![0.0; n2];
    for row in table(body).records() {
        let row = row?;
        let i = parse_index(&row[0], "i")?;
        let j = parse_index(&row[1], "j")?;
        let p = parse_f64(&row[2], "prob")?;
        if j == 0 || j > n2 || i == 0 {
            return Err(Error::Data(format!("posterior row ({i}, {j}) out of range")));
        }
        if i == n1 + j {
            unmatched[j - 1] = p;
        } else if i <= n1 {
            links[j - 1].push((i - 1, p));
        } else {
            return Err(Error::Data(format!("posterior row ({i}, {j}): label must be <= n1 or n1 + j")));
        }
    }
    Marginals::new(n1, links, unmatched)
}

pub fn write_overlap<W: Write>(mut w: W, overlap: &[usize]) -> Result<()> {
    for k in overlap {
        writeln!(w, "{k}")?;
    }
    Ok(())
}

pub fn parse_overlap(text: &str) -> Result<Vec<usize>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| parse_index(l, "overlap")).collect()
}

/// Truth file `j,label` with the 1-based label convention.
pub fn write_truth<W: Write>(mut w: W, z: &MatchingLabeling) -> Result<()> {
    write_metadata(&mut w, &[("n1", z.n1().to_string()), ("n2", z.n2().to_string())])?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["j", "label"])?;
    for (j, label) in z.labels().into_iter().enumerate() {
        wtr.write_record([(j + 1).to_string(), label.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn parse_truth(text: &str) -> Result<MatchingLabeling> {
    let (meta, body) = split_metadata(text);
    let n1 = meta_usize(&meta, "n1")?;
    let mut labels = Vec::new();
    for (k, row) in table(body).records().enumerate() {
        let row = row?;
        if parse_index(&row[0], "j")? != k + 1 {
            return Err(Error::Data("truth rows must list j = 1, 2, ... in order".into()));
        }
        labels.push(parse_index(&row[1], "label")?);
    }
    MatchingLabeling::from_labels(n1, &labels)
}

fn parse_loss(s: &str) -> Result<LossConfig<f64>> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(Error::Config(format!("loss `{s}` must be lambda_10,lambda_01,lambda_11',lambda_R")));
    }
    let num = |v: &str| parse_f64(v, "loss");
    let r = match parts[3] {
        "inf" | "Inf" | "infinity" => None,
        v => Some(num(v)?),
    };
    LossConfig::new(num(parts[0])?, num(parts[1])?, num(parts[2])?, r)
}

impl std::str::FromStr for LossConfig<f64> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_loss(s)
    }
}

/// Estimate export `j,decision,target,prob,loss` (target blank unless
/// linked).
pub fn write_estimate<W: Write>(mut w: W, est: &LinkageEstimate) -> Result<()> {
    write_metadata(
        &mut w,
        &[
            ("estimator", est.estimator.clone()),
            ("loss", est.loss.to_string()),
            ("n1", est.n1.to_string()),
            ("n2", est.n2().to_string()),
        ],
    )?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["j", "decision", "target", "prob", "loss"])?;
    for (j, e) in est.entries.iter().enumerate() {
        let (name, target) = match e.decision {
            Decision::Link(i) => ("link", (i + 1).to_string()),
            Decision::NonLink => ("non-link", String::new()),
            Decision::Reject => ("reject", String::new()),
        };
        let prob = e.prob.map_or(String::new(), |p| p.to_string());
        let loss = e.loss.map_or(String::new(), |l| l.to_string());
        wtr.write_record([(j + 1).to_string(), name.to_string(), target, prob, loss])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn parse_estimate(text: &str) -> Result<LinkageEstimate> {
    let (meta, body) = split_metadata(text);
    let n1 = meta_usize(&meta, "n1")?;
    let loss = parse_loss(meta.get("loss").ok_or_else(|| Error::Data("metadata `loss` missing".into()))?)?;
    let estimator = meta.get("estimator").cloned().unwrap_or_default();
    let mut entries = Vec::new();
    for (k, row) in table(body).records().enumerate() {
        let row = row?;
        if parse_index(&row[0], "j")? != k + 1 {
            return Err(Error::Data("estimate rows must list j = 1, 2, ... in order".into()));
        }
        let decision = match row[1].trim() {
            "link" => {
                let i = parse_index(&row[2], "target")?;
                if i == 0 {
                    return Err(Error::Data("link targets are 1-based".into()));
                }
                Decision::Link(i - 1)
            }
            "non-link" => Decision::NonLink,
            "reject" => Decision::Reject,
            d => return Err(Error::Data(format!("unknown decision `{d}`"))),
        };
        let optional = |v: &str, what: &str| match v.trim() {
            "" => Ok(None),
            v => parse_f64(v, what).map(Some),
        };
        entries.push(EstimateEntry { decision, prob: optional(&row[3], "prob")?, loss: optional(&row[4], "loss")? });
    }
    let est = LinkageEstimate { n1, estimator, loss, entries };
    est.validate()?;
    Ok(est)
}

/// Write `value` as pretty JSON.
pub fn write_json<W: Write, T: Serialize>(w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(w, value)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG: &str = r#"
id_column = "id"
missing_token = "NA"

[[fields]]
name = "name"
kind = "string"
comparator = "normalized-levenshtein"

[[fields]]
name = "year"
kind = "date-part"
comparator = "absolute-difference"
preset = "year"

[[fields]]
name = "region"
kind = "categorical"

[blocking]
fields = ["region"]
"#;

    #[test]
    fn config_parses() {
        let cfg = LinkageConfig::from_toml_str(CONFIG).unwrap();
        let comps = cfg.comparators().unwrap();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[1].thresholds(), &[0.0, 1.0, 2.0, f64::INFINITY]);
        assert_eq!(cfg.blocking.unwrap().fields, vec!["region"]);
        assert!(LinkageConfig::from_toml_str("fields = []").is_err());
        assert!(LinkageConfig::from_toml_str("[[fields]]\nname='x'\nkind='string'\nbogus=1").is_err());
    }

    #[test]
    fn datafile_round_trip() {
        let cfg = LinkageConfig::from_toml_str(CONFIG).unwrap();
        let text = "id,name,year,region,extra\nr1,ANA,1980,north,x\nr2,JOSE,NA,south,y\n";
        let f = parse_datafile(text, &cfg).unwrap();
        assert_eq!(f.value(1, 1), None);
        assert_eq!(f.records()[0].id.as_deref(), Some("r1"));
        let mut out = Vec::new();
        write_datafile(&mut out, &f, Some("id"), "NA").unwrap();
        let g = parse_datafile(std::str::from_utf8(&out).unwrap(), &cfg).unwrap();
        assert_eq!(f, g);
        assert!(parse_datafile("id,name\nr1,ANA\n", &cfg).is_err());
    }

    #[test]
    fn comparisons_round_trip() {
        let fields = vec![FieldLevels { name: "a".into(), levels: 2 }, FieldLevels { name: "b".into(), levels: 4 }];
        let data = ComparisonData::from_pairs(
            2,
            1,
            fields,
            [(0, 0, vec![Some(0), None]), (1, 0, vec![Some(1), Some(3)])],
        )
        .unwrap();
        let mut out = Vec::new();
        write_comparisons(&mut out, &data).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("1,1,0,NA"));
        assert_eq!(parse_comparisons(&text).unwrap(), data);
    }

    #[test]
    fn estimate_and_truth_round_trip() {
        let marg = Marginals::new(3, vec![vec![(2, 0.97)], vec![(0, 0.5), (1, 0.5)], vec![]], vec![0.03, 0.0, 1.0]).unwrap();
        let est = crate::estimators::bayes_partial(&marg, &LossConfig::default_partial()).unwrap();
        let mut out = Vec::new();
        write_estimate(&mut out, &est).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("# estimator=partial\n# loss=1,1,2,0.1\n"));
        assert_eq!(parse_estimate(&text).unwrap(), est);

        let z = MatchingLabeling::from_labels(5, &[2, 1, 8]).unwrap();
        let mut out = Vec::new();
        write_truth(&mut out, &z).unwrap();
        assert_eq!(parse_truth(std::str::from_utf8(&out).unwrap()).unwrap(), z);
    }

    #[test]
    fn posterior_file_parses() {
        let text = "# n1=2\n# n2=2\ni,j,prob\n1,1,0.75\n3,1,0.25\n2,2,0.5\n4,2,0.5\n";
        let m = parse_posterior(text).unwrap();
        assert_eq!(m.p_link(0, 0), 0.75);
        assert_eq!(m.p_unmatched(1), 0.5);
        assert!(parse_posterior("# n1=2\n# n2=1\ni,j,prob\n4,1,1\n").is_err());
    }

    #[test]
    fn loss_strings() {
        let l: LossConfig<f64> = "1,1,2,0.1".parse().unwrap();
        assert_eq!(l, LossConfig::default_partial());
        let l: LossConfig<f64> = "1,1,2,inf".parse().unwrap();
        assert_eq!(l.lambda_r, None);
        assert!("1,1,2".parse::<LossConfig<f64>>().is_err());
    }
}
