//! Clerical review of rejected records: task construction, decision
//! validation with first-committed-wins conflicts, an append-only decision
//! log and the merge of reviewed decisions into a final estimate.
//!
//! Record indices in task and decision payloads are 1-based.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comparison::ComparisonData;
use crate::error::{Error, Result};
use crate::estimators::{Decision, EstimateEntry, LinkageEstimate, Marginals};
use crate::types::DataFile;

/// Candidates with at least this posterior probability are always listed.
pub const CANDIDATE_MIN_PROB: f64 = 0.01;
/// The most probable candidates listed regardless of probability.
pub const CANDIDATE_TOP: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldValue {
    pub field: String,
    pub value: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewCandidate {
    /// File-1 record, 1-based.
    pub i: usize,
    pub record_id: Option<String>,
    pub values: Vec<FieldValue>,
    /// Disagreement level per compared field (`None` when unobserved).
    pub levels: Vec<(String, Option<u8>)>,
    pub prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskStatus {
    Pending,
    Decided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewTask {
    /// Task id; equals the file-2 record index `j` (1-based).
    pub id: usize,
    pub record_id: Option<String>,
    pub values: Vec<FieldValue>,
    /// Sorted by probability, descending.
    pub candidates: Vec<ReviewCandidate>,
    pub prob_nonmatch: f64,
    pub status: TaskStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum ReviewChoice {
    /// Link to file-1 record `target` (1-based).
    Link { target: usize },
    NonLink,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewDecision {
    pub task: usize,
    pub choice: ReviewChoice,
    #[serde(default)]
    pub note: Option<String>,
    /// Milliseconds since the Unix epoch, set when the decision is committed.
    #[serde(default)]
    pub timestamp_ms: Option<u64>,
    /// Replace an earlier decision on the same task.
    #[serde(default)]
    pub supersede: bool,
}

impl ReviewDecision {
    fn same_request(&self, other: &ReviewDecision) -> bool {
        self.task == other.task && self.choice == other.choice && self.note == other.note
    }
}

fn record_values(file: &DataFile, r: usize) -> Vec<FieldValue> {
    file.schema()
        .iter()
        .zip(&file.records()[r].values)
        .map(|(f, v)| FieldValue { field: f.name.clone(), value: v.clone() })
        .collect()
}

/// One task per rejected record of `est`, listing every candidate with
/// probability above [`CANDIDATE_MIN_PROB`] plus the [`CANDIDATE_TOP`] most
/// probable ones.
pub fn build_tasks(
    est: &LinkageEstimate,
    marg: &Marginals<f64>,
    file1: &DataFile,
    file2: &DataFile,
    comparisons: Option<&ComparisonData>,
) -> Result<Vec<ReviewTask>> {
    if marg.n1() != est.n1 || marg.n2() != est.n2() || file1.len() != est.n1 || file2.len() != est.n2() {
        return Err(Error::Data("estimate, posterior and datafiles disagree on record counts".into()));
    }
    let mut tasks = Vec::new();
    for j in (0..est.n2()).filter(|&j| est.decision(j) == Decision::Reject) {
        let mut ranked: Vec<(usize, f64)> = marg.links(j).to_vec();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let candidates = ranked
            .into_iter()
            .enumerate()
            .filter(|&(rank, (_, p))| rank < CANDIDATE_TOP || p > CANDIDATE_MIN_PROB)
            .map(|(_, (i, prob))| {
                let levels = match comparisons {
                    Some(c) => match c.pattern_of(i, j) {
                        Some(k) => {
                            let g = &c.patterns()[k as usize];
                            c.fields().iter().enumerate().map(|(f, fl)| (fl.name.clone(), g.level(f))).collect()
                        }
                        None => Vec::new(),
                    },
                    None => Vec::new(),
                };
                ReviewCandidate {
                    i: i + 1,
                    record_id: file1.records()[i].id.clone(),
                    values: record_values(file1, i),
                    levels,
                    prob,
                }
            })
            .collect();
        tasks.push(ReviewTask {
            id: j + 1,
            record_id: file2.records()[j].id.clone(),
            values: record_values(file2, j),
            candidates,
            prob_nonmatch: marg.p_unmatched(j),
            status: TaskStatus::Pending,
        });
    }
    Ok(tasks)
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "error")]
pub enum ReviewError {
    #[error("no task {task}")]
    NotFound { task: usize },
    #[error("record {target} is not a candidate of task {task}")]
    InvalidTarget { task: usize, target: usize },
    #[error("task {task} is already decided; resubmit with supersede to change it")]
    AlreadyDecided { task: usize, current: ReviewChoice },
    #[error("record {target} is already linked by {holder}")]
    Conflict { task: usize, target: usize, holder: Holder },
}

/// Who currently holds a file-1 record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "j")]
pub enum Holder {
    /// An automatic link of file-2 record `j` (1-based).
    Automatic(usize),
    /// A reviewed link on task `j`.
    Review(usize),
}

impl std::fmt::Display for Holder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Holder::Automatic(j) => write!(f, "the automatic link of record {j}"),
            Holder::Review(j) => write!(f, "the reviewed decision on task {j}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Applied {
    Committed,
    /// Identical to the current decision; nothing changes.
    Duplicate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Progress {
    pub total: usize,
    pub decided: usize,
    pub pending: usize,
}

/// Tasks plus the current decision of each; validates new decisions.
#[derive(Debug, Clone)]
pub struct ReviewState {
    estimate: LinkageEstimate,
    tasks: Vec<ReviewTask>,
    index: HashMap<usize, usize>,
    current: BTreeMap<usize, ReviewDecision>,
    holders: HashMap<usize, Holder>,
}

impl ReviewState {
    pub fn new(estimate: LinkageEstimate, tasks: Vec<ReviewTask>) -> Result<Self> {
        estimate.validate()?;
        let index = tasks.iter().enumerate().map(|(k, t)| (t.id, k)).collect();
        let holders = estimate
            .decisions()
            .enumerate()
            .filter_map(|(j, d)| match d {
                Decision::Link(i) => Some((i + 1, Holder::Automatic(j + 1))),
                _ => None,
            })
            .collect();
        for t in &tasks {
            if t.id == 0 || t.id > estimate.n2() || estimate.decision(t.id - 1) != Decision::Reject {
                return Err(Error::Data(format!("task {} is not a rejected record", t.id)));
            }
        }
        Ok(Self { estimate, tasks, index, current: BTreeMap::new(), holders })
    }

    pub fn tasks(&self) -> &[ReviewTask] {
        &self.tasks
    }

    pub fn task(&self, id: usize) -> Option<&ReviewTask> {
        self.index.get(&id).map(|&k| &self.tasks[k])
    }

    pub fn pending(&self) -> impl Iterator<Item = &ReviewTask> {
        self.tasks.iter().filter(|t| t.status == TaskStatus::Pending)
    }

    pub fn decision(&self, task: usize) -> Option<&ReviewDecision> {
        self.current.get(&task)
    }

    pub fn progress(&self) -> Progress {
        let decided = self.tasks.iter().filter(|t| t.status == TaskStatus::Decided).count();
        Progress { total: self.tasks.len(), decided, pending: self.tasks.len() - decided }
    }

    /// Check a decision without applying it.
    pub fn check(&self, d: &ReviewDecision) -> Result<Applied, ReviewError> {
        let task = self.task(d.task).ok_or(ReviewError::NotFound { task: d.task })?;
        if let ReviewChoice::Link { target } = d.choice {
            if !task.candidates.iter().any(|c| c.i == target) {
                return Err(ReviewError::InvalidTarget { task: d.task, target });
            }
        }
        if let Some(cur) = self.current.get(&d.task) {
            if cur.same_request(d) {
                return Ok(Applied::Duplicate);
            }
            if task.status == TaskStatus::Decided && !d.supersede {
                return Err(ReviewError::AlreadyDecided { task: d.task, current: cur.choice.clone() });
            }
        }
        if let ReviewChoice::Link { target } = d.choice {
            match self.holders.get(&target) {
                Some(Holder::Review(t)) if *t == d.task => {}
                Some(&holder) => return Err(ReviewError::Conflict { task: d.task, target, holder }),
                None => {}
            }
        }
        Ok(Applied::Committed)
    }

    /// Validate and apply; on `Committed` the caller must persist `d`.
    pub fn apply(&mut self, d: ReviewDecision) -> Result<Applied, ReviewError> {
        let outcome = self.check(&d)?;
        if outcome == Applied::Duplicate {
            return Ok(outcome);
        }
        if let Some(ReviewChoice::Link { target }) = self.current.get(&d.task).map(|c| &c.choice) {
            self.holders.remove(target);
        }
        if let ReviewChoice::Link { target } = d.choice {
            self.holders.insert(target, Holder::Review(d.task));
        }
        let k = self.index[&d.task];
        self.tasks[k].status = if d.choice == ReviewChoice::Skip { TaskStatus::Pending } else { TaskStatus::Decided };
        self.current.insert(d.task, d);
        Ok(outcome)
    }

    /// Current decisions in task order.
    pub fn decisions(&self) -> Vec<ReviewDecision> {
        self.current.values().cloned().collect()
    }

    /// The estimate with reviewed decisions merged in.
    pub fn merged(&self) -> Result<LinkageEstimate> {
        merge_decisions(&self.estimate, &self.decisions())
    }
}

/// Replace rejected entries by reviewed decisions. Later decisions on the
/// same task override earlier ones; skipped and undecided records stay
/// rejected. Reviewed entries carry no probability or expected loss.
pub fn merge_decisions(est: &LinkageEstimate, decisions: &[ReviewDecision]) -> Result<LinkageEstimate> {
    let mut last: BTreeMap<usize, &ReviewDecision> = BTreeMap::new();
    for d in decisions {
        if d.task == 0 || d.task > est.n2() || est.decision(d.task - 1) != Decision::Reject {
            return Err(Error::Data(format!("decision for task {} which is not a rejected record", d.task)));
        }
        last.insert(d.task, d);
    }
    let mut merged = est.clone();
    for (&task, d) in &last {
        let decision = match d.choice {
            ReviewChoice::Link { target } if target >= 1 && target <= est.n1 => Decision::Link(target - 1),
            ReviewChoice::Link { target } => {
                return Err(Error::Data(format!("task {task}: link target {target} out of range")))
            }
            ReviewChoice::NonLink => Decision::NonLink,
            ReviewChoice::Skip => continue,
        };
        merged.entries[task - 1] = EstimateEntry { decision, prob: None, loss: None };
    }
    let mut by_target: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (j, d) in merged.decisions().enumerate() {
        if let Decision::Link(i) = d {
            by_target.entry(i + 1).or_default().push(j + 1);
        }
    }
    let conflicts: Vec<String> = by_target
        .iter()
        .filter(|(_, js)| js.len() > 1)
        .map(|(i, js)| format!("record {i} linked by {js:?}"))
        .collect();
    if !conflicts.is_empty() {
        return Err(Error::InvalidMatching(format!("conflicting links: {}", conflicts.join("; "))));
    }
    if !last.is_empty() {
        merged.estimator = format!("{}+review", est.estimator);
    }
    Ok(merged)
}

/// Append-only newline-delimited JSON log of committed decisions.
pub struct DecisionLog {
    file: File,
}

impl DecisionLog {
    /// Open for appending. A partial final line left by an interrupted
    /// write is cut off so new records start on a fresh line.
    pub fn open(path: &Path) -> Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let bytes = std::fs::read(path)?;
        if bytes.last().is_some_and(|&b| b != b'\n') {
            let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |k| k + 1);
            file.set_len(keep as u64)?;
        }
        Ok(Self { file })
    }

    /// Write and flush to stable storage before returning.
    pub fn append(&mut self, d: &ReviewDecision) -> Result<()> {
        let mut line = serde_json::to_vec(d)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        Ok(())
    }

    /// Decisions in commit order. A truncated final line (interrupted
    /// write) is ignored.
    pub fn read(path: &Path) -> Result<Vec<ReviewDecision>> {
        if !path.exists() {
            return Ok(Vec::new());
        }
        let lines: Vec<String> = BufReader::new(File::open(path)?).lines().collect::<std::io::Result<_>>()?;
        let mut out = Vec::new();
        for (k, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            match serde_json::from_str(line) {
                Ok(d) => out.push(d),
                Err(_) if k + 1 == lines.len() => break,
                Err(e) => return Err(e.into()),
            }
        }
        Ok(out)
    }
}

impl ReviewState {
    /// Re-apply a persisted log.
    pub fn replay(&mut self, decisions: impl IntoIterator<Item = ReviewDecision>) -> Result<()> {
        for d in decisions {
            self.apply(d).map_err(|e| Error::Data(format!("decision log does not replay: {e}")))?;
        }
        Ok(())
    }
}
