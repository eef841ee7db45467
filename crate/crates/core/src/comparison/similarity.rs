//! String and value similarity measures. All are distances in the sense that
//! 0 means total agreement.

use std::collections::{HashMap, HashSet};

use crate::lsap::{assign_min, DenseMatrix};

/// Levenshtein edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance divided by the length of the longer string; two empty
/// strings are in total agreement.
pub fn normalized_levenshtein(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        0.0
    } else {
        levenshtein(a, b) as f64 / longest as f64
    }
}

/// Name distance tolerant of missing name pieces.
///
/// Tokens are split on whitespace and aligned one-to-one so that the summed
/// per-token normalized Levenshtein distance is minimal; the result is the
/// mean distance over aligned tokens. Surplus tokens of the longer name are
/// ignored.
pub fn modified_levenshtein(a: &str, b: &str) -> f64 {
    let ta: Vec<&str> = a.split_whitespace().collect();
    let tb: Vec<&str> = b.split_whitespace().collect();
    match (ta.is_empty(), tb.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return 1.0,
        _ => {}
    }
    let cost = DenseMatrix::from_fn(ta.len(), tb.len(), |r, c| normalized_levenshtein(ta[r], tb[c]));
    let pairs = assign_min(&cost).expect("finite token costs");
    let total: f64 = pairs.iter().map(|&(r, c)| cost.get(r, c)).sum();
    total / pairs.len() as f64
}

/// Symmetric adjacency relation between region labels.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Adjacency {
    neighbours: HashMap<String, HashSet<String>>,
}

impl Adjacency {
    pub fn from_edges<S: AsRef<str>>(edges: impl IntoIterator<Item = (S, S)>) -> Self {
        let mut neighbours: HashMap<String, HashSet<String>> = HashMap::new();
        for (a, b) in edges {
            let (a, b) = (a.as_ref().to_string(), b.as_ref().to_string());
            neighbours.entry(a.clone()).or_default().insert(b.clone());
            neighbours.entry(b).or_default().insert(a);
        }
        Self { neighbours }
    }

    pub fn adjacent(&self, a: &str, b: &str) -> bool {
        self.neighbours.get(a).is_some_and(|n| n.contains(b))
    }

    /// 0 for the same region, 1 for adjacent regions, 2 otherwise.
    pub fn compare(&self, a: &str, b: &str) -> u8 {
        if a == b {
            0
        } else if self.adjacent(a, b) {
            1
        } else {
            2
        }
    }
}
