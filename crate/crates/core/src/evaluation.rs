//! Accuracy against ground truth, Geweke convergence diagnostics and
//! posterior summaries of the overlap size.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::beta_rl::PosteriorSummary;
use crate::error::{Error, Result};
use crate::estimators::{Decision, LinkageEstimate};
use crate::types::MatchingLabeling;

/// A ratio with its backing counts; `value` is `None` when the denominator
/// is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratio {
    pub value: Option<f64>,
    pub numerator: usize,
    pub denominator: usize,
}

impl Ratio {
    pub fn new(numerator: usize, denominator: usize) -> Self {
        let value = (denominator > 0).then(|| numerator as f64 / denominator as f64);
        Self { value, numerator, denominator }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value {
            Some(v) => write!(f, "{v:.4}"),
            None => f.write_str("undefined"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n2: usize,
    pub true_matches: usize,
    pub links: usize,
    pub correct_links: usize,
    pub incorrect_links: usize,
    pub non_links: usize,
    pub correct_non_links: usize,
    pub rejections: usize,
    pub precision: Ratio,
    pub recall: Ratio,
    pub ppv: Ratio,
    pub npv: Ratio,
    pub rejection_rate: Ratio,
}

fn tally(truth: &MatchingLabeling, est: &LinkageEstimate) -> Result<EvalReport> {
    if truth.n2() != est.n2() || truth.n1() != est.n1 {
        return Err(Error::Data(format!(
            "truth covers {}x{} records, estimate {}x{}",
            truth.n1(),
            truth.n2(),
            est.n1,
            est.n2()
        )));
    }
    let (mut links, mut correct, mut non_links, mut correct_non, mut rejections) = (0, 0, 0, 0, 0);
    for (j, d) in est.decisions().enumerate() {
        match d {
            Decision::Link(i) => {
                links += 1;
                if truth.link(j) == Some(i) {
                    correct += 1;
                }
            }
            Decision::NonLink => {
                non_links += 1;
                if truth.link(j).is_none() {
                    correct_non += 1;
                }
            }
            Decision::Reject => rejections += 1,
        }
    }
    let n2 = est.n2();
    let true_matches = truth.overlap_size();
    Ok(EvalReport {
        n2,
        true_matches,
        links,
        correct_links: correct,
        incorrect_links: links - correct,
        non_links,
        correct_non_links: correct_non,
        rejections,
        precision: Ratio::new(correct, links),
        recall: Ratio::new(correct, true_matches),
        ppv: Ratio::new(correct, links),
        npv: Ratio::new(correct_non, non_links),
        rejection_rate: Ratio::new(rejections, n2),
    })
}

/// Precision and recall of a full estimate (no rejections).
pub fn score_full(truth: &MatchingLabeling, est: &LinkageEstimate) -> Result<EvalReport> {
    if est.rejections() > 0 {
        return Err(Error::Data("full scoring requires an estimate without rejections".into()));
    }
    tally(truth, est)
}

/// PPV, NPV and rejection rate of a partial estimate.
pub fn score_partial(truth: &MatchingLabeling, est: &LinkageEstimate) -> Result<EvalReport> {
    tally(truth, est)
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = [
            ("precision", self.precision),
            ("recall", self.recall),
            ("ppv", self.ppv),
            ("npv", self.npv),
            ("rejection_rate", self.rejection_rate),
        ];
        for (name, r) in rows {
            writeln!(f, "{name:<16}{:>10}  ({}/{})", r.to_string(), r.numerator, r.denominator)?;
        }
        Ok(())
    }
}

/// Fraction of each segment length used as the lag-window truncation point.
pub const GEWEKE_TAPER: f64 = 0.04;

/// Spectral density at frequency zero via a Bartlett lag window.
fn spectral_zero(x: &[f64]) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let autocov = |k: usize| x[..n - k].iter().zip(&x[k..]).map(|(a, b)| (a - mean) * (b - mean)).sum::<f64>() / n as f64;
    let max_lag = ((GEWEKE_TAPER * n as f64).floor() as usize).min(n - 1);
    let mut s = autocov(0);
    for k in 1..=max_lag {
        let w = 1.0 - k as f64 / (max_lag + 1) as f64;
        s += 2.0 * w * autocov(k);
    }
    s.max(0.0)
}

/// Geweke's z-score comparing the means of the first and last segments of a
/// chain. Returns `None` for chains shorter than 100 and for constant chains.
/// Two constant segments with different means give an infinite score.
pub fn geweke_z(chain: &[f64], first_frac: f64, last_frac: f64) -> Option<f64> {
    let n = chain.len();
    if n < 100 || first_frac <= 0.0 || last_frac <= 0.0 || first_frac + last_frac > 1.0 {
        return None;
    }
    let na = ((first_frac * n as f64).round() as usize).max(2);
    let nb = ((last_frac * n as f64).round() as usize).max(2);
    let (a, b) = (&chain[..na], &chain[n - nb..]);
    if chain.iter().all(|&v| v == chain[0]) {
        return None;
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let diff = mean(a) - mean(b);
    let var = spectral_zero(a) / na as f64 + spectral_zero(b) / nb as f64;
    if var > 0.0 {
        Some(diff / var.sqrt())
    } else if diff != 0.0 {
        Some(diff.signum() * f64::INFINITY)
    } else {
        None
    }
}

/// Type-7 (linear interpolation) sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Summary {
    pub fn of(values: &[f64], level: f64) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let tail = (1.0 - level) / 2.0;
        Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            median: quantile_sorted(&v, 0.5),
            lower: quantile_sorted(&v, tail),
            upper: quantile_sorted(&v, 1.0 - tail),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapSummary {
    pub level: f64,
    pub quantile_type: u8,
    /// Matched file-2 records, `n12`.
    pub overlap: Summary,
    /// `n12 / n2`.
    pub overlap_fraction: Summary,
    /// Unique entities across both files, `n1 + n2 - n12`.
    pub unique_entities: Summary,
}

pub fn overlap_summary_of(n1: usize, n2: usize, overlap: &[usize], level: f64) -> Result<OverlapSummary> {
    if overlap.is_empty() {
        return Err(Error::Data("no retained samples".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("interval level {level} not in (0,1)")));
    }
    let k: Vec<f64> = overlap.iter().map(|&v| v as f64).collect();
    let frac: Vec<f64> = k.iter().map(|v| v / n2 as f64).collect();
    let unique: Vec<f64> = k.iter().map(|v| (n1 + n2) as f64 - v).collect();
    Ok(OverlapSummary {
        level,
        quantile_type: 7,
        overlap: Summary::of(&k, level),
        overlap_fraction: Summary::of(&frac, level),
        unique_entities: Summary::of(&unique, level),
    })
}

pub fn overlap_summary(post: &PosteriorSummary, level: f64) -> Result<OverlapSummary> {
    overlap_summary_of(post.n1(), post.n2(), post.overlap_samples(), level)
}
