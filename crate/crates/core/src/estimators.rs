//! Bayes point estimates of the bipartite matching under additive losses.
//!
//! For file-2 record `j` the decision is `link(i)`, `non-link` or `reject`
//! (only when rejection is allowed). With `p_i = P(Z_j = i | γ)`,
//! `p_0 = P(Z_j = n1 + j | γ)` the posterior expected losses are
//!
//! * reject: `λR`
//! * non-link: `λ10 · (1 - p_0)`
//! * link(i): `λ01 · p_0 + λ11' · (1 - p_i - p_0)`

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::beta_rl::{ExactPosterior, PosteriorSummary};
use crate::error::{Error, Result};
use crate::lsap::{assign_min, DenseMatrix};
use crate::scalar::Real;
use crate::types::MatchingLabeling;

/// Slack allowed on `Σ_j P(Z_j = i) <= 1` and on each record's total mass.
pub const PROB_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + serde::de::DeserializeOwned")]
pub struct LossConfig<T = f64> {
    pub lambda_10: T,
    pub lambda_01: T,
    pub lambda_11p: T,
    /// `None` disables the rejection option.
    pub lambda_r: Option<T>,
}

impl<T: Real> LossConfig<T> {
    pub fn new(lambda_10: T, lambda_01: T, lambda_11p: T, lambda_r: Option<T>) -> Result<Self> {
        let pos = |x: T| x > T::zero() && x.is_finite();
        if !pos(lambda_10) || !pos(lambda_01) || !pos(lambda_11p) || lambda_r.is_some_and(|r| !pos(r)) {
            return Err(Error::Config("losses must be positive and finite".into()));
        }
        Ok(Self { lambda_10, lambda_01, lambda_11p, lambda_r })
    }

    /// `λ10 = λ01 = 1`, `λ11' = 2`, no rejection: entrywise zero-one loss
    /// on matching matrices.
    pub fn zero_one() -> Self {
        Self { lambda_10: T::one(), lambda_01: T::one(), lambda_11p: T::lit(2.0), lambda_r: None }
    }

    /// `λ10 = λ01 = 1`, `λ11' = 2`, `λR = 0.1`.
    pub fn default_partial() -> Self {
        Self { lambda_r: Some(T::lit(0.1)), ..Self::zero_one() }
    }

    /// First violated condition for the closed-form full estimate.
    pub fn full_regime_violation(&self) -> Option<&'static str> {
        if self.lambda_r.is_some() {
            Some("lambda_R must be infinite (no rejection)")
        } else if self.lambda_10 > self.lambda_01 {
            Some("lambda_10 <= lambda_01")
        } else if self.lambda_11p < self.lambda_10 + self.lambda_01 {
            Some("lambda_11' >= lambda_10 + lambda_01")
        } else {
            None
        }
    }

    /// First violated condition for the closed-form partial estimate.
    pub fn partial_regime_violation(&self) -> Option<&'static str> {
        let Some(r) = self.lambda_r else {
            return Some("lambda_R must be finite");
        };
        let two_r = r + r;
        if self.lambda_11p < self.lambda_01 {
            Some("lambda_11' >= lambda_01")
        } else if self.lambda_01 < two_r {
            Some("lambda_01 >= 2 lambda_R")
        } else if self.lambda_10 < two_r {
            Some("lambda_10 >= 2 lambda_R")
        } else {
            None
        }
    }

    pub fn is_full_regime(&self) -> bool {
        self.full_regime_violation().is_none()
    }

    pub fn is_partial_regime(&self) -> bool {
        self.partial_regime_violation().is_none()
    }

    pub fn to_f64(&self) -> LossConfig<f64> {
        LossConfig {
            lambda_10: self.lambda_10.as_f64(),
            lambda_01: self.lambda_01.as_f64(),
            lambda_11p: self.lambda_11p.as_f64(),
            lambda_r: self.lambda_r.map(|r| r.as_f64()),
        }
    }
}

impl<T: Real> fmt::Display for LossConfig<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},", self.lambda_10, self.lambda_01, self.lambda_11p)?;
        match self.lambda_r {
            Some(r) => write!(f, "{r}"),
            None => write!(f, "inf"),
        }
    }
}

/// Posterior marginals `P(Z_j = i | γ)` and `P(Z_j = n1 + j | γ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals<T = f64> {
    n1: usize,
    /// Per file-2 record, `(i, p)` with `p > 0`, sorted by `i`.
    links: Vec<Vec<(usize, T)>>,
    unmatched: Vec<T>,
}

impl<T: Real> Marginals<T> {
    /// Validates ranges, per-record totals and the column-sum property.
    pub fn new(n1: usize, mut links: Vec<Vec<(usize, T)>>, unmatched: Vec<T>) -> Result<Self> {
        if links.len() != unmatched.len() {
            return Err(Error::Data("links and unmatched probabilities cover different records".into()));
        }
        let tol = T::lit(PROB_TOLERANCE);
        let mut column = vec![T::zero(); n1];
        for (j, row) in links.iter_mut().enumerate() {
            row.retain(|&(_, p)| p > T::zero());
            row.sort_by_key(|&(i, _)| i);
            let mut total = unmatched[j];
            let in_range = |p: T| p >= T::zero() && p <= T::one() + tol;
            if !in_range(unmatched[j]) {
                return Err(Error::Data(format!("record {}: probability out of range", j + 1)));
            }
            for w in row.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::Data(format!("record {}: duplicate candidate {}", j + 1, w[0].0 + 1)));
                }
            }
            for &(i, p) in row.iter() {
                if i >= n1 || !in_range(p) {
                    return Err(Error::Data(format!("record {}: invalid entry for candidate {}", j + 1, i + 1)));
                }
                total += p;
                column[i] += p;
            }
            if (total - T::one()).abs() > tol * T::lit(16.0) {
                return Err(Error::Data(format!("record {}: probabilities sum to {total}, not 1", j + 1)));
            }
        }
        if let Some((i, &s)) = column.iter().enumerate().find(|(_, &s)| s > T::one() + tol) {
            return Err(Error::ColumnSum { record: i + 1, sum: s.as_f64() });
        }
        Ok(Self { n1, links, unmatched })
    }

    /// Builds marginals from `(i, j, p)` link probabilities; the non-match
    /// probability of each record is the remaining mass.
    pub fn from_pairs(n1: usize, n2: usize, pairs: impl IntoIterator<Item = (usize, usize, T)>) -> Result<Self> {
        let mut links = vec![Vec::new(); n2];
        for (i, j, p) in pairs {
            if j >= n2 {
                return Err(Error::Data(format!("file-2 record {} out of range", j + 1)));
            }
            links[j].push((i, p));
        }
        let unmatched = links
            .iter()
            .map(|row: &Vec<(usize, T)>| {
                let s = row.iter().fold(T::zero(), |acc, &(_, p)| acc + p);
                (T::one() - s).max(T::zero())
            })
            .collect();
        Self::new(n1, links, unmatched)
    }

    pub fn from_posterior(post: &PosteriorSummary) -> Result<Self> {
        let mut links = vec![Vec::new(); post.n2()];
        for (i, j, p) in post.pairwise() {
            links[j].push((i, T::lit(p)));
        }
        let unmatched = (0..post.n2()).map(|j| T::lit(post.prob_unmatched(j))).collect();
        Self::new(post.n1(), links, unmatched)
    }

    pub fn from_exact(post: &ExactPosterior) -> Result<Self> {
        let Some(first) = post.labelings.first() else {
            return Err(Error::Data("empty posterior".into()));
        };
        let (n1, n2) = (first.n1(), first.n2());
        let mut links: Vec<Vec<(usize, f64)>> = vec![vec![]; n2];
        let mut unmatched = vec![0.0; n2];
        for (z, &p) in post.labelings.iter().zip(&post.probs) {
            for j in 0..n2 {
                match z.link(j) {
                    Some(i) => match links[j].iter_mut().find(|e| e.0 == i) {
                        Some(e) => e.1 += p,
                        None => links[j].push((i, p)),
                    },
                    None => unmatched[j] += p,
                }
            }
        }
        let links = links.into_iter().map(|r| r.into_iter().map(|(i, p)| (i, T::lit(p))).collect()).collect();
        Self::new(n1, links, unmatched.into_iter().map(T::lit).collect())
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.unmatched.len()
    }

    /// Positive link probabilities of record `j`, sorted by `i`.
    pub fn links(&self, j: usize) -> &[(usize, T)] {
        &self.links[j]
    }

    pub fn p_link(&self, i: usize, j: usize) -> T {
        let row = &self.links[j];
        row.binary_search_by_key(&i, |e| e.0).map_or(T::zero(), |k| row[k].1)
    }

    pub fn p_unmatched(&self, j: usize) -> T {
        self.unmatched[j]
    }

    /// `P(Z_j ∉ {i, n1 + j})`.
    pub fn p_other(&self, i: usize, j: usize) -> T {
        (T::one() - self.p_link(i, j) - self.p_unmatched(j)).max(T::zero())
    }

    /// Most probable link target of `j`; ties go to the lowest index.
    pub fn best_link(&self, j: usize) -> Option<(usize, T)> {
        self.links[j].iter().copied().fold(None, |best, (i, p)| match best {
            Some((_, bp)) if bp >= p => best,
            _ => Some((i, p)),
        })
    }

    pub fn to_f64(&self) -> Marginals<f64> {
        Marginals {
            n1: self.n1,
            links: self.links.iter().map(|r| r.iter().map(|&(i, p)| (i, p.as_f64())).collect()).collect(),
            unmatched: self.unmatched.iter().map(|p| p.as_f64()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "target")]
pub enum Decision {
    /// Link to file-1 record `i` (0-based).
    Link(usize),
    NonLink,
    Reject,
}

impl Decision {
    fn slot(self) -> usize {
        match self {
            Decision::Link(_) => 0,
            Decision::NonLink => 1,
            Decision::Reject => 2,
        }
    }
}

/// Posterior expected loss `ε_j` of one decision.
pub fn expected_loss<T: Real>(j: usize, decision: Decision, marg: &Marginals<T>, cfg: &LossConfig<T>) -> T {
    let p0 = marg.p_unmatched(j);
    match decision {
        Decision::Reject => cfg.lambda_r.unwrap_or(T::infinity()),
        Decision::NonLink => cfg.lambda_10 * (T::one() - p0).max(T::zero()),
        Decision::Link(i) => cfg.lambda_01 * p0 + cfg.lambda_11p * marg.p_other(i, j),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateEntry {
    pub decision: Decision,
    /// `P(Z_j = target)`; the non-match probability for non-links, absent
    /// for rejections.
    pub prob: Option<f64>,
    /// Posterior expected loss of the decision, when a posterior backs it.
    pub loss: Option<f64>,
}

/// A point estimate `Ẑ`, one decision per file-2 record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkageEstimate {
    pub n1: usize,
    pub estimator: String,
    pub loss: LossConfig<f64>,
    pub entries: Vec<EstimateEntry>,
}

impl LinkageEstimate {
    pub fn n2(&self) -> usize {
        self.entries.len()
    }

    pub fn decision(&self, j: usize) -> Decision {
        self.entries[j].decision
    }

    pub fn decisions(&self) -> impl Iterator<Item = Decision> + '_ {
        self.entries.iter().map(|e| e.decision)
    }

    /// Links for every matched pair of `z`, non-links elsewhere.
    pub fn from_labeling(z: &MatchingLabeling, estimator: &str) -> Self {
        let entries = z
            .links()
            .iter()
            .map(|l| EstimateEntry { decision: l.map_or(Decision::NonLink, Decision::Link), prob: None, loss: None })
            .collect();
        Self { n1: z.n1(), estimator: estimator.to_string(), loss: LossConfig::zero_one(), entries }
    }

    pub fn total_loss(&self) -> f64 {
        self.entries.iter().filter_map(|e| e.loss).sum()
    }

    pub fn count(&self, kind: Decision) -> usize {
        self.decisions().filter(|d| d.slot() == kind.slot()).count()
    }

    pub fn links(&self) -> usize {
        self.count(Decision::Link(0))
    }

    pub fn rejections(&self) -> usize {
        self.count(Decision::Reject)
    }

    /// Checks targets, one-to-one links and that rejections only appear
    /// when the loss allows them.
    pub fn validate(&self) -> Result<()> {
        let mut owner = vec![None; self.n1];
        for (j, d) in self.decisions().enumerate() {
            match d {
                Decision::Link(i) => {
                    if i >= self.n1 {
                        return Err(Error::InvalidMatching(format!("record {} links to {} > n1", j + 1, i + 1)));
                    }
                    if let Some(other) = owner[i].replace(j) {
                        return Err(Error::InvalidMatching(format!(
                            "records {} and {} both link to {}",
                            other + 1,
                            j + 1,
                            i + 1
                        )));
                    }
                }
                Decision::Reject if self.loss.lambda_r.is_none() => {
                    return Err(Error::InvalidMatching(format!("record {} rejected without a rejection loss", j + 1)));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn entry<T: Real>(j: usize, decision: Decision, marg: &Marginals<T>, cfg: &LossConfig<T>) -> EstimateEntry {
    let prob = match decision {
        Decision::Link(i) => Some(marg.p_link(i, j).as_f64()),
        Decision::NonLink => Some(marg.p_unmatched(j).as_f64()),
        Decision::Reject => None,
    };
    EstimateEntry { decision, prob, loss: Some(expected_loss(j, decision, marg, cfg).as_f64()) }
}

fn finish<T: Real>(name: &str, marg: &Marginals<T>, cfg: &LossConfig<T>, decisions: Vec<Decision>) -> Result<LinkageEstimate> {
    let est = LinkageEstimate {
        n1: marg.n1(),
        estimator: name.to_string(),
        loss: cfg.to_f64(),
        entries: decisions.into_iter().enumerate().map(|(j, d)| entry(j, d, marg, cfg)).collect(),
    };
    est.validate()?;
    Ok(est)
}

/// Minimizes the total posterior expected loss over all decision vectors
/// with one-to-one links, as a linear sum assignment of records to options
/// (reject, non-link, link to each `i`).
pub fn bayes_estimate_general<T: Real>(marg: &Marginals<T>, cfg: &LossConfig<T>) -> Result<LinkageEstimate> {
    let (n1, n2) = (marg.n1(), marg.n2());
    let reject_cols = if cfg.lambda_r.is_some() { n2 } else { 0 };
    // column layout: [reject_j | non-link_j | link_i], conservative options first
    let cols = reject_cols + n2 + n1;
    let inf = T::infinity();
    let cost = DenseMatrix::from_fn(n2, cols, |j, c| {
        if c < reject_cols {
            if c == j { expected_loss(j, Decision::Reject, marg, cfg) } else { inf }
        } else if c < reject_cols + n2 {
            if c - reject_cols == j { expected_loss(j, Decision::NonLink, marg, cfg) } else { inf }
        } else {
            expected_loss(j, Decision::Link(c - reject_cols - n2), marg, cfg)
        }
    });
    let assignment = assign_min(&cost).ok_or_else(|| Error::Data("no feasible decision vector".into()))?;
    let decisions = assignment
        .into_iter()
        .map(|(_, c)| {
            if c < reject_cols {
                Decision::Reject
            } else if c < reject_cols + n2 {
                Decision::NonLink
            } else {
                Decision::Link(c - reject_cols - n2)
            }
        })
        .collect();
    finish("general", marg, cfg, decisions)
}

/// Closed-form full estimate: link `j` to its most probable `i` iff
/// `p_i > λ01/(λ01+λ10) + (λ11'-λ01-λ10)/(λ01+λ10) · P(Z_j ∉ {i, n1+j})`.
pub fn bayes_full<T: Real>(marg: &Marginals<T>, cfg: &LossConfig<T>) -> Result<LinkageEstimate> {
    if let Some(v) = cfg.full_regime_violation() {
        return Err(Error::LossRegime(format!("full estimate requires {v}")));
    }
    let denom = cfg.lambda_01 + cfg.lambda_10;
    let base = cfg.lambda_01 / denom;
    let slope = (cfg.lambda_11p - cfg.lambda_01 - cfg.lambda_10) / denom;
    let decisions = (0..marg.n2())
        .map(|j| match marg.best_link(j) {
            Some((i, p)) if p > base + slope * marg.p_other(i, j) => Decision::Link(i),
            _ => Decision::NonLink,
        })
        .collect();
    finish("full", marg, cfg, decisions)
}

/// Closed-form partial estimate: link iff
/// `p_i > 1 - λR/λ01 + (λ11'-λ01)/λ01 · P(Z_j ∉ {i, n1+j})`, non-link iff
/// `p_0 > 1 - λR/λ10`, otherwise reject.
pub fn bayes_partial<T: Real>(marg: &Marginals<T>, cfg: &LossConfig<T>) -> Result<LinkageEstimate> {
    if let Some(v) = cfg.partial_regime_violation() {
        return Err(Error::LossRegime(format!("partial estimate requires {v}")));
    }
    let r = cfg.lambda_r.expect("checked by regime");
    let link_base = T::one() - r / cfg.lambda_01;
    let slope = (cfg.lambda_11p - cfg.lambda_01) / cfg.lambda_01;
    let nonlink_threshold = T::one() - r / cfg.lambda_10;
    let decisions = (0..marg.n2())
        .map(|j| match marg.best_link(j) {
            Some((i, p)) if p > link_base + slope * marg.p_other(i, j) => Decision::Link(i),
            _ if marg.p_unmatched(j) > nonlink_threshold => Decision::NonLink,
            _ => Decision::Reject,
        })
        .collect();
    finish("partial", marg, cfg, decisions)
}

/// 3×3 table of decision pairs (link, non-link, reject) between two
/// estimates of the same file-2 records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossTab {
    pub row_name: String,
    pub col_name: String,
    pub counts: [[usize; 3]; 3],
    /// Link-link records whose link targets agree.
    pub identical_links: usize,
}

pub fn crosstab(e1: &LinkageEstimate, e2: &LinkageEstimate) -> Result<CrossTab> {
    if e1.n2() != e2.n2() {
        return Err(Error::Data(format!("estimates cover {} and {} records", e1.n2(), e2.n2())));
    }
    let mut counts = [[0; 3]; 3];
    let mut identical_links = 0;
    for (a, b) in e1.decisions().zip(e2.decisions()) {
        counts[a.slot()][b.slot()] += 1;
        if matches!((a, b), (Decision::Link(x), Decision::Link(y)) if x == y) {
            identical_links += 1;
        }
    }
    Ok(CrossTab { row_name: e1.estimator.clone(), col_name: e2.estimator.clone(), counts, identical_links })
}

impl fmt::Display for CrossTab {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const NAMES: [&str; 3] = ["link", "non-link", "reject"];
        let cell = |r: usize, c: usize| {
            if r == 0 && c == 0 {
                format!("{} [{}]", self.counts[0][0], self.identical_links)
            } else {
                self.counts[r][c].to_string()
            }
        };
        writeln!(f, "{:>12} | {:>12} {:>12} {:>12}", format!("{}\\{}", self.row_name, self.col_name), NAMES[0], NAMES[1], NAMES[2])?;
        for (r, name) in NAMES.iter().enumerate() {
            writeln!(f, "{:>12} | {:>12} {:>12} {:>12}", name, cell(r, 0), cell(r, 1), cell(r, 2))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn single(n1: usize, links: Vec<(usize, f64)>, p0: f64) -> Marginals<f64> {
        Marginals::new(n1, vec![links], vec![p0]).unwrap()
    }

    #[test]
    fn expected_loss_cases() {
        let cfg = LossConfig::new(1.0, 1.0, 2.0, Some(0.3)).unwrap();
        let m = single(3, vec![(0, 0.7), (2, 0.1)], 0.2);
        assert_abs_diff_eq!(expected_loss(0, Decision::Link(0), &m, &cfg), 0.4, epsilon = 1e-15);
        assert_eq!(expected_loss(0, Decision::Reject, &m, &cfg), 0.3);
        let certain = single(3, vec![], 1.0);
        assert_eq!(expected_loss(0, Decision::NonLink, &certain, &cfg), 0.0);
        let no_reject = LossConfig::<f64>::zero_one();
        assert_eq!(expected_loss(0, Decision::Reject, &m, &no_reject), f64::INFINITY);
    }

    #[test]
    fn regimes() {
        assert!(LossConfig::<f64>::zero_one().is_full_regime());
        assert!(LossConfig::<f64>::default_partial().is_partial_regime());
        assert!(!LossConfig::<f64>::default_partial().is_full_regime());
        let bad = LossConfig::new(2.0, 1.0, 3.0, None).unwrap();
        assert_eq!(bad.full_regime_violation(), Some("lambda_10 <= lambda_01"));
        let bad = LossConfig::new(1.0, 1.0, 2.0, Some(0.6)).unwrap();
        assert_eq!(bad.partial_regime_violation(), Some("lambda_01 >= 2 lambda_R"));
        assert!(LossConfig::new(0.0, 1.0, 1.0, None).is_err());
        let m = single(1, vec![(0, 1.0)], 0.0);
        assert!(matches!(bayes_full(&m, &bad), Err(Error::LossRegime(_))));
        assert!(matches!(bayes_partial(&m, &LossConfig::zero_one()), Err(Error::LossRegime(_))));
    }

    #[test]
    fn full_estimate_examples() {
        let cfg = LossConfig::<f64>::zero_one();
        let est = bayes_full(&single(2, vec![(1, 0.6)], 0.4), &cfg).unwrap();
        assert_eq!(est.decision(0), Decision::Link(1));
        let est = bayes_full(&single(2, vec![(1, 0.45)], 0.55), &cfg).unwrap();
        assert_eq!(est.decision(0), Decision::NonLink);
        let cfg = LossConfig::new(1.0, 3.0, 4.0, None).unwrap();
        let est = bayes_full(&single(2, vec![(0, 0.8)], 0.2), &cfg).unwrap();
        assert_eq!(est.decision(0), Decision::Link(0));
        let est = bayes_full(&single(2, vec![(0, 0.7)], 0.3), &cfg).unwrap();
        assert_eq!(est.decision(0), Decision::NonLink);
    }

    #[test]
    fn exact_threshold_ties_are_conservative() {
        let est = bayes_full(&single(1, vec![(0, 0.5)], 0.5), &LossConfig::zero_one()).unwrap();
        assert_eq!(est.decision(0), Decision::NonLink);
        // p0 exactly at 1 - λR/λ10 = 0.75
        let cfg = LossConfig::new(1.0, 1.0, 2.0, Some(0.25)).unwrap();
        let est = bayes_partial(&single(1, vec![(0, 0.25)], 0.75), &cfg).unwrap();
        assert_eq!(est.decision(0), Decision::Reject);
    }

    #[test]
    fn partial_estimate_examples() {
        let cfg = LossConfig::<f64>::default_partial();
        let est = bayes_partial(&single(3, vec![(0, 0.95)], 0.05), &cfg).unwrap();
        assert_eq!(est.decision(0), Decision::Link(0));
        let third = 1.0 / 3.0;
        let est = bayes_partial(&single(3, vec![(0, third), (1, third), (2, third)], 0.0), &cfg).unwrap();
        assert_eq!(est.decision(0), Decision::Reject);
        assert_eq!(est.entries[0].loss, Some(0.1));
        let est = bayes_partial(&single(3, vec![(0, 0.02)], 0.98), &cfg).unwrap();
        assert_eq!(est.decision(0), Decision::NonLink);
    }

    #[test]
    fn general_point_mass() {
        let m = Marginals::new(2, vec![vec![(0, 1.0)], vec![]], vec![0.0, 1.0]).unwrap();
        let est = bayes_estimate_general(&m, &LossConfig::zero_one()).unwrap();
        assert_eq!(est.decisions().collect::<Vec<_>>(), vec![Decision::Link(0), Decision::NonLink]);
        assert_eq!(est.total_loss(), 0.0);
    }

    #[test]
    fn general_resolves_shared_target() {
        // both records favour file-1 record 0 with 0.6; only one may link
        let m = Marginals::new(1, vec![vec![(0, 0.6)], vec![(0, 0.4)]], vec![0.4, 0.6]).unwrap();
        let cfg = LossConfig::<f64>::zero_one();
        let est = bayes_estimate_general(&m, &cfg).unwrap();
        assert_eq!(est.decisions().collect::<Vec<_>>(), vec![Decision::Link(0), Decision::NonLink]);
    }

    #[test]
    fn column_sums_are_enforced() {
        let err = Marginals::new(1, vec![vec![(0, 0.6)], vec![(0, 0.6)]], vec![0.4, 0.4]).unwrap_err();
        assert!(matches!(err, Error::ColumnSum { record: 1, .. }));
        assert!(Marginals::new(1, vec![vec![(0, 0.6)]], vec![0.3]).is_err());
        assert!(Marginals::new(1, vec![vec![(3, 0.6)]], vec![0.4]).is_err());
    }

    #[test]
    fn crosstab_examples() {
        let cfg = LossConfig::<f64>::default_partial();
        let m = Marginals::new(
            3,
            vec![vec![(0, 0.99)], vec![], vec![(1, 0.5), (2, 0.5)]],
            vec![0.01, 1.0, 0.0],
        )
        .unwrap();
        let e = bayes_partial(&m, &cfg).unwrap();
        let t = crosstab(&e, &e).unwrap();
        assert_eq!(t.counts, [[1, 0, 0], [0, 1, 0], [0, 0, 1]]);
        assert_eq!(t.identical_links, 1);
        assert!(t.to_string().contains("1 [1]"));

        let mk = |ds: Vec<Decision>| LinkageEstimate {
            n1: 3,
            estimator: "x".into(),
            loss: cfg,
            entries: ds.into_iter().map(|decision| EstimateEntry { decision, prob: None, loss: None }).collect(),
        };
        let a = mk(vec![Decision::Link(0), Decision::NonLink, Decision::Reject]);
        let b = mk(vec![Decision::NonLink, Decision::Reject, Decision::Link(0)]);
        let t = crosstab(&a, &b).unwrap();
        let off: usize = (0..3).flat_map(|r| (0..3).map(move |c| (r, c))).filter(|(r, c)| r != c).map(|(r, c)| t.counts[r][c]).sum();
        assert_eq!(off, 3);
    }

    #[test]
    fn validate_catches_conflicts() {
        let mut e = bayes_full(&single(2, vec![(0, 0.9)], 0.1), &LossConfig::zero_one()).unwrap();
        e.entries.push(e.entries[0].clone());
        assert!(e.validate().is_err());
        e.entries[1].decision = Decision::Reject;
        assert!(e.validate().is_err());
    }
}
