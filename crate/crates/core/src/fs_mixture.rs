//! Fellegi-Sunter baseline: conditionally independent two-component mixture
//! fitted by EM, log-likelihood-ratio weights, the maximum-likelihood
//! bipartite matching and the three-way decision rule.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::comparison::{ComparisonData, ComparisonVector};
use crate::error::{Error, Result};
use crate::lsap::{max_weight_matching, DenseMatrix};
use crate::scalar::{log_sum_exp, Real};
use crate::types::MatchingLabeling;

/// Lower bound applied to every `m` and `u` entry.
pub const PROB_FLOOR: f64 = 1e-6;

fn sum_tolerance<T: Real>() -> T {
    T::lit(1e-12).max(T::epsilon() * T::lit(64.0))
}

/// Per-field level distributions among matches (`m`) and non-matches (`u`),
/// plus the mixture proportion `p` when fitted by EM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + serde::de::DeserializeOwned")]
pub struct PhiParams<T = f64> {
    pub m: Vec<Vec<T>>,
    pub u: Vec<Vec<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<T>,
}

impl<T: Real> PhiParams<T> {
    pub fn new(m: Vec<Vec<T>>, u: Vec<Vec<T>>, p: Option<T>) -> Result<Self> {
        let phi = Self { m, u, p };
        phi.validate()?;
        Ok(phi)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m.len() != self.u.len() {
            return Err(Error::Config("m and u cover different numbers of fields".into()));
        }
        let tol = sum_tolerance::<T>();
        for (f, (m, u)) in self.m.iter().zip(&self.u).enumerate() {
            if m.len() != u.len() || m.len() < 2 {
                return Err(Error::Config(format!("field {f}: m and u need the same number (>= 2) of levels")));
            }
            for (name, v) in [("m", m), ("u", u)] {
                if v.iter().any(|x| x.is_nan() || *x < T::zero()) {
                    return Err(Error::Config(format!("field {f}: negative {name} entry")));
                }
                let s: T = v.iter().copied().sum();
                if (s - T::one()).abs() > tol {
                    return Err(Error::Config(format!("field {f}: {name} sums to {s}")));
                }
            }
        }
        if let Some(p) = self.p {
            if !(p >= T::zero() && p <= T::one()) {
                return Err(Error::Config(format!("mixture proportion {p} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Default EM starting point: `m_f` puts 0.9 on level 0 and spreads the
    /// rest uniformly, `u_f` is uniform, `p = 0.1`.
    pub fn em_start(level_counts: &[usize]) -> Self {
        let m = level_counts
            .iter()
            .map(|&k| {
                let rest = T::lit(0.1) / T::count(k - 1);
                (0..k).map(|l| if l == 0 { T::lit(0.9) } else { rest }).collect()
            })
            .collect();
        let u = level_counts.iter().map(|&k| vec![T::one() / T::count(k); k]).collect();
        Self { m, u, p: Some(T::lit(0.1)) }
    }

    pub fn num_fields(&self) -> usize {
        self.m.len()
    }

    fn check_shape(&self, data: &ComparisonData) -> Result<()> {
        let levels = data.level_counts();
        if self.m.len() != levels.len() || self.m.iter().zip(&levels).any(|(m, &k)| m.len() != k) {
            return Err(Error::Config("parameters do not match the comparison fields".into()));
        }
        Ok(())
    }

    /// Floored log-ratio `log(m_fl / u_fl)` for every field and level.
    pub fn log_ratios(&self) -> Vec<Vec<T>> {
        let floor = T::lit(PROB_FLOOR);
        self.m
            .iter()
            .zip(&self.u)
            .map(|(m, u)| m.iter().zip(u).map(|(&a, &b)| a.max(floor).ln() - b.max(floor).ln()).collect())
            .collect()
    }
}

/// Composite weight `sum over observed f of log(m_{f,l} / u_{f,l})`.
/// Unobserved fields contribute nothing.
pub fn composite_weight<T: Real>(phi: &PhiParams<T>, gamma: &ComparisonVector) -> T {
    weight_from_ratios(&phi.log_ratios(), gamma)
}

#[inline]
pub(crate) fn weight_from_ratios<T: Real>(ratios: &[Vec<T>], gamma: &ComparisonVector) -> T {
    let mut w = T::zero();
    for (f, l) in gamma.observed_levels() {
        w += ratios[f][l];
    }
    w
}

/// Weight of every distinct comparison pattern.
pub fn pattern_weights<T: Real>(phi: &PhiParams<T>, data: &ComparisonData) -> Result<Vec<T>> {
    phi.check_shape(data)?;
    let ratios = phi.log_ratios();
    Ok(data.patterns().iter().map(|g| weight_from_ratios(&ratios, g)).collect())
}

/// Weight of every candidate pair, aligned with [`ComparisonData::pairs`].
pub fn pair_weights<T: Real>(phi: &PhiParams<T>, data: &ComparisonData) -> Result<Vec<T>> {
    let pw = pattern_weights(phi, data)?;
    Ok(data.pairs().par_iter().map(|p| pw[p.pattern as usize]).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmOptions {
    pub max_iterations: usize,
    /// Stop when the relative change of the log-likelihood falls below this.
    pub rel_tol: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self { max_iterations: 1000, rel_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + serde::de::DeserializeOwned")]
pub struct EmFit<T = f64> {
    pub phi: PhiParams<T>,
    /// Observed-data log-likelihood at the start point and after every update.
    pub loglik: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
    /// All comparison vectors identical; the mixture is not identifiable.
    pub degenerate: bool,
}

/// Maximizer of `sum_l c_l log x_l` over the simplex with `x_l >= floor`.
fn floored_proportions<T: Real>(counts: &[T], floor: T) -> Vec<T> {
    let k = counts.len();
    let mut clamped = vec![false; k];
    loop {
        let n_clamped = clamped.iter().filter(|&&c| c).count();
        let mass = T::one() - T::count(n_clamped) * floor;
        let total: T = counts.iter().zip(&clamped).filter(|(_, &c)| !c).map(|(&x, _)| x).sum();
        let n_free = k - n_clamped;
        let x: Vec<T> = counts
            .iter()
            .zip(&clamped)
            .map(|(&c, &cl)| {
                if cl {
                    floor
                } else if total > T::zero() {
                    mass * c / total
                } else {
                    mass / T::count(n_free)
                }
            })
            .collect();
        let mut changed = false;
        for l in 0..k {
            if !clamped[l] && x[l] < floor {
                clamped[l] = true;
                changed = true;
            }
        }
        if !changed {
            return x;
        }
    }
}

struct PatternTable<T> {
    counts: Vec<T>,
    /// `(field, level)` lists per pattern.
    levels: Vec<Vec<(usize, usize)>>,
}

fn log_components<T: Real>(phi: &PhiParams<T>, obs: &[(usize, usize)]) -> (T, T) {
    let (mut lm, mut lu) = (T::zero(), T::zero());
    for &(f, l) in obs {
        lm += phi.m[f][l].ln();
        lu += phi.u[f][l].ln();
    }
    (lm, lu)
}

fn kahan_sum<T: Real>(xs: impl Iterator<Item = T>) -> T {
    let (mut s, mut c) = (T::zero(), T::zero());
    for x in xs {
        let y = x - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    s
}

fn observed_loglik<T: Real>(phi: &PhiParams<T>, table: &PatternTable<T>) -> T {
    let p = phi.p.unwrap_or(T::lit(0.1));
    let (lp, lq) = (p.ln(), (T::one() - p).ln());
    kahan_sum(table.counts.iter().zip(&table.levels).map(|(&c, obs)| {
        let (lm, lu) = log_components(phi, obs);
        c * log_sum_exp(&[lp + lm, lq + lu])
    }))
}

fn project_start<T: Real>(phi: &PhiParams<T>) -> PhiParams<T> {
    let floor = T::lit(PROB_FLOOR);
    let fix = |v: &Vec<Vec<T>>| v.iter().map(|x| floored_proportions(x, floor)).collect();
    PhiParams { m: fix(&phi.m), u: fix(&phi.u), p: Some(phi.p.unwrap_or(T::lit(0.1))) }
}

/// Fit the conditionally independent mixture by EM on the observed
/// comparisons. Entries of `m` and `u` are kept at or above [`PROB_FLOOR`];
/// the M-step solves the floored problem exactly so the observed-data
/// log-likelihood never decreases.
pub fn em_fit<T: Real>(data: &ComparisonData, init: Option<&PhiParams<T>>, opts: EmOptions) -> Result<EmFit<T>> {
    let level_counts = data.level_counts();
    if data.patterns().iter().all(|g| g.observed_mask() == 0) {
        return Err(Error::Data("no observed comparisons".into()));
    }
    let counts = data.pattern_counts();
    let table = PatternTable {
        counts: counts.iter().map(|&c| T::count(c as usize)).collect(),
        levels: data.patterns().iter().map(|g| g.observed_levels().collect()).collect(),
    };
    let start = match init {
        Some(phi) => {
            phi.check_shape(data)?;
            phi.validate()?;
            phi.clone()
        }
        None => PhiParams::em_start(&level_counts),
    };
    let mut phi = project_start(&start);
    let floor = T::lit(PROB_FLOOR);
    let total: T = table.counts.iter().copied().sum();
    let mut loglik = vec![observed_loglik(&phi, &table)];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        let p = phi.p.expect("p set");
        let (lp, lq) = (p.ln(), (T::one() - p).ln());
        let mut match_mass = T::zero();
        let mut m_counts: Vec<Vec<T>> = level_counts.iter().map(|&k| vec![T::zero(); k]).collect();
        let mut u_counts = m_counts.clone();
        for (&c, obs) in table.counts.iter().zip(&table.levels) {
            let (lm, lu) = log_components(&phi, obs);
            let a = lp + lm;
            let b = lq + lu;
            let g = if a == T::neg_infinity() {
                T::zero()
            } else if b == T::neg_infinity() {
                T::one()
            } else {
                T::one() / (T::one() + (b - a).exp())
            };
            match_mass += c * g;
            for &(f, l) in obs {
                m_counts[f][l] += c * g;
                u_counts[f][l] += c * (T::one() - g);
            }
        }
        let next = PhiParams {
            m: m_counts.iter().map(|c| floored_proportions(c, floor)).collect(),
            u: u_counts.iter().map(|c| floored_proportions(c, floor)).collect(),
            p: Some(match_mass / total),
        };
        phi = next;
        iterations += 1;
        let ll = observed_loglik(&phi, &table);
        let prev = *loglik.last().expect("nonempty");
        loglik.push(ll);
        if ((ll - prev) / prev.abs().max(T::min_positive_value())).abs() < T::lit(opts.rel_tol) {
            converged = true;
            break;
        }
    }
    Ok(EmFit { phi, loglik, iterations, converged, degenerate: data.patterns().len() == 1 })
}

/// Maximum-likelihood bipartite matching under conditional independence:
/// maximizes the summed weights of matched candidate pairs. Pairs with
/// non-positive weight are never matched. The candidate graph is split into
/// connected components that are solved independently.
pub fn mle_matching<T: Real>(data: &ComparisonData, pattern_w: &[T]) -> MatchingLabeling {
    let (n1, n2) = (data.n1(), data.n2());
    let positive: Vec<(usize, usize, T)> = data
        .pairs()
        .iter()
        .map(|p| (p.i as usize, p.j as usize, pattern_w[p.pattern as usize]))
        .filter(|&(_, _, w)| w.is_finite() && w > T::zero())
        .collect();

    // union-find over file-1 nodes 0..n1 and file-2 nodes n1..n1+n2
    let mut parent: Vec<usize> = (0..n1 + n2).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(i, j, _) in &positive {
        let (a, b) = (find(&mut parent, i), find(&mut parent, n1 + j));
        if a != b {
            parent[a.max(b)] = a.min(b);
        }
    }
    let mut components: BTreeMap<usize, Vec<(usize, usize, T)>> = BTreeMap::new();
    for &(i, j, w) in &positive {
        let root = find(&mut parent, i);
        components.entry(root).or_default().push((i, j, w));
    }

    let solved: Vec<Vec<(usize, usize)>> = components
        .into_values()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|edges| {
            let mut rows: Vec<usize> = edges.iter().map(|e| e.1).collect();
            let mut cols: Vec<usize> = edges.iter().map(|e| e.0).collect();
            rows.sort_unstable();
            rows.dedup();
            cols.sort_unstable();
            cols.dedup();
            let mut data_w = vec![T::neg_infinity(); rows.len() * cols.len()];
            for &(i, j, wt) in &edges {
                let r = rows.binary_search(&j).expect("row present");
                let c = cols.binary_search(&i).expect("col present");
                data_w[r * cols.len() + c] = wt;
            }
            let w = DenseMatrix::from_vec(rows.len(), cols.len(), data_w);
            max_weight_matching(&w).into_iter().map(|(r, c)| (cols[c], rows[r])).collect()
        })
        .collect();

    let mut links = vec![None; n2];
    for (i, j) in solved.into_iter().flatten() {
        links[j] = Some(i);
    }
    MatchingLabeling::from_links(n1, links).expect("assignment is one-to-one")
}

/// Summed weight of the matched pairs of `z` (non-candidate links count as -inf).
pub fn matching_objective<T: Real>(data: &ComparisonData, pattern_w: &[T], z: &MatchingLabeling) -> T {
    z.links()
        .iter()
        .enumerate()
        .filter_map(|(j, l)| l.map(|i| (i, j)))
        .map(|(i, j)| data.pattern_of(i, j).map_or(T::neg_infinity(), |k| pattern_w[k as usize]))
        .sum()
}

/// Admissible error levels of the decision rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FsRuleConfig {
    /// Admissible probability of linking a non-match.
    pub mu: f64,
    /// Admissible probability of not linking a match.
    pub lambda_fs: f64,
}

impl FsRuleConfig {
    pub fn new(mu: f64, lambda_fs: f64) -> Result<Self> {
        for (name, v) in [("mu", mu), ("lambda", lambda_fs)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} = {v} must lie in (0, 1)")));
            }
        }
        Ok(Self { mu, lambda_fs })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FsDecision {
    Link,
    Review,
    NonLink,
}

/// Thresholds used for one missingness pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsThresholds {
    /// Bitmask of observed fields.
    pub observed_mask: u64,
    pub configurations: usize,
    /// Smallest weight among linked configurations, if any.
    pub link_weight: Option<f64>,
    /// Largest weight among non-linked configurations, if any.
    pub nonlink_weight: Option<f64>,
    /// Non-match probability mass of the link region (the attained `mu`).
    pub attained_mu: f64,
    /// Match probability mass of the non-link region (the attained `lambda`).
    pub attained_lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsPairDecision {
    /// 0-based file-2 record.
    pub j: usize,
    /// File-1 record it was matched to by the assignment step.
    pub i: Option<usize>,
    pub decision: FsDecision,
    pub weight: Option<f64>,
    pub observed_mask: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsRuleOutput {
    pub decisions: Vec<FsPairDecision>,
    pub thresholds: Vec<FsThresholds>,
}

/// Upper bound on enumerated configurations per missingness pattern.
pub const MAX_CONFIGURATIONS: usize = 1 << 22;

struct RuleTable {
    thresholds: FsThresholds,
    decisions: Vec<FsDecision>,
}

fn rule_for_mask<T: Real>(phi: &PhiParams<T>, mask: u64, cfg: FsRuleConfig) -> Result<RuleTable> {
    let floor = T::lit(PROB_FLOOR);
    let fields: Vec<usize> = (0..phi.num_fields()).filter(|f| mask >> f & 1 == 1).collect();
    let sizes: Vec<usize> = fields.iter().map(|&f| phi.m[f].len()).collect();
    let total = sizes.iter().try_fold(1usize, |acc, &k| acc.checked_mul(k)).unwrap_or(usize::MAX);
    if total > MAX_CONFIGURATIONS {
        return Err(Error::Config(format!("{total} configurations exceed the enumeration limit")));
    }
    // (index, weight, P(gamma | match), P(gamma | non-match))
    let mut configs: Vec<(usize, f64, f64, f64)> = (0..total)
        .map(|idx| {
            let mut rem = idx;
            let (mut lm, mut lu) = (0.0f64, 0.0f64);
            for (&f, &k) in fields.iter().zip(&sizes) {
                let l = rem % k;
                rem /= k;
                lm += phi.m[f][l].max(floor).as_f64().ln();
                lu += phi.u[f][l].max(floor).as_f64().ln();
            }
            (idx, lm - lu, lm.exp(), lu.exp())
        })
        .collect();
    configs.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mass_m: f64 = configs.iter().map(|c| c.2).sum();
    let mass_u: f64 = configs.iter().map(|c| c.3).sum();

    let mut decisions = vec![FsDecision::Review; total];
    let mut cum_u = 0.0;
    let mut link_region = vec![false; configs.len()];
    for (h, c) in configs.iter().enumerate() {
        cum_u += c.3 / mass_u;
        link_region[h] = cum_u < cfg.mu;
    }
    let mut tail_m = 0.0;
    let mut nonlink_region = vec![false; configs.len()];
    for (h, c) in configs.iter().enumerate().rev() {
        tail_m += c.2 / mass_m;
        nonlink_region[h] = tail_m < cfg.lambda_fs;
    }
    let mut th = FsThresholds {
        observed_mask: mask,
        configurations: total,
        link_weight: None,
        nonlink_weight: None,
        attained_mu: 0.0,
        attained_lambda: 0.0,
    };
    for (h, c) in configs.iter().enumerate() {
        let d = if link_region[h] {
            th.link_weight = Some(c.1);
            th.attained_mu += c.3 / mass_u;
            FsDecision::Link
        } else if nonlink_region[h] {
            th.nonlink_weight = Some(th.nonlink_weight.map_or(c.1, |w: f64| w.max(c.1)));
            th.attained_lambda += c.2 / mass_m;
            FsDecision::NonLink
        } else {
            FsDecision::Review
        };
        decisions[c.0] = d;
    }
    Ok(RuleTable { thresholds: th, decisions })
}

fn config_index(gamma: &ComparisonVector, level_counts: &[usize]) -> usize {
    let mut idx = 0;
    let mut stride = 1;
    for (f, l) in gamma.observed_levels() {
        idx += l * stride;
        stride *= level_counts[f];
    }
    idx
}

/// Three-way decision rule applied to the pairs matched by `matching`.
///
/// Configurations are ordered by non-increasing weight; a configuration is
/// linked when the non-match mass up to and including it is below `mu`, and
/// not linked when the match mass from it onwards is below `lambda_fs`.
/// Link takes precedence where the two regions meet. Thresholds are computed
/// separately for every missingness pattern among the matched pairs.
/// Unmatched file-2 records are non-links.
pub fn fs_decision_rule<T: Real>(
    phi: &PhiParams<T>,
    data: &ComparisonData,
    matching: &MatchingLabeling,
    cfg: FsRuleConfig,
) -> Result<FsRuleOutput> {
    phi.check_shape(data)?;
    let level_counts = data.level_counts();
    let mut tables: BTreeMap<u64, RuleTable> = BTreeMap::new();
    let ratios = phi.log_ratios();
    let mut decisions = Vec::with_capacity(matching.n2());
    for j in 0..matching.n2() {
        let Some(i) = matching.link(j) else {
            decisions.push(FsPairDecision { j, i: None, decision: FsDecision::NonLink, weight: None, observed_mask: 0 });
            continue;
        };
        let pattern = data
            .pattern_of(i, j)
            .ok_or_else(|| Error::Data(format!("matched pair ({}, {}) is not a candidate", i + 1, j + 1)))?;
        let gamma = &data.patterns()[pattern as usize];
        let mask = gamma.observed_mask();
        if let std::collections::btree_map::Entry::Vacant(e) = tables.entry(mask) {
            e.insert(rule_for_mask(phi, mask, cfg)?);
        }
        let table = &tables[&mask];
        let decision = table.decisions[config_index(gamma, &level_counts)];
        decisions.push(FsPairDecision {
            j,
            i: Some(i),
            decision,
            weight: Some(weight_from_ratios(&ratios, gamma).as_f64()),
            observed_mask: mask,
        });
    }
    Ok(FsRuleOutput { decisions, thresholds: tables.into_values().map(|t| t.thresholds).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comparison::FieldLevels;
    use approx::assert_abs_diff_eq;

    fn binary_fields(k: usize) -> Vec<FieldLevels> {
        (0..k).map(|f| FieldLevels { name: format!("f{f}"), levels: 2 }).collect()
    }

    #[test]
    fn composite_weight_examples() {
        let phi = PhiParams::new(vec![vec![0.9, 0.1]], vec![vec![0.5, 0.5]], None).unwrap();
        let agree = ComparisonVector::new(&[Some(0)]);
        assert_abs_diff_eq!(composite_weight(&phi, &agree), (0.9f64 / 0.5).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(composite_weight(&phi, &agree), 0.5878, epsilon = 1e-4);
        let missing = ComparisonVector::new(&[None]);
        assert_eq!(composite_weight(&phi, &missing), 0.0);

        let phi = PhiParams::new(vec![vec![0.3, 0.7]; 2], vec![vec![0.3, 0.7]; 2], None).unwrap();
        for g in [[Some(0), Some(1)], [Some(1), Some(1)], [None, Some(0)]] {
            assert_eq!(composite_weight(&phi, &ComparisonVector::new(&g)), 0.0);
        }
    }

    #[test]
    fn zero_cells_are_floored() {
        let phi = PhiParams::new(vec![vec![1.0f64, 0.0]], vec![vec![0.0, 1.0]], None).unwrap();
        let w = composite_weight(&phi, &ComparisonVector::new(&[Some(0)]));
        assert!(w.is_finite());
        assert_abs_diff_eq!(w, -(PROB_FLOOR.ln()), epsilon = 1e-9);
    }

    #[test]
    fn phi_validation() {
        assert!(PhiParams::new(vec![vec![0.5, 0.6]], vec![vec![0.5, 0.5]], None).is_err());
        assert!(PhiParams::new(vec![vec![1.2, -0.2]], vec![vec![0.5, 0.5]], None).is_err());
        assert!(PhiParams::new(vec![vec![0.5, 0.5]], vec![vec![0.5, 0.5]], Some(1.5)).is_err());
        assert!(PhiParams::<f32>::new(vec![vec![0.1, 0.9]], vec![vec![0.5, 0.5]], Some(0.5)).is_ok());
    }

    #[test]
    fn floored_proportions_solve_the_constrained_problem() {
        let x = floored_proportions(&[10.0f64, 0.0, 0.0], 1e-6);
        assert_abs_diff_eq!(x[0], 1.0 - 2e-6, epsilon = 1e-15);
        assert_eq!(x[1], 1e-6);
        let x = floored_proportions(&[0.0f64, 0.0], 1e-6);
        assert_eq!(x, vec![0.5, 0.5]);
        let x = floored_proportions(&[3.0f64, 1.0], 1e-6);
        assert_abs_diff_eq!(x[0], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn single_pair_converges() {
        let data = ComparisonData::from_pairs(1, 1, binary_fields(2), [(0, 0, vec![Some(0), Some(1)])]).unwrap();
        let fit = em_fit::<f64>(&data, None, EmOptions::default()).unwrap();
        let p = fit.phi.p.unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert!(fit.degenerate);
        // a single observation is fitted (almost) perfectly by either component
        assert!(*fit.loglik.last().unwrap() > -1e-3);
        assert!(fit.loglik.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn em_requires_observed_comparisons() {
        let data = ComparisonData::from_pairs(1, 1, binary_fields(1), [(0, 0, vec![None])]).unwrap();
        assert!(em_fit::<f64>(&data, None, EmOptions::default()).is_err());
    }

    fn brute_force_best(w: &[Vec<f64>]) -> f64 {
        fn rec(w: &[Vec<f64>], j: usize, used: &mut Vec<bool>) -> f64 {
            if j == w[0].len() {
                return 0.0;
            }
            let mut best = rec(w, j + 1, used);
            for i in 0..w.len() {
                if !used[i] && w[i][j].is_finite() {
                    used[i] = true;
                    best = best.max(w[i][j] + rec(w, j + 1, used));
                    used[i] = false;
                }
            }
            best
        }
        rec(w, 0, &mut vec![false; w.len()])
    }

    /// One pattern per pair so that pattern weights act as a free weight matrix.
    fn data_from_weights(w: &[Vec<f64>]) -> (ComparisonData, Vec<f64>) {
        let (n1, n2) = (w.len(), w[0].len());
        let fields = vec![FieldLevels { name: "id".into(), levels: n1 * n2 }];
        let pairs = (0..n1).flat_map(|i| (0..n2).map(move |j| (i, j, vec![Some((i * n2 + j) as u8)])));
        let data = ComparisonData::from_pairs(n1, n2, fields, pairs).unwrap();
        let pw = data
            .patterns()
            .iter()
            .map(|g| {
                let k = g.level(0).unwrap() as usize;
                w[k / n2][k % n2]
            })
            .collect();
        (data, pw)
    }

    #[test]
    fn mle_matching_examples() {
        let w = vec![vec![2.0, 1.0], vec![1.0, 2.0]];
        let (data, pw) = data_from_weights(&w);
        let z = mle_matching(&data, &pw);
        assert_eq!(z.labels(), vec![1, 2]);
        assert_eq!(matching_objective(&data, &pw, &z), 4.0);
        assert_eq!(brute_force_best(&w), 4.0);

        let w = vec![vec![-1.0]];
        let (data, pw) = data_from_weights(&w);
        let z = mle_matching(&data, &pw);
        assert_eq!(z.labels(), vec![2]);
        assert_eq!(matching_objective(&data, &pw, &z), 0.0);

        let w = vec![vec![5.0, 5.0], vec![5.0, 5.0]];
        let (data, pw) = data_from_weights(&w);
        let z = mle_matching(&data, &pw);
        assert_eq!(z.labels(), vec![1, 2]);
        assert_eq!(matching_objective(&data, &pw, &z), 10.0);
    }

    #[test]
    fn decision_rule_binary_example() {
        let phi = PhiParams::new(vec![vec![0.99, 0.01]], vec![vec![0.01, 0.99]], None).unwrap();
        let data = ComparisonData::from_pairs(
            2,
            2,
            binary_fields(1),
            [(0, 0, vec![Some(0)]), (1, 1, vec![Some(1)]), (0, 1, vec![Some(1)]), (1, 0, vec![Some(1)])],
        )
        .unwrap();
        let z = MatchingLabeling::from_labels(2, &[1, 2]).unwrap();
        let out = fs_decision_rule(&phi, &data, &z, FsRuleConfig::new(0.05, 0.05).unwrap()).unwrap();
        assert_eq!(out.decisions[0].decision, FsDecision::Link);
        assert_eq!(out.decisions[1].decision, FsDecision::NonLink);
        assert_eq!(out.thresholds.len(), 1);
        assert_abs_diff_eq!(out.thresholds[0].attained_mu, 0.01, epsilon = 1e-12);
        assert_abs_diff_eq!(out.thresholds[0].attained_lambda, 0.01, epsilon = 1e-12);
    }

    #[test]
    fn decision_rule_extreme_levels_leave_no_review() {
        let phi = PhiParams::new(vec![vec![0.7, 0.2, 0.1]; 2], vec![vec![0.1, 0.3, 0.6]; 2], None).unwrap();
        let fields = vec![FieldLevels { name: "a".into(), levels: 3 }, FieldLevels { name: "b".into(), levels: 3 }];
        let mut pairs = Vec::new();
        let mut j = 0;
        for a in 0..3u8 {
            for b in 0..3u8 {
                pairs.push((j, j, vec![Some(a), Some(b)]));
                j += 1;
            }
        }
        let data = ComparisonData::from_pairs(9, 9, fields, pairs).unwrap();
        let z = MatchingLabeling::from_links(9, (0..9).map(Some).collect()).unwrap();
        let near_one = 1.0 - 1e-9;
        let out = fs_decision_rule(&phi, &data, &z, FsRuleConfig::new(near_one, near_one).unwrap()).unwrap();
        assert!(out.decisions.iter().all(|d| d.decision != FsDecision::Review));
        let links = out.decisions.iter().filter(|d| d.decision == FsDecision::Link).count();
        assert!(links >= 8);
        // tiny levels: nothing linked, nothing non-linked
        let out = fs_decision_rule(&phi, &data, &z, FsRuleConfig::new(1e-9, 1e-9).unwrap()).unwrap();
        assert!(out.decisions.iter().all(|d| d.decision == FsDecision::Review));
    }

    #[test]
    fn tabulated_error_levels_are_valid() {
        assert!(FsRuleConfig::new(0.0025, 0.005).is_ok());
        assert!(FsRuleConfig::new(0.0, 0.5).is_err());
        assert!(FsRuleConfig::new(0.5, 1.0).is_err());
    }
}
