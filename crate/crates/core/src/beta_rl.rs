//! Bayesian beta record linkage.
//!
//! Comparison data are modelled with conditionally independent categorical
//! distributions per field (Dirichlet priors on `m_f` and `u_f`), unobserved
//! comparisons are ignored, and the bipartite matching gets the beta prior:
//! the number of matched file-2 records is Beta-Binomial and, given which
//! file-2 records are matched, all bipartite matchings are equally likely.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma};
use serde::{Deserialize, Serialize};

use crate::comparison::ComparisonData;
use crate::error::{Error, Result};
use crate::fs_mixture::{weight_from_ratios, PhiParams};
use crate::scalar::{log_sum_exp, Real};
use crate::types::MatchingLabeling;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchingPrior {
    /// Beta prior for bipartite matchings.
    Beta,
    /// Uniform over all bipartite matchings.
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + serde::de::DeserializeOwned")]
pub struct PriorConfig<T = f64> {
    pub matching_prior: MatchingPrior,
    pub alpha_pi: T,
    pub beta_pi: T,
    /// Dirichlet hyperparameters of `m_f`, one vector per field.
    pub alpha: Vec<Vec<T>>,
    /// Dirichlet hyperparameters of `u_f`, one vector per field.
    pub beta: Vec<Vec<T>>,
}

impl<T: Real> PriorConfig<T> {
    /// All hyperparameters equal to one.
    pub fn flat(level_counts: &[usize]) -> Self {
        let ones: Vec<Vec<T>> = level_counts.iter().map(|&k| vec![T::one(); k]).collect();
        Self { matching_prior: MatchingPrior::Beta, alpha_pi: T::one(), beta_pi: T::one(), alpha: ones.clone(), beta: ones }
    }

    pub fn with_pi(mut self, alpha_pi: T, beta_pi: T) -> Self {
        self.alpha_pi = alpha_pi;
        self.beta_pi = beta_pi;
        self
    }

    pub fn with_matching_prior(mut self, prior: MatchingPrior) -> Self {
        self.matching_prior = prior;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: T| x > T::zero() && x.is_finite();
        if !pos(self.alpha_pi) || !pos(self.beta_pi) {
            return Err(Error::Config("alpha_pi and beta_pi must be positive".into()));
        }
        if self.alpha.len() != self.beta.len() {
            return Err(Error::Config("alpha and beta cover different numbers of fields".into()));
        }
        for (f, (a, b)) in self.alpha.iter().zip(&self.beta).enumerate() {
            if a.len() != b.len() || a.iter().chain(b).any(|&x| !pos(x)) {
                return Err(Error::Config(format!("field {f}: Dirichlet hyperparameters must be positive")));
            }
        }
        Ok(())
    }

    fn check_shape(&self, data: &ComparisonData) -> Result<()> {
        self.validate()?;
        let levels = data.level_counts();
        if self.alpha.len() != levels.len() || self.alpha.iter().zip(&levels).any(|(a, &k)| a.len() != k) {
            return Err(Error::Config("prior does not match the comparison fields".into()));
        }
        Ok(())
    }
}

fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Log of the multivariate beta function `prod Γ(x_l) / Γ(sum x_l)`.
fn ln_multi_beta(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut acc) = (0.0, 0.0);
    for x in xs {
        s += x;
        acc += ln_gamma(x);
    }
    acc - ln_gamma(s)
}

/// Number of bipartite matchings between `n1` and `n2` records, or `None`
/// on overflow.
pub fn count_matchings(n1: usize, n2: usize) -> Option<u128> {
    let mut total: u128 = 0;
    // C(n2, k) * n1! / (n1 - k)!
    let mut binom: u128 = 1;
    let mut falling: u128 = 1;
    for k in 0..=n1.min(n2) {
        if k > 0 {
            binom = binom.checked_mul((n2 - k + 1) as u128)? / k as u128;
            falling = falling.checked_mul((n1 - k + 1) as u128)?;
        }
        total = total.checked_add(binom.checked_mul(falling)?)?;
    }
    Some(total)
}

/// Log prior probability of a matching labeling. The beta prior is stated
/// with the larger file as file 1; when `n1 < n2` it is evaluated on the
/// transposed matching.
pub fn prior_log_pmf<T: Real>(z: &MatchingLabeling, cfg: &PriorConfig<T>) -> T {
    let (large, small) = (z.n1().max(z.n2()), z.n1().min(z.n2()));
    let n12 = z.overlap_size();
    let lp = match cfg.matching_prior {
        MatchingPrior::Beta => {
            let (a, b) = (cfg.alpha_pi.as_f64(), cfg.beta_pi.as_f64());
            // ln[(n1 - n12)! / n1!]
            let perm = ln_gamma((large - n12 + 1) as f64) - ln_gamma((large + 1) as f64);
            perm + ln_beta(n12 as f64 + a, (small - n12) as f64 + b) - ln_beta(a, b)
        }
        MatchingPrior::Flat => match count_matchings(large, small) {
            Some(c) => -(c as f64).ln(),
            None => f64::NEG_INFINITY,
        },
    };
    T::lit(lp)
}

/// Match (`a`) and non-match (`b`) counts of every observed level, given a
/// labeling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SufficientStats {
    pub a: Vec<Vec<u64>>,
    pub b: Vec<Vec<u64>>,
}

impl SufficientStats {
    pub fn compute(data: &ComparisonData, z: &MatchingLabeling) -> Result<Self> {
        let mut matched = vec![0u64; data.patterns().len()];
        for (j, link) in z.links().iter().enumerate() {
            if let Some(i) = *link {
                let k = data
                    .pattern_of(i, j)
                    .ok_or_else(|| Error::Data(format!("linked pair ({}, {}) is not a candidate", i + 1, j + 1)))?;
                matched[k as usize] += 1;
            }
        }
        Ok(Self::from_pattern_counts(data, &matched, &data.pattern_counts()))
    }

    fn from_pattern_counts(data: &ComparisonData, matched: &[u64], totals: &[u64]) -> Self {
        let levels = data.level_counts();
        let mut a: Vec<Vec<u64>> = levels.iter().map(|&k| vec![0; k]).collect();
        let mut b = a.clone();
        for (k, g) in data.patterns().iter().enumerate() {
            if totals[k] == 0 {
                continue;
            }
            for (f, l) in g.observed_levels() {
                a[f][l] += matched[k];
                b[f][l] += totals[k] - matched[k];
            }
        }
        Self { a, b }
    }
}

fn sample_dirichlet<T: Real, R: Rng + ?Sized>(shape: impl Iterator<Item = f64>, rng: &mut R) -> Vec<T> {
    let draws: Vec<f64> = shape
        .map(|s| Gamma::new(s, 1.0).expect("positive Dirichlet parameter").sample(rng))
        .collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 && total.is_finite() {
        draws.iter().map(|&x| T::lit(x / total)).collect()
    } else {
        vec![T::one() / T::count(draws.len()); draws.len()]
    }
}

fn sample_field<T: Real, R: Rng + ?Sized>(
    f: usize,
    stats: &SufficientStats,
    cfg: &PriorConfig<T>,
    rng: &mut R,
) -> (Vec<T>, Vec<T>) {
    let m = sample_dirichlet(stats.a[f].iter().zip(&cfg.alpha[f]).map(|(&c, &h)| c as f64 + h.as_f64()), rng);
    let u = sample_dirichlet(stats.b[f].iter().zip(&cfg.beta[f]).map(|(&c, &h)| c as f64 + h.as_f64()), rng);
    (m, u)
}

/// Draw `m_f ~ Dirichlet(a_f + alpha_f)` and `u_f ~ Dirichlet(b_f + beta_f)`
/// for every field.
pub fn sample_phi<T: Real, R: Rng + ?Sized>(stats: &SufficientStats, cfg: &PriorConfig<T>, rng: &mut R) -> PhiParams<T> {
    let (m, u) = (0..stats.a.len()).map(|f| sample_field(f, stats, cfg, rng)).unzip();
    PhiParams { m, u, p: None }
}

/// Current matching and the reverse map used while sweeping.
#[derive(Debug, Clone)]
pub struct LabelState {
    links: Vec<Option<usize>>,
    owner: Vec<Option<usize>>,
    n12: usize,
}

impl LabelState {
    pub fn new(z: &MatchingLabeling) -> Self {
        let mut owner = vec![None; z.n1()];
        for (j, l) in z.links().iter().enumerate() {
            if let Some(i) = *l {
                owner[i] = Some(j);
            }
        }
        Self { links: z.links().to_vec(), owner, n12: z.overlap_size() }
    }

    pub fn to_labeling(&self) -> MatchingLabeling {
        MatchingLabeling::from_links(self.owner.len(), self.links.clone()).expect("state is one-to-one")
    }

    fn set(&mut self, j: usize, link: Option<usize>) {
        if let Some(old) = self.links[j] {
            self.owner[old] = None;
            self.n12 -= 1;
        }
        if let Some(i) = link {
            debug_assert!(self.owner[i].is_none());
            self.owner[i] = Some(j);
            self.n12 += 1;
        }
        self.links[j] = link;
    }
}

/// Unnormalized log-masses of the full conditional of `Z_j`: one entry per
/// free candidate `i` (weight `w_ij`) and the mass of leaving `j` unmatched.
/// File-1 records linked to some other file-2 record are excluded.
pub fn label_log_masses<T: Real>(
    j: usize,
    state: &LabelState,
    candidates: &[(u32, u32)],
    pattern_w: &[T],
    cfg: &PriorConfig<T>,
) -> (Vec<(usize, T)>, T) {
    let n1 = state.owner.len();
    let n2 = state.links.len();
    let n12 = state.n12 - usize::from(state.links[j].is_some());
    let free: Vec<(usize, T)> = candidates
        .iter()
        .filter(|&&(i, _)| state.owner[i as usize].is_none_or(|o| o == j))
        .map(|&(i, k)| (i as usize, pattern_w[k as usize]))
        .collect();
    let unmatched = match cfg.matching_prior {
        MatchingPrior::Flat => T::zero(),
        MatchingPrior::Beta => {
            if n12 >= n1 {
                T::neg_infinity()
            } else {
                T::count(n1 - n12).ln() + (T::count(n2 - n12 - 1) + cfg.beta_pi).ln() - (T::count(n12) + cfg.alpha_pi).ln()
            }
        }
    };
    (free, unmatched)
}

/// Draw a new label for `j` from its full conditional by Gumbel-max over the
/// log-masses. Returns the linked file-1 record or `None`.
pub fn sample_label<T: Real, R: Rng + ?Sized>(
    j: usize,
    state: &LabelState,
    candidates: &[(u32, u32)],
    pattern_w: &[T],
    cfg: &PriorConfig<T>,
    rng: &mut R,
) -> Option<usize> {
    let (free, unmatched) = label_log_masses(j, state, candidates, pattern_w, cfg);
    if free.is_empty() {
        return None;
    }
    let gumbel = |rng: &mut R| -> f64 {
        let e: f64 = Exp1.sample(rng);
        -e.ln()
    };
    let mut best: Option<usize> = None;
    let mut best_key = if unmatched == T::neg_infinity() { f64::NEG_INFINITY } else { unmatched.as_f64() + gumbel(rng) };
    for (i, w) in free {
        let key = w.as_f64() + gumbel(rng);
        if key > best_key || (best.is_none() && best_key == f64::NEG_INFINITY) {
            best_key = key;
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GibbsOptions {
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Visit file-2 records in a fresh random order every sweep.
    pub random_scan: bool,
    /// Keep every retained labeling (needed for per-pair convergence checks).
    pub keep_samples: bool,
}

impl GibbsOptions {
    pub fn new(iterations: usize, burn_in: usize, seed: u64) -> Self {
        Self { iterations, burn_in, seed, random_scan: false, keep_samples: true }
    }
}

/// The expanded Gibbs sampler over `(Z, Φ)`. Each step draws `Φ` given the
/// current matching, then every `Z_j` in turn.
///
/// Random streams: stream 0 drives the labels, stream `f + 1` the Dirichlet
/// draws of field `f`, so fields never perturb each other's draws.
pub struct GibbsChain<'a, T: Real = f64> {
    data: &'a ComparisonData,
    cfg: PriorConfig<T>,
    candidates: Vec<Vec<(u32, u32)>>,
    totals: Vec<u64>,
    matched: Vec<u64>,
    state: LabelState,
    label_rng: ChaCha8Rng,
    field_rngs: Vec<ChaCha8Rng>,
    random_scan: bool,
    order: Vec<usize>,
    phi: Option<PhiParams<T>>,
}

impl<'a, T: Real> GibbsChain<'a, T> {
    /// Chain started at the empty matching.
    pub fn new(data: &'a ComparisonData, cfg: &PriorConfig<T>, seed: u64) -> Result<Self> {
        cfg.check_shape(data)?;
        if cfg.matching_prior == MatchingPrior::Beta && data.n1() < data.n2() {
            return Err(Error::Config("the sampler needs file 1 to be the larger file; swap the files".into()));
        }
        let stream = |k: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(k);
            r
        };
        Ok(Self {
            data,
            cfg: cfg.clone(),
            candidates: data.by_file2(),
            totals: data.pattern_counts(),
            matched: vec![0; data.patterns().len()],
            state: LabelState::new(&MatchingLabeling::empty(data.n1(), data.n2())),
            label_rng: stream(0),
            field_rngs: (0..data.num_fields()).map(|f| stream(f as u64 + 1)).collect(),
            random_scan: false,
            order: (0..data.n2()).collect(),
            phi: None,
        })
    }

    pub fn random_scan(mut self, on: bool) -> Self {
        self.random_scan = on;
        self
    }

    pub fn set_state(&mut self, z: &MatchingLabeling) -> Result<()> {
        if z.n1() != self.data.n1() || z.n2() != self.data.n2() {
            return Err(Error::InvalidLabeling("labeling does not match the comparison data".into()));
        }
        let mut matched = vec![0; self.data.patterns().len()];
        for (j, l) in z.links().iter().enumerate() {
            if let Some(i) = *l {
                let k = self
                    .data
                    .pattern_of(i, j)
                    .ok_or_else(|| Error::InvalidLabeling(format!("pair ({}, {}) is not a candidate", i + 1, j + 1)))?;
                matched[k as usize] += 1;
            }
        }
        self.matched = matched;
        self.state = LabelState::new(z);
        Ok(())
    }

    pub fn labeling(&self) -> MatchingLabeling {
        self.state.to_labeling()
    }

    pub fn overlap_size(&self) -> usize {
        self.state.n12
    }

    /// `Φ` drawn in the most recent step.
    pub fn phi(&self) -> Option<&PhiParams<T>> {
        self.phi.as_ref()
    }

    pub fn sufficient_stats(&self) -> SufficientStats {
        SufficientStats::from_pattern_counts(self.data, &self.matched, &self.totals)
    }

    pub fn step(&mut self) {
        let stats = self.sufficient_stats();
        let (m, u) = self
            .field_rngs
            .iter_mut()
            .enumerate()
            .map(|(f, rng)| sample_field(f, &stats, &self.cfg, rng))
            .unzip();
        let phi = PhiParams { m, u, p: None };
        let ratios = phi.log_ratios();
        let pattern_w: Vec<T> = self.data.patterns().iter().map(|g| weight_from_ratios(&ratios, g)).collect();
        self.phi = Some(phi);

        if self.random_scan {
            self.order.shuffle(&mut self.label_rng);
        }
        for idx in 0..self.order.len() {
            let j = self.order[idx];
            let cands = &self.candidates[j];
            let new = sample_label(j, &self.state, cands, &pattern_w, &self.cfg, &mut self.label_rng);
            let old = self.state.links[j];
            if new != old {
                if let Some(i) = old {
                    let k = cands[cands.binary_search_by_key(&(i as u32), |c| c.0).expect("candidate")].1;
                    self.matched[k as usize] -= 1;
                }
                if let Some(i) = new {
                    let k = cands[cands.binary_search_by_key(&(i as u32), |c| c.0).expect("candidate")].1;
                    self.matched[k as usize] += 1;
                }
                self.state.set(j, new);
            }
        }
    }
}

/// Settings and provenance of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainMeta {
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    pub retained: usize,
    pub random_scan: bool,
    pub matching_prior: MatchingPrior,
    pub alpha_pi: f64,
    pub beta_pi: f64,
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
}

/// Post-burn-in output of a Gibbs run.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    n1: usize,
    n2: usize,
    /// Retained labelings; `u32::MAX` marks an unmatched file-2 record.
    samples: Vec<Vec<u32>>,
    /// `(j, i) -> count` over retained samples.
    link_counts: HashMap<(u32, u32), u32>,
    unmatched_counts: Vec<u32>,
    overlap: Vec<usize>,
    pub meta: ChainMeta,
}

pub(crate) const UNMATCHED: u32 = u32::MAX;

impl PosteriorSummary {
    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn retained(&self) -> usize {
        self.overlap.len()
    }

    /// Overlap size `n12` of every retained sample.
    pub fn overlap_samples(&self) -> &[usize] {
        &self.overlap
    }

    /// Retained labelings (empty unless `keep_samples` was set).
    pub fn samples(&self) -> impl Iterator<Item = MatchingLabeling> + '_ {
        self.samples.iter().map(|s| {
            let links = s.iter().map(|&i| (i != UNMATCHED).then_some(i as usize)).collect();
            MatchingLabeling::from_links(self.n1, links).expect("valid sample")
        })
    }

    /// Chain of the indicator `Z_j = i` over retained samples.
    pub fn status_chain(&self, i: usize, j: usize) -> Vec<f64> {
        self.samples.iter().map(|s| f64::from(u8::from(s[j] == i as u32))).collect()
    }

    pub fn prob_link(&self, i: usize, j: usize) -> f64 {
        let c = self.link_counts.get(&(j as u32, i as u32)).copied().unwrap_or(0);
        f64::from(c) / self.retained() as f64
    }

    pub fn prob_unmatched(&self, j: usize) -> f64 {
        f64::from(self.unmatched_counts[j]) / self.retained() as f64
    }

    /// `(i, j, P(Z_j = i))` for every pair ever sampled as a match, sorted
    /// by `(j, i)`.
    pub fn pairwise(&self) -> Vec<(usize, usize, f64)> {
        let n = self.retained() as f64;
        let mut out: Vec<(usize, usize, f64)> = self
            .link_counts
            .iter()
            .map(|(&(j, i), &c)| (i as usize, j as usize, f64::from(c) / n))
            .collect();
        out.sort_by_key(|&(i, j, _)| (j, i));
        out
    }
}

/// Run the Gibbs sampler from the empty matching.
pub fn run_gibbs<T: Real>(data: &ComparisonData, cfg: &PriorConfig<T>, opts: GibbsOptions) -> Result<PosteriorSummary> {
    if opts.iterations <= opts.burn_in {
        return Err(Error::Config(format!(
            "iterations ({}) must exceed burn-in ({})",
            opts.iterations, opts.burn_in
        )));
    }
    let mut chain = GibbsChain::new(data, cfg, opts.seed)?.random_scan(opts.random_scan);
    let (n1, n2) = (data.n1(), data.n2());
    let retained = opts.iterations - opts.burn_in;
    let mut samples = Vec::new();
    let mut link_counts: HashMap<(u32, u32), u32> = HashMap::new();
    let mut unmatched_counts = vec![0u32; n2];
    let mut overlap = Vec::with_capacity(retained);
    for t in 0..opts.iterations {
        chain.step();
        if t < opts.burn_in {
            continue;
        }
        let links = &chain.state.links;
        for (j, l) in links.iter().enumerate() {
            match l {
                Some(i) => *link_counts.entry((j as u32, *i as u32)).or_insert(0) += 1,
                None => unmatched_counts[j] += 1,
            }
        }
        overlap.push(chain.state.n12);
        if opts.keep_samples {
            samples.push(links.iter().map(|l| l.map_or(UNMATCHED, |i| i as u32)).collect());
        }
    }
    let f64s = |v: &Vec<Vec<T>>| v.iter().map(|x| x.iter().map(|y| y.as_f64()).collect()).collect();
    Ok(PosteriorSummary {
        n1,
        n2,
        samples,
        link_counts,
        unmatched_counts,
        overlap,
        meta: ChainMeta {
            seed: opts.seed,
            iterations: opts.iterations,
            burn_in: opts.burn_in,
            retained,
            random_scan: opts.random_scan,
            matching_prior: cfg.matching_prior,
            alpha_pi: cfg.alpha_pi.as_f64(),
            beta_pi: cfg.beta_pi.as_f64(),
            alpha: f64s(&cfg.alpha),
            beta: f64s(&cfg.beta),
        },
    })
}

/// Enumeration guard for [`exact_posterior`].
pub const MAX_EXACT_MATCHINGS: u128 = 1_000_000;

/// All bipartite matchings between `n1` and `n2` records, in lexicographic
/// order of their labels.
pub fn enumerate_matchings(n1: usize, n2: usize, limit: u128) -> Result<Vec<MatchingLabeling>> {
    let count = count_matchings(n1, n2).unwrap_or(u128::MAX);
    if count > limit {
        return Err(Error::TooLarge(count, limit));
    }
    fn rec(j: usize, n1: usize, links: &mut Vec<Option<usize>>, used: &mut [bool], out: &mut Vec<MatchingLabeling>) {
        if j == links.len() {
            out.push(MatchingLabeling::from_links(n1, links.clone()).expect("valid by construction"));
            return;
        }
        for i in 0..n1 {
            if !used[i] {
                used[i] = true;
                links[j] = Some(i);
                rec(j + 1, n1, links, used, out);
                used[i] = false;
            }
        }
        links[j] = None;
        rec(j + 1, n1, links, used, out);
    }
    let mut out = Vec::with_capacity(count as usize);
    rec(0, n1, &mut vec![None; n2], &mut vec![false; n1], &mut out);
    Ok(out)
}

/// Exact posterior over bipartite matchings with `Φ` integrated out.
#[derive(Debug, Clone)]
pub struct ExactPosterior {
    pub labelings: Vec<MatchingLabeling>,
    pub probs: Vec<f64>,
}

impl ExactPosterior {
    pub fn prob_link(&self, i: usize, j: usize) -> f64 {
        self.labelings.iter().zip(&self.probs).filter(|(z, _)| z.link(j) == Some(i)).map(|(_, p)| p).sum()
    }

    pub fn prob_unmatched(&self, j: usize) -> f64 {
        self.labelings.iter().zip(&self.probs).filter(|(z, _)| z.link(j).is_none()).map(|(_, p)| p).sum()
    }

    pub fn prob_of(&self, z: &MatchingLabeling) -> f64 {
        self.labelings.iter().position(|x| x == z).map_or(0.0, |k| self.probs[k])
    }
}

/// Exact posterior by enumeration, `P(Z | γ) ∝ P(Z) ∏_f B(α_f + a_f(Z)) / B(α_f)
/// · B(β_f + b_f(Z)) / B(β_f)`. Refuses instances with more than
/// [`MAX_EXACT_MATCHINGS`] matchings.
pub fn exact_posterior<T: Real>(data: &ComparisonData, cfg: &PriorConfig<T>) -> Result<ExactPosterior> {
    cfg.check_shape(data)?;
    let labelings = enumerate_matchings(data.n1(), data.n2(), MAX_EXACT_MATCHINGS)?;
    let alpha: Vec<Vec<f64>> = cfg.alpha.iter().map(|v| v.iter().map(|x| x.as_f64()).collect()).collect();
    let beta: Vec<Vec<f64>> = cfg.beta.iter().map(|v| v.iter().map(|x| x.as_f64()).collect()).collect();
    let base: f64 = alpha
        .iter()
        .chain(&beta)
        .map(|h| ln_multi_beta(h.iter().copied()))
        .sum();
    let log_post = labelings
        .iter()
        .map(|z| {
            let stats = SufficientStats::compute(data, z)?;
            let mut lp = prior_log_pmf(z, cfg).as_f64() - base;
            for f in 0..alpha.len() {
                lp += ln_multi_beta(stats.a[f].iter().zip(&alpha[f]).map(|(&c, &h)| c as f64 + h));
                lp += ln_multi_beta(stats.b[f].iter().zip(&beta[f]).map(|(&c, &h)| c as f64 + h));
            }
            Ok(lp)
        })
        .collect::<Result<Vec<f64>>>()?;
    let norm = log_sum_exp(&log_post);
    let probs = log_post.iter().map(|lp| (lp - norm).exp()).collect();
    Ok(ExactPosterior { labelings, probs })
}
