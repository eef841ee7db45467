#![allow(dead_code)]

use betalink::comparison::{ComparisonData, FieldLevels};
use rand::Rng;

/// Comparison data over every pair, levels uniform, each comparison missing
/// with probability `missing`.
pub fn random_data<R: Rng>(n1: usize, n2: usize, levels: &[usize], missing: f64, rng: &mut R) -> ComparisonData {
    let fields = levels.iter().enumerate().map(|(f, &k)| FieldLevels { name: format!("f{f}"), levels: k }).collect();
    let mut pairs = Vec::new();
    for i in 0..n1 {
        for j in 0..n2 {
            let v = levels
                .iter()
                .map(|&k| (!rng.random_bool(missing)).then(|| rng.random_range(0..k) as u8))
                .collect();
            pairs.push((i, j, v));
        }
    }
    ComparisonData::from_pairs(n1, n2, fields, pairs).unwrap()
}

/// Comparison data where true matches (`truth[j] = Some(i)`) tend to agree
/// on level 0.
pub fn planted_data<R: Rng>(n1: usize, truth: &[Option<usize>], levels: &[usize], agree: f64, rng: &mut R) -> ComparisonData {
    let fields = levels.iter().enumerate().map(|(f, &k)| FieldLevels { name: format!("f{f}"), levels: k }).collect();
    let mut pairs = Vec::new();
    for i in 0..n1 {
        for (j, t) in truth.iter().enumerate() {
            let v = levels
                .iter()
                .map(|&k| {
                    let level = if *t == Some(i) && rng.random_bool(agree) { 0 } else { rng.random_range(0..k) };
                    Some(level as u8)
                })
                .collect();
            pairs.push((i, j, v));
        }
    }
    ComparisonData::from_pairs(n1, truth.len(), fields, pairs).unwrap()
}

/// Every bipartite matching as `links[j] = Some(i)`.
pub fn all_matchings(n1: usize, n2: usize) -> Vec<Vec<Option<usize>>> {
    let mut out = vec![vec![]];
    for _ in 0..n2 {
        let mut next = Vec::new();
        for partial in out {
            next.push([partial.clone(), vec![None]].concat());
            for i in 0..n1 {
                if !partial.contains(&Some(i)) {
                    next.push([partial.clone(), vec![Some(i)]].concat());
                }
            }
        }
        out = next;
    }
    out
}

fn ln_fact(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// ln Γ(n) for a positive integer.
fn ln_gamma_int(n: u64) -> f64 {
    ln_fact(n - 1)
}

fn ln_beta_int(xs: &[u64]) -> f64 {
    xs.iter().map(|&x| ln_gamma_int(x)).sum::<f64>() - ln_gamma_int(xs.iter().sum())
}

/// Prior probability of a matching with `n12` links under integer
/// hyperparameters `(a, b)`.
pub fn oracle_prior(n1: usize, n2: usize, n12: usize, a: u64, b: u64) -> f64 {
    let lp = ln_fact((n1 - n12) as u64) - ln_fact(n1 as u64) + ln_beta_int(&[n12 as u64 + a, (n2 - n12) as u64 + b])
        - ln_beta_int(&[a, b]);
    lp.exp()
}

/// Posterior over all matchings with Φ integrated out, computed from the
/// model directly. All Dirichlet hyperparameters equal `h`.
pub fn oracle_posterior(data: &ComparisonData, a: u64, b: u64, h: u64) -> Vec<(Vec<Option<usize>>, f64)> {
    let (n1, n2) = (data.n1(), data.n2());
    let levels = data.level_counts();
    let mut out = Vec::new();
    for links in all_matchings(n1, n2) {
        let mut am: Vec<Vec<u64>> = levels.iter().map(|&k| vec![h; k]).collect();
        let mut bu = am.clone();
        for pair in data.pairs() {
            let matched = links[pair.j as usize] == Some(pair.i as usize);
            let v = data.vector(pair);
            for f in 0..levels.len() {
                if let Some(l) = v.level(f) {
                    if matched {
                        am[f][l as usize] += 1;
                    } else {
                        bu[f][l as usize] += 1;
                    }
                }
            }
        }
        let n12 = links.iter().flatten().count();
        let mut lp = oracle_prior(n1, n2, n12, a, b).ln();
        for f in 0..levels.len() {
            let prior = ln_beta_int(&vec![h; levels[f]]);
            lp += ln_beta_int(&am[f]) - prior + ln_beta_int(&bu[f]) - prior;
        }
        out.push((links, lp));
    }
    let max = out.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = out.iter().map(|x| (x.1 - max).exp()).sum();
    out.into_iter().map(|(l, lp)| (l, (lp - max).exp() / total)).collect()
}

/// `P(Z_j = i)` from an enumerated posterior; `i = None` for unmatched.
pub fn marginal(post: &[(Vec<Option<usize>>, f64)], i: Option<usize>, j: usize) -> f64 {
    post.iter().filter(|(l, _)| l[j] == i).map(|x| x.1).sum()
}

/// Marginals of a random distribution over all matchings, sharp or diffuse
/// depending on `scale`.
pub fn random_posterior<R: Rng>(n1: usize, n2: usize, scale: f64, rng: &mut R) -> Vec<(Vec<Option<usize>>, f64)> {
    let all = all_matchings(n1, n2);
    let w: Vec<f64> = all.iter().map(|_| (scale * rng.random::<f64>()).exp()).collect();
    let total: f64 = w.iter().sum();
    all.into_iter().zip(w).map(|(l, x)| (l, x / total)).collect()
}

/// `(links[j], unmatched)` tables ready for `Marginals::new`.
pub fn marginal_tables(post: &[(Vec<Option<usize>>, f64)], n1: usize, n2: usize) -> (Vec<Vec<(usize, f64)>>, Vec<f64>) {
    let links = (0..n2).map(|j| (0..n1).map(|i| (i, marginal(post, Some(i), j))).collect()).collect();
    let unmatched = (0..n2).map(|j| marginal(post, None, j)).collect();
    (links, unmatched)
}

/// Decision of one record in the brute-force oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Choice {
    Link(usize),
    NonLink,
    Reject,
}

/// Loss parameters `(λ10, λ01, λ11', λR)`; `λR = None` disables rejection.
pub type Losses = (f64, f64, f64, Option<f64>);

pub fn choice_loss(p_link: &[f64], p0: f64, c: Choice, l: Losses) -> f64 {
    match c {
        Choice::Reject => l.3.expect("rejection enabled"),
        Choice::NonLink => l.0 * (1.0 - p0),
        Choice::Link(i) => l.1 * p0 + l.2 * (1.0 - p0 - p_link[i]),
    }
}

/// Minimum total expected loss over every decision vector with one-to-one
/// links, by exhaustive search.
pub fn brute_force_min(p_link: &[Vec<f64>], p0: &[f64], l: Losses) -> f64 {
    let n1 = p_link.first().map_or(0, |r| r.len());
    fn rec(j: usize, n1: usize, p_link: &[Vec<f64>], p0: &[f64], l: Losses, used: &mut Vec<bool>) -> f64 {
        if j == p0.len() {
            return 0.0;
        }
        let mut options = vec![Choice::NonLink];
        if l.3.is_some() {
            options.push(Choice::Reject);
        }
        let mut best = f64::INFINITY;
        for c in options {
            best = best.min(choice_loss(&p_link[j], p0[j], c, l) + rec(j + 1, n1, p_link, p0, l, used));
        }
        for i in 0..n1 {
            if !used[i] {
                used[i] = true;
                let here = choice_loss(&p_link[j], p0[j], Choice::Link(i), l);
                best = best.min(here + rec(j + 1, n1, p_link, p0, l, used));
                used[i] = false;
            }
        }
        best
    }
    rec(0, n1, p_link, p0, l, &mut vec![false; n1])
}

pub fn full_regime_losses<R: Rng>(rng: &mut R) -> Losses {
    let l01 = rng.random_range(0.5..3.0);
    let l10 = rng.random_range(0.1..=l01);
    let l11 = l10 + l01 + rng.random_range(0.0..3.0);
    (l10, l01, l11, None)
}

pub fn partial_regime_losses<R: Rng>(rng: &mut R) -> Losses {
    let r = rng.random_range(0.05..0.5);
    let l01 = 2.0 * r + rng.random_range(0.0..3.0);
    let l10 = 2.0 * r + rng.random_range(0.0..3.0);
    let l11 = l01 + rng.random_range(0.0..3.0);
    (l10, l01, l11, Some(r))
}
