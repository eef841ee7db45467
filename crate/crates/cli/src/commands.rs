use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use betalink::beta_rl::{run_gibbs, GibbsOptions, MatchingPrior, PriorConfig};
use betalink::comparison::{build_comparison_data, ComparisonData};
use betalink::estimators::{bayes_estimate_general, bayes_full, bayes_partial, LinkageEstimate, Marginals};
use betalink::evaluation::{geweke_z, overlap_summary_of, score_full, score_partial};
use betalink::fs_mixture::{
    em_fit, fs_decision_rule, matching_objective, mle_matching, pattern_weights, EmFit, EmOptions, FsDecision,
    FsRuleConfig,
};
use betalink::io::{self, LinkageConfig};
use betalink::review::{build_tasks, merge_decisions, DecisionLog};
use betalink::synth::{self, GeneratorConfig};
use betalink::{DataFile, FilePair};
use serde::Serialize;
use serde_json::json;

use crate::server::ReviewService;
use crate::{
    CompareArgs, EmArgs, EstimateArgs, EstimatorKind, EvaluateArgs, FsruleArgs, GibbsArgs, MergeArgs, ParamsArgs,
    ReviewArgs, SimulateArgs,
};

/// Provenance written next to every stage's outputs as `<stage>.meta.json`.
#[derive(Debug, Serialize)]
struct StageMeta<'a> {
    stage: &'a str,
    version: &'a str,
    seed: Option<u64>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    elapsed_ms: u128,
    details: serde_json::Value,
}

struct Stage {
    name: &'static str,
    out: PathBuf,
    started: Instant,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

impl Stage {
    fn start(name: &'static str, out: &Path, inputs: &[&Path]) -> Result<Self> {
        fs::create_dir_all(out).with_context(|| format!("creating output directory {}", out.display()))?;
        Ok(Self {
            name,
            out: out.to_path_buf(),
            started: Instant::now(),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            outputs: Vec::new(),
        })
    }

    fn write(&mut self, file: &str, body: impl FnOnce(&mut BufWriter<File>) -> betalink::Result<()>) -> Result<()> {
        let path = self.out.join(file);
        let mut w = BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?);
        body(&mut w).with_context(|| format!("writing {}", path.display()))?;
        w.flush().with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(path.display().to_string());
        Ok(())
    }

    fn finish(self, seed: Option<u64>, details: serde_json::Value) -> Result<()> {
        let meta = StageMeta {
            stage: self.name,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            inputs: self.inputs,
            outputs: self.outputs,
            elapsed_ms: self.started.elapsed().as_millis(),
            details,
        };
        let path = self.out.join(format!("{}.meta.json", self.name));
        let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        io::write_json(f, &meta)?;
        Ok(())
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_comparisons(path: &Path) -> Result<ComparisonData> {
    io::parse_comparisons(&read(path)?).with_context(|| format!("parsing comparison data {}", path.display()))
}

fn load_estimate(path: &Path) -> Result<LinkageEstimate> {
    io::parse_estimate(&read(path)?).with_context(|| format!("parsing estimate {}", path.display()))
}

fn load_fit(path: &Path) -> Result<EmFit> {
    serde_json::from_str(&read(path)?).with_context(|| format!("parsing parameters {}", path.display()))
}

fn load_config(path: &Path) -> Result<LinkageConfig> {
    LinkageConfig::load(path).with_context(|| format!("loading configuration {}", path.display()))
}

/// Both datafiles, oriented so that file 1 is the larger.
fn load_files(inputs: &[PathBuf], cfg: &LinkageConfig) -> Result<FilePair> {
    let [a, b] = inputs else { bail!("expected two datafiles, got {}", inputs.len()) };
    let load = |p: &PathBuf| -> Result<DataFile> {
        io::read_datafile(p, cfg).with_context(|| format!("reading datafile {}", p.display()))
    };
    Ok(FilePair::new(load(a)?, load(b)?))
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let cfg = GeneratorConfig::new(a.records, a.overlap, a.errors, a.seed);
    let mut stage = Stage::start("simulate", &a.out, &[])?;
    let pair = synth::generate_pair(&cfg)?;
    let link_cfg = synth::linkage_config();
    let id = link_cfg.id_column.as_deref();
    stage.write("file1.csv", |w| io::write_datafile(w, &pair.file1, id, &link_cfg.missing_token))?;
    stage.write("file2.csv", |w| io::write_datafile(w, &pair.file2, id, &link_cfg.missing_token))?;
    stage.write("truth.csv", |w| io::write_truth(w, &pair.truth))?;
    let toml = toml::to_string(&link_cfg).context("serializing configuration")?;
    stage.write("config.toml", |w| Ok(w.write_all(toml.as_bytes())?))?;
    stage.finish(Some(a.seed), json!({ "generator": cfg, "true_matches": pair.truth.overlap_size() }))
}

pub fn compare(a: &CompareArgs) -> Result<()> {
    let inputs: Vec<&Path> = a.input.iter().map(PathBuf::as_path).chain([a.config.as_path()]).collect();
    let mut stage = Stage::start("compare", &a.out, &inputs)?;
    let cfg = load_config(&a.config)?;
    let files = load_files(&a.input, &cfg)?;
    let comparators = cfg.comparators()?;
    let data = build_comparison_data(&files.file1, &files.file2, &comparators, cfg.blocking.as_ref())?;
    stage.write("comparisons.csv", |w| io::write_comparisons(w, &data))?;
    stage.finish(
        None,
        json!({
            "n1": data.n1(),
            "n2": data.n2(),
            "swapped": files.swapped,
            "candidate_pairs": data.len(),
            "patterns": data.patterns().len(),
        }),
    )
}

pub fn em(a: &EmArgs) -> Result<()> {
    let mut stage = Stage::start("em", &a.out, &[&a.input])?;
    let data = load_comparisons(&a.input)?;
    let fit = em_fit::<f64>(&data, None, EmOptions { max_iterations: a.iterations, ..EmOptions::default() })?;
    if fit.degenerate {
        eprintln!("warning: all comparison vectors are identical; the mixture is not identifiable");
    }
    let w = pattern_weights(&fit.phi, &data)?;
    stage.write("em.json", |f| io::write_json(f, &fit))?;
    stage.write("weights.csv", |f| io::write_weights(f, &data, &w))?;
    stage.finish(
        None,
        json!({
            "iterations": fit.iterations,
            "converged": fit.converged,
            "degenerate": fit.degenerate,
            "loglik": fit.loglik.last(),
            "p": fit.phi.p,
        }),
    )
}

pub fn mle(a: &ParamsArgs) -> Result<()> {
    let mut stage = Stage::start("mle", &a.out, &[&a.input, &a.params])?;
    let data = load_comparisons(&a.input)?;
    let fit = load_fit(&a.params)?;
    let w = pattern_weights(&fit.phi, &data)?;
    let z = mle_matching(&data, &w);
    let est = LinkageEstimate::from_labeling(&z, "mle");
    stage.write("mle.csv", |f| io::write_estimate(f, &est))?;
    stage.finish(None, json!({ "links": z.overlap_size(), "objective": matching_objective(&data, &w, &z) }))
}

pub fn fsrule(a: &FsruleArgs) -> Result<()> {
    let p = &a.params;
    let mut stage = Stage::start("fsrule", &p.out, &[&p.input, &p.params])?;
    let data = load_comparisons(&p.input)?;
    let fit = load_fit(&p.params)?;
    let w = pattern_weights(&fit.phi, &data)?;
    let z = mle_matching(&data, &w);
    let out = fs_decision_rule(&fit.phi, &data, &z, FsRuleConfig::new(a.mu, a.lambda)?)?;
    stage.write("fsrule.csv", |f| {
        let mut wtr = csv::Writer::from_writer(f);
        wtr.write_record(["j", "i", "decision", "weight", "observed_mask"])?;
        for d in &out.decisions {
            let decision = match d.decision {
                FsDecision::Link => "link",
                FsDecision::Review => "review",
                FsDecision::NonLink => "non-link",
            };
            wtr.write_record([
                (d.j + 1).to_string(),
                d.i.map_or(String::new(), |i| (i + 1).to_string()),
                decision.to_string(),
                d.weight.map_or(String::new(), |x| x.to_string()),
                d.observed_mask.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    })?;
    let count = |k| out.decisions.iter().filter(|d| d.decision == k).count();
    stage.finish(
        None,
        json!({
            "mu": a.mu,
            "lambda": a.lambda,
            "links": count(FsDecision::Link),
            "reviews": count(FsDecision::Review),
            "non_links": count(FsDecision::NonLink),
            "thresholds": out.thresholds,
        }),
    )
}

pub fn gibbs(a: &GibbsArgs) -> Result<()> {
    let mut inputs = vec![a.input.as_path()];
    inputs.extend(a.config.as_deref());
    let mut stage = Stage::start("gibbs", &a.out, &inputs)?;
    let data = load_comparisons(&a.input)?;
    let mut prior = PriorConfig::<f64>::flat(&data.level_counts());
    if let Some(path) = &a.config {
        if let Some(p) = load_config(path)?.prior {
            prior = prior.with_pi(p.alpha_pi, p.beta_pi);
        }
    }
    if a.flat_matching_prior {
        prior = prior.with_matching_prior(MatchingPrior::Flat);
    }
    let opts = GibbsOptions {
        iterations: a.iterations,
        burn_in: a.burn_in,
        seed: a.seed,
        random_scan: a.random_scan,
        keep_samples: false,
    };
    let post = run_gibbs(&data, &prior, opts)?;
    stage.write("posterior.csv", |f| io::write_posterior(f, &post))?;
    stage.write("overlap.csv", |f| io::write_overlap(f, post.overlap_samples()))?;
    let n12: Vec<f64> = post.overlap_samples().iter().map(|&k| k as f64).collect();
    let summary = overlap_summary_of(post.n1(), post.n2(), post.overlap_samples(), 0.9)?;
    stage.finish(
        Some(a.seed),
        json!({
            "chain": post.meta,
            "geweke_z_overlap": geweke_z(&n12, 0.1, 0.5),
            "overlap": summary,
        }),
    )
}

pub fn estimate(a: &EstimateArgs) -> Result<()> {
    let mut stage = Stage::start("estimate", &a.out, &[&a.input])?;
    let text = read(&a.input)?;
    let marg: Marginals<f64> =
        io::parse_posterior(&text).with_context(|| format!("parsing posterior {}", a.input.display()))?;
    let loss = &a.loss;
    let est = match a.estimator {
        EstimatorKind::Full => bayes_full(&marg, loss)?,
        EstimatorKind::Partial => bayes_partial(&marg, loss)?,
        EstimatorKind::General => bayes_estimate_general(&marg, loss)?,
        EstimatorKind::Auto if loss.is_full_regime() => bayes_full(&marg, loss)?,
        EstimatorKind::Auto if loss.is_partial_regime() => bayes_partial(&marg, loss)?,
        EstimatorKind::Auto => bayes_estimate_general(&marg, loss)?,
    };
    stage.write("estimate.csv", |f| io::write_estimate(f, &est))?;
    stage.finish(
        None,
        json!({
            "estimator": est.estimator,
            "loss": loss.to_string(),
            "links": est.links(),
            "rejections": est.rejections(),
            "non_links": est.n2() - est.links() - est.rejections(),
            "expected_loss": est.total_loss(),
        }),
    )
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let mut inputs = vec![a.input.as_path(), a.truth.as_path()];
    inputs.extend(a.overlap.as_deref());
    let mut stage = Stage::start("evaluate", &a.out, &inputs)?;
    let est = load_estimate(&a.input)?;
    let truth = io::parse_truth(&read(&a.truth)?).with_context(|| format!("parsing truth {}", a.truth.display()))?;
    let report = if est.rejections() > 0 { score_partial(&truth, &est)? } else { score_full(&truth, &est)? };
    let overlap = match &a.overlap {
        Some(p) => {
            let samples =
                io::parse_overlap(&read(p)?).with_context(|| format!("parsing overlap samples {}", p.display()))?;
            Some(overlap_summary_of(est.n1, est.n2(), &samples, 0.9)?)
        }
        None => None,
    };
    let doc = json!({ "estimator": est.estimator, "report": report, "overlap": overlap });
    stage.write("evaluation.json", |f| io::write_json(f, &doc))?;
    println!("{report}");
    stage.finish(None, json!({ "estimator": est.estimator }))
}

pub fn merge(a: &MergeArgs) -> Result<()> {
    let mut stage = Stage::start("merge", &a.out, &[&a.input, &a.log])?;
    let est = load_estimate(&a.input)?;
    let decisions =
        DecisionLog::read(&a.log).with_context(|| format!("reading decision log {}", a.log.display()))?;
    let merged = merge_decisions(&est, &decisions)?;
    stage.write("merged.csv", |f| io::write_estimate(f, &merged))?;
    stage.finish(
        None,
        json!({
            "decisions": decisions.len(),
            "links": merged.links(),
            "rejections": merged.rejections(),
        }),
    )
}

pub fn review(a: &ReviewArgs) -> Result<()> {
    let cfg = load_config(&a.config)?;
    let files = load_files(&a.input, &cfg)?;
    let est = load_estimate(&a.estimate)?;
    let marg = io::parse_posterior(&read(&a.posterior)?)
        .with_context(|| format!("parsing posterior {}", a.posterior.display()))?;
    let comparisons = a.comparisons.as_deref().map(load_comparisons).transpose()?;
    let tasks = build_tasks(&est, &marg, &files.file1, &files.file2, comparisons.as_ref())?;
    let service = Arc::new(ReviewService::open(est, tasks, &a.log)?);
    let progress = service.progress();
    let addr = format!("{}:{}", a.host, a.port);
    let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr).await.with_context(|| format!("binding {addr}"))?;
        eprintln!(
            "serving {} review tasks ({} pending) on http://{}",
            progress.total,
            progress.pending,
            listener.local_addr()?
        );
        axum::serve(listener, crate::server::router(service)).await.context("serving")
    })
}
