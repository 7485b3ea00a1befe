//! Config-driven end-to-end runs.
//!
//! Stages run in a fixed order and each writes its artifacts under
//! `out/<stage>/` together with a `manifest.json`. A stage that fails leaves a
//! `STALE` marker (with the error) in its directory; stages not reached by
//! the latest run are marked stale as well, so leftovers from earlier runs
//! are never mistaken for current output.

mod config;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use config::{
    AttnSettings, BiasSettings, CvSettings, FilterSpec, InputSpec, LrSettings, NGramSettings, PipelineConfig,
    RelevanceSettings, SplitSettings, CONFIG_VERSION, MODEL_NAMES,
};

use crate::attnmodel::{self, AttentionConfig, AttentionModel, TrainConfig};
use crate::encoding::{
    max_len_for, write_sequences, Encoding, NGramConfig, NGramVocabulary, TokenDictionary, TokenSequence,
};
use crate::error::{Error, Result};
use crate::evaluation::{auroc, cross_validate, mean, CvConfig, EvalResult, Scorer};
use crate::eventlog::{
    apply_rule, compute_stats, parse_csv, parse_xes, write_traces, Label, LabelRule, LabeledLog, LogStats,
    Trace,
};
use crate::leakage::{audit_with, remove_bias, AuditConfig, AuditReport, BiasRemovalSpec, RemovalSummary};
use crate::linmodels::{
    fit_lr, relevance_lasso, relevance_mdi, relevance_permutation, save_model, select_c, train_dt,
    LinearModel, LogisticConfig, TreeModel,
};
use crate::matrix::FeatureMatrix;
use crate::relevance::RelevanceReport;
use crate::reporting::{
    render_attention_map, render_relevance_chart, render_results_table, render_stats_table, report_dir,
};
use crate::seed;
use crate::splitting::{split, DataSplit, SplitConfig};
use crate::synth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Label,
    Audit,
    Split,
    Encode,
    Train,
    Evaluate,
    Explain,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Label,
        Stage::Audit,
        Stage::Split,
        Stage::Encode,
        Stage::Train,
        Stage::Evaluate,
        Stage::Explain,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Label => "label",
            Stage::Audit => "audit",
            Stage::Split => "split",
            Stage::Encode => "encode",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Explain => "explain",
            Stage::Report => "report",
        }
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage '{s}'")))
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Display name of a model in result tables.
pub fn model_display_name(model: &str) -> &str {
    match model {
        "lr" => "LR",
        "dt" => "DT",
        "attn" => "Attention",
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRelevance {
    pub model: String,
    pub encoding: Encoding,
    pub reports: Vec<RelevanceReport>,
}

/// What a run produced, for callers that want numbers rather than files.
#[derive(Debug, Clone, Default)]
pub struct PipelineOutcome {
    pub dataset: String,
    pub stats: Option<LogStats>,
    pub audit: Option<AuditReport>,
    pub removal: Option<(BiasRemovalSpec, RemovalSummary)>,
    pub results: Vec<EvalResult>,
    pub relevance: Vec<ModelRelevance>,
    pub completed: Vec<Stage>,
}

impl PipelineOutcome {
    pub fn result(&self, model: &str, encoding: Encoding) -> Option<&EvalResult> {
        self.results
            .iter()
            .find(|r| r.model == model_display_name(model) && r.encoding == encoding.display_name())
    }
}

#[derive(Serialize)]
struct StageManifest<'a> {
    stage: Stage,
    config_version: u32,
    dataset: &'a str,
    seed: u64,
    outputs: Vec<String>,
    details: serde_json::Value,
}

enum Encoded {
    NGram {
        encoding: Encoding,
        names: Vec<String>,
        x_train: FeatureMatrix,
        x_test: FeatureMatrix,
    },
    Tokens {
        dict: TokenDictionary,
        train: Vec<TokenSequence>,
        test: Vec<TokenSequence>,
    },
}

impl Encoded {
    fn encoding(&self) -> Encoding {
        match self {
            Encoded::NGram { encoding, .. } => *encoding,
            Encoded::Tokens { .. } => Encoding::Tokens,
        }
    }
}

enum Fitted {
    Lr(LinearModel),
    Dt(TreeModel),
    Attn(Box<AttentionModel>),
}

struct Trained {
    model: String,
    /// Index into the encoded sets.
    set: usize,
    fitted: Fitted,
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let f = fs::File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::file(path, e))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(
        fs::File::create(path).map_err(|e| Error::file(path, e))?,
    ))
}

struct Runner<'a> {
    cfg: &'a PipelineConfig,
    out: PathBuf,
    dataset: String,
    outcome: PipelineOutcome,
}

struct StageOutput {
    files: Vec<String>,
    details: serde_json::Value,
}

impl StageOutput {
    fn new() -> Self {
        StageOutput {
            files: Vec::new(),
            details: serde_json::Value::Null,
        }
    }
}

impl Runner<'_> {
    fn stage<T>(
        &mut self,
        stage: Stage,
        f: impl FnOnce(&mut Self, &Path, &mut StageOutput) -> Result<T>,
    ) -> Result<T> {
        let wrap = |e: Error| Error::Stage {
            stage: stage.as_str().to_owned(),
            source: Box::new(e),
        };
        let dir = self.out.join(stage.as_str());
        fs::create_dir_all(&dir).map_err(|e| wrap(Error::file(&dir, e)))?;
        let stale = dir.join("STALE");
        let manifest = dir.join("manifest.json");
        if manifest.exists() {
            fs::remove_file(&manifest).map_err(|e| wrap(Error::file(&manifest, e)))?;
        }
        write_text(&stale, "in progress\n").map_err(wrap)?;
        log::info!("stage {stage}");
        let mut output = StageOutput::new();
        match f(self, &dir, &mut output) {
            Ok(value) => {
                output.files.sort();
                let m = StageManifest {
                    stage,
                    config_version: self.cfg.version,
                    dataset: &self.dataset,
                    seed: self.cfg.seed,
                    outputs: output.files,
                    details: output.details,
                };
                write_json(&manifest, &m).map_err(wrap)?;
                fs::remove_file(&stale).map_err(|e| wrap(Error::file(&stale, e)))?;
                self.outcome.completed.push(stage);
                Ok(value)
            }
            Err(e) => {
                let _ = write_text(&stale, &format!("{e}\n"));
                Err(wrap(e))
            }
        }
    }

    fn mark_unreached(&self, until: Stage) -> Result<()> {
        for stage in Stage::ALL.into_iter().filter(|s| *s > until) {
            let dir = self.out.join(stage.as_str());
            if dir.exists() {
                write_text(&dir.join("STALE"), "not produced by the latest run\n")?;
            }
        }
        Ok(())
    }
}

fn ensure_both_classes(log: &LabeledLog, what: &str) -> Result<()> {
    for c in Label::BOTH {
        if log.class_count(c) == 0 {
            return Err(Error::Precondition(format!("{what} has no {c} traces")));
        }
    }
    Ok(())
}

fn cv_config(cfg: &PipelineConfig) -> CvConfig {
    CvConfig {
        repeats: cfg.cv.repeats,
        folds: cfg.cv.folds,
        seed: seed::derive(cfg.seed, "cv"),
    }
}

fn lr_config(cfg: &PipelineConfig, c: f64) -> LogisticConfig {
    LogisticConfig {
        c,
        max_iter: cfg.lr.max_iter,
        tol: cfg.lr.tol,
        standardize: cfg.lr.standardize,
    }
}

/// Run all stages up to and including `until`, writing artifacts to `out`.
pub fn run(cfg: &PipelineConfig, out: &Path, until: Stage) -> Result<PipelineOutcome> {
    cfg.validate().map_err(|e| Error::Stage {
        stage: "config".into(),
        source: Box::new(e),
    })?;
    fs::create_dir_all(out).map_err(|e| Error::file(out, e))?;
    let mut r = Runner {
        cfg,
        out: out.to_path_buf(),
        dataset: cfg.dataset_name(),
        outcome: PipelineOutcome::default(),
    };
    r.mark_unreached(until)?;
    write_json(&out.join("config.json"), cfg)?;

    // ingest
    let ingested: (Option<Vec<Trace>>, Option<LabeledLog>) = r.stage(Stage::Ingest, |r, dir, o| {
        let name = r.dataset.clone();
        let res = match &r.cfg.input {
            InputSpec::Csv { path, schema } => (Some(parse_csv(path, schema)?), None),
            InputSpec::Xes { path } => (Some(parse_xes(path)?), None),
            InputSpec::Ndjson { path } => {
                let mut log = LabeledLog::load(path)?;
                log.name = name;
                (None, Some(log))
            }
            InputSpec::Synth { synth: s } => {
                let mut log = synth::generate(s)?;
                log.name = name;
                (None, Some(log))
            }
        };
        let n = match &res {
            (Some(t), _) => {
                write_traces(t, create(&dir.join("traces.ndjson"))?)?;
                o.files.push("traces.ndjson".into());
                t.len()
            }
            (_, Some(log)) => {
                log.save(dir.join("log.ndjson"))?;
                o.files.push("log.ndjson".into());
                log.len()
            }
            _ => unreachable!(),
        };
        if n == 0 {
            return Err(Error::Precondition("input contains no traces".into()));
        }
        o.details = serde_json::json!({ "traces": n });
        Ok(res)
    })?;
    if until == Stage::Ingest {
        return Ok(r.outcome);
    }

    // label
    let labelled = r.stage(Stage::Label, |r, dir, o| {
        let (traces, log) = ingested;
        let mut log = match (&r.cfg.rule, traces, log) {
            (Some(spec), Some(traces), _) => {
                apply_rule(r.dataset.clone(), traces, &LabelRule::from_spec(spec)?)?
            }
            (Some(spec), None, Some(log)) => {
                let traces = log.traces.into_iter().map(|t| t.trace).collect();
                apply_rule(r.dataset.clone(), traces, &LabelRule::from_spec(spec)?)?
            }
            (None, _, Some(log)) => log,
            (None, Some(_), None) | (_, None, None) => {
                return Err(Error::Config(
                    "a label rule is required for unlabelled input".into(),
                ))
            }
        };
        let dropped = if r.cfg.filter.keep_containing.is_empty() {
            0
        } else {
            log.retain_containing_any(&r.cfg.filter.keep_containing)
        };
        ensure_both_classes(&log, "labelled log")?;
        let stats = compute_stats(&log);
        log.save(dir.join("log.ndjson"))?;
        write_json(&dir.join("stats.json"), &stats)?;
        write_text(
            &dir.join("stats.txt"),
            &render_stats_table(&[(r.dataset.clone(), stats)]),
        )?;
        o.files
            .extend(["log.ndjson", "stats.json", "stats.txt"].map(String::from));
        o.details = serde_json::json!({
            "positive": log.class_count(Label::Positive),
            "negative": log.class_count(Label::Negative),
            "filtered_out": dropped,
        });
        r.outcome.stats = Some(stats);
        Ok(log)
    })?;
    if until == Stage::Label {
        return Ok(r.outcome);
    }

    // audit (+ bias removal)
    let cleaned = r.stage(Stage::Audit, |r, dir, o| {
        let report = audit_with(
            &labelled,
            &AuditConfig {
                near_leak_threshold: r.cfg.bias.near_leak_threshold,
            },
        )?;
        for f in &report.findings {
            log::warn!(
                "leak: '{}' ({:?}) exclusive to {} traces, support {:.3}",
                f.activity,
                f.mode,
                f.class,
                f.support
            );
        }
        for n in &report.near_leaks {
            log::warn!(
                "near leak: '{}' is {:.1}% {}",
                n.activity,
                n.purity * 100.0,
                n.class
            );
        }
        let detected = if r.cfg.bias.remove_detected {
            BiasRemovalSpec::from_findings(&report.findings)
        } else {
            BiasRemovalSpec::default()
        };
        let spec = detected.merge(BiasRemovalSpec {
            removals: r.cfg.bias.removals.clone(),
        });
        let (log, summary) = remove_bias(&labelled, &spec)?;
        ensure_both_classes(&log, "log after bias removal")?;
        write_json(&dir.join("report.json"), &report)?;
        write_json(&dir.join("removal.json"), &spec)?;
        log.save(dir.join("log.ndjson"))?;
        o.files
            .extend(["report.json", "removal.json", "log.ndjson"].map(String::from));
        o.details = serde_json::json!({
            "findings": report.findings.len(),
            "near_leaks": report.near_leaks.len(),
            "removed_events": summary.removed_events,
            "dropped_traces": summary.dropped_traces,
        });
        r.outcome.audit = Some(report);
        r.outcome.removal = Some((spec, summary));
        Ok(log)
    })?;
    if until == Stage::Audit {
        return Ok(r.outcome);
    }

    // split
    let data: DataSplit = r.stage(Stage::Split, |r, dir, o| {
        let sc = SplitConfig {
            test_fraction: r.cfg.split.test_fraction,
            seed: seed::derive(r.cfg.seed, "split"),
        };
        let s = split(&cleaned, &sc)?;
        s.manifest(&sc).save(dir.join("assignment.json"))?;
        s.train.save(dir.join("train.ndjson"))?;
        s.test.save(dir.join("test.ndjson"))?;
        o.files
            .extend(["assignment.json", "train.ndjson", "test.ndjson"].map(String::from));
        o.details = serde_json::json!({
            "train": s.train.len(),
            "test": s.test.len(),
            "train_positive": s.train.class_count(Label::Positive),
            "test_positive": s.test.class_count(Label::Positive),
        });
        Ok(s)
    })?;
    if until == Stage::Split {
        return Ok(r.outcome);
    }
    let y_train = data.train.labels();
    let y_test = data.test.labels();

    // encode
    let sets: Vec<Encoded> = r.stage(Stage::Encode, |r, dir, o| {
        let mut sets = Vec::new();
        for &enc in &r.cfg.encodings {
            let sub = dir.join(enc.as_str());
            fs::create_dir_all(&sub).map_err(|e| Error::file(&sub, e))?;
            let files: &[&str] = match enc.ngram_order() {
                Some(n) => {
                    let nc = NGramConfig {
                        n,
                        binary: r.cfg.ngram.binary,
                        pad_to: r.cfg.ngram.pad.then(|| max_len_for(&data.train)),
                    };
                    let vocab = NGramVocabulary::fit_log(&data.train, nc)?;
                    let x_train = vocab.encode_log(&data.train);
                    let x_test = vocab.encode_log(&data.test);
                    vocab.write_text(create(&sub.join("vocab.txt"))?)?;
                    x_train.write_matrix_market(create(&sub.join("train.mtx"))?)?;
                    x_test.write_matrix_market(create(&sub.join("test.mtx"))?)?;
                    sets.push(Encoded::NGram {
                        encoding: enc,
                        names: vocab.feature_names(),
                        x_train,
                        x_test,
                    });
                    &["vocab.txt", "train.mtx", "test.mtx"]
                }
                None => {
                    let dict = TokenDictionary::build(&data.train)?;
                    let max_len = max_len_for(&data.train);
                    let enc_all = |log: &LabeledLog| -> Result<Vec<TokenSequence>> {
                        log.traces
                            .iter()
                            .map(|t| dict.encode(&t.trace, max_len))
                            .collect()
                    };
                    let train = enc_all(&data.train)?;
                    let test = enc_all(&data.test)?;
                    let truncated = test.iter().filter(|s| s.truncated).count();
                    if truncated > 0 {
                        log::warn!(
                            "{truncated} test traces are longer than {max_len} tokens and were truncated"
                        );
                    }
                    o.details = serde_json::json!({ "max_len": max_len, "truncated_test_traces": truncated });
                    dict.write_text(create(&sub.join("dictionary.txt"))?)?;
                    write_sequences(&train, create(&sub.join("train.seq"))?)?;
                    write_sequences(&test, create(&sub.join("test.seq"))?)?;
                    sets.push(Encoded::Tokens { dict, train, test });
                    &["dictionary.txt", "train.seq", "test.seq"]
                }
            };
            o.files
                .extend(files.iter().map(|f| format!("{}/{f}", enc.as_str())));
        }
        Ok(sets)
    })?;
    if until == Stage::Encode {
        return Ok(r.outcome);
    }

    // train
    let trained: Vec<Trained> = r.stage(Stage::Train, |r, dir, o| {
        let mut trained = Vec::new();
        let mut details = serde_json::Map::new();
        for model in &r.cfg.models {
            for (set_idx, set) in sets.iter().enumerate() {
                let key = format!("{model}-{}", set.encoding().as_str());
                let file = format!("{key}.json");
                let fitted = match (model.as_str(), set) {
                    ("lr", Encoded::NGram { names, x_train, .. }) => {
                        let c = match &r.cfg.lr.c_grid {
                            Some(grid) => {
                                let (c, means) = select_c(x_train, &y_train, &lr_config(r.cfg, r.cfg.lr.c), grid, &cv_config(r.cfg))?;
                                details.insert(format!("{key}.c_grid_auroc"), serde_json::json!(means));
                                c
                            }
                            None => r.cfg.lr.c,
                        };
                        let fit = fit_lr(x_train, &y_train, &lr_config(r.cfg, c))?;
                        details.insert(
                            key.clone(),
                            serde_json::json!({ "c": c, "iterations": fit.iterations, "converged": fit.converged,
                                "nonzero_weights": fit.model.nonzero_weights() }),
                        );
                        save_model(dir.join(&file), "lr", names, &fit.model)?;
                        Fitted::Lr(fit.model)
                    }
                    ("dt", Encoded::NGram { names, x_train, .. }) => {
                        let t = train_dt(x_train, &y_train, &r.cfg.dt)?;
                        details.insert(key.clone(), serde_json::json!({ "nodes": t.nodes.len(), "depth": t.depth() }));
                        save_model(dir.join(&file), "dt", names, &t)?;
                        Fitted::Dt(t)
                    }
                    ("attn", Encoded::Tokens { dict, train, .. }) => {
                        let a = &r.cfg.attn;
                        let ac = AttentionConfig {
                            d_model: a.d_model,
                            n_heads: a.n_heads,
                            d_hidden: a.d_hidden,
                            dropout: a.dropout,
                            residual_norm: a.residual_norm,
                            ..AttentionConfig::new(dict.len(), train[0].len())
                        };
                        let init = AttentionModel::new(ac, seed::derive(r.cfg.seed, "attn-init"))?;
                        let tc = TrainConfig {
                            epochs: a.epochs,
                            learning_rate: a.learning_rate,
                            batch_size: a.batch_size,
                            seed: seed::derive(r.cfg.seed, "attn-train"),
                            ..TrainConfig::default()
                        };
                        let (m, report) = attnmodel::train(init, train, &y_train, &tc)?;
                        m.save(dir.join(&file))?;
                        write_json(&dir.join(format!("{key}-loss.json")), &report)?;
                        o.files.push(format!("{key}-loss.json"));
                        details.insert(
                            key.clone(),
                            serde_json::json!({ "final_loss": report.loss_history.last(), "steps": report.steps }),
                        );
                        Fitted::Attn(Box::new(m))
                    }
                    _ => continue,
                };
                o.files.push(file);
                trained.push(Trained {
                    model: model.clone(),
                    set: set_idx,
                    fitted,
                });
            }
        }
        o.details = serde_json::Value::Object(details);
        Ok(trained)
    })?;
    if until == Stage::Train {
        return Ok(r.outcome);
    }

    // evaluate
    // rows evaluated on a log that bias removal changed are labelled as such
    let dataset_label = match &r.outcome.removal {
        Some((_, s)) if s.removed_events > 0 || s.dropped_traces > 0 => format!("{}-unbiased", r.dataset),
        _ => r.dataset.clone(),
    };
    r.stage(Stage::Evaluate, |r, dir, o| {
        let cv = cv_config(r.cfg);
        let mut results = Vec::new();
        for t in &trained {
            let set = &sets[t.set];
            let (train_auroc, test_auroc, fold_scores) = match (&t.fitted, set) {
                (Fitted::Lr(m), Encoded::NGram { x_train, x_test, .. }) => {
                    let folds = cross_validate(&lr_config(r.cfg, m.c), x_train, &y_train, &cv)?;
                    (mean(&folds), auroc(&m.score_matrix(x_test)?, &y_test)?, folds)
                }
                (Fitted::Dt(m), Encoded::NGram { x_train, x_test, .. }) => {
                    let folds = cross_validate(&r.cfg.dt, x_train, &y_train, &cv)?;
                    (mean(&folds), auroc(&m.score_matrix(x_test)?, &y_test)?, folds)
                }
                (Fitted::Attn(m), Encoded::Tokens { train, test, .. }) => (
                    auroc(&m.predict_many(train)?, &y_train)?,
                    auroc(&m.predict_many(test)?, &y_test)?,
                    Vec::new(),
                ),
                _ => unreachable!("model trained on an incompatible encoding"),
            };
            results.push(EvalResult {
                dataset: dataset_label.clone(),
                encoding: set.encoding().display_name().to_owned(),
                model: model_display_name(&t.model).to_owned(),
                train_auroc,
                test_auroc,
                fold_scores,
            });
        }
        let grid = render_results_table(&results);
        write_json(&dir.join("results.json"), &results)?;
        write_text(&dir.join("results.txt"), &grid)?;
        write_json(&r.out.join("results.json"), &results)?;
        write_text(&r.out.join("results.txt"), &grid)?;
        o.files.extend(["results.json", "results.txt"].map(String::from));
        r.outcome.results = results;
        Ok(())
    })?;
    if until == Stage::Evaluate {
        return Ok(r.outcome);
    }

    // explain
    r.stage(Stage::Explain, |r, dir, o| {
        let perm_seed = seed::derive(r.cfg.seed, "permutation");
        let repeats = r.cfg.relevance.permutation_repeats;
        let mut all = Vec::new();
        for t in &trained {
            let set = &sets[t.set];
            let reports = match (&t.fitted, set) {
                (Fitted::Lr(m), Encoded::NGram { names, x_test, .. }) => vec![
                    relevance_lasso(m, names)?,
                    relevance_permutation(m, x_test, &y_test, names, repeats, perm_seed)?,
                ],
                (Fitted::Dt(m), Encoded::NGram { names, x_test, .. }) => vec![
                    relevance_mdi(m, names)?,
                    relevance_permutation(m, x_test, &y_test, names, repeats, perm_seed)?,
                ],
                (Fitted::Attn(m), Encoded::Tokens { dict, test, .. }) => {
                    vec![attnmodel::attention_summary(m, test, dict)?]
                }
                _ => unreachable!("model trained on an incompatible encoding"),
            };
            let key = format!("{}-{}", t.model, set.encoding().as_str());
            write_json(&dir.join(format!("{key}.json")), &reports)?;
            o.files.push(format!("{key}.json"));
            for rep in &reports {
                let name = format!("{key}-{}.tsv", rep.method.as_str());
                rep.write_table(create(&dir.join(&name))?)?;
                o.files.push(name);
            }
            all.push(ModelRelevance {
                model: t.model.clone(),
                encoding: set.encoding(),
                reports,
            });
        }
        r.outcome.relevance = all;
        Ok(())
    })?;
    if until == Stage::Explain {
        return Ok(r.outcome);
    }

    // report
    r.stage(Stage::Report, |r, _dir, o| {
        let base = report_dir(&r.out, &r.dataset, "");
        fs::create_dir_all(&base).map_err(|e| Error::file(&base, e))?;
        write_text(
            &base.join("results.txt"),
            &render_results_table(&r.outcome.results),
        )?;
        write_json(&base.join("results.json"), &r.outcome.results)?;
        if let Some(stats) = r.outcome.stats {
            write_text(
                &base.join("stats.txt"),
                &render_stats_table(&[(r.dataset.clone(), stats)]),
            )?;
        }
        let top_k = r.cfg.relevance.top_k;
        for (t, rel) in trained.iter().zip(&r.outcome.relevance) {
            let set = &sets[t.set];
            let key = format!("{}-{}", t.model, set.encoding().as_str());
            let dir = report_dir(&r.out, &r.dataset, &key);
            fs::create_dir_all(&dir).map_err(|e| Error::file(&dir, e))?;
            let mut files = vec!["relevance.json", "results.txt", "results.json"];
            write_json(&dir.join("relevance.json"), &rel.reports)?;
            let mine: Vec<EvalResult> = r
                .outcome
                .results
                .iter()
                .filter(|e| {
                    e.model == model_display_name(&t.model) && e.encoding == set.encoding().display_name()
                })
                .cloned()
                .collect();
            write_text(&dir.join("results.txt"), &render_results_table(&mine))?;
            write_json(&dir.join("results.json"), &mine)?;
            for (i, rep) in rel.reports.iter().enumerate() {
                if rep.is_empty() {
                    log::warn!("{key}: {} report is empty, no chart drawn", rep.method.as_str());
                    continue;
                }
                let name = if i == 0 {
                    "relevance.svg"
                } else {
                    "relevance_permutation.svg"
                };
                write_text(&dir.join(name), &render_relevance_chart(rep, top_k)?)?;
                files.push(name);
            }
            if let (Fitted::Attn(m), Encoded::Tokens { dict, test, .. }) = (&t.fitted, set) {
                let seq = &test[0];
                let (_, tensor) = m.forward(seq)?;
                write_text(
                    &dir.join("attention.svg"),
                    &render_attention_map(&tensor, &seq.token_names(dict))?,
                )?;
                write_json(&dir.join("attention.json"), &tensor)?;
                files.extend(["attention.svg", "attention.json"]);
            }
            o.files.extend(
                files
                    .into_iter()
                    .map(|f| format!("reports/{}/{key}/{f}", r.dataset)),
            );
        }
        Ok(())
    })?;
    Ok(r.outcome)
}
