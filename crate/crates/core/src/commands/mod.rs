//! Command implementations behind the `elgeo` binary.
//!
//! Every command reads explicit input paths, writes into an explicit output
//! location and leaves a `manifest.json` describing the run next to its
//! artifacts. JSON reports carry a `manifest` field naming that file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::closure::{compute_closure, ClosureError, DeductiveClosure};
use crate::config::{overlay, ConfigError, ExperimentConfig, TieMode};
use crate::evaluation::{emit_roc, evaluate_split, naive_fit, EvalError, EvalOptions, Metrics, RankingReport, Source};
use crate::geometry::{load_checkpoint, save_checkpoint, GeometryError};
use crate::kb::{
    load_dataset, normalize, parse_general, parse_normalized, serialize_normalized, write_dataset, Form, KbError,
    KnowledgeBase, NormalizedAxiom, Signature,
};
use crate::reasoner::saturate;
use crate::toy::{self, SyntheticConfig, ToyError, SYNTHETIC_PRESETS};
use crate::training::{grid_search, resolve_pool, train, write_report, TrainError};

pub const MANIFEST: &str = "manifest.json";

/// Failure of a command. Input problems exit with 2, everything else with 1.
#[derive(Debug, Error)]
pub enum CmdError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Runtime(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Input(_) => 2,
            CmdError::Runtime(_) => 1,
        }
    }
}

impl From<KbError> for CmdError {
    fn from(e: KbError) -> Self {
        CmdError::Input(e.to_string())
    }
}

impl From<ConfigError> for CmdError {
    fn from(e: ConfigError) -> Self {
        CmdError::Input(e.to_string())
    }
}

impl From<ClosureError> for CmdError {
    fn from(e: ClosureError) -> Self {
        match e {
            ClosureError::Dump { .. } => CmdError::Input(e.to_string()),
            _ => CmdError::Runtime(e.to_string()),
        }
    }
}

impl From<EvalError> for CmdError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::NoRecords => CmdError::Runtime(e.to_string()),
            EvalError::Closure(c) => c.into(),
            _ => CmdError::Input(e.to_string()),
        }
    }
}

impl From<TrainError> for CmdError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::UnknownPool(_) => CmdError::Input(e.to_string()),
            TrainError::Eval(e) => e.into(),
            _ => CmdError::Runtime(e.to_string()),
        }
    }
}

impl From<GeometryError> for CmdError {
    fn from(e: GeometryError) -> Self {
        CmdError::Input(e.to_string())
    }
}

impl From<ToyError> for CmdError {
    fn from(e: ToyError) -> Self {
        match e {
            ToyError::Closure(c) => c.into(),
            _ => CmdError::Input(e.to_string()),
        }
    }
}

fn write_err(path: &Path, e: impl std::fmt::Display) -> CmdError {
    CmdError::Runtime(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CmdError> {
    fs::write(path, bytes).map_err(|e| write_err(path, e))
}

fn create_dir(dir: &Path) -> Result<(), CmdError> {
    fs::create_dir_all(dir).map_err(|e| write_err(dir, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// SHA-256 of a file's bytes, hex encoded.
pub fn file_digest(path: &Path) -> Result<String, CmdError> {
    let bytes = fs::read(path).map_err(|e| CmdError::Input(format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Provenance record written next to the artifacts of every command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub config_digest: Option<String>,
    /// Input path to SHA-256 digest.
    pub inputs: BTreeMap<String, String>,
    pub seed: Option<u64>,
    pub version: String,
    pub started_at: String,
    pub finished_at: String,
    /// Output path to SHA-256 digest.
    pub outputs: BTreeMap<String, String>,
}

impl RunManifest {
    fn start(command: &str) -> Self {
        RunManifest {
            command: command.to_owned(),
            config: serde_json::Value::Null,
            config_digest: None,
            inputs: BTreeMap::new(),
            seed: None,
            version: env!("CARGO_PKG_VERSION").to_owned(),
            started_at: chrono::Utc::now().to_rfc3339(),
            finished_at: String::new(),
            outputs: BTreeMap::new(),
        }
    }

    fn with_config(mut self, cfg: &ExperimentConfig) -> Self {
        self.config = cfg.resolved();
        self.config_digest = Some(cfg.digest());
        self.seed = Some(cfg.train.seed);
        self
    }

    fn input(&mut self, path: &Path) -> Result<(), CmdError> {
        let digest = file_digest(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    /// Digest the dataset files that exist in `dir`.
    fn dataset(&mut self, dir: &Path) -> Result<(), CmdError> {
        for name in ["train.tsv", "valid.tsv", "test.tsv", "pools.tsv"] {
            let p = dir.join(name);
            if p.is_file() {
                self.input(&p)?;
            }
        }
        Ok(())
    }

    fn output(&mut self, path: &Path) -> Result<(), CmdError> {
        let digest = file_digest(path).map_err(|e| CmdError::Runtime(e.to_string()))?;
        self.outputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    fn finish(mut self, path: &Path) -> Result<(), CmdError> {
        self.finished_at = chrono::Utc::now().to_rfc3339();
        write_file(path, to_json(&self))
    }

    pub fn load(path: &Path) -> Result<Self, CmdError> {
        let text = fs::read_to_string(path).map_err(|e| CmdError::Input(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CmdError::Input(format!("{}: {e}", path.display())))
    }
}

/// Wrap a serializable report with the manifest reference.
fn with_manifest<T: Serialize>(report: &T) -> serde_json::Value {
    let mut v = serde_json::to_value(report).expect("serializable");
    match v.as_object_mut() {
        Some(obj) => {
            obj.insert("manifest".into(), json!(MANIFEST));
            v
        }
        None => json!({ "manifest": MANIFEST, "report": v }),
    }
}

const PRESETS: [(&str, &str); 10] = [
    ("relu-original", include_str!("../../presets/relu-original.toml")),
    ("leaky-relaxed", include_str!("../../presets/leaky-relaxed.toml")),
    ("neg-losses", include_str!("../../presets/neg-losses.toml")),
    ("closure-filtering", include_str!("../../presets/closure-filtering.toml")),
    ("leaky-only", include_str!("../../presets/leaky-only.toml")),
    ("neg-losses-only", include_str!("../../presets/neg-losses-only.toml")),
    ("relaxed-only", include_str!("../../presets/relaxed-only.toml")),
    ("filter-only", include_str!("../../presets/filter-only.toml")),
    ("toy-faithful", include_str!("../../presets/toy-faithful.toml")),
    ("toy-synthetic", include_str!("../../presets/toy-synthetic.toml")),
];

/// Names of the bundled configuration presets.
pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

/// TOML text of a bundled preset.
pub fn preset(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Where an experiment configuration comes from. Overrides are `key=value`
/// strings applied on top of the file or preset.
#[derive(Debug, Clone, Default)]
pub struct ConfigSource {
    pub file: Option<PathBuf>,
    pub preset: Option<String>,
    pub overrides: Vec<String>,
}

impl ConfigSource {
    pub fn load(&self, manifest: Option<&mut RunManifest>) -> Result<ExperimentConfig, CmdError> {
        let text = match (&self.file, &self.preset) {
            (Some(_), Some(_)) => return Err(CmdError::Input("give either a config file or a preset, not both".into())),
            (Some(path), None) => {
                let text = fs::read_to_string(path).map_err(|e| CmdError::Input(format!("{}: {e}", path.display())))?;
                if let Some(m) = manifest {
                    m.input(path)?;
                }
                text
            }
            (None, Some(name)) => preset(name)
                .ok_or_else(|| {
                    CmdError::Input(format!("unknown preset {name:?}; available: {}", preset_names().join(", ")))
                })?
                .to_owned(),
            (None, None) => String::new(),
        };
        Ok(ExperimentConfig::from_toml_with(&text, &self.overrides)?)
    }
}

/// Cap the global worker pool from `ELGEO_THREADS`, if set.
pub fn init_threads() -> Result<(), CmdError> {
    let Ok(raw) = std::env::var("ELGEO_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CmdError::Input(format!("ELGEO_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CmdError::Runtime(e.to_string()))
}

fn load_kb(dir: &Path) -> Result<KnowledgeBase, CmdError> {
    if !dir.is_dir() {
        return Err(CmdError::Input(format!("dataset directory {} does not exist", dir.display())));
    }
    Ok(load_dataset(dir)?)
}

fn closure_of(kb: &KnowledgeBase, cfg: &ExperimentConfig) -> Result<DeductiveClosure, CmdError> {
    let sub = saturate(kb);
    Ok(compute_closure(kb, &sub, &cfg.closure)?)
}

fn load_closure(
    kb: &KnowledgeBase,
    dir: &Path,
    cfg: &ExperimentConfig,
    manifest: &mut RunManifest,
) -> Result<DeductiveClosure, CmdError> {
    if !dir.join("subsumption.tsv").is_file() {
        return Err(CmdError::Input(format!(
            "no closure dump in {}; run `elgeo closure` on the dataset first",
            dir.display()
        )));
    }
    let dc = DeductiveClosure::load_dump(&kb.signature, dir, cfg.closure.strict_printed_rules)?;
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CmdError::Input(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "tsv"))
        .collect();
    files.sort();
    for f in files {
        manifest.input(&f)?;
    }
    Ok(dc)
}

fn form_counts(axioms: &[NormalizedAxiom]) -> BTreeMap<Form, usize> {
    let mut counts = BTreeMap::new();
    for ax in axioms {
        *counts.entry(ax.form()).or_insert(0) += 1;
    }
    counts
}

fn count_line(counts: &BTreeMap<Form, usize>) -> String {
    let parts: Vec<String> = counts.iter().map(|(f, n)| format!("{}={n}", f.tag())).collect();
    if parts.is_empty() {
        "no axioms".into()
    } else {
        parts.join(" ")
    }
}

/// Normalize a file of general axioms into TSV. A `.tsv` input is taken to
/// be in normal form already and is re-serialized.
pub fn cmd_normalize(input: &Path, output: &Path) -> Result<String, CmdError> {
    let mut manifest = RunManifest::start("normalize");
    let text = fs::read_to_string(input).map_err(|e| CmdError::Input(format!("{}: {e}", input.display())))?;
    manifest.input(input)?;
    let mut sig = Signature::new();
    let at = |e: KbError| CmdError::Input(format!("{}:{e}", input.display()));
    let axioms = if input.extension().is_some_and(|x| x == "tsv") {
        parse_normalized(&text, &mut sig).map_err(at)?
    } else {
        let general = parse_general(&text, &mut sig).map_err(at)?;
        normalize(&general, &mut sig)
    };
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write_file(output, serialize_normalized(&axioms, &sig))?;
    manifest.output(output)?;
    let mpath = PathBuf::from(format!("{}.{MANIFEST}", output.display()));
    manifest.finish(&mpath)?;
    Ok(format!("{} axioms: {}", axioms.len(), count_line(&form_counts(&axioms))))
}

/// Saturate the subsumption hierarchy and dump it.
pub fn cmd_reason(dataset: &Path, out: &Path) -> Result<String, CmdError> {
    let mut manifest = RunManifest::start("reason");
    let kb = load_kb(dataset)?;
    manifest.dataset(dataset)?;
    create_dir(out)?;
    let sub = saturate(&kb);
    let dump = out.join("subsumption.tsv");
    sub.write_dump(&kb.signature, &dump).map_err(|e| write_err(&dump, e))?;
    manifest.output(&dump)?;
    let mut unsat: Vec<&str> = sub
        .unsat()
        .iter()
        .filter(|c| **c != crate::kb::ClassId::BOT)
        .map(|&c| kb.signature.class_name(c))
        .collect();
    unsat.sort_unstable();
    let stats = json!({
        "manifest": MANIFEST,
        "classes": kb.signature.num_classes(),
        "subsumptions": sub.pairs().len(),
        "unsatisfiable": unsat,
    });
    let spath = out.join("reason_stats.json");
    write_file(&spath, to_json(&stats))?;
    manifest.output(&spath)?;
    manifest.finish(&out.join(MANIFEST))?;
    Ok(format!(
        "{} classes, {} subsumptions, {} unsatisfiable",
        kb.signature.num_classes(),
        sub.pairs().len(),
        unsat.len()
    ))
}

/// Compute the deductive closure and dump it per form.
pub fn cmd_closure(dataset: &Path, out: &Path, config: &ConfigSource) -> Result<String, CmdError> {
    let mut manifest = RunManifest::start("closure");
    let cfg = config.load(Some(&mut manifest))?;
    manifest = manifest.with_config(&cfg);
    manifest.seed = None;
    let kb = load_kb(dataset)?;
    manifest.dataset(dataset)?;
    let dc = closure_of(&kb, &cfg)?;
    create_dir(out)?;
    dc.write_dump(&kb.signature, out).map_err(|e| write_err(out, e))?;
    let mut files: Vec<PathBuf> = std::iter::once(out.join("subsumption.tsv"))
        .chain(Form::GCI.iter().map(|f| out.join(format!("{}.tsv", f.tag().to_lowercase()))))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    for f in &files {
        manifest.output(f)?;
    }
    let stats = dc.stats();
    let spath = out.join("closure_stats.json");
    write_file(&spath, to_json(&with_manifest(&stats)))?;
    manifest.output(&spath)?;
    manifest.finish(&out.join(MANIFEST))?;
    let derived: usize = stats.derived.values().sum();
    let asserted: usize = stats.asserted.values().sum();
    Ok(format!(
        "{} members ({asserted} asserted, {derived} derived); derived per form: {}",
        dc.len(),
        count_line(&stats.derived)
    ))
}

fn closure_for_training(
    kb: &KnowledgeBase,
    cfg: &ExperimentConfig,
    closure_dir: Option<&Path>,
    manifest: &mut RunManifest,
) -> Result<Option<DeductiveClosure>, CmdError> {
    let needed = cfg.sampler.filter_with_closure || cfg.sampler.entailed_ratio > 0.0;
    match (needed, closure_dir) {
        (false, _) => Ok(None),
        (true, Some(dir)) => Ok(Some(load_closure(kb, dir, cfg, manifest)?)),
        (true, None) => Ok(Some(closure_of(kb, cfg)?)),
    }
}

/// Train a model and write `model.ckpt`, `train_report.jsonl` and
/// `train_summary.json` into `out`.
pub fn cmd_train(
    dataset: &Path,
    config: &ConfigSource,
    out: &Path,
    closure_dir: Option<&Path>,
) -> Result<String, CmdError> {
    let mut manifest = RunManifest::start("train");
    let cfg = config.load(Some(&mut manifest))?;
    manifest = manifest.with_config(&cfg);
    let kb = load_kb(dataset)?;
    manifest.dataset(dataset)?;
    let dc = closure_for_training(&kb, &cfg, closure_dir, &mut manifest)?;
    let (model, report) = train(&kb, dc.as_ref(), &cfg)?;

    create_dir(out)?;
    let ckpt = out.join("model.ckpt");
    save_checkpoint(&model, &kb.signature, &ckpt).map_err(|e| write_err(&ckpt, e))?;
    manifest.output(&ckpt)?;
    let jsonl = out.join("train_report.jsonl");
    write_report(&report, &jsonl)?;
    manifest.output(&jsonl)?;
    let summary = json!({
        "manifest": MANIFEST,
        "checkpoint": "model.ckpt",
        "seed": report.seed,
        "best_epoch": report.best_epoch,
        "best_valid_loss": report.best_valid_loss,
        "stop_epoch": report.stop_epoch,
        "stopped_early": report.stopped_early,
        "total_steps": report.total_steps,
        "lr_trajectory": report.lr_trajectory,
    });
    let spath = out.join("train_summary.json");
    write_file(&spath, to_json(&summary))?;
    manifest.output(&spath)?;
    let rpath = out.join("config.toml");
    write_file(&rpath, cfg.to_toml())?;
    manifest.output(&rpath)?;
    manifest.finish(&out.join(MANIFEST))?;

    let last = report.epochs.last().map_or(f64::NAN, |e| e.train.weighted_sum());
    Ok(format!(
        "trained {} epochs ({} steps), best epoch {}, final loss {last:.6}",
        report.stop_epoch, report.total_steps, report.best_epoch
    ))
}

/// Sweep the grid of the config and write `grid.json`.
pub fn cmd_grid(
    dataset: &Path,
    config: &ConfigSource,
    out: &Path,
    closure_dir: Option<&Path>,
) -> Result<String, CmdError> {
    let mut manifest = RunManifest::start("grid");
    let cfg = config.load(Some(&mut manifest))?;
    manifest = manifest.with_config(&cfg);
    let kb = load_kb(dataset)?;
    manifest.dataset(dataset)?;
    let dc = closure_for_training(&kb, &cfg, closure_dir, &mut manifest)?;
    let result = grid_search(&kb, dc.as_ref(), &cfg)?;
    create_dir(out)?;
    let path = out.join("grid.json");
    write_file(&path, to_json(&with_manifest(&result)))?;
    manifest.output(&path)?;
    manifest.finish(&out.join(MANIFEST))?;
    let mut msg = result.table();
    if !result.failures.is_empty() {
        msg.push_str(&format!("\n{} grid points failed", result.failures.len()));
    }
    Ok(msg)
}

/// Which split to rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Split {
    #[default]
    Test,
    Valid,
}

/// Flags of `elgeo evaluate` and `elgeo naive`.
#[derive(Debug, Clone, Default)]
pub struct EvalFlags {
    /// Report filtered metrics in the summary line.
    pub filtered: bool,
    /// Also rank closure GCI2 members outside train and test.
    pub closure_positives: bool,
    /// Directory written by `elgeo closure`.
    pub closure_dir: Option<PathBuf>,
    pub pool: Option<String>,
    pub tie_mode: Option<TieMode>,
    pub split: Split,
}

fn summary_line(m: &Metrics, filtered: bool) -> String {
    if filtered {
        format!(
            "FHits@10 {:.4}  FHits@100 {:.4}  macro FMR {:.2}  micro FMR {:.2}  macro FAUC {:.4}  micro FAUC {:.4}",
            m.fhits_10, m.fhits_100, m.macro_fmr, m.micro_fmr, m.macro_fauc, m.micro_fauc
        )
    } else {
        format!(
            "Hits@10 {:.4}  Hits@100 {:.4}  macro MR {:.2}  micro MR {:.2}  macro AUC {:.4}  micro AUC {:.4}",
            m.hits_10, m.hits_100, m.macro_mr, m.micro_mr, m.macro_auc, m.micro_auc
        )
    }
}

fn eval_setup(
    kb: &KnowledgeBase,
    cfg: &ExperimentConfig,
    flags: &EvalFlags,
    manifest: &mut RunManifest,
) -> Result<(Option<DeductiveClosure>, EvalOptions), CmdError> {
    let dc = match (&flags.closure_dir, flags.closure_positives) {
        (Some(dir), _) => Some(load_closure(kb, dir, cfg, manifest)?),
        (None, true) => {
            return Err(CmdError::Input(
                "--closure-positives needs a closure dump; run `elgeo closure <dataset> <dir>` and pass --closure <dir>"
                    .into(),
            ))
        }
        (None, false) => None,
    };
    let options = EvalOptions {
        pool: flags.pool.clone().or_else(|| cfg.eval.pool.clone()),
        tie_mode: flags.tie_mode.unwrap_or(cfg.eval.tie_mode),
        closure_positives: flags.closure_positives,
    };
    Ok((dc, options))
}

fn write_eval(
    report: &RankingReport,
    extra: Option<serde_json::Value>,
    out: &Path,
    name: &str,
    manifest: &mut RunManifest,
) -> Result<(), CmdError> {
    create_dir(out)?;
    let mut value = with_manifest(report);
    if let (Some(obj), Some(serde_json::Value::Object(extra))) = (value.as_object_mut(), extra) {
        obj.extend(extra);
    }
    let path = out.join(format!("{name}.json"));
    write_file(&path, to_json(&value))?;
    manifest.output(&path)?;
    let roc = out.join(format!("{name}_roc.csv"));
    let mut buf = Vec::new();
    emit_roc(Some(report), &mut buf).map_err(|e| write_err(&roc, e))?;
    write_file(&roc, buf)?;
    manifest.output(&roc)?;
    Ok(())
}

fn split_of(kb: &KnowledgeBase, split: Split) -> Result<(&[NormalizedAxiom], Source), CmdError> {
    let (axioms, source, name) = match split {
        Split::Test => (&kb.test, Source::Test, "test"),
        Split::Valid => (&kb.valid, Source::Valid, "valid"),
    };
    if axioms.is_empty() {
        return Err(CmdError::Input(format!("{name} split is empty")));
    }
    Ok((axioms, source))
}

/// Rank a split with a trained checkpoint; writes `eval_report.json` and
/// `eval_report_roc.csv` into `out`.
pub fn cmd_evaluate(
    checkpoint: &Path,
    dataset: &Path,
    config: &ConfigSource,
    flags: &EvalFlags,
    out: &Path,
) -> Result<String, CmdError> {
    let mut manifest = RunManifest::start("evaluate");
    let cfg = config.load(Some(&mut manifest))?;
    manifest = manifest.with_config(&cfg);
    manifest.seed = None;
    if !checkpoint.is_file() {
        return Err(CmdError::Input(format!("checkpoint {} does not exist", checkpoint.display())));
    }
    let (model, ck_sig) = load_checkpoint(checkpoint)?;
    manifest.input(checkpoint)?;
    let kb = load_kb(dataset)?;
    manifest.dataset(dataset)?;
    if ck_sig.class_names() != kb.signature.class_names() || ck_sig.relation_names() != kb.signature.relation_names() {
        return Err(CmdError::Input(format!(
            "checkpoint {} was trained on a different signature than {}",
            checkpoint.display(),
            dataset.display()
        )));
    }
    let (dc, options) = eval_setup(&kb, &cfg, flags, &mut manifest)?;
    let (axioms, source) = split_of(&kb, flags.split)?;
    let report = evaluate_split(&model, &kb, axioms, source, dc.as_ref(), &options)?;
    write_eval(&report, None, out, "eval_report", &mut manifest)?;
    manifest.finish(&out.join(MANIFEST))?;
    Ok(summary_line(&report.metrics, flags.filtered))
}

/// Fit and rank with the frequency baseline; writes `naive_report.json`
/// (including the per-relation tail scores) and `naive_report_roc.csv`.
pub fn cmd_naive(
    dataset: &Path,
    config: &ConfigSource,
    flags: &EvalFlags,
    symmetric: bool,
    head_pool: Option<&str>,
    out: &Path,
) -> Result<String, CmdError> {
    let mut manifest = RunManifest::start("naive");
    let cfg = config.load(Some(&mut manifest))?;
    manifest = manifest.with_config(&cfg);
    manifest.seed = None;
    let kb = load_kb(dataset)?;
    manifest.dataset(dataset)?;
    let (dc, options) = eval_setup(&kb, &cfg, flags, &mut manifest)?;
    let tails = resolve_pool(&kb, options.pool.as_deref())?;
    let heads = resolve_pool(&kb, head_pool)?;
    let train_gci2 = kb.axioms(Form::Gci2);
    let model = naive_fit(train_gci2, &heads, &tails, symmetric)?;

    let sig = &kb.signature;
    let mut scores: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for r in sig.relations() {
        if model.total(r) == 0 {
            continue;
        }
        let row = scores.entry(sig.relation_name(r).to_owned()).or_default();
        for &d in &tails {
            row.insert(sig.class_name(d).to_owned(), model.naive_score(d, r, d));
        }
    }
    let extra = json!({ "symmetric": symmetric, "scores": scores });

    let (axioms, source) = split_of(&kb, flags.split)?;
    let report = evaluate_split(&model, &kb, axioms, source, dc.as_ref(), &options)?;
    write_eval(&report, Some(extra), out, "naive_report", &mut manifest)?;
    manifest.finish(&out.join(MANIFEST))?;
    Ok(summary_line(&report.metrics, flags.filtered))
}

/// What `elgeo gen-toy` generates.
#[derive(Debug, Clone, Default)]
pub struct ToySource {
    /// The bundled hand-built knowledge base instead of a synthetic one.
    pub hand_built: bool,
    pub preset: Option<String>,
    pub file: Option<PathBuf>,
    pub overrides: Vec<String>,
}

/// Write a toy dataset into `out`.
pub fn cmd_gen_toy(source: &ToySource, out: &Path) -> Result<String, CmdError> {
    let mut manifest = RunManifest::start("gen-toy");
    let kb = if source.hand_built {
        if source.preset.is_some() || source.file.is_some() || !source.overrides.is_empty() {
            return Err(CmdError::Input("--hand-built takes no generator settings".into()));
        }
        manifest.config = json!({ "hand_built": true });
        toy::hand_built()
    } else {
        let base = match (&source.file, &source.preset) {
            (Some(_), Some(_)) => return Err(CmdError::Input("give either a config file or a preset, not both".into())),
            (Some(path), None) => {
                let text = fs::read_to_string(path).map_err(|e| CmdError::Input(format!("{}: {e}", path.display())))?;
                manifest.input(path)?;
                text
            }
            (None, Some(name)) => {
                let cfg = SyntheticConfig::preset(name, 0).ok_or_else(|| {
                    CmdError::Input(format!(
                        "unknown generator preset {name:?}; available: {}",
                        SYNTHETIC_PRESETS.join(", ")
                    ))
                })?;
                toml::to_string(&cfg).expect("serializable")
            }
            (None, None) => String::new(),
        };
        let cfg: SyntheticConfig = overlay(&base, &source.overrides)?;
        manifest.config = serde_json::to_value(&cfg).expect("serializable");
        manifest.seed = Some(cfg.seed);
        toy::generate(&cfg)?
    };
    write_dataset(&kb, out).map_err(|e| write_err(out, e))?;
    for name in ["train.tsv", "valid.tsv", "test.tsv", "pools.tsv"] {
        manifest.output(&out.join(name))?;
    }
    manifest.finish(&out.join(MANIFEST))?;
    Ok(format!(
        "{} classes, {} train axioms ({}), {} valid, {} test",
        kb.signature.num_classes(),
        kb.num_train(),
        count_line(&kb.form_counts()),
        kb.valid.len(),
        kb.test.len()
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse() {
        for name in preset_names() {
            let cfg = ExperimentConfig::from_toml(preset(name).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(cfg.train.lr, 0.01, "{name}");
        }
        let c = ExperimentConfig::from_toml(preset("closure-filtering").unwrap()).unwrap();
        assert!(c.sampler.filter_with_closure && c.train.extra_negatives);
        assert_eq!(c.model.dim, 100);
    }

    #[test]
    fn error_exit_codes() {
        assert_eq!(CmdError::Input(String::new()).exit_code(), 2);
        assert_eq!(CmdError::Runtime(String::new()).exit_code(), 1);
        let e: CmdError = ClosureError::BudgetExceeded { budget: 3 }.into();
        assert_eq!(e.exit_code(), 1);
        assert!(e.to_string().contains("closure.budget"));
    }
}
