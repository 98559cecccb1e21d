//! Training loop: per-form batches, frequency-weighted loss, Adam, plateau
//! learning-rate decay, early stopping and grid search.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closure::DeductiveClosure;
use crate::config::ExperimentConfig;
use crate::evaluation::{evaluate_split, EvalError, EvalOptions, Source};
use crate::geometry::{DenseGradient, EmbeddingModel, LossBreakdown, NoGrad, SparseGradient, Term};
use crate::kb::{ClassId, Form, KnowledgeBase, NormalizedAxiom};
use crate::sampling::{corrupt, Sampler, SamplerConfig, SamplerStats, SamplingError, CORRUPTIBLE};

/// Axioms per parallel work unit. Fixed so results do not depend on the
/// number of threads.
const CHUNK: usize = 2048;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss in term {term} at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { term: Term, epoch: usize, batch: usize },
    #[error("non-finite parameters after epoch {epoch}, batch {batch}")]
    NonFiniteParams { epoch: usize, batch: usize },
    #[error("all axiom counts are zero")]
    NoAxioms,
    #[error("unknown pool {0:?}")]
    UnknownPool(String),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightingMode {
    #[default]
    InverseFrequency,
    Proportional,
    Uniform,
}

/// What the scheduler and early stopping watch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidationLoss {
    /// Positive GCI2 loss on the valid split.
    #[default]
    Gci2Pos,
    /// Positive plus negative GCI2 loss, with one fixed corruption per axiom.
    Gci2PosNeg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weighting: WeightingMode,
    pub plateau_factor: f64,
    pub plateau_patience: usize,
    pub early_stop_patience: usize,
    pub seed: u64,
    /// Stop after this many optimizer steps; 0 means no limit.
    pub max_steps: u64,
    pub validation_loss: ValidationLoss,
    /// Add the GCI0, GCI1 and GCI3 negative losses to the GCI2 one.
    pub extra_negatives: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 400,
            batch_size: 32_768,
            lr: 0.01,
            weighting: WeightingMode::InverseFrequency,
            plateau_factor: 0.1,
            plateau_patience: 10,
            early_stop_patience: 20,
            seed: 42,
            max_steps: 0,
            validation_loss: ValidationLoss::Gci2Pos,
            extra_negatives: false,
        }
    }
}

/// Per-key loss weights from per-key counts. Keys with a zero count get
/// weight 0.
pub fn compute_weights<K: Ord + Copy>(
    counts: &BTreeMap<K, usize>,
    mode: WeightingMode,
) -> Result<BTreeMap<K, f64>, TrainError> {
    let active: Vec<(K, f64)> = counts
        .iter()
        .filter(|(_, n)| **n > 0)
        .map(|(k, n)| (*k, *n as f64))
        .collect();
    if active.is_empty() {
        return Err(TrainError::NoAxioms);
    }
    let g = active.len() as f64;
    let inv_sum: f64 = active.iter().map(|(_, n)| 1.0 / n).sum();
    let total: f64 = active.iter().map(|(_, n)| n).sum();
    Ok(counts
        .iter()
        .map(|(k, n)| {
            let w = match (*n, mode) {
                (0, _) => 0.0,
                (n, WeightingMode::InverseFrequency) => (1.0 / n as f64) * g / inv_sum,
                (n, WeightingMode::Proportional) => n as f64 / total,
                (_, WeightingMode::Uniform) => 1.0,
            };
            (*k, w)
        })
        .collect())
}

/// Adam over the three parameter arrays of a model.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: [Vec<f64>; 3],
    v: [Vec<f64>; 3],
}

impl Adam {
    pub fn new(model: &EmbeddingModel, lr: f64) -> Self {
        let (c, r, l) = model.params();
        let z = |n: usize| vec![0.0; n];
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: [z(c.len()), z(r.len()), z(l.len())],
            v: [z(c.len()), z(r.len()), z(l.len())],
        }
    }

    pub fn step(&mut self, model: &mut EmbeddingModel, grad: &DenseGradient) {
        self.t = self.t.saturating_add(1);
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        let (c, r, l) = model.params_mut();
        let groups: [(&mut [f64], &[f64]); 3] = [(c, &grad.centers), (r, &grad.radii), (l, &grad.relations)];
        for (i, (p, g)) in groups.into_iter().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..p.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let mh = m[j] / bc1;
                let vh = v[j] / bc2;
                p[j] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

/// Reduce-on-plateau: multiply the rate by `factor` once the watched value
/// has not improved for more than `patience` epochs.
#[derive(Debug, Clone)]
pub struct Plateau {
    pub factor: f64,
    pub patience: usize,
    best: f64,
    bad: usize,
}

impl Plateau {
    pub fn new(factor: f64, patience: usize) -> Self {
        Plateau {
            factor,
            patience,
            best: f64::INFINITY,
            bad: 0,
        }
    }

    /// Returns the new learning rate.
    pub fn observe(&mut self, value: f64, lr: f64) -> f64 {
        if value < self.best {
            self.best = value;
            self.bad = 0;
            return lr;
        }
        self.bad += 1;
        if self.bad > self.patience {
            self.bad = 0;
            lr * self.factor
        } else {
            lr
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub steps: u64,
    pub lr: f64,
    pub train: LossBreakdown,
    pub valid_loss: f64,
    pub sampler: SamplerStats,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// 0 when no epoch ran.
    pub best_epoch: usize,
    pub best_valid_loss: Option<f64>,
    pub stop_epoch: usize,
    pub stopped_early: bool,
    pub total_steps: u64,
    pub lr_trajectory: Vec<f64>,
    pub checkpoint: Option<String>,
}

impl TrainReport {
    /// One JSON object per epoch.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.epochs {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Training batches of each form plus the negative terms to pair them with.
struct Plan {
    forms: Vec<(Form, Vec<NormalizedAxiom>)>,
    negative: Vec<Form>,
    weights: BTreeMap<Term, f64>,
}

fn plan(kb: &KnowledgeBase, cfg: &ExperimentConfig) -> Result<Plan, TrainError> {
    let mut forms = Vec::new();
    let mut counts = BTreeMap::new();
    let mut negative = Vec::new();
    for form in Form::GCI {
        let axioms = kb.axioms(form);
        if axioms.is_empty() {
            continue;
        }
        counts.insert(Term::positive(form).expect("gci form"), axioms.len());
        if form == Form::Gci2 || (cfg.train.extra_negatives && CORRUPTIBLE.contains(&form)) {
            counts.insert(Term::negative(form).expect("corruptible"), axioms.len());
            negative.push(form);
        }
        forms.push((form, axioms.to_vec()));
    }
    let weights = if counts.is_empty() {
        BTreeMap::new()
    } else {
        compute_weights(&counts, cfg.train.weighting)?
    };
    Ok(Plan {
        forms,
        negative,
        weights,
    })
}

/// Sum of `term` over `axioms`, adding `scale ·` its gradient into `grad`.
fn batch_pass(
    model: &EmbeddingModel,
    term: Term,
    axioms: &[NormalizedAxiom],
    scale: f64,
    grad: &mut DenseGradient,
) -> f64 {
    let dim = model.dim();
    let parts: Vec<(f64, SparseGradient)> = axioms
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = SparseGradient::new(dim);
            let s: f64 = chunk.iter().map(|ax| model.accumulate(term, ax, scale, &mut g, true)).sum();
            (s, g)
        })
        .collect();
    let mut total = 0.0;
    for (s, g) in parts {
        total += s;
        g.add_to(grad);
    }
    total
}

fn mean_loss(model: &EmbeddingModel, term: Term, axioms: &[NormalizedAxiom]) -> f64 {
    if axioms.is_empty() {
        return 0.0;
    }
    let sums: Vec<f64> = axioms
        .par_chunks(CHUNK)
        .map(|chunk| chunk.iter().map(|ax| model.accumulate(term, ax, 1.0, &mut NoGrad, false)).sum())
        .collect();
    sums.iter().sum::<f64>() / axioms.len() as f64
}

/// Classes eligible as corruption targets or ranking candidates.
pub fn resolve_pool(kb: &KnowledgeBase, name: Option<&str>) -> Result<Vec<ClassId>, TrainError> {
    match name {
        Some(n) => kb
            .pool(n)
            .map(<[ClassId]>::to_vec)
            .ok_or_else(|| TrainError::UnknownPool(n.to_owned())),
        None => Ok(kb.signature.named_classes().collect()),
    }
}

/// Train a model on the training axioms of `kb`. Returns the parameters of
/// the epoch with the lowest validation loss.
pub fn train(
    kb: &KnowledgeBase,
    dc: Option<&DeductiveClosure>,
    cfg: &ExperimentConfig,
) -> Result<(EmbeddingModel, TrainReport), TrainError> {
    let tc = &cfg.train;
    let sig = &kb.signature;
    let mut model = EmbeddingModel::new(sig.num_classes(), sig.num_relations(), cfg.model.model_config(), tc.seed);
    let mut report = TrainReport {
        seed: tc.seed,
        ..Default::default()
    };
    if tc.epochs == 0 {
        return Ok((model, report));
    }

    let plan = plan(kb, cfg)?;
    let mut scfg = SamplerConfig::with_pool(resolve_pool(kb, cfg.sampler.pool.as_deref())?, tc.seed ^ 0x5eed_5a3d);
    scfg.filter_with_closure = cfg.sampler.filter_with_closure;
    scfg.entailed_ratio = cfg.sampler.entailed_ratio;
    scfg.max_resample_attempts = cfg.sampler.max_resample_attempts;
    let mut sampler = Sampler::new(scfg.clone(), dc, kb.train().copied())?;
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);

    let valid_neg: Vec<NormalizedAxiom> = match tc.validation_loss {
        ValidationLoss::Gci2Pos => Vec::new(),
        ValidationLoss::Gci2PosNeg => {
            let mut vr = ChaCha8Rng::seed_from_u64(tc.seed.wrapping_add(1));
            let pool = &scfg.pools[&Form::Gci2];
            kb.valid
                .iter()
                .map(|ax| corrupt(ax, pool, &mut vr))
                .collect::<Result<_, _>>()?
        }
    };

    let mut adam = Adam::new(&model, tc.lr);
    let mut plateau = Plateau::new(tc.plateau_factor, tc.plateau_patience);
    let mut grad = DenseGradient::zeros(sig.num_classes(), sig.num_relations(), model.dim());
    let mut best = model.clone();
    let mut best_val = f64::INFINITY;
    let mut forms = plan.forms.clone();

    for epoch in 1..=tc.epochs {
        for (_, axioms) in forms.iter_mut() {
            axioms.shuffle(&mut rng);
        }
        let n_batches = forms
            .iter()
            .map(|(_, a)| a.len().div_ceil(tc.batch_size))
            .max()
            .unwrap_or(0);
        let mut sums: BTreeMap<Term, (f64, usize)> = BTreeMap::new();
        let mut steps = 0u64;
        for b in 0..n_batches {
            grad.clear();
            for (form, axioms) in &forms {
                let lo = b * tc.batch_size;
                if lo >= axioms.len() {
                    continue;
                }
                let batch = &axioms[lo..(lo + tc.batch_size).min(axioms.len())];
                let mut terms: Vec<(Term, Vec<NormalizedAxiom>)> = Vec::with_capacity(2);
                if plan.negative.contains(form) {
                    let neg = sampler.sample_negatives(batch)?;
                    terms.push((Term::negative(*form).expect("corruptible"), neg));
                }
                let pos = Term::positive(*form).expect("gci form");
                for (term, axs) in std::iter::once((pos, batch)).chain(terms.iter().map(|(t, v)| (*t, v.as_slice()))) {
                    if axs.is_empty() {
                        continue;
                    }
                    let w = plan.weights.get(&term).copied().unwrap_or(0.0);
                    let scale = w / axs.len() as f64;
                    let s = batch_pass(&model, term, axs, scale, &mut grad);
                    if !s.is_finite() {
                        return Err(TrainError::NonFiniteLoss {
                            term,
                            epoch,
                            batch: b + 1,
                        });
                    }
                    let e = sums.entry(term).or_insert((0.0, 0));
                    e.0 += s;
                    e.1 += axs.len();
                }
            }
            adam.step(&mut model, &grad);
            if !model.is_finite() {
                return Err(TrainError::NonFiniteParams { epoch, batch: b + 1 });
            }
            steps += 1;
            report.total_steps += 1;
            if tc.max_steps > 0 && report.total_steps >= tc.max_steps {
                break;
            }
        }

        let terms: BTreeMap<Term, f64> = sums.iter().map(|(t, (s, n))| (*t, s / *n as f64)).collect();
        let breakdown = LossBreakdown::new(terms, plan.weights.clone());
        let valid_loss = if kb.valid.is_empty() {
            breakdown.positive_total()
        } else {
            let mut v = mean_loss(&model, Term::Gci2, &kb.valid);
            if !valid_neg.is_empty() {
                v += mean_loss(&model, Term::Gci2Neg, &valid_neg);
            }
            v
        };
        report.lr_trajectory.push(adam.lr);
        report.epochs.push(EpochRecord {
            epoch,
            steps,
            lr: adam.lr,
            train: breakdown,
            valid_loss,
            sampler: sampler.take_stats(),
        });
        report.stop_epoch = epoch;
        if valid_loss < best_val {
            best_val = valid_loss;
            report.best_epoch = epoch;
            best.clone_from(&model);
        }
        adam.lr = plateau.observe(valid_loss, adam.lr);
        if tc.max_steps > 0 && report.total_steps >= tc.max_steps {
            break;
        }
        if epoch - report.best_epoch >= tc.early_stop_patience {
            report.stopped_early = epoch < tc.epochs;
            break;
        }
    }
    if report.best_epoch == 0 {
        // Validation never produced a finite value; keep the last parameters.
        best = model;
    }
    report.best_valid_loss = best_val.is_finite().then_some(best_val);
    Ok((best, report))
}

/// One point of a hyperparameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub margin: f64,
    pub dim: usize,
    pub reg_radius: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRun {
    pub point: GridPoint,
    pub valid_macro_mr: f64,
    pub best_epoch: usize,
    pub stop_epoch: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFailure {
    pub point: GridPoint,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    /// Best (lowest validation macro mean rank) first.
    pub ranked: Vec<GridRun>,
    pub failures: Vec<GridFailure>,
}

impl GridResult {
    /// Tab-separated results table.
    pub fn table(&self) -> String {
        let mut out = String::from("rank\tmargin\tdim\treg_radius\tlr\tvalid_macro_mr\tbest_epoch\tstop_epoch\n");
        for (i, r) in self.ranked.iter().enumerate() {
            let p = &r.point;
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                i + 1,
                p.margin,
                p.dim,
                p.reg_radius,
                p.lr,
                r.valid_macro_mr,
                r.best_epoch,
                r.stop_epoch
            ));
        }
        for f in &self.failures {
            let p = &f.point;
            out.push_str(&format!(
                "failed\t{}\t{}\t{}\t{}\t{}\t\t\n",
                p.margin, p.dim, p.reg_radius, p.lr, f.error
            ));
        }
        out
    }
}

/// All combinations of the grid lists in `cfg.grid`, in nested list order.
pub fn grid_points(cfg: &ExperimentConfig) -> Vec<GridPoint> {
    let g = &cfg.grid;
    let mut out = Vec::new();
    for &margin in &g.margin {
        for &dim in &g.dim {
            for &reg_radius in &g.reg_radius {
                for &lr in &g.lr {
                    out.push(GridPoint {
                        margin,
                        dim,
                        reg_radius,
                        lr,
                    });
                }
            }
        }
    }
    out
}

/// Train every grid point and rank by validation macro mean rank. Failed
/// runs are recorded and do not stop the sweep.
pub fn grid_search(
    kb: &KnowledgeBase,
    dc: Option<&DeductiveClosure>,
    base: &ExperimentConfig,
) -> Result<GridResult, TrainError> {
    if kb.valid.is_empty() {
        return Err(TrainError::Eval(EvalError::EmptySplit("valid")));
    }
    let options = EvalOptions {
        pool: base.eval.pool.clone(),
        tie_mode: base.eval.tie_mode,
        closure_positives: false,
    };
    let outcomes: Vec<(GridPoint, Result<GridRun, String>)> = grid_points(base)
        .into_par_iter()
        .map(|point| {
            let mut cfg = base.clone();
            cfg.model.margin = point.margin;
            cfg.model.dim = point.dim;
            cfg.model.reg_radius = point.reg_radius;
            cfg.train.lr = point.lr;
            let run = train(kb, dc, &cfg).map_err(|e| e.to_string()).and_then(|(model, report)| {
                let rep = evaluate_split(&model, kb, &kb.valid, Source::Valid, None, &options).map_err(|e| e.to_string())?;
                Ok(GridRun {
                    point: point.clone(),
                    valid_macro_mr: rep.metrics.macro_mr,
                    best_epoch: report.best_epoch,
                    stop_epoch: report.stop_epoch,
                })
            });
            (point, run)
        })
        .collect();
    let mut result = GridResult::default();
    for (point, run) in outcomes {
        match run {
            Ok(r) if r.valid_macro_mr.is_finite() => result.ranked.push(r),
            Ok(r) => result.failures.push(GridFailure {
                point,
                error: format!("non-finite validation mean rank {}", r.valid_macro_mr),
            }),
            Err(error) => result.failures.push(GridFailure { point, error }),
        }
    }
    result
        .ranked
        .sort_by(|a, b| a.valid_macro_mr.total_cmp(&b.valid_macro_mr));
    Ok(result)
}

/// Write the report as JSON lines.
pub fn write_report(report: &TrainReport, path: &Path) -> Result<(), TrainError> {
    let f = std::fs::File::create(path).map_err(|e| TrainError::Io(format!("{}: {e}", path.display())))?;
    report
        .write_jsonl(std::io::BufWriter::new(f))
        .map_err(|e| TrainError::Io(format!("{}: {e}", path.display())))
}
