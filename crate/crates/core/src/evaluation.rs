//! Ranking evaluation of GCI2 completion and the frequency baseline.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closure::{ClosureError, DeductiveClosure};
use crate::config::TieMode;
use crate::geometry::EmbeddingModel;
use crate::kb::{ClassId, Form, KnowledgeBase, NormalizedAxiom, RelId};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("candidate pool is empty")]
    EmptyPool,
    #[error("unknown pool {0:?}")]
    UnknownPool(String),
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("true tail of {0} is missing from the candidates")]
    MissingTail(String),
    #[error("no records to aggregate")]
    NoRecords,
    #[error("axiom tail {0} lies outside the tail pool")]
    TailOutsidePool(String),
    #[error(transparent)]
    Closure(#[from] ClosureError),
}

/// Anything that scores `c ⊑ ∃r.d`; higher is more plausible.
pub trait Scorer: Sync {
    fn score_tails(&self, c: ClassId, r: RelId, tails: &[ClassId], out: &mut Vec<f64>);
}

impl Scorer for EmbeddingModel {
    fn score_tails(&self, c: ClassId, r: RelId, tails: &[ClassId], out: &mut Vec<f64>) {
        EmbeddingModel::score_tails(self, c, r, tails, out)
    }
}

/// Raw and filtered rank of one axiom.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rank {
    pub raw: f64,
    pub filtered: f64,
    pub candidates: usize,
    pub filtered_candidates: usize,
}

/// Rank of `scores[truth]` among `scores`. Candidates with `removed[i]` set
/// are skipped for the filtered rank; the true candidate never is.
pub fn rank_from_scores(scores: &[f64], truth: usize, removed: &[bool], tie: TieMode) -> Rank {
    let s = scores[truth];
    let (mut above, mut ties, mut f_above, mut f_ties, mut f_n) = (0usize, 0usize, 0usize, 0usize, 0usize);
    for (i, &x) in scores.iter().enumerate() {
        if i == truth {
            continue;
        }
        let keep = !removed.get(i).copied().unwrap_or(false);
        if keep {
            f_n += 1;
        }
        if x > s {
            above += 1;
            f_above += keep as usize;
        } else if x == s {
            ties += 1;
            f_ties += keep as usize;
        }
    }
    let r = |above: usize, ties: usize| match tie {
        TieMode::Optimistic => 1.0 + above as f64,
        TieMode::Average => 1.0 + above as f64 + ties as f64 / 2.0,
    };
    Rank {
        raw: r(above, ties),
        filtered: r(f_above, f_ties),
        candidates: scores.len(),
        filtered_candidates: f_n + 1,
    }
}

/// Rank the tail of a GCI2 axiom among `candidates`, optionally removing
/// candidate axioms found in `filter`.
pub fn rank_axiom<S: Scorer + ?Sized>(
    scorer: &S,
    ax: &NormalizedAxiom,
    candidates: &[ClassId],
    filter: Option<&HashSet<NormalizedAxiom>>,
    tie: TieMode,
) -> Result<Rank, EvalError> {
    let (c, r, d) = ax
        .as_gci2()
        .ok_or_else(|| EvalError::MissingTail(format!("{ax:?} (not a GCI2 axiom)")))?;
    let truth = candidates
        .iter()
        .position(|x| *x == d)
        .ok_or_else(|| EvalError::MissingTail(format!("{ax:?}")))?;
    let mut scores = Vec::with_capacity(candidates.len());
    scorer.score_tails(c, r, candidates, &mut scores);
    let removed: Vec<bool> = match filter {
        Some(f) => candidates
            .iter()
            .map(|&x| x != d && f.contains(&NormalizedAxiom::Gci2(c, r, x)))
            .collect(),
        None => Vec::new(),
    };
    Ok(rank_from_scores(&scores, truth, &removed, tie))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Test,
    Valid,
    /// GCI2 member of the deductive closure outside train and test.
    Closure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRecord {
    pub head: String,
    pub relation: String,
    pub tail: String,
    #[serde(skip)]
    pub head_id: ClassId,
    pub raw_rank: f64,
    pub filtered_rank: f64,
    pub candidates: usize,
    pub filtered_candidates: usize,
    pub raw_auc: f64,
    pub filtered_auc: f64,
    pub source: Source,
    /// Membership in the deductive closure, when one was given.
    pub entailed: Option<bool>,
}

/// `(N − rank) / (N − 1)`, 1 for a single candidate.
pub fn axiom_auc(rank: f64, n: usize) -> f64 {
    if n <= 1 {
        1.0
    } else {
        (n as f64 - rank) / (n as f64 - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub hits_10: f64,
    pub hits_100: f64,
    pub fhits_10: f64,
    pub fhits_100: f64,
    pub macro_mr: f64,
    pub micro_mr: f64,
    pub macro_fmr: f64,
    pub micro_fmr: f64,
    pub macro_auc: f64,
    pub micro_auc: f64,
    pub macro_fauc: f64,
    pub micro_fauc: f64,
}

/// ROC over the rank histogram: x runs over the distinct ranks, y is the
/// fraction of axioms ranked at or above x, closed with `(n, 1)`. The area
/// is the trapezoid integral divided by `n`.
pub fn rank_roc(ranks: &[f64], n: usize) -> (f64, Vec<RocPoint>) {
    if ranks.is_empty() || n == 0 {
        return (0.0, Vec::new());
    }
    let mut hist: BTreeMap<u64, (f64, usize)> = BTreeMap::new();
    for &r in ranks {
        hist.entry(r.to_bits()).or_insert((r, 0)).1 += 1;
    }
    let mut xs: Vec<(f64, usize)> = hist.into_values().collect();
    xs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total = ranks.len() as f64;
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(xs.len() + 1);
    let mut cum = 0usize;
    for (x, k) in xs {
        cum += k;
        pts.push((x, cum as f64 / total));
    }
    pts.push((n as f64, 1.0));
    let nf = n as f64;
    let area: f64 = pts
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum();
    let roc = pts.iter().map(|&(x, y)| RocPoint { fpr: x / nf, tpr: y }).collect();
    (area / nf, roc)
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// The twelve aggregate metrics of a set of records. `n` is the candidate
/// count used by the histogram AUC.
pub fn aggregate(records: &[RankRecord]) -> Result<Metrics, EvalError> {
    if records.is_empty() {
        return Err(EvalError::NoRecords);
    }
    let n = records.iter().map(|r| r.candidates).max().unwrap_or(0);
    let raw: Vec<f64> = records.iter().map(|r| r.raw_rank).collect();
    let filt: Vec<f64> = records.iter().map(|r| r.filtered_rank).collect();
    let hits = |ranks: &[f64], k: f64| ranks.iter().filter(|r| **r <= k).count() as f64 / ranks.len() as f64;

    type HeadRanks = (Vec<f64>, Vec<f64>);
    let mut by_head: BTreeMap<ClassId, HeadRanks> = BTreeMap::new();
    for r in records {
        let e = by_head.entry(r.head_id).or_default();
        e.0.push(r.raw_rank);
        e.1.push(r.filtered_rank);
    }
    let micro = |pick: fn(&HeadRanks) -> &Vec<f64>, f: &dyn Fn(&[f64]) -> f64| {
        mean(by_head.values().map(|v| f(pick(v))))
    };
    let mr = |v: &[f64]| mean(v.iter().copied());
    let auc = |v: &[f64]| rank_roc(v, n).0;
    Ok(Metrics {
        hits_10: hits(&raw, 10.0),
        hits_100: hits(&raw, 100.0),
        fhits_10: hits(&filt, 10.0),
        fhits_100: hits(&filt, 100.0),
        macro_mr: mr(&raw),
        micro_mr: micro(|v| &v.0, &mr),
        macro_fmr: mr(&filt),
        micro_fmr: micro(|v| &v.1, &mr),
        macro_auc: auc(&raw),
        micro_auc: micro(|v| &v.0, &auc),
        macro_fauc: auc(&filt),
        micro_fauc: micro(|v| &v.1, &auc),
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Named candidate pool; all named classes when absent.
    pub pool: Option<String>,
    pub tie_mode: TieMode,
    /// Also rank GCI2 members of the closure that are in neither train nor test.
    pub closure_positives: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub tie_mode: TieMode,
    pub num_candidates: usize,
    pub metrics: Metrics,
    /// Metrics of the entailed and novel parts of the evaluated split.
    pub entailed_metrics: Option<Metrics>,
    pub novel_metrics: Option<Metrics>,
    /// Metrics of the closure-derived positives.
    pub closure_metrics: Option<Metrics>,
    pub records: Vec<RankRecord>,
    pub roc: BTreeMap<String, Vec<RocPoint>>,
}

fn pool_of(kb: &KnowledgeBase, name: Option<&str>) -> Result<Vec<ClassId>, EvalError> {
    let pool: Vec<ClassId> = match name {
        Some(n) => kb
            .pool(n)
            .ok_or_else(|| EvalError::UnknownPool(n.to_owned()))?
            .to_vec(),
        None => kb.signature.named_classes().collect(),
    };
    if pool.is_empty() {
        return Err(EvalError::EmptyPool);
    }
    Ok(pool)
}

fn rank_all<S: Scorer + ?Sized>(
    scorer: &S,
    kb: &KnowledgeBase,
    axioms: &[NormalizedAxiom],
    pool: &[ClassId],
    filter: &HashSet<NormalizedAxiom>,
    tie: TieMode,
    source: Source,
) -> Result<Vec<RankRecord>, EvalError> {
    let sig = &kb.signature;
    axioms
        .par_iter()
        .map(|ax| {
            let rank = rank_axiom(scorer, ax, pool, Some(filter), tie)
                .map_err(|_| EvalError::MissingTail(ax.display(sig).to_string()))?;
            let (c, r, d) = ax.as_gci2().expect("checked by rank_axiom");
            Ok(RankRecord {
                head: sig.class_name(c).to_owned(),
                relation: sig.relation_name(r).to_owned(),
                tail: sig.class_name(d).to_owned(),
                head_id: c,
                raw_rank: rank.raw,
                filtered_rank: rank.filtered,
                candidates: rank.candidates,
                filtered_candidates: rank.filtered_candidates,
                raw_auc: axiom_auc(rank.raw, rank.candidates),
                filtered_auc: axiom_auc(rank.filtered, rank.filtered_candidates),
                source,
                entailed: None,
            })
        })
        .collect()
}

/// Rank every axiom of `split` over the candidate pool, filtering train
/// axioms. With a closure, records are labelled entailed or novel and the
/// report carries separate curves for both.
pub fn evaluate_split<S: Scorer + ?Sized>(
    scorer: &S,
    kb: &KnowledgeBase,
    split: &[NormalizedAxiom],
    source: Source,
    dc: Option<&DeductiveClosure>,
    options: &EvalOptions,
) -> Result<RankingReport, EvalError> {
    if split.is_empty() {
        return Err(EvalError::EmptySplit("evaluated"));
    }
    let pool = pool_of(kb, options.pool.as_deref())?;
    let filter: HashSet<NormalizedAxiom> = kb.axioms(Form::Gci2).iter().copied().collect();
    let mut records = rank_all(scorer, kb, split, &pool, &filter, options.tie_mode, source)?;
    let metrics = aggregate(&records)?;
    let n = records.iter().map(|r| r.candidates).max().unwrap_or(0);

    let mut roc = BTreeMap::new();
    let raw: Vec<f64> = records.iter().map(|r| r.raw_rank).collect();
    let filt: Vec<f64> = records.iter().map(|r| r.filtered_rank).collect();
    roc.insert("raw".to_owned(), rank_roc(&raw, n).1);
    roc.insert("filtered".to_owned(), rank_roc(&filt, n).1);

    let (mut entailed_metrics, mut novel_metrics, mut closure_metrics) = (None, None, None);
    if let Some(dc) = dc {
        for (rec, ax) in records.iter_mut().zip(split) {
            rec.entailed = Some(dc.contains(ax)?);
        }
        for (name, want) in [("entailed", true), ("novel", false)] {
            let part: Vec<RankRecord> = records.iter().filter(|r| r.entailed == Some(want)).cloned().collect();
            let ranks: Vec<f64> = part.iter().map(|r| r.filtered_rank).collect();
            roc.insert(name.to_owned(), rank_roc(&ranks, n).1);
            let m = aggregate(&part).ok();
            if want {
                entailed_metrics = m;
            } else {
                novel_metrics = m;
            }
        }
        if options.closure_positives {
            let in_pool: HashSet<ClassId> = pool.iter().copied().collect();
            let known: HashSet<NormalizedAxiom> = kb.train().chain(split).copied().collect();
            let extra: Vec<NormalizedAxiom> = dc
                .members(Form::Gci2)
                .into_iter()
                .map(|(a, _)| a)
                .filter(|a| !known.contains(a))
                .filter(|a| a.as_gci2().is_some_and(|(_, _, d)| in_pool.contains(&d)))
                .collect();
            let mut cl = rank_all(scorer, kb, &extra, &pool, &filter, options.tie_mode, Source::Closure)?;
            for r in cl.iter_mut() {
                r.entailed = Some(true);
            }
            let ranks: Vec<f64> = cl.iter().map(|r| r.filtered_rank).collect();
            roc.insert("closure".to_owned(), rank_roc(&ranks, n).1);
            closure_metrics = aggregate(&cl).ok();
            records.extend(cl);
        }
    }
    Ok(RankingReport {
        tie_mode: options.tie_mode,
        num_candidates: pool.len(),
        metrics,
        entailed_metrics,
        novel_metrics,
        closure_metrics,
        records,
        roc,
    })
}

/// Evaluate the test split.
pub fn evaluate<S: Scorer + ?Sized>(
    scorer: &S,
    kb: &KnowledgeBase,
    dc: Option<&DeductiveClosure>,
    options: &EvalOptions,
) -> Result<RankingReport, EvalError> {
    if kb.test.is_empty() {
        return Err(EvalError::EmptySplit("test"));
    }
    evaluate_split(scorer, kb, &kb.test, Source::Test, dc, options)
}

/// Write ROC points as `curve_name,fpr,tpr` rows, ordered by fpr per curve.
pub fn emit_roc<W: Write>(report: Option<&RankingReport>, mut w: W) -> std::io::Result<()> {
    writeln!(w, "curve_name,fpr,tpr")?;
    if let Some(report) = report {
        for (name, pts) in &report.roc {
            let mut pts = pts.clone();
            pts.sort_by(|a, b| a.fpr.total_cmp(&b.fpr));
            for p in pts {
                writeln!(w, "{name},{},{}", p.fpr, p.tpr)?;
            }
        }
    }
    Ok(())
}

/// Frequency baseline: per relation, a 0/1 matrix over (head, tail) pairs
/// seen in training. The score of a tail is its column sum over the total.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NaiveModel {
    pub symmetric: bool,
    entries: HashMap<RelId, HashSet<(ClassId, ClassId)>>,
    column: HashMap<RelId, HashMap<ClassId, u64>>,
}

/// Build the baseline from training GCI2 axioms.
pub fn naive_fit(
    axioms: &[NormalizedAxiom],
    heads: &[ClassId],
    tails: &[ClassId],
    symmetric: bool,
) -> Result<NaiveModel, EvalError> {
    let heads: HashSet<ClassId> = heads.iter().copied().collect();
    let tails: HashSet<ClassId> = tails.iter().copied().collect();
    let mut m = NaiveModel {
        symmetric,
        ..Default::default()
    };
    for ax in axioms {
        let Some((c, r, d)) = ax.as_gci2() else { continue };
        if !tails.contains(&d) {
            return Err(EvalError::TailOutsidePool(format!("{ax:?}")));
        }
        m.insert(r, c, d);
        if symmetric && heads.contains(&d) && tails.contains(&c) {
            m.insert(r, d, c);
        }
    }
    Ok(m)
}

impl NaiveModel {
    fn insert(&mut self, r: RelId, h: ClassId, t: ClassId) {
        if self.entries.entry(r).or_default().insert((h, t)) {
            *self.column.entry(r).or_default().entry(t).or_insert(0) += 1;
        }
    }

    /// `M_r(h, t)`
    pub fn entry(&self, r: RelId, h: ClassId, t: ClassId) -> u8 {
        self.entries.get(&r).is_some_and(|e| e.contains(&(h, t))) as u8
    }

    pub fn total(&self, r: RelId) -> u64 {
        self.entries.get(&r).map_or(0, |e| e.len() as u64)
    }

    pub fn column_sum(&self, r: RelId, t: ClassId) -> u64 {
        self.column.get(&r).and_then(|c| c.get(&t)).copied().unwrap_or(0)
    }

    /// Head-independent score; 0 for an empty matrix.
    pub fn naive_score(&self, _c: ClassId, r: RelId, d: ClassId) -> f64 {
        let total = self.total(r);
        if total == 0 {
            0.0
        } else {
            self.column_sum(r, d) as f64 / total as f64
        }
    }
}

impl Scorer for NaiveModel {
    fn score_tails(&self, c: ClassId, r: RelId, tails: &[ClassId], out: &mut Vec<f64>) {
        out.clear();
        out.extend(tails.iter().map(|&d| self.naive_score(c, r, d)));
    }
}
