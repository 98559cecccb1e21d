//! Independent oracles shared by the integration tests. The oracles call
//! into the code under test only for plain data types; `check_table`
//! compares the two.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use elgeo::config::TieMode;
use elgeo::kb::{ClassId, Form, KnowledgeBase, NormalizedAxiom, RelId, Signature};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random KB over `c0..c{n}` and `r0..r{k}`, mixing every GCI form. ⊤ and
/// ⊥ occasionally appear in class slots.
pub fn random_kb(seed: u64, max_classes: usize, max_rels: usize, max_axioms: usize) -> KnowledgeBase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sig = Signature::new();
    let n = rng.gen_range(3..=max_classes);
    let k = rng.gen_range(1..=max_rels);
    let classes: Vec<ClassId> = (0..n).map(|i| sig.intern_class(&format!("c{i}"))).collect();
    let rels: Vec<RelId> = (0..k).map(|i| sig.intern_relation(&format!("r{i}"))).collect();
    let m = rng.gen_range(0..=max_axioms);
    let mut axioms = Vec::with_capacity(m);
    let pick = |rng: &mut ChaCha8Rng| -> ClassId {
        match rng.gen_range(0..40) {
            0 => ClassId::TOP,
            _ => *classes.choose(rng).unwrap(),
        }
    };
    for _ in 0..m {
        let r = *rels.choose(&mut rng).unwrap();
        let (a, b, c) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
        use NormalizedAxiom::*;
        let ax = match rng.gen_range(0..100) {
            0..=34 => Gci0(a, b),
            35..=44 => Gci1(a, b, c),
            45..=69 => Gci2(a, r, b),
            70..=84 => Gci3(r, a, b),
            85..=89 => Gci0Bot(a),
            90..=94 => Gci1Bot(a, b),
            _ => Gci3Bot(r, a),
        };
        axioms.push(ax);
    }
    axioms.sort();
    axioms.dedup();
    KnowledgeBase::from_axioms(sig, axioms).expect("random kb is well formed")
}

/// Completion rules applied by rescanning every axiom for every class until
/// nothing changes. Returns the subsumer set of every class.
pub fn rescan_saturate(num_classes: usize, axioms: &[NormalizedAxiom]) -> Vec<BTreeSet<ClassId>> {
    use NormalizedAxiom::*;
    let mut s: Vec<BTreeSet<ClassId>> = (0..num_classes)
        .map(|i| [ClassId(i as u32), ClassId::TOP].into_iter().collect())
        .collect();
    let mut edges: BTreeSet<(RelId, ClassId, ClassId)> = BTreeSet::new();
    loop {
        let mut changed = false;
        for ci in 0..num_classes {
            let c = ClassId(ci as u32);
            let mut add: Vec<ClassId> = Vec::new();
            let mut new_edges = Vec::new();
            for ax in axioms {
                let has = |x: ClassId| s[ci].contains(&x);
                match *ax {
                    Gci0(a, b) if has(a) => add.push(b),
                    Gci1(a, b, e) if has(a) && has(b) => add.push(e),
                    Gci2(a, r, b) if has(a) => new_edges.push((r, c, b)),
                    Gci0Bot(a) if has(a) => add.push(ClassId::BOT),
                    Gci1Bot(a, b) if has(a) && has(b) => add.push(ClassId::BOT),
                    _ => {}
                }
            }
            for &(r, from, to) in edges.iter().filter(|e| e.1 == c) {
                let _ = from;
                let succ = &s[to.index()];
                if succ.contains(&ClassId::BOT) {
                    add.push(ClassId::BOT);
                }
                for ax in axioms {
                    match *ax {
                        Gci3(r3, a, e) if r3 == r && succ.contains(&a) => add.push(e),
                        Gci3Bot(r3, a) if r3 == r && succ.contains(&a) => add.push(ClassId::BOT),
                        _ => {}
                    }
                }
            }
            for d in add {
                changed |= s[ci].insert(d);
            }
            for e in new_edges {
                changed |= edges.insert(e);
            }
        }
        if !changed {
            return s;
        }
    }
}

/// `C ⊑ D` under the oracle subsumer sets, with unsatisfiable classes
/// subsumed by everything.
pub fn oracle_subsumes(s: &[BTreeSet<ClassId>], c: ClassId, d: ClassId) -> bool {
    s[c.index()].contains(&ClassId::BOT) || s[c.index()].contains(&d)
}

fn canon(ax: NormalizedAxiom) -> NormalizedAxiom {
    use NormalizedAxiom::*;
    match ax {
        Gci0(c, ClassId::BOT) => Gci0Bot(c),
        Gci1(c, d, ClassId::BOT) => Gci1Bot(c, d),
        Gci2(c, _, ClassId::BOT) => Gci0Bot(c),
        Gci3(r, c, ClassId::BOT) => Gci3Bot(r, c),
        a => a,
    }
}

/// Fixpoint of the single-premise closure rewrites over every member, not
/// only the asserted ones. `s` holds the stored subsumer sets.
pub fn closure_fixpoint(asserted: &[NormalizedAxiom], s: &[BTreeSet<ClassId>]) -> BTreeMap<Form, BTreeSet<NormalizedAxiom>> {
    use NormalizedAxiom::*;
    let n = s.len();
    let stored = |c: ClassId, d: ClassId| s[c.index()].contains(&d);
    let mut set: BTreeSet<NormalizedAxiom> = asserted
        .iter()
        .copied()
        .map(canon)
        .filter(|a| !matches!(a.form(), Form::Ri0 | Form::Ri1))
        .collect();
    for c in 0..n {
        for &d in &s[c] {
            set.insert(canon(Gci0(ClassId(c as u32), d)));
        }
    }
    loop {
        let mut new = Vec::new();
        for &ax in &set {
            for x in 0..n as u32 {
                let x = ClassId(x);
                match ax {
                    Gci0(c, d) => {
                        if stored(d, x) {
                            new.push(Gci0(c, x));
                        }
                        if stored(x, c) {
                            new.push(Gci0(x, d));
                        }
                    }
                    Gci1(c, d, e) if stored(x, c) => new.push(Gci1(x, d, e)),
                    Gci2(c, r, d) => {
                        if stored(d, x) {
                            new.push(Gci2(c, r, x));
                        }
                        if stored(x, c) {
                            new.push(Gci2(x, r, d));
                        }
                    }
                    Gci3(r, c, d) => {
                        if stored(d, x) {
                            new.push(Gci3(r, c, x));
                        }
                        if stored(x, c) {
                            new.push(Gci3(r, x, d));
                        }
                    }
                    Gci0Bot(c) if stored(x, c) => new.push(Gci0Bot(x)),
                    Gci3Bot(r, c) if stored(x, c) => new.push(Gci3Bot(r, x)),
                    _ => {}
                }
            }
        }
        let before = set.len();
        set.extend(new.into_iter().map(canon));
        if set.len() == before {
            break;
        }
    }
    let mut out: BTreeMap<Form, BTreeSet<NormalizedAxiom>> = Form::GCI.iter().map(|f| (*f, BTreeSet::new())).collect();
    for ax in set {
        out.get_mut(&ax.form()).unwrap().insert(ax);
    }
    out
}

/// Rank by sorting the kept candidates in descending score order.
pub fn sort_rank(scores: &[f64], truth: usize, removed: &[bool], tie: TieMode) -> f64 {
    let mut kept: Vec<f64> = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| *i == truth || !removed.get(*i).copied().unwrap_or(false))
        .map(|(_, s)| *s)
        .collect();
    kept.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let s = scores[truth];
    let first = kept.iter().position(|x| *x == s).unwrap();
    let equal = kept.iter().filter(|x| **x == s).count();
    match tie {
        TieMode::Optimistic => (first + 1) as f64,
        TieMode::Average => first as f64 + 1.0 + (equal - 1) as f64 / 2.0,
    }
}

/// One ranked axiom for the metric oracle.
#[derive(Debug, Clone, Copy)]
pub struct OracleRecord {
    pub head: u32,
    pub raw: f64,
    pub filtered: f64,
}

/// Area under the rank-histogram curve: the points are the distinct ranks
/// with the fraction of ranks at or below each one, closed by `(n, 1)`,
/// integrated with trapezoids and divided by `n`. Fractions are counted
/// directly for every threshold.
pub fn histogram_auc(ranks: &[f64], n: usize) -> f64 {
    let mut xs: Vec<f64> = ranks.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    let mut pts: Vec<(f64, f64)> = xs
        .iter()
        .map(|&x| (x, ranks.iter().filter(|r| **r <= x).count() as f64 / ranks.len() as f64))
        .collect();
    pts.push((n as f64, 1.0));
    let mut area = 0.0;
    for i in 1..pts.len() {
        area += (pts[i].0 - pts[i - 1].0) * (pts[i].1 + pts[i - 1].1) / 2.0;
    }
    area / n as f64
}

/// The twelve aggregates in the order hits_10, hits_100, fhits_10,
/// fhits_100, macro_mr, micro_mr, macro_fmr, micro_fmr, macro_auc,
/// micro_auc, macro_fauc, micro_fauc.
pub fn oracle_metrics(records: &[OracleRecord], n: usize) -> [f64; 12] {
    let raw: Vec<f64> = records.iter().map(|r| r.raw).collect();
    let filt: Vec<f64> = records.iter().map(|r| r.filtered).collect();
    let hits = |v: &[f64], k: f64| v.iter().filter(|x| **x <= k).count() as f64 / v.len() as f64;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mut heads: Vec<u32> = records.iter().map(|r| r.head).collect();
    heads.sort_unstable();
    heads.dedup();
    let per_head = |pick: &dyn Fn(&OracleRecord) -> f64, f: &dyn Fn(&[f64]) -> f64| {
        let vals: Vec<f64> = heads
            .iter()
            .map(|h| {
                let v: Vec<f64> = records.iter().filter(|r| r.head == *h).map(pick).collect();
                f(&v)
            })
            .collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    let auc = |v: &[f64]| histogram_auc(v, n);
    [
        hits(&raw, 10.0),
        hits(&raw, 100.0),
        hits(&filt, 10.0),
        hits(&filt, 100.0),
        mean(&raw),
        per_head(&|r| r.raw, &mean),
        mean(&filt),
        per_head(&|r| r.filtered, &mean),
        auc(&raw),
        per_head(&|r| r.raw, &auc),
        auc(&filt),
        per_head(&|r| r.filtered, &auc),
    ]
}

pub const METRIC_NAMES: [&str; 12] = [
    "hits_10", "hits_100", "fhits_10", "fhits_100", "macro_mr", "micro_mr", "macro_fmr", "micro_fmr", "macro_auc",
    "micro_auc", "macro_fauc", "micro_fauc",
];

pub fn metrics_array(m: &elgeo::evaluation::Metrics) -> [f64; 12] {
    [
        m.hits_10, m.hits_100, m.fhits_10, m.fhits_100, m.macro_mr, m.micro_mr, m.macro_fmr, m.micro_fmr, m.macro_auc,
        m.micro_auc, m.macro_fauc, m.micro_fauc,
    ]
}

/// `|a − n| / max(|a|, |n|, 1)`
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0)
}

/// Pearson chi-square statistic of `counts` against a uniform distribution.
pub fn chi_square_uniform(counts: &[u64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let e = total as f64 / counts.len() as f64;
    counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
}

/// Peak resident set size of this process in bytes (Linux only).
pub fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// Largest relative error between analytic gradients and central finite
/// differences for `term` over `draws` random models and axioms.
pub fn fd_max_error(
    term: elgeo::geometry::Term,
    activation: elgeo::geometry::Activation,
    reg_mode: elgeo::geometry::RegMode,
    dim: usize,
    draws: usize,
    seed: u64,
) -> f64 {
    use elgeo::geometry::{EmbeddingModel, ModelConfig};
    const H: f64 = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = ModelConfig {
        dim,
        margin: 0.1,
        reg_mode,
        reg_radius: 1.0,
        activation,
    };
    let (nc, nr) = (8usize, 2usize);
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let mut model = EmbeddingModel::new(nc, nr, cfg, rng.gen());
        {
            let (centers, radii, rels) = model.params_mut();
            centers.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
            radii.iter_mut().for_each(|x| *x = rng.gen_range(-0.5..1.5));
            rels.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        }
        let mut ids: Vec<u32> = (2..nc as u32).collect();
        ids.shuffle(&mut rng);
        let (a, b, c) = (ClassId(ids[0]), ClassId(ids[1]), ClassId(ids[2]));
        let r = RelId(rng.gen_range(0..nr as u32));
        use NormalizedAxiom::*;
        let ax = match term.form() {
            Form::Gci0 => Gci0(a, b),
            Form::Gci1 => Gci1(a, b, c),
            Form::Gci2 => Gci2(a, r, b),
            Form::Gci3 => Gci3(r, a, b),
            Form::Gci0Bot => Gci0Bot(a),
            Form::Gci1Bot => Gci1Bot(a, b),
            Form::Gci3Bot => Gci3Bot(r, a),
            f => panic!("no loss for {f:?}"),
        };
        let (_, g) = model.gradient(term, &ax).unwrap();
        let numeric = |m: &mut EmbeddingModel, which: usize, i: usize| -> f64 {
            fn slot(m: &mut EmbeddingModel, which: usize, i: usize) -> &mut f64 {
                let (cs, rs, ls) = m.params_mut();
                match which {
                    0 => &mut cs[i],
                    1 => &mut rs[i],
                    _ => &mut ls[i],
                }
            }
            let x0 = *slot(m, which, i);
            *slot(m, which, i) = x0 + H;
            let up = m.loss(term, &ax).unwrap();
            *slot(m, which, i) = x0 - H;
            let down = m.loss(term, &ax).unwrap();
            *slot(m, which, i) = x0;
            (up - down) / (2.0 * H)
        };
        for k in 0..nc {
            let cid = ClassId(k as u32);
            let cg = g.center_grad(cid).map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; dim]);
            for j in 0..dim {
                worst = worst.max(rel_err(cg[j], numeric(&mut model, 0, k * dim + j)));
            }
            worst = worst.max(rel_err(g.radius_grad(cid), numeric(&mut model, 1, k)));
        }
        for k in 0..nr {
            let rg = g.relation_grad(RelId(k as u32)).map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; dim]);
            for j in 0..dim {
                worst = worst.max(rel_err(rg[j], numeric(&mut model, 2, k * dim + j)));
            }
        }
    }
    worst
}

/// Random score table: per axiom a head, integer-valued scores (so ties
/// are common), the true candidate and a filter mask.
pub struct Table {
    pub rows: Vec<(u32, Vec<f64>, usize, Vec<bool>)>,
    pub n: usize,
}

pub fn random_table(seed: u64) -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=12);
    let m = rng.gen_range(1..=10);
    let rows = (0..m)
        .map(|_| {
            let head = rng.gen_range(0..4);
            let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..5) as f64 / 4.0).collect();
            let truth = rng.gen_range(0..n);
            let removed: Vec<bool> = (0..n).map(|i| i != truth && rng.gen_bool(0.3)).collect();
            (head, scores, truth, removed)
        })
        .collect();
    Table { rows, n }
}

pub fn check_table(seed: u64, tie: elgeo::config::TieMode) -> Result<(), String> {
    use elgeo::evaluation::{aggregate, axiom_auc, rank_from_scores, RankRecord, Source};
    let t = random_table(seed);
    let mut records = Vec::new();
    let mut oracle = Vec::new();
    for (head, scores, truth, removed) in &t.rows {
        let r = rank_from_scores(scores, *truth, removed, tie);
        let (raw, filt) = (sort_rank(scores, *truth, &[], tie), sort_rank(scores, *truth, removed, tie));
        if r.raw != raw || r.filtered != filt {
            return Err(format!("ranks ({}, {}) vs oracle ({raw}, {filt})", r.raw, r.filtered));
        }
        if r.filtered > r.raw {
            return Err("filtered rank above raw rank".into());
        }
        records.push(RankRecord {
            head: format!("h{head}"),
            relation: "r".into(),
            tail: format!("t{truth}"),
            head_id: ClassId(*head),
            raw_rank: r.raw,
            filtered_rank: r.filtered,
            candidates: r.candidates,
            filtered_candidates: r.filtered_candidates,
            raw_auc: axiom_auc(r.raw, r.candidates),
            filtered_auc: axiom_auc(r.filtered, r.filtered_candidates),
            source: Source::Test,
            entailed: None,
        });
        oracle.push(OracleRecord { head: *head, raw, filtered: filt });
    }
    let got = metrics_array(&aggregate(&records).map_err(|e| e.to_string())?);
    let want = oracle_metrics(&oracle, t.n);
    for i in 0..12 {
        let tol = if METRIC_NAMES[i].contains("auc") { 1e-9 } else { 0.0 };
        if (got[i] - want[i]).abs() > tol || !got[i].is_finite() {
            return Err(format!("{}: {} vs oracle {}", METRIC_NAMES[i], got[i], want[i]));
        }
    }
    Ok(())
}
