use elgeo::closure::{compute_closure, ClosureConfig};
use elgeo::config::{ModelSection, TieMode};
use elgeo::evaluation::{emit_roc, evaluate, naive_fit, EvalOptions, Scorer};
use elgeo::geometry::{EmbeddingModel, ModelConfig};
use elgeo::kb::{parse_normalized, ClassId, KnowledgeBase, RelId, Signature};
use elgeo::reasoner::saturate;
use elgeo::toy::{self, SyntheticConfig};
use proptest::prelude::*;

fn small_model(dim: usize) -> ModelConfig {
    ModelSection {
        dim,
        ..Default::default()
    }
    .model_config()
}

fn kb_from(train: &str, test: &str) -> KnowledgeBase {
    let mut sig = Signature::new();
    let tr = parse_normalized(train, &mut sig).unwrap();
    let te = parse_normalized(test, &mut sig).unwrap();
    KnowledgeBase::new(sig, tr, Vec::new(), te, Default::default()).unwrap()
}

#[test]
fn entailed_and_novel_curves_partition_the_test_split() {
    let kb = kb_from(
        "GCI0\tA\tB\nGCI2\tB\tr\tX\nGCI0\tC\tD\nGCI2\tD\tr\tY\nGCI2\tE\tr\tZ\n",
        "GCI2\tA\tr\tX\nGCI2\tC\tr\tY\nGCI2\tE\tr\tX\nGCI2\tA\tr\tZ\n",
    );
    let dc = compute_closure(&kb, &saturate(&kb), &ClosureConfig::default()).unwrap();
    let cfg = small_model(4);
    let model = EmbeddingModel::new(kb.signature.num_classes(), kb.signature.num_relations(), cfg, 1);
    let report = evaluate(&model, &kb, Some(&dc), &EvalOptions::default()).unwrap();
    let entailed = report.records.iter().filter(|r| r.entailed == Some(true)).count();
    let novel = report.records.iter().filter(|r| r.entailed == Some(false)).count();
    assert_eq!((entailed, novel), (2, 2));
    assert!(report.entailed_metrics.is_some() && report.novel_metrics.is_some());
    let mut csv = Vec::new();
    emit_roc(Some(&report), &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    for curve in ["raw", "filtered", "entailed", "novel"] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{curve},"))), "{curve}");
    }
}

#[test]
fn empty_report_is_header_only() {
    let mut csv = Vec::new();
    emit_roc(None, &mut csv).unwrap();
    assert_eq!(String::from_utf8(csv).unwrap(), "curve_name,fpr,tpr\n");
}

#[test]
fn naive_scores_match_hand_sums() {
    // A ⊑ ∃r.B, A ⊑ ∃r.C, D ⊑ ∃r.B: column sums B=2, C=1 over 3 entries.
    let kb = kb_from("GCI2\tA\tr\tB\nGCI2\tA\tr\tC\nGCI2\tD\tr\tB\n", "GCI2\tD\tr\tC\n");
    let id = |n: &str| kb.signature.class_id(n).unwrap();
    let all: Vec<ClassId> = kb.signature.named_classes().collect();
    let m = naive_fit(kb.axioms(elgeo::kb::Form::Gci2), &all, &all, false).unwrap();
    let r = RelId(0);
    assert_eq!(m.naive_score(id("A"), r, id("B")), 2.0 / 3.0);
    assert_eq!(m.naive_score(id("A"), r, id("C")), 1.0 / 3.0);
    assert_eq!(m.naive_score(id("A"), r, id("A")), 0.0);
    let sym = naive_fit(kb.axioms(elgeo::kb::Form::Gci2), &all, &all, true).unwrap();
    assert_eq!(sym.entry(r, id("B"), id("A")), 1);
    // Six entries: the three pairs in both directions.
    assert_eq!(sym.total(r), 6);
    assert_eq!(sym.naive_score(id("D"), r, id("A")), 2.0 / 6.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn naive_is_head_independent_and_normalized(seed in 0u64..500) {
        let kb = toy::generate(&SyntheticConfig { classes: 30, tail_skew: 1.0, seed, ..Default::default() }).unwrap();
        let heads = kb.pool("heads").unwrap().to_vec();
        let tails = kb.pool("tails").unwrap().to_vec();
        let m = naive_fit(kb.axioms(elgeo::kb::Form::Gci2), &heads, &tails, false).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        m.score_tails(heads[0], RelId(0), &tails, &mut a);
        m.score_tails(heads[1], RelId(0), &tails, &mut b);
        prop_assert_eq!(&a, &b);
        prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn filtered_ranks_never_exceed_raw(seed in 0u64..500, average in any::<bool>()) {
        let kb = toy::generate(&SyntheticConfig { classes: 30, seed, ..Default::default() }).unwrap();
        let cfg = small_model(5);
        let model = EmbeddingModel::new(kb.signature.num_classes(), 1, cfg, seed);
        let options = EvalOptions {
            pool: Some("tails".into()),
            tie_mode: if average { TieMode::Average } else { TieMode::Optimistic },
            closure_positives: false,
        };
        let report = evaluate(&model, &kb, None, &options).unwrap();
        for r in &report.records {
            prop_assert!(r.filtered_rank <= r.raw_rank);
            prop_assert!(r.raw_rank >= 1.0 && r.raw_rank <= r.candidates as f64);
        }
        prop_assert!(report.metrics.macro_fmr <= report.metrics.macro_mr);
        prop_assert!(report.metrics.hits_10 <= report.metrics.hits_100);
    }
}
