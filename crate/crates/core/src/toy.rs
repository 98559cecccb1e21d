//! Bundled toy data: a small hand-built knowledge base and a generator of
//! synthetic ones with an implanted class hierarchy and GCI2 pattern.

use std::collections::{BTreeMap, HashSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::closure::{compute_closure, ClosureConfig, ClosureError};
use crate::kb::{parse_normalized, ClassId, Form, KbError, KnowledgeBase, NormalizedAxiom, RelId, Signature};
use crate::reasoner::saturate;

const HAND_TRAIN: &str = "\
GCI0\tProtein\tEntity
GCI0\tLocation\tEntity
GCI0\tEnzyme\tProtein
GCI0\tKinase\tEnzyme
GCI0\tPhosphatase\tEnzyme
GCI0\tReceptor\tProtein
GCI0\tTransporter\tProtein
GCI0\tMembraneProtein\tProtein
GCI0\tNuclearProtein\tProtein
GCI0\tComplex\tEntity
GCI0\tMetabolism\tProcess
GCI0\tSignaling\tProcess
GCI0\tTransport\tProcess
GCI0\tPhosphorylation\tMetabolism
GCI0\tDephosphorylation\tMetabolism
GCI0\tMembrane\tLocation
GCI0\tCytoplasm\tLocation
GCI0\tNucleus\tLocation
GCI0\tReceptor\tMembraneProtein
GCI0\tTransporter\tMembraneProtein
GCI1\tKinase\tReceptor\tMembraneProtein
GCI1\tEnzyme\tMembraneProtein\tTransporter
GCI1\tMembraneProtein\tNuclearProtein\tComplex
GCI1\tPhosphorylation\tSignaling\tMetabolism
GCI2\tProtein\tlocated_in\tLocation
GCI2\tProtein\thas_function\tProcess
GCI2\tEnzyme\thas_function\tMetabolism
GCI2\tKinase\thas_function\tPhosphorylation
GCI2\tPhosphatase\thas_function\tDephosphorylation
GCI2\tReceptor\thas_function\tSignaling
GCI2\tTransporter\thas_function\tTransport
GCI2\tMembraneProtein\tlocated_in\tMembrane
GCI2\tNuclearProtein\tlocated_in\tNucleus
GCI2\tKinase\tlocated_in\tCytoplasm
GCI2\tPhosphatase\tlocated_in\tCytoplasm
GCI2\tComplex\tlocated_in\tCytoplasm
GCI2\tReceptor\tlocated_in\tMembrane
GCI2\tTransporter\tlocated_in\tMembrane
GCI2\tEnzyme\tlocated_in\tCytoplasm
GCI2\tComplex\thas_function\tSignaling
GCI3\tlocated_in\tNucleus\tNuclearProtein
GCI3\thas_function\tPhosphorylation\tKinase
GCI3\thas_function\tDephosphorylation\tPhosphatase
GCI3\thas_function\tTransport\tTransporter
GCI3\tlocated_in\tCytoplasm\tProtein
GCI3\thas_function\tSignaling\tProtein
GCI3\tlocated_in\tLocation\tEntity
GCI3\thas_function\tProcess\tEntity
GCI1_BOT\tMembrane\tNucleus
GCI1_BOT\tCytoplasm\tNucleus
GCI1_BOT\tMembrane\tCytoplasm
GCI1_BOT\tProtein\tLocation
GCI1_BOT\tProtein\tProcess
GCI1_BOT\tLocation\tProcess
GCI1_BOT\tEntity\tProcess
GCI1_BOT\tKinase\tPhosphatase
GCI1_BOT\tPhosphorylation\tDephosphorylation
GCI1_BOT\tTransport\tMetabolism
GCI1_BOT\tReceptor\tNuclearProtein
GCI1_BOT\tTransporter\tNuclearProtein
";

/// Probes entailed by the hand-built training axioms.
const HAND_TEST: &str = "\
GCI2\tKinase\thas_function\tMetabolism
GCI2\tReceptor\tlocated_in\tLocation
GCI2\tPhosphatase\thas_function\tMetabolism
GCI2\tNuclearProtein\thas_function\tProcess
";

/// The hand-built satisfiable knowledge base: 20 classes, 2 relations and
/// 60 training axioms, with a small test split of entailed GCI2 probes.
pub fn hand_built() -> KnowledgeBase {
    let mut sig = Signature::new();
    let train = parse_normalized(HAND_TRAIN, &mut sig).expect("bundled axioms parse");
    let test = parse_normalized(HAND_TEST, &mut sig).expect("bundled axioms parse");
    let mut pools = BTreeMap::new();
    pools.insert(
        "processes".to_owned(),
        ["Process", "Metabolism", "Signaling", "Transport", "Phosphorylation", "Dephosphorylation"]
            .iter()
            .map(|n| sig.class_id(n).expect("bundled class"))
            .collect(),
    );
    KnowledgeBase::new(sig, train, Vec::new(), test, pools).expect("bundled knowledge base is consistent")
}

/// Parameters of the synthetic generator.
///
/// Classes are split into heads `H<i>` and tails `T<j>`, or shared. Each
/// class gets a parent among the preceding classes of its half with
/// probability `hierarchy`. Heads receive
/// on average `density` GCI2 axioms to tails, chosen with Zipf weights of
/// exponent `tail_skew` (0 is uniform). A fraction of these is held out as
/// novel test and validation axioms; a further share of the held-out splits
/// is drawn from the entailed GCI2 axioms of the training part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub relations: usize,
    pub density: f64,
    pub hierarchy: f64,
    /// Parents are drawn among the `parent_window` preceding classes of the
    /// same half; all preceding ones when absent. Small windows give deep
    /// hierarchies.
    pub parent_window: Option<usize>,
    pub tail_skew: f64,
    /// Exact number of generated GCI2 axioms; overrides `density`.
    pub gci2_axioms: Option<usize>,
    pub test_fraction: f64,
    pub valid_fraction: f64,
    /// Share of each held-out split drawn from entailed axioms.
    pub entailed_fraction: f64,
    /// Close the generated GCI2 facts under the hierarchy before splitting,
    /// so held-out axioms are a uniform sample of all true facts.
    pub propagate: bool,
    /// Heads and tails are the same classes `C<i>` in one hierarchy.
    pub shared: bool,
    /// Heads and tails are assigned to clusters round-robin; a head picks
    /// its tails inside its own cluster with probability `cluster_affinity`.
    pub clusters: usize,
    pub cluster_affinity: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            classes: 60,
            relations: 1,
            density: 3.0,
            hierarchy: 0.8,
            parent_window: None,
            tail_skew: 0.0,
            gci2_axioms: None,
            test_fraction: 0.15,
            valid_fraction: 0.1,
            entailed_fraction: 0.5,
            propagate: false,
            shared: false,
            clusters: 1,
            cluster_affinity: 0.0,
            seed: 0,
        }
    }
}

/// Names accepted by [`SyntheticConfig::preset`].
pub const SYNTHETIC_PRESETS: [&str; 3] = ["default", "filtering", "skewed"];

impl SyntheticConfig {
    /// Named generator settings.
    ///
    /// `filtering` builds deep clustered head and tail hierarchies whose GCI2
    /// facts are closed under the hierarchy before the split, so held-out
    /// axioms mix entailed and novel ones. `skewed` concentrates GCI2 tails
    /// on a few frequent classes.
    pub fn preset(name: &str, seed: u64) -> Option<Self> {
        let base = SyntheticConfig {
            seed,
            ..Default::default()
        };
        match name {
            "default" => Some(base),
            "filtering" => Some(SyntheticConfig {
                density: 4.0,
                hierarchy: 0.8,
                parent_window: Some(3),
                clusters: 4,
                cluster_affinity: 0.9,
                propagate: true,
                entailed_fraction: 0.0,
                ..base
            }),
            "skewed" => Some(SyntheticConfig {
                classes: 400,
                density: 4.0,
                hierarchy: 0.0,
                tail_skew: 1.5,
                entailed_fraction: 0.0,
                ..base
            }),
            _ => None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ToyError {
    #[error("synthetic config: {0}")]
    Config(String),
    #[error(transparent)]
    Kb(#[from] KbError),
    #[error(transparent)]
    Closure(#[from] ClosureError),
}

fn parents<R: Rng>(ids: &[ClassId], p: f64, window: Option<usize>, rng: &mut R) -> Vec<(ClassId, ClassId)> {
    let mut out = Vec::new();
    for i in 1..ids.len() {
        if rng.gen_bool(p) {
            let lo = window.map_or(0, |w| i.saturating_sub(w.max(1)));
            out.push((ids[i], ids[rng.gen_range(lo..i)]));
        }
    }
    out
}

/// Entailed GCI2 axioms from `heads` to `tails` outside `known`, in closure order.
fn entailed_gci2(
    sig: &Signature,
    axioms: Vec<NormalizedAxiom>,
    heads: &[ClassId],
    tails: &[ClassId],
    known: &HashSet<NormalizedAxiom>,
) -> Result<Vec<NormalizedAxiom>, ToyError> {
    let kb = KnowledgeBase::from_axioms(sig.clone(), axioms)?;
    let sub = saturate(&kb);
    let dc = compute_closure(&kb, &sub, &ClosureConfig::default())?;
    let head_set: HashSet<ClassId> = heads.iter().copied().collect();
    let tail_set: HashSet<ClassId> = tails.iter().copied().collect();
    Ok(dc
        .members(Form::Gci2)
        .into_iter()
        .map(|(a, _)| a)
        .filter(|a| {
            a.as_gci2()
                .is_some_and(|(c, _, d)| c != d && head_set.contains(&c) && tail_set.contains(&d))
        })
        .filter(|a| !known.contains(a))
        .collect())
}

/// Generate a synthetic knowledge base with `heads` and `tails` pools.
pub fn generate(cfg: &SyntheticConfig) -> Result<KnowledgeBase, ToyError> {
    let bad = |m: &str| Err(ToyError::Config(m.to_owned()));
    if cfg.classes < 4 || cfg.relations == 0 {
        return bad("need at least 4 classes and 1 relation");
    }
    if !(0.0..=1.0).contains(&cfg.hierarchy) || !(0.0..=1.0).contains(&cfg.entailed_fraction) {
        return bad("hierarchy and entailed_fraction must lie in [0, 1]");
    }
    let held = cfg.test_fraction + cfg.valid_fraction;
    if cfg.test_fraction < 0.0 || cfg.valid_fraction < 0.0 || held >= 1.0 {
        return bad("test_fraction + valid_fraction must lie in [0, 1)");
    }
    if !(cfg.density > 0.0 && cfg.tail_skew >= 0.0) {
        return bad("density must be positive and tail_skew non-negative");
    }

    if cfg.clusters == 0 || !(0.0..=1.0).contains(&cfg.cluster_affinity) {
        return bad("clusters must be positive and cluster_affinity in [0, 1]");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut sig = Signature::new();
    let (heads, tails): (Vec<ClassId>, Vec<ClassId>) = if cfg.shared {
        let all: Vec<ClassId> = (0..cfg.classes).map(|i| sig.intern_class(&format!("C{i}"))).collect();
        (all.clone(), all)
    } else {
        let n_heads = cfg.classes / 2;
        let heads = (0..n_heads).map(|i| sig.intern_class(&format!("H{i}"))).collect();
        let tails = (0..cfg.classes - n_heads)
            .map(|j| sig.intern_class(&format!("T{j}")))
            .collect();
        (heads, tails)
    };
    let rels: Vec<RelId> = (0..cfg.relations).map(|k| sig.intern_relation(&format!("r{k}"))).collect();

    let mut edges = parents(&tails, cfg.hierarchy, cfg.parent_window, &mut rng);
    if !cfg.shared {
        let mut h = parents(&heads, cfg.hierarchy, cfg.parent_window, &mut rng);
        h.append(&mut edges);
        edges = h;
    }
    let mut train: Vec<NormalizedAxiom> = edges.into_iter().map(|(c, d)| NormalizedAxiom::Gci0(c, d)).collect();

    // Zipf weights over tails, restricted to each cluster for in-cluster picks.
    let weight = |j: usize| 1.0 / ((j + 1) as f64).powf(cfg.tail_skew);
    let all_pick = WeightedIndex::new((0..tails.len()).map(weight)).expect("positive weights");
    let members: Vec<Vec<usize>> = (0..cfg.clusters)
        .map(|k| (0..tails.len()).filter(|j| j % cfg.clusters == k).collect())
        .collect();
    let cluster_picks: Vec<Option<WeightedIndex<f64>>> = members
        .iter()
        .map(|m| WeightedIndex::new(m.iter().map(|&j| weight(j))).ok())
        .collect();

    let target = cfg
        .gci2_axioms
        .unwrap_or_else(|| (cfg.density * heads.len() as f64).round().max(1.0) as usize);
    let pairs = heads.len() * tails.len() - if cfg.shared { heads.len() } else { 0 };
    if target > pairs * rels.len() / 2 {
        return bad("requested more GCI2 axioms than half of all head-tail pairs");
    }
    let mut seen = HashSet::with_capacity(target);
    let mut base = Vec::with_capacity(target);
    let mut h = 0usize;
    while base.len() < target {
        // Every head gets axioms in turn so none is left without any.
        let hi = h % heads.len();
        h += 1;
        let k = hi % cfg.clusters;
        let j = match &cluster_picks[k] {
            Some(p) if cfg.clusters > 1 && rng.gen_bool(cfg.cluster_affinity) => members[k][p.sample(&mut rng)],
            _ => all_pick.sample(&mut rng),
        };
        let (c, d) = (heads[hi], tails[j]);
        if c == d {
            continue;
        }
        let ax = NormalizedAxiom::Gci2(c, *rels.choose(&mut rng).expect("relation"), d);
        if seen.insert(ax) {
            base.push(ax);
        }
    }
    if cfg.propagate {
        let mut axioms = train.clone();
        axioms.extend(base.iter().copied());
        base.extend(entailed_gci2(&sig, axioms, &heads, &tails, &seen)?);
        base.sort();
    }
    base.shuffle(&mut rng);
    let n_test = (base.len() as f64 * cfg.test_fraction).round() as usize;
    let n_valid = (base.len() as f64 * cfg.valid_fraction).round() as usize;
    let mut test: Vec<NormalizedAxiom> = base.drain(..n_test).collect();
    let mut valid: Vec<NormalizedAxiom> = base.drain(..n_valid).collect();
    train.extend(base);

    if cfg.entailed_fraction > 0.0 && (n_test + n_valid) > 0 {
        let known: HashSet<NormalizedAxiom> = train.iter().chain(&test).chain(&valid).copied().collect();
        let mut entailed = entailed_gci2(&sig, train.clone(), &heads, &tails, &known)?;
        entailed.shuffle(&mut rng);
        let share = |n: usize| (n as f64 * cfg.entailed_fraction / (1.0 - cfg.entailed_fraction)).round() as usize;
        let k_test = share(n_test).min(entailed.len());
        test.extend(entailed.drain(..k_test));
        let k_valid = share(n_valid).min(entailed.len());
        valid.extend(entailed.drain(..k_valid));
    }

    let mut pools = BTreeMap::new();
    pools.insert("heads".to_owned(), heads);
    pools.insert("tails".to_owned(), tails);
    Ok(KnowledgeBase::new(sig, train, valid, test, pools)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_built_shape() {
        let kb = hand_built();
        assert_eq!(kb.signature.named_classes().count(), 20);
        assert_eq!(kb.signature.num_relations(), 2);
        assert_eq!(kb.num_train(), 60);
        let sub = saturate(&kb);
        let unsat: Vec<_> = kb.signature.named_classes().filter(|c| sub.is_unsat(*c)).collect();
        assert!(unsat.is_empty(), "unsatisfiable: {unsat:?}");
        let dc = compute_closure(&kb, &sub, &ClosureConfig::default()).unwrap();
        for ax in &kb.test {
            assert!(dc.contains(ax).unwrap(), "{}", ax.display(&kb.signature));
        }
    }

    #[test]
    fn generator_is_deterministic_and_consistent() {
        let cfg = SyntheticConfig {
            seed: 3,
            ..Default::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.train().collect::<Vec<_>>(), b.train().collect::<Vec<_>>());
        assert_eq!(a.test, b.test);
        assert_eq!(a.signature.named_classes().count(), 60);
        assert!(!a.test.is_empty() && !a.valid.is_empty());
        let sub = saturate(&a);
        let dc = compute_closure(&a, &sub, &ClosureConfig::default()).unwrap();
        let entailed = a.test.iter().filter(|x| dc.contains(x).unwrap()).count();
        assert!(entailed > 0 && entailed < a.test.len(), "{entailed} of {}", a.test.len());
    }

    #[test]
    fn exact_gci2_count_and_skew() {
        let cfg = SyntheticConfig {
            classes: 200,
            gci2_axioms: Some(2000),
            tail_skew: 1.5,
            hierarchy: 0.0,
            entailed_fraction: 0.0,
            ..Default::default()
        };
        let kb = generate(&cfg).unwrap();
        assert_eq!(kb.axioms(Form::Gci2).len() + kb.test.len() + kb.valid.len(), 2000);
        let t0 = kb.signature.class_id("T0").unwrap();
        let t50 = kb.signature.class_id("T50").unwrap();
        let count = |t| kb.train_gci2().filter(|x| x.2 == t).count();
        assert!(count(t0) > 10 * count(t50).max(1));
    }

    #[test]
    fn rejects_bad_configs() {
        for cfg in [
            SyntheticConfig { classes: 2, ..Default::default() },
            SyntheticConfig { test_fraction: 0.9, valid_fraction: 0.2, ..Default::default() },
            SyntheticConfig { gci2_axioms: Some(100_000), ..Default::default() },
        ] {
            assert!(generate(&cfg).is_err());
        }
    }
}
