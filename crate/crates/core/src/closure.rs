//! Approximate deductive closure over the normal forms.
//!
//! Starting from the asserted axioms and a transitively closed subsumption
//! relation `sub`, every asserted axiom is rewritten with all premise
//! combinations of these rules (bold premises from `sub`):
//!
//! | form      | rewrites                                            |
//! |-----------|-----------------------------------------------------|
//! | C ⊑ D     | D ⊑ **D'** ⇒ C ⊑ D';  **C' ⊑ C** ⇒ C' ⊑ D           |
//! | C ⊓ D ⊑ E | **C' ⊑ C** ⇒ C' ⊓ D ⊑ E                             |
//! | C ⊑ ∃R.D  | **D ⊑ D'** ⇒ C ⊑ ∃R.D';  **C' ⊑ C** ⇒ C' ⊑ ∃R.D     |
//! | ∃R.C ⊑ D  | **D ⊑ D'** ⇒ ∃R.C ⊑ D';  **C' ⊑ C** ⇒ ∃R.C' ⊑ D     |
//! | C ⊑ ⊥     | **C' ⊑ C** ⇒ C' ⊑ ⊥                                 |
//! | ∃R.C ⊑ ⊥  | **C' ⊑ C** ⇒ ∃R.C' ⊑ ⊥                              |
//!
//! Both rewrites of a two-rule form are applied jointly, so the result is
//! closed under a second pass. All pairs of `sub` are added as `C ⊑ D`.
//!
//! Two query-time conveniences are enabled unless
//! [`ClosureConfig::strict_printed_rules`] is set: `C ⊓ D ⊑ E` membership is
//! checked modulo commutativity, and an asserted `C ⊓ D ⊑ ⊥` also answers for
//! every pair of subclasses of `C` and `D`.

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{format_axiom, parse_line, ClassId, Form, KnowledgeBase, NormalizedAxiom, Signature};
use crate::reasoner::SubsumptionClosure;

pub const DEFAULT_BUDGET: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClosureConfig {
    /// Maximum number of derived (non-asserted) axioms.
    pub budget: u64,
    /// Disable the commutative GCI1 lookup and the GCI1_BOT query expansion.
    pub strict_printed_rules: bool,
}

impl Default for ClosureConfig {
    fn default() -> Self {
        ClosureConfig {
            budget: DEFAULT_BUDGET,
            strict_printed_rules: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum ClosureError {
    #[error("closure budget exceeded: more than {budget} derived axioms (raise closure.budget)")]
    BudgetExceeded { budget: u64 },
    #[error("{0} axioms are not covered by the deductive closure")]
    UnsupportedForm(Form),
    #[error("{path}: {reason}")]
    Dump { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Asserted,
    Derived,
}

impl Provenance {
    fn as_str(self) -> &'static str {
        match self {
            Provenance::Asserted => "asserted",
            Provenance::Derived => "derived",
        }
    }
}

/// Per-form counts of asserted and derived members.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ClosureStats {
    pub asserted: BTreeMap<Form, usize>,
    pub derived: BTreeMap<Form, usize>,
}

/// Entailed axioms of the seven GCI forms with O(1) membership.
#[derive(Debug, Clone)]
pub struct DeductiveClosure {
    sub: SubsumptionClosure,
    sets: [HashMap<NormalizedAxiom, Provenance>; 7],
    strict: bool,
}

fn covered(form: Form) -> Result<usize, ClosureError> {
    match form {
        Form::Ri0 | Form::Ri1 => Err(ClosureError::UnsupportedForm(form)),
        f => Ok(f.index()),
    }
}

struct Builder<'a> {
    sets: [HashMap<NormalizedAxiom, Provenance>; 7],
    derived: u64,
    budget: u64,
    sub: &'a SubsumptionClosure,
    subclasses: Vec<Vec<ClassId>>,
}

impl Builder<'_> {
    fn assert(&mut self, ax: NormalizedAxiom) {
        let ax = ax.canonical();
        if let Ok(i) = covered(ax.form()) {
            self.sets[i].insert(ax, Provenance::Asserted);
        }
    }

    fn derive(&mut self, ax: NormalizedAxiom) -> Result<(), ClosureError> {
        let ax = ax.canonical();
        let set = &mut self.sets[ax.form().index()];
        if let Entry::Vacant(e) = set.entry(ax) {
            e.insert(Provenance::Derived);
            self.derived += 1;
            if self.derived > self.budget {
                return Err(ClosureError::BudgetExceeded {
                    budget: self.budget,
                });
            }
        }
        Ok(())
    }

    fn expand(&mut self, ax: NormalizedAxiom) -> Result<(), ClosureError> {
        use NormalizedAxiom::*;
        let sub = self.sub;
        let subs = |c: ClassId| self.subclasses[c.index()].clone();
        let sups = |d: ClassId| {
            let mut v: Vec<ClassId> = sub.subsumers(d).iter().copied().collect();
            v.sort_unstable();
            v
        };
        match ax.canonical() {
            Gci0(c, d) => {
                let ds = sups(d);
                for c2 in subs(c) {
                    for &d2 in &ds {
                        self.derive(Gci0(c2, d2))?;
                    }
                }
            }
            Gci1(c, d, e) => {
                for c2 in subs(c) {
                    self.derive(Gci1(c2, d, e))?;
                }
            }
            Gci2(c, r, d) => {
                let ds = sups(d);
                for c2 in subs(c) {
                    for &d2 in &ds {
                        self.derive(Gci2(c2, r, d2))?;
                    }
                }
            }
            Gci3(r, c, d) => {
                let ds = sups(d);
                for c2 in subs(c) {
                    for &d2 in &ds {
                        self.derive(Gci3(r, c2, d2))?;
                    }
                }
            }
            Gci0Bot(c) => {
                for c2 in subs(c) {
                    self.derive(Gci0Bot(c2))?;
                }
            }
            Gci3Bot(r, c) => {
                for c2 in subs(c) {
                    self.derive(Gci3Bot(r, c2))?;
                }
            }
            Gci1Bot(..) | Ri0(..) | Ri1(..) => {}
        }
        Ok(())
    }
}

/// Compute the closure of the training axioms of `kb`.
pub fn compute_closure(
    kb: &KnowledgeBase,
    sub: &SubsumptionClosure,
    cfg: &ClosureConfig,
) -> Result<DeductiveClosure, ClosureError> {
    compute_closure_from(kb.train().copied(), sub, cfg)
}

/// Compute the closure of an explicit axiom set.
pub fn compute_closure_from(
    axioms: impl IntoIterator<Item = NormalizedAxiom>,
    sub: &SubsumptionClosure,
    cfg: &ClosureConfig,
) -> Result<DeductiveClosure, ClosureError> {
    let asserted: Vec<NormalizedAxiom> = axioms.into_iter().collect();
    let mut b = Builder {
        sets: Default::default(),
        derived: 0,
        budget: cfg.budget,
        sub,
        subclasses: sub.subclasses(),
    };
    for &ax in &asserted {
        b.assert(ax);
    }
    for (c, d) in sub.pairs() {
        b.derive(NormalizedAxiom::Gci0(c, d))?;
    }
    for &ax in &asserted {
        b.expand(ax)?;
    }
    Ok(DeductiveClosure {
        sub: sub.clone(),
        sets: b.sets,
        strict: cfg.strict_printed_rules,
    })
}

impl DeductiveClosure {
    pub fn subsumption(&self) -> &SubsumptionClosure {
        &self.sub
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    /// Whether `ax` is entailed according to the closure.
    pub fn contains(&self, ax: &NormalizedAxiom) -> Result<bool, ClosureError> {
        let ax = ax.canonical();
        let i = covered(ax.form())?;
        if ax.classes().iter().any(|c| c.index() >= self.sub.num_classes()) {
            return Ok(false);
        }
        if self.sets[i].contains_key(&ax) {
            return Ok(true);
        }
        use NormalizedAxiom::*;
        Ok(match ax {
            Gci0(c, d) => self.sub.subsumes(c, d),
            Gci0Bot(c) => self.sub.is_unsat(c),
            Gci1(c, d, e) if !self.strict => self.sets[i].contains_key(&Gci1(d, c, e)),
            Gci1Bot(c, d) => {
                if self.strict {
                    self.sets[i].contains_key(&Gci1Bot(d, c))
                } else {
                    self.sets[i].keys().any(|k| {
                        let Gci1Bot(x, y) = *k else { return false };
                        (self.sub.subsumes(c, x) && self.sub.subsumes(d, y))
                            || (self.sub.subsumes(c, y) && self.sub.subsumes(d, x))
                    })
                }
            }
            _ => false,
        })
    }

    pub fn provenance(&self, ax: &NormalizedAxiom) -> Option<Provenance> {
        let ax = ax.canonical();
        covered(ax.form()).ok().and_then(|i| self.sets[i].get(&ax).copied())
    }

    /// Stored members of one form in a deterministic order.
    pub fn members(&self, form: Form) -> Vec<(NormalizedAxiom, Provenance)> {
        let Ok(i) = covered(form) else {
            return Vec::new();
        };
        let mut v: Vec<_> = self.sets[i].iter().map(|(a, p)| (*a, *p)).collect();
        v.sort_unstable_by_key(|(a, _)| *a);
        v
    }

    /// Stored members of one form as a set.
    pub fn member_set(&self, form: Form) -> HashSet<NormalizedAxiom> {
        covered(form)
            .map(|i| self.sets[i].keys().copied().collect())
            .unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.sets.iter().map(HashMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stats(&self) -> ClosureStats {
        let mut stats = ClosureStats::default();
        for form in Form::GCI {
            let members = &self.sets[form.index()];
            let derived = members.values().filter(|p| **p == Provenance::Derived).count();
            stats.asserted.insert(form, members.len() - derived);
            stats.derived.insert(form, derived);
        }
        stats
    }

    /// Partition `axioms` into entailed and novel, preserving order.
    pub fn split_entailed(
        &self,
        axioms: &[NormalizedAxiom],
    ) -> Result<(Vec<NormalizedAxiom>, Vec<NormalizedAxiom>), ClosureError> {
        let mut entailed = Vec::new();
        let mut novel = Vec::new();
        for ax in axioms {
            if self.contains(ax)? {
                entailed.push(*ax);
            } else {
                novel.push(*ax);
            }
        }
        Ok((entailed, novel))
    }

    /// Write `subsumption.tsv` and one `<form>.tsv` per GCI form, the latter
    /// with a trailing `asserted|derived` column.
    pub fn write_dump(&self, sig: &Signature, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        self.sub.write_dump(sig, &dir.join("subsumption.tsv"))?;
        for form in Form::GCI {
            let mut out = String::new();
            for (ax, prov) in self.members(form) {
                out.push_str(&format_axiom(&ax, sig));
                out.push('\t');
                out.push_str(prov.as_str());
                out.push('\n');
            }
            fs::write(dir.join(dump_file(form)), out)?;
        }
        Ok(())
    }

    /// Read a dump written by [`write_dump`](Self::write_dump). Every name
    /// must already exist in `sig`.
    pub fn load_dump(sig: &Signature, dir: &Path, strict: bool) -> Result<Self, ClosureError> {
        let sub_path = dir.join("subsumption.tsv");
        let mut scratch = sig.clone();
        let dump_err = |path: &Path, reason: String| ClosureError::Dump {
            path: path.to_owned(),
            reason,
        };
        let text = fs::read_to_string(&sub_path).map_err(|e| dump_err(&sub_path, e.to_string()))?;
        let sub_axioms = crate::kb::parse_normalized(&text, &mut scratch)
            .map_err(|e| dump_err(&sub_path, e.to_string()))?;
        let sub = SubsumptionClosure::from_axioms(sig.num_classes(), &sub_axioms);
        let mut sets: [HashMap<NormalizedAxiom, Provenance>; 7] = Default::default();
        for form in Form::GCI {
            let path = dir.join(dump_file(form));
            let text = fs::read_to_string(&path).map_err(|e| dump_err(&path, e.to_string()))?;
            for (n, line) in text.lines().enumerate() {
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (body, prov) = line
                    .rsplit_once('\t')
                    .ok_or_else(|| dump_err(&path, format!("line {}: missing provenance", n + 1)))?;
                let prov = match prov {
                    "asserted" => Provenance::Asserted,
                    "derived" => Provenance::Derived,
                    other => {
                        return Err(dump_err(
                            &path,
                            format!("line {}: bad provenance {other}", n + 1),
                        ))
                    }
                };
                let ax = parse_line(body, &mut scratch)
                    .map_err(|e| dump_err(&path, format!("line {}: {e}", n + 1)))?;
                sets[form.index()].insert(ax, prov);
            }
        }
        if scratch.num_classes() != sig.num_classes()
            || scratch.num_relations() != sig.num_relations()
        {
            return Err(dump_err(
                dir,
                "closure dump mentions names missing from the dataset".into(),
            ));
        }
        Ok(DeductiveClosure { sub, sets, strict })
    }
}

fn dump_file(form: Form) -> String {
    format!("{}.tsv", form.tag().to_lowercase())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::{parse_normalized, RelId};
    use crate::reasoner::saturate;

    fn setup(text: &str) -> (KnowledgeBase, DeductiveClosure) {
        let mut sig = Signature::new();
        let axs = parse_normalized(text, &mut sig).unwrap();
        let kb = KnowledgeBase::from_axioms(sig, axs).unwrap();
        let sub = saturate(&kb);
        let dc = compute_closure(&kb, &sub, &ClosureConfig::default()).unwrap();
        (kb, dc)
    }

    fn ids(kb: &KnowledgeBase, names: &[&str]) -> Vec<ClassId> {
        names.iter().map(|n| kb.signature.class_id(n).unwrap()).collect()
    }

    #[test]
    fn gci2_rules_apply_jointly() {
        let (kb, dc) = setup("GCI2\tA\tr\tB\nGCI0\tB\tB'\nGCI0\tA'\tA\n");
        let r = kb.signature.relation_id("r").unwrap();
        let v = ids(&kb, &["A", "B", "B'", "A'"]);
        let (a, b, b2, a2) = (v[0], v[1], v[2], v[3]);
        use NormalizedAxiom::Gci2;
        for ax in [Gci2(a, r, b2), Gci2(a2, r, b), Gci2(a, r, b), Gci2(a2, r, b2)] {
            assert!(dc.contains(&ax).unwrap(), "{}", ax.display(&kb.signature));
        }
        assert!(!dc.contains(&Gci2(b, r, a)).unwrap());
        assert_eq!(dc.provenance(&Gci2(a, r, b)), Some(Provenance::Asserted));
        assert_eq!(dc.provenance(&Gci2(a2, r, b2)), Some(Provenance::Derived));

        let (entailed, novel) = dc.split_entailed(&[Gci2(a, r, b2), Gci2(b, r, a)]).unwrap();
        assert_eq!(entailed, vec![Gci2(a, r, b2)]);
        assert_eq!(novel, vec![Gci2(b, r, a)]);
        assert_eq!(dc.split_entailed(&[]).unwrap(), (vec![], vec![]));
    }

    #[test]
    fn gci1_rule_rewrites_the_first_operand() {
        let (kb, dc) = setup("GCI1\tC\tD\tE\nGCI0\tC'\tC\n");
        let v = ids(&kb, &["C", "D", "E", "C'"]);
        use NormalizedAxiom::Gci1;
        assert!(dc.contains(&Gci1(v[3], v[1], v[2])).unwrap());
        // commutative lookup
        assert!(dc.contains(&Gci1(v[1], v[3], v[2])).unwrap());
        // the D slot is not rewritten by a stored rule
        assert_eq!(dc.provenance(&Gci1(v[1], v[3], v[2])), None);
    }

    #[test]
    fn strict_mode_disables_query_conveniences() {
        let mut sig = Signature::new();
        let axs =
            parse_normalized("GCI1\tC\tD\tE\nGCI1_BOT\tX\tY\nGCI0\tX'\tX\n", &mut sig).unwrap();
        let kb = KnowledgeBase::from_axioms(sig, axs).unwrap();
        let sub = saturate(&kb);
        let cfg = ClosureConfig {
            strict_printed_rules: true,
            ..Default::default()
        };
        let strict = compute_closure(&kb, &sub, &cfg).unwrap();
        let loose = compute_closure(&kb, &sub, &ClosureConfig::default()).unwrap();
        let v = ids(&kb, &["C", "D", "E", "X", "Y", "X'"]);
        use NormalizedAxiom::*;
        assert!(!strict.contains(&Gci1(v[1], v[0], v[2])).unwrap());
        assert!(loose.contains(&Gci1(v[1], v[0], v[2])).unwrap());
        assert!(!strict.contains(&Gci1Bot(v[5], v[4])).unwrap());
        assert!(loose.contains(&Gci1Bot(v[5], v[4])).unwrap());
        assert!(loose.contains(&Gci1Bot(v[4], v[5])).unwrap());
        assert!(strict.contains(&Gci1Bot(v[4], v[3])).unwrap());
    }

    #[test]
    fn empty_kb_has_only_trivial_subsumptions() {
        let (kb, dc) = setup("");
        let stats = dc.stats();
        for form in Form::GCI {
            let n = dc.members(form).len();
            match form {
                // BOT ⊑ BOT is stored canonically as BOT ⊑ ⊥
                Form::Gci0 => assert_eq!(n, 2),
                Form::Gci0Bot => assert_eq!(n, 1),
                _ => assert_eq!(n, 0, "{form}"),
            }
        }
        assert_eq!(stats.asserted.values().sum::<usize>(), 0);
        let top = ClassId::TOP;
        assert!(dc.contains(&NormalizedAxiom::Gci0(top, top)).unwrap());
        assert_eq!(kb.signature.num_classes(), 2);
    }

    #[test]
    fn gci0_membership_and_role_forms() {
        let (kb, dc) = setup("GCI0\tA\tB\nGCI0\tB\tC\n");
        let v = ids(&kb, &["A", "B", "C"]);
        use NormalizedAxiom::*;
        assert!(dc.contains(&Gci0(v[0], v[0])).unwrap());
        assert!(dc.contains(&Gci0(v[0], v[2])).unwrap());
        assert!(!dc.contains(&Gci0(v[2], v[0])).unwrap());
        assert!(matches!(
            dc.contains(&Ri0(RelId(0), RelId(0))),
            Err(ClosureError::UnsupportedForm(Form::Ri0))
        ));
    }

    #[test]
    fn gci3_and_bottom_rules() {
        let (kb, dc) = setup(
            "GCI3\tr\tC\tD\nGCI0\tC'\tC\nGCI0\tD\tD'\nGCI0_BOT\tX\nGCI0\tX'\tX\nGCI3_BOT\tr\tY\nGCI0\tY'\tY\n",
        );
        let r = kb.signature.relation_id("r").unwrap();
        let v = ids(&kb, &["C", "D", "C'", "D'", "X", "X'", "Y", "Y'"]);
        use NormalizedAxiom::*;
        assert!(dc.contains(&Gci3(r, v[2], v[3])).unwrap());
        assert!(dc.contains(&Gci0Bot(v[5])).unwrap());
        assert!(dc.contains(&Gci3Bot(r, v[7])).unwrap());
        assert!(!dc.contains(&Gci3Bot(r, v[0])).unwrap());
        assert!(dc.contains(&Gci0(v[5], v[4])).unwrap());
    }

    #[test]
    fn budget_is_enforced() {
        let mut sig = Signature::new();
        let axs = parse_normalized("GCI2\tA\tr\tB\nGCI0\tB\tB'\n", &mut sig).unwrap();
        let kb = KnowledgeBase::from_axioms(sig, axs).unwrap();
        let sub = saturate(&kb);
        let full = compute_closure(&kb, &sub, &ClosureConfig::default()).unwrap();
        let derived: usize = full.stats().derived.values().sum();
        let ok = ClosureConfig {
            budget: derived as u64,
            ..Default::default()
        };
        assert!(compute_closure(&kb, &sub, &ok).is_ok());
        let tight = ClosureConfig {
            budget: derived as u64 - 1,
            ..Default::default()
        };
        let err = compute_closure(&kb, &sub, &tight).unwrap_err();
        assert!(err.to_string().contains("closure.budget"));
    }

    #[test]
    fn dump_round_trip() {
        let (kb, dc) = setup("GCI2\tA\tr\tB\nGCI0\tB\tB'\nGCI1\tA\tB\tC\nGCI0_BOT\tZ\n");
        let tmp = tempfile::tempdir().unwrap();
        dc.write_dump(&kb.signature, tmp.path()).unwrap();
        let back = DeductiveClosure::load_dump(&kb.signature, tmp.path(), false).unwrap();
        for form in Form::GCI {
            assert_eq!(back.members(form), dc.members(form));
        }
        assert_eq!(back.subsumption(), dc.subsumption());
        let text = fs::read_to_string(tmp.path().join("gci2.tsv")).unwrap();
        assert!(text.contains("GCI2\tA\tr\tB\tasserted\n"));
        assert!(text.contains("GCI2\tA\tr\tB'\tderived\n"));
    }
}
