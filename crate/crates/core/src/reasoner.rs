//! Completion-rule saturation of the named-concept subsumption hierarchy.
//!
//! The calculus keeps a subsumer set `S(C)` per class (seeded with `C` and
//! `⊤`) and a successor relation per role, and applies until fixpoint:
//!
//! - R1: `D ∈ S(C)`, `D ⊑ E` ⇒ `E ∈ S(C)`
//! - R2: `D1, D2 ∈ S(C)`, `D1 ⊓ D2 ⊑ E` ⇒ `E ∈ S(C)`
//! - R3: `D ∈ S(C)`, `D ⊑ ∃r.E` ⇒ `(C, E) ∈ R(r)`
//! - R4: `(C, D) ∈ R(r)`, `D' ∈ S(D)`, `∃r.D' ⊑ E` ⇒ `E ∈ S(C)`
//! - R5: `(C, D) ∈ R(r)`, `⊥ ∈ S(D)` ⇒ `⊥ ∈ S(C)`
//! - R6: the three ⊥ forms add `⊥` the same way R1, R2 and R4 add `E`.
//!
//! Role inclusions are not used.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::kb::{format_axiom, ClassId, KnowledgeBase, NormalizedAxiom, RelId, Signature};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReasonerError {
    #[error("unknown class id {0}")]
    UnknownClass(ClassId),
}

/// Transitively closed subsumption relation over the classes of a signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsumptionClosure {
    subsumers: Vec<HashSet<ClassId>>,
    unsat: HashSet<ClassId>,
}

impl SubsumptionClosure {
    /// Build from explicit subsumer sets, adding reflexive and `⊤` entries.
    pub fn from_subsumers(mut subsumers: Vec<HashSet<ClassId>>) -> Self {
        for (i, set) in subsumers.iter_mut().enumerate() {
            set.insert(ClassId(i as u32));
            set.insert(ClassId::TOP);
        }
        let unsat = subsumers
            .iter()
            .enumerate()
            .filter(|(_, s)| s.contains(&ClassId::BOT))
            .map(|(i, _)| ClassId(i as u32))
            .collect();
        SubsumptionClosure { subsumers, unsat }
    }

    pub fn num_classes(&self) -> usize {
        self.subsumers.len()
    }

    /// Derived subsumers of `c`, including `c`, `⊤` and `⊥` when unsatisfiable.
    pub fn subsumers(&self, c: ClassId) -> &HashSet<ClassId> {
        &self.subsumers[c.index()]
    }

    pub fn is_unsat(&self, c: ClassId) -> bool {
        self.unsat.contains(&c)
    }

    pub fn unsat(&self) -> &HashSet<ClassId> {
        &self.unsat
    }

    /// `c ⊑ d`; unsatisfiable classes are subsumed by every class.
    pub fn is_subsumed(&self, c: ClassId, d: ClassId) -> Result<bool, ReasonerError> {
        let set = self
            .subsumers
            .get(c.index())
            .ok_or(ReasonerError::UnknownClass(c))?;
        if d.index() >= self.subsumers.len() {
            return Err(ReasonerError::UnknownClass(d));
        }
        Ok(self.unsat.contains(&c) || set.contains(&d))
    }

    /// Same as [`is_subsumed`](Self::is_subsumed) for ids known to be valid.
    #[inline]
    pub fn subsumes(&self, c: ClassId, d: ClassId) -> bool {
        self.unsat.contains(&c) || self.subsumers[c.index()].contains(&d)
    }

    /// All stored `(sub, sup)` pairs, sorted.
    pub fn pairs(&self) -> Vec<(ClassId, ClassId)> {
        let mut out: Vec<(ClassId, ClassId)> = self
            .subsumers
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.iter().map(move |&d| (ClassId(i as u32), d)))
            .collect();
        out.sort_unstable();
        out
    }

    /// Inverse index: for each class, the classes it subsumes.
    pub fn subclasses(&self) -> Vec<Vec<ClassId>> {
        let mut inv = vec![Vec::new(); self.subsumers.len()];
        for (c, d) in self.pairs() {
            inv[d.index()].push(c);
        }
        inv
    }

    /// Derived pairs as normalized axioms: `GCI0` lines, with unsatisfiable
    /// classes written once as `GCI0_BOT`.
    pub fn to_axioms(&self) -> Vec<NormalizedAxiom> {
        self.pairs()
            .into_iter()
            .map(|(c, d)| match d {
                ClassId::BOT => NormalizedAxiom::Gci0Bot(c),
                d => NormalizedAxiom::Gci0(c, d),
            })
            .collect()
    }

    /// Rebuild from a dump written by [`write_dump`](Self::write_dump).
    pub fn from_axioms(num_classes: usize, axioms: &[NormalizedAxiom]) -> Self {
        let mut subsumers = vec![HashSet::new(); num_classes];
        for ax in axioms {
            match *ax {
                NormalizedAxiom::Gci0(c, d) => {
                    subsumers[c.index()].insert(d);
                }
                NormalizedAxiom::Gci0Bot(c) => {
                    subsumers[c.index()].insert(ClassId::BOT);
                }
                _ => {}
            }
        }
        Self::from_subsumers(subsumers)
    }

    pub fn write_dump(&self, sig: &Signature, path: &Path) -> io::Result<()> {
        let mut out = String::new();
        for ax in self.to_axioms() {
            out.push_str(&format_axiom(&ax, sig));
            out.push('\n');
        }
        fs::write(path, out)
    }
}

/// Axioms indexed by the slots the rules match on.
#[derive(Default)]
struct RuleIndex {
    gci0: HashMap<ClassId, Vec<ClassId>>,
    /// D1 -> (D2, E), stored for both operand orders.
    gci1: HashMap<ClassId, Vec<(ClassId, ClassId)>>,
    gci2: HashMap<ClassId, Vec<(RelId, ClassId)>>,
    /// filler -> (r, E)
    gci3: HashMap<ClassId, Vec<(RelId, ClassId)>>,
    gci0_bot: HashSet<ClassId>,
    gci1_bot: HashMap<ClassId, Vec<ClassId>>,
    /// filler -> r
    gci3_bot: HashMap<ClassId, Vec<RelId>>,
}

impl RuleIndex {
    fn build<'a>(axioms: impl Iterator<Item = &'a NormalizedAxiom>) -> Self {
        let mut ix = RuleIndex::default();
        for ax in axioms {
            use NormalizedAxiom::*;
            match *ax {
                Gci0(c, d) => ix.gci0.entry(c).or_default().push(d),
                Gci1(c, d, e) => {
                    ix.gci1.entry(c).or_default().push((d, e));
                    if c != d {
                        ix.gci1.entry(d).or_default().push((c, e));
                    }
                }
                Gci2(c, r, d) => ix.gci2.entry(c).or_default().push((r, d)),
                Gci3(r, c, d) => ix.gci3.entry(c).or_default().push((r, d)),
                Gci0Bot(c) => {
                    ix.gci0_bot.insert(c);
                }
                Gci1Bot(c, d) => {
                    ix.gci1_bot.entry(c).or_default().push(d);
                    if c != d {
                        ix.gci1_bot.entry(d).or_default().push(c);
                    }
                }
                Gci3Bot(r, c) => ix.gci3_bot.entry(c).or_default().push(r),
                Ri0(..) | Ri1(..) => {}
            }
        }
        ix
    }
}

enum Task {
    Sub(ClassId, ClassId),
    Edge(RelId, ClassId, ClassId),
}

struct Saturation<'a> {
    ix: &'a RuleIndex,
    subsumers: Vec<HashSet<ClassId>>,
    /// (r, D) -> predecessors C with (C, D) ∈ R(r)
    preds: HashMap<(RelId, ClassId), HashSet<ClassId>>,
    /// D -> roles r with some edge into D
    roles_into: HashMap<ClassId, HashSet<RelId>>,
    queue: Vec<Task>,
}

impl Saturation<'_> {
    fn add_sub(&mut self, c: ClassId, d: ClassId) {
        if !self.subsumers[c.index()].insert(d) {
            return;
        }
        let ix = self.ix;
        if let Some(es) = ix.gci0.get(&d) {
            self.queue.extend(es.iter().map(|&e| Task::Sub(c, e)));
        }
        if let Some(pairs) = ix.gci1.get(&d) {
            for &(d2, e) in pairs {
                if self.subsumers[c.index()].contains(&d2) {
                    self.queue.push(Task::Sub(c, e));
                }
            }
        }
        if let Some(links) = ix.gci2.get(&d) {
            self.queue.extend(links.iter().map(|&(r, e)| Task::Edge(r, c, e)));
        }
        if ix.gci0_bot.contains(&d) {
            self.queue.push(Task::Sub(c, ClassId::BOT));
        }
        if let Some(others) = ix.gci1_bot.get(&d) {
            if others.iter().any(|d2| self.subsumers[c.index()].contains(d2)) {
                self.queue.push(Task::Sub(c, ClassId::BOT));
            }
        }
        // backward propagation along incoming edges (R4, R5, R6)
        let Some(roles) = self.roles_into.get(&c) else {
            return;
        };
        let mut new = Vec::new();
        for &r in roles {
            let preds = &self.preds[&(r, c)];
            if let Some(heads) = ix.gci3.get(&d) {
                for &(r3, e) in heads {
                    if r3 == r {
                        new.extend(preds.iter().map(|&p| Task::Sub(p, e)));
                    }
                }
            }
            if let Some(rs) = ix.gci3_bot.get(&d) {
                if rs.contains(&r) {
                    new.extend(preds.iter().map(|&p| Task::Sub(p, ClassId::BOT)));
                }
            }
            if d == ClassId::BOT {
                new.extend(preds.iter().map(|&p| Task::Sub(p, ClassId::BOT)));
            }
        }
        self.queue.extend(new);
    }

    fn add_edge(&mut self, r: RelId, c: ClassId, d: ClassId) {
        if !self.preds.entry((r, d)).or_default().insert(c) {
            return;
        }
        self.roles_into.entry(d).or_default().insert(r);
        let ix = self.ix;
        for &d2 in &self.subsumers[d.index()] {
            if let Some(heads) = ix.gci3.get(&d2) {
                for &(r3, e) in heads {
                    if r3 == r {
                        self.queue.push(Task::Sub(c, e));
                    }
                }
            }
            if let Some(rs) = ix.gci3_bot.get(&d2) {
                if rs.contains(&r) {
                    self.queue.push(Task::Sub(c, ClassId::BOT));
                }
            }
            if d2 == ClassId::BOT {
                self.queue.push(Task::Sub(c, ClassId::BOT));
            }
        }
    }
}

/// Saturate the training axioms of `kb`.
pub fn saturate(kb: &KnowledgeBase) -> SubsumptionClosure {
    saturate_axioms(kb.signature.num_classes(), kb.train())
}

/// Saturate an explicit axiom set over classes `0..num_classes`.
pub fn saturate_axioms<'a>(
    num_classes: usize,
    axioms: impl Iterator<Item = &'a NormalizedAxiom>,
) -> SubsumptionClosure {
    let ix = RuleIndex::build(axioms);
    let mut sat = Saturation {
        ix: &ix,
        subsumers: vec![HashSet::new(); num_classes],
        preds: HashMap::new(),
        roles_into: HashMap::new(),
        queue: Vec::new(),
    };
    for i in 0..num_classes as u32 {
        sat.queue.push(Task::Sub(ClassId(i), ClassId(i)));
        sat.queue.push(Task::Sub(ClassId(i), ClassId::TOP));
        while let Some(task) = sat.queue.pop() {
            match task {
                Task::Sub(c, d) => sat.add_sub(c, d),
                Task::Edge(r, c, d) => sat.add_edge(r, c, d),
            }
        }
    }
    SubsumptionClosure::from_subsumers(sat.subsumers)
}
