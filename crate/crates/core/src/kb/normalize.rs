//! Rewriting of general EL++ axioms into the nine normal forms.
//!
//! Rules, applied top-down:
//! - tautologies (⊥ on the left, ⊤ on the right) are dropped;
//! - left conjunctions are flattened and binarized left-associatively;
//! - complex subexpressions on the left are named with a fresh class `X`
//!   and the definition `expr ⊑ X`;
//! - complex fillers of existentials on the right are named with `X ⊑ filler`;
//! - complex ⊑ complex is split through a fresh middle class;
//! - conjunctions on the right are distributed.
//!
//! Fresh classes are `_N1`, `_N2`, ... skipping names already in the signature.

use super::axiom::NormalizedAxiom;
use super::sexpr::{ConceptExpr, GeneralAxiom};
use super::signature::{ClassId, RelId, Signature, FRESH_PREFIX};

/// Left-hand side reduced to one of the shapes a normal form accepts.
#[derive(Debug, Clone, Copy)]
enum Lhs {
    Atom(ClassId),
    Conj(ClassId, ClassId),
    Exists(RelId, ClassId),
}

fn is_bottom(e: &ConceptExpr) -> bool {
    match e {
        ConceptExpr::Bot => true,
        ConceptExpr::And(parts) => parts.iter().any(is_bottom),
        ConceptExpr::Some(_, f) => is_bottom(f),
        _ => false,
    }
}

fn is_top(e: &ConceptExpr) -> bool {
    match e {
        ConceptExpr::Top => true,
        ConceptExpr::And(parts) => parts.iter().all(is_top),
        _ => false,
    }
}

fn flatten_into(e: &ConceptExpr, out: &mut Vec<ConceptExpr>) {
    match e {
        ConceptExpr::And(parts) => parts.iter().for_each(|p| flatten_into(p, out)),
        ConceptExpr::Top => {}
        other => out.push(other.clone()),
    }
}

/// Collapse ⊥/⊤-equivalent expressions and flatten nested conjunctions.
fn simplify(e: &ConceptExpr) -> ConceptExpr {
    if is_bottom(e) {
        return ConceptExpr::Bot;
    }
    if is_top(e) {
        return ConceptExpr::Top;
    }
    match e {
        ConceptExpr::And(_) => {
            let mut parts = Vec::new();
            flatten_into(e, &mut parts);
            if parts.len() == 1 {
                parts.pop().unwrap()
            } else {
                ConceptExpr::And(parts)
            }
        }
        other => other.clone(),
    }
}

struct Normalizer<'s> {
    sig: &'s mut Signature,
    counter: u32,
    out: Vec<NormalizedAxiom>,
}

impl Normalizer<'_> {
    fn fresh(&mut self) -> ClassId {
        loop {
            self.counter += 1;
            let name = format!("{FRESH_PREFIX}{}", self.counter);
            if self.sig.class_id(&name).is_none() {
                return self.sig.intern_class(&name);
            }
        }
    }

    fn emit(&mut self, lhs: Lhs, sup: ClassId) {
        let ax = match lhs {
            Lhs::Atom(c) => NormalizedAxiom::Gci0(c, sup),
            Lhs::Conj(c, d) => NormalizedAxiom::Gci1(c, d, sup),
            Lhs::Exists(r, c) => NormalizedAxiom::Gci3(r, c, sup),
        };
        self.out.push(ax.canonical());
    }

    fn name_left(&mut self, e: &ConceptExpr) -> ClassId {
        match e {
            ConceptExpr::Atomic(c) | ConceptExpr::Nominal(c) => *c,
            ConceptExpr::Top => ClassId::TOP,
            _ => {
                let lhs = self.left(e);
                let x = self.fresh();
                self.emit(lhs, x);
                x
            }
        }
    }

    fn left(&mut self, e: &ConceptExpr) -> Lhs {
        match simplify(e) {
            ConceptExpr::Top => Lhs::Atom(ClassId::TOP),
            ConceptExpr::Bot => Lhs::Atom(ClassId::BOT),
            ConceptExpr::Atomic(c) | ConceptExpr::Nominal(c) => Lhs::Atom(c),
            ConceptExpr::Some(r, filler) => {
                let c = self.name_left(&simplify(&filler));
                Lhs::Exists(r, c)
            }
            ConceptExpr::And(parts) => {
                let mut acc = self.name_left(&parts[0]);
                let last = parts.len() - 1;
                for (i, part) in parts.iter().enumerate().skip(1) {
                    let x = self.name_left(part);
                    if i == last {
                        return Lhs::Conj(acc, x);
                    }
                    let fresh = self.fresh();
                    self.emit(Lhs::Conj(acc, x), fresh);
                    acc = fresh;
                }
                unreachable!("conjunctions have at least two parts")
            }
        }
    }

    fn right(&mut self, lhs: Lhs, e: &ConceptExpr) {
        match simplify(e) {
            ConceptExpr::Top => {}
            ConceptExpr::Bot => self.emit(lhs, ClassId::BOT),
            ConceptExpr::Atomic(d) | ConceptExpr::Nominal(d) => self.emit(lhs, d),
            ConceptExpr::And(parts) => {
                let sub = match lhs {
                    Lhs::Atom(c) => c,
                    _ => {
                        let x = self.fresh();
                        self.emit(lhs, x);
                        x
                    }
                };
                for p in &parts {
                    self.right(Lhs::Atom(sub), p);
                }
            }
            some @ ConceptExpr::Some(..) => {
                let ConceptExpr::Some(r, filler) = &some else {
                    unreachable!()
                };
                let c = match lhs {
                    Lhs::Atom(c) => c,
                    _ => {
                        let x = self.fresh();
                        self.emit(lhs, x);
                        self.right(Lhs::Atom(x), &some);
                        return;
                    }
                };
                match simplify(filler) {
                    ConceptExpr::Bot => self.out.push(NormalizedAxiom::Gci0Bot(c)),
                    ConceptExpr::Top => self.out.push(NormalizedAxiom::Gci2(c, *r, ClassId::TOP)),
                    ConceptExpr::Atomic(d) | ConceptExpr::Nominal(d) => {
                        self.out.push(NormalizedAxiom::Gci2(c, *r, d))
                    }
                    complex => {
                        let x = self.fresh();
                        self.out.push(NormalizedAxiom::Gci2(c, *r, x));
                        self.right(Lhs::Atom(x), &complex);
                    }
                }
            }
        }
    }

    fn inclusion(&mut self, sub: &ConceptExpr, sup: &ConceptExpr) {
        if is_bottom(sub) || is_top(sup) {
            return;
        }
        let lhs = self.left(sub);
        self.right(lhs, sup);
    }
}

/// Normalize `axioms`, interning fresh classes into `sig`.
pub fn normalize(axioms: &[GeneralAxiom], sig: &mut Signature) -> Vec<NormalizedAxiom> {
    let mut n = Normalizer {
        sig,
        counter: 0,
        out: Vec::new(),
    };
    for ax in axioms {
        match ax {
            GeneralAxiom::SubClassOf(c, d) => n.inclusion(c, d),
            GeneralAxiom::Equivalent(c, d) => {
                n.inclusion(c, d);
                n.inclusion(d, c);
            }
            GeneralAxiom::SubRole(r, s) => n.out.push(NormalizedAxiom::Ri0(*r, *s)),
            GeneralAxiom::RoleChain(r1, r2, s) => n.out.push(NormalizedAxiom::Ri1(*r1, *r2, *s)),
        }
    }
    n.out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::sexpr::parse_general;
    use crate::kb::tsv::serialize_normalized;
    use proptest::prelude::*;

    fn run(text: &str) -> String {
        let mut sig = Signature::new();
        let axs = parse_general(text, &mut sig).unwrap();
        let out = normalize(&axs, &mut sig);
        serialize_normalized(&out, &sig)
    }

    #[test]
    fn conjunction_on_the_right_splits() {
        assert_eq!(
            run("(subclassof A (and B (some r C)))"),
            "GCI0\tA\tB\nGCI2\tA\tr\tC\n"
        );
    }

    #[test]
    fn complex_filler_on_the_left_is_named() {
        assert_eq!(
            run("(subclassof (some r (and B C)) D)"),
            "GCI1\tB\tC\t_N1\nGCI3\tr\t_N1\tD\n"
        );
    }

    #[test]
    fn left_conjunctions_binarize_left_associatively() {
        assert_eq!(
            run("(subclassof (and A B C) D)"),
            "GCI1\tA\tB\t_N1\nGCI1\t_N1\tC\tD\n"
        );
    }

    #[test]
    fn equivalence_emits_both_directions() {
        assert_eq!(run("(equivalent A B)"), "GCI0\tA\tB\nGCI0\tB\tA\n");
    }

    #[test]
    fn complex_on_both_sides_uses_a_middle_class() {
        assert_eq!(
            run("(subclassof (some r A) (some s B))"),
            "GCI3\tr\tA\t_N1\nGCI2\t_N1\ts\tB\n"
        );
        assert_eq!(
            run("(subclassof (and A B) (and C D))"),
            "GCI1\tA\tB\t_N1\nGCI0\t_N1\tC\nGCI0\t_N1\tD\n"
        );
    }

    #[test]
    fn complex_filler_on_the_right() {
        assert_eq!(
            run("(subclassof A (some r (and B (some s C))))"),
            "GCI2\tA\tr\t_N1\nGCI0\t_N1\tB\nGCI2\t_N1\ts\tC\n"
        );
    }

    #[test]
    fn bottom_and_top_handling() {
        assert_eq!(run("(subclassof (and A bot) B)"), "");
        assert_eq!(run("(subclassof A top)"), "");
        assert_eq!(run("(subclassof A bot)"), "GCI0_BOT\tA\n");
        assert_eq!(run("(subclassof (and A B) bot)"), "GCI1_BOT\tA\tB\n");
        assert_eq!(run("(subclassof (some r A) bot)"), "GCI3_BOT\tr\tA\n");
        assert_eq!(run("(subclassof A (some r bot))"), "GCI0_BOT\tA\n");
        assert_eq!(run("(subclassof (and A top) B)"), "GCI0\tA\tB\n");
        assert_eq!(run("(subclassof top (some r A))"), "GCI2\towl:Thing\tr\tA\n");
    }

    #[test]
    fn roles_pass_through() {
        assert_eq!(
            run("(subrole r s) (rolechain r s t)"),
            "RI0\tr\ts\nRI1\tr\ts\tt\n"
        );
    }

    #[test]
    fn nominals_become_classes() {
        assert_eq!(
            run("(subclassof (one p1) (some iw (one p2)))"),
            "GCI2\t{p1}\tiw\t{p2}\n"
        );
    }

    #[test]
    fn fresh_names_skip_existing_classes() {
        let mut sig = Signature::new();
        sig.intern_class("_N1");
        let axs = parse_general("(subclassof (and A B C) D)", &mut sig).unwrap();
        let out = normalize(&axs, &mut sig);
        assert_eq!(
            serialize_normalized(&out, &sig),
            "GCI1\tA\tB\t_N2\nGCI1\t_N2\tC\tD\n"
        );
    }

    fn arb_concept() -> impl Strategy<Value = ConceptExpr> {
        let leaf = prop_oneof![
            6 => (2u32..7).prop_map(|c| ConceptExpr::Atomic(ClassId(c))),
            1 => Just(ConceptExpr::Top),
            1 => Just(ConceptExpr::Bot),
        ];
        leaf.prop_recursive(3, 12, 3, |inner| {
            prop_oneof![
                proptest::collection::vec(inner.clone(), 2..4).prop_map(ConceptExpr::And),
                ((0u32..2).prop_map(RelId), inner).prop_map(|(r, f)| ConceptExpr::some(r, f)),
            ]
        })
    }

    fn arb_general() -> impl Strategy<Value = GeneralAxiom> {
        prop_oneof![
            3 => (arb_concept(), arb_concept()).prop_map(|(a, b)| GeneralAxiom::SubClassOf(a, b)),
            1 => (arb_concept(), arb_concept()).prop_map(|(a, b)| GeneralAxiom::Equivalent(a, b)),
        ]
    }

    fn base_sig() -> Signature {
        let mut sig = Signature::new();
        for i in 0..6 {
            sig.intern_class(&format!("C{i}"));
        }
        for r in ["r", "s", "t"] {
            sig.intern_relation(r);
        }
        sig
    }

    fn weight(e: &ConceptExpr) -> usize {
        match e {
            ConceptExpr::And(parts) => parts.len() - 1 + parts.iter().map(weight).sum::<usize>(),
            ConceptExpr::Some(_, f) => 1 + weight(f),
            _ => 0,
        }
    }

    proptest! {
        #[test]
        fn normal_forms_are_fixed_points(axioms in proptest::collection::vec(
            crate::kb::test_support::arb_axiom(), 0..20)) {
            let mut sig = base_sig();
            let general: Vec<GeneralAxiom> = axioms.iter().map(|&a| a.into()).collect();
            let before = sig.num_classes();
            let out = normalize(&general, &mut sig);
            prop_assert_eq!(out, axioms);
            prop_assert_eq!(sig.num_classes(), before);
        }

        #[test]
        fn fresh_classes_are_bounded(axioms in proptest::collection::vec(arb_general(), 1..6)) {
            let mut sig = base_sig();
            let before = sig.num_classes();
            let out = normalize(&axioms, &mut sig);
            let bound: usize = axioms.iter().map(|a| match a {
                GeneralAxiom::SubClassOf(l, r) => weight(l) + weight(r),
                GeneralAxiom::Equivalent(l, r) => 2 * (weight(l) + weight(r)),
                _ => 0,
            }).sum();
            prop_assert!(sig.num_classes() - before <= bound);
            for ax in &out {
                prop_assert!(ax.is_valid_in(&sig));
                prop_assert_eq!(ax.canonical(), *ax);
            }
        }
    }
}
