use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::signature::{ClassId, RelId, Signature};

/// The nine normal forms of EL++ axioms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Form {
    Gci0,
    Gci1,
    Gci2,
    Gci3,
    Gci0Bot,
    Gci1Bot,
    Gci3Bot,
    Ri0,
    Ri1,
}

impl Form {
    pub const ALL: [Form; 9] = [
        Form::Gci0,
        Form::Gci1,
        Form::Gci2,
        Form::Gci3,
        Form::Gci0Bot,
        Form::Gci1Bot,
        Form::Gci3Bot,
        Form::Ri0,
        Form::Ri1,
    ];

    /// The seven concept-inclusion forms.
    pub const GCI: [Form; 7] = [
        Form::Gci0,
        Form::Gci1,
        Form::Gci2,
        Form::Gci3,
        Form::Gci0Bot,
        Form::Gci1Bot,
        Form::Gci3Bot,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Form::Gci0 => "GCI0",
            Form::Gci1 => "GCI1",
            Form::Gci2 => "GCI2",
            Form::Gci3 => "GCI3",
            Form::Gci0Bot => "GCI0_BOT",
            Form::Gci1Bot => "GCI1_BOT",
            Form::Gci3Bot => "GCI3_BOT",
            Form::Ri0 => "RI0",
            Form::Ri1 => "RI1",
        }
    }

    /// Number of identifier slots following the tag.
    pub fn arity(self) -> usize {
        match self {
            Form::Gci0Bot => 1,
            Form::Gci0 | Form::Gci1Bot | Form::Gci3Bot | Form::Ri0 => 2,
            Form::Gci1 | Form::Gci2 | Form::Gci3 | Form::Ri1 => 3,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Form {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Form::ALL
            .iter()
            .copied()
            .find(|f| f.tag() == s)
            .ok_or_else(|| format!("unknown form tag: {s}"))
    }
}

/// An axiom in one of the nine normal forms.
///
/// Slot order follows the form:
/// `Gci0(c, d)`: C ⊑ D; `Gci1(c, d, e)`: C ⊓ D ⊑ E; `Gci2(c, r, d)`: C ⊑ ∃r.D;
/// `Gci3(r, c, d)`: ∃r.C ⊑ D; `Gci0Bot(c)`: C ⊑ ⊥; `Gci1Bot(c, d)`: C ⊓ D ⊑ ⊥;
/// `Gci3Bot(r, c)`: ∃r.C ⊑ ⊥; `Ri0(r, s)`: r ⊑ s; `Ri1(r1, r2, s)`: r1 ∘ r2 ⊑ s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NormalizedAxiom {
    Gci0(ClassId, ClassId),
    Gci1(ClassId, ClassId, ClassId),
    Gci2(ClassId, RelId, ClassId),
    Gci3(RelId, ClassId, ClassId),
    Gci0Bot(ClassId),
    Gci1Bot(ClassId, ClassId),
    Gci3Bot(RelId, ClassId),
    Ri0(RelId, RelId),
    Ri1(RelId, RelId, RelId),
}

impl NormalizedAxiom {
    pub fn form(&self) -> Form {
        match self {
            NormalizedAxiom::Gci0(..) => Form::Gci0,
            NormalizedAxiom::Gci1(..) => Form::Gci1,
            NormalizedAxiom::Gci2(..) => Form::Gci2,
            NormalizedAxiom::Gci3(..) => Form::Gci3,
            NormalizedAxiom::Gci0Bot(..) => Form::Gci0Bot,
            NormalizedAxiom::Gci1Bot(..) => Form::Gci1Bot,
            NormalizedAxiom::Gci3Bot(..) => Form::Gci3Bot,
            NormalizedAxiom::Ri0(..) => Form::Ri0,
            NormalizedAxiom::Ri1(..) => Form::Ri1,
        }
    }

    /// Rewrite axioms with ⊥ in a right-hand slot into the matching ⊥ form.
    ///
    /// `C ⊑ ∃r.⊥` is equivalent to `C ⊑ ⊥` and becomes `Gci0Bot`.
    pub fn canonical(self) -> Self {
        use NormalizedAxiom::*;
        match self {
            Gci0(c, ClassId::BOT) => Gci0Bot(c),
            Gci1(c, d, ClassId::BOT) => Gci1Bot(c, d),
            Gci2(c, _, ClassId::BOT) => Gci0Bot(c),
            Gci3(r, c, ClassId::BOT) => Gci3Bot(r, c),
            other => other,
        }
    }

    pub fn classes(&self) -> Vec<ClassId> {
        use NormalizedAxiom::*;
        match *self {
            Gci0(c, d) | Gci2(c, _, d) | Gci3(_, c, d) | Gci1Bot(c, d) => vec![c, d],
            Gci1(c, d, e) => vec![c, d, e],
            Gci0Bot(c) | Gci3Bot(_, c) => vec![c],
            Ri0(..) | Ri1(..) => vec![],
        }
    }

    pub fn relations(&self) -> Vec<RelId> {
        use NormalizedAxiom::*;
        match *self {
            Gci2(_, r, _) | Gci3(r, _, _) | Gci3Bot(r, _) => vec![r],
            Ri0(r, s) => vec![r, s],
            Ri1(r1, r2, s) => vec![r1, r2, s],
            _ => vec![],
        }
    }

    /// Whether every id resolves in `sig`.
    pub fn is_valid_in(&self, sig: &Signature) -> bool {
        self.classes().iter().all(|&c| sig.has_class(c))
            && self.relations().iter().all(|&r| sig.has_relation(r))
    }

    /// Triple view of a GCI2 axiom.
    pub fn as_gci2(&self) -> Option<(ClassId, RelId, ClassId)> {
        match *self {
            NormalizedAxiom::Gci2(c, r, d) => Some((c, r, d)),
            _ => None,
        }
    }

    /// Render with signature names, e.g. `GCI2(A, r, B)`.
    pub fn display<'a>(&'a self, sig: &'a Signature) -> AxiomDisplay<'a> {
        AxiomDisplay { axiom: self, sig }
    }
}

pub struct AxiomDisplay<'a> {
    axiom: &'a NormalizedAxiom,
    sig: &'a Signature,
}

impl fmt::Display for AxiomDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fields = super::tsv::axiom_fields(self.axiom, self.sig);
        write!(f, "{}({})", fields[0], fields[1..].join(", "))
    }
}
