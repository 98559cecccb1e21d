//! Line-oriented normalized axiom format.
//!
//! One axiom per line, fields separated by a single TAB, the first field being
//! the form tag. Lines starting with `#` and blank lines are skipped.

use super::axiom::{Form, NormalizedAxiom};
use super::signature::{ClassId, RelId, Signature};
use super::KbError;

/// Parse a normalized axiom document, interning names into `sig`.
pub fn parse_normalized(text: &str, sig: &mut Signature) -> Result<Vec<NormalizedAxiom>, KbError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_line(line, sig).map_err(|reason| KbError::Parse {
            line: idx + 1,
            reason,
        })?);
    }
    Ok(out)
}

/// Parse a single non-comment line.
pub(crate) fn parse_line(line: &str, sig: &mut Signature) -> Result<NormalizedAxiom, String> {
    let fields: Vec<&str> = line.split('\t').collect();
    let form: Form = fields[0].parse()?;
    let expected = form.arity() + 1;
    if fields.len() != expected {
        return Err(format!("expected {expected} fields, got {}", fields.len()));
    }
    if let Some(pos) = fields.iter().position(|f| f.is_empty()) {
        return Err(format!("empty identifier in field {}", pos + 1));
    }
    let f = &fields[1..];
    let mut c = |i: usize| sig.intern_class(f[i]);
    use NormalizedAxiom::*;
    let ax = match form {
        Form::Gci0 => {
            let (a, b) = (c(0), c(1));
            Gci0(a, b)
        }
        Form::Gci1 => {
            let (a, b, e) = (c(0), c(1), c(2));
            Gci1(a, b, e)
        }
        Form::Gci2 => {
            let a = sig.intern_class(f[0]);
            let r = sig.intern_relation(f[1]);
            Gci2(a, r, sig.intern_class(f[2]))
        }
        Form::Gci3 => {
            let r = sig.intern_relation(f[0]);
            let a = sig.intern_class(f[1]);
            Gci3(r, a, sig.intern_class(f[2]))
        }
        Form::Gci0Bot => Gci0Bot(c(0)),
        Form::Gci1Bot => {
            let (a, b) = (c(0), c(1));
            Gci1Bot(a, b)
        }
        Form::Gci3Bot => {
            let r = sig.intern_relation(f[0]);
            Gci3Bot(r, sig.intern_class(f[1]))
        }
        Form::Ri0 => {
            let r = sig.intern_relation(f[0]);
            Ri0(r, sig.intern_relation(f[1]))
        }
        Form::Ri1 => {
            let r1 = sig.intern_relation(f[0]);
            let r2 = sig.intern_relation(f[1]);
            Ri1(r1, r2, sig.intern_relation(f[2]))
        }
    };
    Ok(ax.canonical())
}

/// Tag followed by the slot names of `ax`.
pub(crate) fn axiom_fields<'a>(ax: &NormalizedAxiom, sig: &'a Signature) -> Vec<&'a str> {
    let c = |id: ClassId| sig.class_name(id);
    let r = |id: RelId| sig.relation_name(id);
    use NormalizedAxiom::*;
    let mut v = vec![ax.form().tag()];
    match *ax {
        Gci0(a, b) => v.extend([c(a), c(b)]),
        Gci1(a, b, e) => v.extend([c(a), c(b), c(e)]),
        Gci2(a, rel, b) => v.extend([c(a), r(rel), c(b)]),
        Gci3(rel, a, b) => v.extend([r(rel), c(a), c(b)]),
        Gci0Bot(a) => v.push(c(a)),
        Gci1Bot(a, b) => v.extend([c(a), c(b)]),
        Gci3Bot(rel, a) => v.extend([r(rel), c(a)]),
        Ri0(a, b) => v.extend([r(a), r(b)]),
        Ri1(a, b, s) => v.extend([r(a), r(b), r(s)]),
    }
    v
}

/// One TAB-separated line without the trailing newline.
pub fn format_axiom(ax: &NormalizedAxiom, sig: &Signature) -> String {
    axiom_fields(ax, sig).join("\t")
}

/// Inverse of [`parse_normalized`]; every line is newline-terminated.
pub fn serialize_normalized(axioms: &[NormalizedAxiom], sig: &Signature) -> String {
    let mut out = String::new();
    for ax in axioms {
        out.push_str(&format_axiom(ax, sig));
        out.push('\n');
    }
    out
}
