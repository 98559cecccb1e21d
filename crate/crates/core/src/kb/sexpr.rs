//! S-expression syntax for general (unnormalized) EL++ axioms.
//!
//! ```text
//! (subclassof A (and B (some r C)))
//! (equivalent A (some part_of (one x)))
//! (subrole r s)
//! (rolechain r1 r2 s)
//! ```
//!
//! `top` and `bot` may be written bare or as `(top)` / `(bot)`. A `;` starts a
//! comment running to the end of the line.

use std::fmt;

use super::axiom::NormalizedAxiom;
use super::signature::{ClassId, RelId, Signature, BOT_NAME, FRESH_PREFIX, TOP_NAME};
use super::KbError;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ConceptExpr {
    Atomic(ClassId),
    Top,
    Bot,
    /// Always at least two conjuncts.
    And(Vec<ConceptExpr>),
    Some(RelId, Box<ConceptExpr>),
    /// `{a}`; the individual is interned as the class named `{a}`.
    Nominal(ClassId),
}

impl ConceptExpr {
    pub fn some(r: RelId, filler: ConceptExpr) -> Self {
        ConceptExpr::Some(r, Box::new(filler))
    }

    /// Atomic, top or nominal.
    pub fn is_named(&self) -> bool {
        matches!(
            self,
            ConceptExpr::Atomic(_) | ConceptExpr::Top | ConceptExpr::Nominal(_)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GeneralAxiom {
    SubClassOf(ConceptExpr, ConceptExpr),
    Equivalent(ConceptExpr, ConceptExpr),
    SubRole(RelId, RelId),
    RoleChain(RelId, RelId, RelId),
}

impl From<NormalizedAxiom> for GeneralAxiom {
    fn from(ax: NormalizedAxiom) -> Self {
        use ConceptExpr as E;
        use NormalizedAxiom::*;
        let atom = |c: ClassId| match c {
            ClassId::TOP => E::Top,
            ClassId::BOT => E::Bot,
            c => E::Atomic(c),
        };
        let sub = GeneralAxiom::SubClassOf;
        match ax {
            Gci0(c, d) => sub(atom(c), atom(d)),
            Gci1(c, d, e) => sub(E::And(vec![atom(c), atom(d)]), atom(e)),
            Gci2(c, r, d) => sub(atom(c), E::some(r, atom(d))),
            Gci3(r, c, d) => sub(E::some(r, atom(c)), atom(d)),
            Gci0Bot(c) => sub(atom(c), E::Bot),
            Gci1Bot(c, d) => sub(E::And(vec![atom(c), atom(d)]), E::Bot),
            Gci3Bot(r, c) => sub(E::some(r, atom(c)), E::Bot),
            Ri0(r, s) => GeneralAxiom::SubRole(r, s),
            Ri1(r1, r2, s) => GeneralAxiom::RoleChain(r1, r2, s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Pos {
    line: usize,
    column: usize,
}

#[derive(Debug)]
enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

impl Sexp {
    fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }
}

fn syntax(pos: Pos, reason: impl Into<String>) -> KbError {
    KbError::Syntax {
        line: pos.line,
        column: pos.column,
        reason: reason.into(),
    }
}

#[derive(Debug)]
enum Token {
    Open,
    Close,
    Atom(String),
}

fn tokenize(text: &str) -> Result<Vec<(Token, Pos)>, KbError> {
    let mut tokens = Vec::new();
    for (li, line) in text.lines().enumerate() {
        let mut chars = line.char_indices().peekable();
        while let Some((ci, ch)) = chars.next() {
            let pos = Pos {
                line: li + 1,
                column: line[..ci].chars().count() + 1,
            };
            match ch {
                ';' => break,
                '(' => tokens.push((Token::Open, pos)),
                ')' => tokens.push((Token::Close, pos)),
                c if c.is_whitespace() => {}
                _ => {
                    let mut end = ci + ch.len_utf8();
                    while let Some(&(ni, nc)) = chars.peek() {
                        if nc.is_whitespace() || nc == '(' || nc == ')' || nc == ';' {
                            break;
                        }
                        end = ni + nc.len_utf8();
                        chars.next();
                    }
                    tokens.push((Token::Atom(line[ci..end].to_owned()), pos));
                }
            }
        }
    }
    Ok(tokens)
}

fn read_forest(text: &str) -> Result<Vec<Sexp>, KbError> {
    let tokens = tokenize(text)?;
    let mut stack: Vec<(Vec<Sexp>, Pos)> = Vec::new();
    let mut top = Vec::new();
    for (tok, pos) in tokens {
        match tok {
            Token::Open => stack.push((Vec::new(), pos)),
            Token::Close => {
                let (items, open_pos) = stack
                    .pop()
                    .ok_or_else(|| syntax(pos, "unbalanced parentheses: unexpected ')'"))?;
                let list = Sexp::List(items, open_pos);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(list),
                    None => top.push(list),
                }
            }
            Token::Atom(a) => match stack.last_mut() {
                Some((parent, _)) => parent.push(Sexp::Atom(a, pos)),
                None => top.push(Sexp::Atom(a, pos)),
            },
        }
    }
    if let Some((_, open_pos)) = stack.pop() {
        return Err(syntax(open_pos, "unbalanced parentheses: unclosed '('"));
    }
    Ok(top)
}

struct Builder<'s> {
    sig: &'s mut Signature,
}

impl Builder<'_> {
    fn head<'a>(&self, items: &'a [Sexp], pos: Pos) -> Result<(&'a str, &'a [Sexp]), KbError> {
        match items.split_first() {
            Some((Sexp::Atom(h, _), rest)) => Ok((h.as_str(), rest)),
            Some((other, _)) => Err(syntax(other.pos(), "expected a head symbol")),
            None => Err(syntax(pos, "empty list")),
        }
    }

    fn name<'a>(&self, s: &'a Sexp, what: &str) -> Result<&'a str, KbError> {
        match s {
            Sexp::Atom(a, p) => {
                if a.starts_with(FRESH_PREFIX) {
                    Err(syntax(
                        *p,
                        format!("identifier {a} uses the reserved prefix {FRESH_PREFIX}"),
                    ))
                } else {
                    Ok(a.as_str())
                }
            }
            Sexp::List(_, p) => Err(syntax(*p, format!("expected a {what} name, got a list"))),
        }
    }

    fn relation(&mut self, s: &Sexp) -> Result<RelId, KbError> {
        let name = self.name(s, "relation")?;
        Ok(self.sig.intern_relation(name))
    }

    fn arity(head: &str, args: &[Sexp], n: usize, pos: Pos) -> Result<(), KbError> {
        if args.len() != n {
            return Err(syntax(
                pos,
                format!("{head} expects {n} arguments, got {}", args.len()),
            ));
        }
        Ok(())
    }

    fn concept(&mut self, s: &Sexp) -> Result<ConceptExpr, KbError> {
        match s {
            Sexp::Atom(a, _) => Ok(match a.as_str() {
                "top" | TOP_NAME => ConceptExpr::Top,
                "bot" | BOT_NAME => ConceptExpr::Bot,
                _ => {
                    let name = self.name(s, "class")?;
                    ConceptExpr::Atomic(self.sig.intern_class(name))
                }
            }),
            Sexp::List(items, pos) => {
                let (head, args) = self.head(items, *pos)?;
                match head {
                    "top" => Self::arity(head, args, 0, *pos).map(|_| ConceptExpr::Top),
                    "bot" => Self::arity(head, args, 0, *pos).map(|_| ConceptExpr::Bot),
                    "and" => {
                        if args.len() < 2 {
                            return Err(syntax(
                                *pos,
                                format!("and expects at least 2 arguments, got {}", args.len()),
                            ));
                        }
                        let parts = args
                            .iter()
                            .map(|a| self.concept(a))
                            .collect::<Result<Vec<_>, _>>()?;
                        Ok(ConceptExpr::And(parts))
                    }
                    "some" => {
                        Self::arity(head, args, 2, *pos)?;
                        let r = self.relation(&args[0])?;
                        Ok(ConceptExpr::some(r, self.concept(&args[1])?))
                    }
                    "one" => {
                        Self::arity(head, args, 1, *pos)?;
                        let ind = self.name(&args[0], "individual")?;
                        Ok(ConceptExpr::Nominal(self.sig.intern_class(&format!("{{{ind}}}"))))
                    }
                    other => Err(syntax(
                        items[0].pos(),
                        format!("unknown head symbol: {other}"),
                    )),
                }
            }
        }
    }

    fn axiom(&mut self, s: &Sexp) -> Result<GeneralAxiom, KbError> {
        let (items, pos) = match s {
            Sexp::List(items, pos) => (items, *pos),
            Sexp::Atom(a, p) => return Err(syntax(*p, format!("expected an axiom, got atom {a}"))),
        };
        let (head, args) = self.head(items, pos)?;
        match head {
            "subclassof" | "equivalent" => {
                Self::arity(head, args, 2, pos)?;
                let lhs = self.concept(&args[0])?;
                let rhs = self.concept(&args[1])?;
                Ok(if head == "subclassof" {
                    GeneralAxiom::SubClassOf(lhs, rhs)
                } else {
                    GeneralAxiom::Equivalent(lhs, rhs)
                })
            }
            "subrole" => {
                Self::arity(head, args, 2, pos)?;
                Ok(GeneralAxiom::SubRole(
                    self.relation(&args[0])?,
                    self.relation(&args[1])?,
                ))
            }
            "rolechain" => {
                Self::arity(head, args, 3, pos)?;
                Ok(GeneralAxiom::RoleChain(
                    self.relation(&args[0])?,
                    self.relation(&args[1])?,
                    self.relation(&args[2])?,
                ))
            }
            other => Err(syntax(
                items[0].pos(),
                format!("unknown head symbol: {other}"),
            )),
        }
    }
}

/// Parse a document of general axioms, interning names into `sig`.
pub fn parse_general(text: &str, sig: &mut Signature) -> Result<Vec<GeneralAxiom>, KbError> {
    let forest = read_forest(text)?;
    let mut b = Builder { sig };
    forest.iter().map(|s| b.axiom(s)).collect()
}

struct ConceptWriter<'a>(&'a ConceptExpr, &'a Signature);

impl fmt::Display for ConceptWriter<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sig = self.1;
        match self.0 {
            ConceptExpr::Top => f.write_str("top"),
            ConceptExpr::Bot => f.write_str("bot"),
            ConceptExpr::Atomic(c) => f.write_str(sig.class_name(*c)),
            ConceptExpr::Nominal(c) => {
                let name = sig.class_name(*c);
                let inner = name
                    .strip_prefix('{')
                    .and_then(|n| n.strip_suffix('}'))
                    .unwrap_or(name);
                write!(f, "(one {inner})")
            }
            ConceptExpr::And(parts) => {
                f.write_str("(and")?;
                for p in parts {
                    write!(f, " {}", ConceptWriter(p, sig))?;
                }
                f.write_str(")")
            }
            ConceptExpr::Some(r, filler) => write!(
                f,
                "(some {} {})",
                sig.relation_name(*r),
                ConceptWriter(filler, sig)
            ),
        }
    }
}

/// Render one axiom in s-expression syntax.
pub fn format_general(ax: &GeneralAxiom, sig: &Signature) -> String {
    match ax {
        GeneralAxiom::SubClassOf(l, r) => format!(
            "(subclassof {} {})",
            ConceptWriter(l, sig),
            ConceptWriter(r, sig)
        ),
        GeneralAxiom::Equivalent(l, r) => format!(
            "(equivalent {} {})",
            ConceptWriter(l, sig),
            ConceptWriter(r, sig)
        ),
        GeneralAxiom::SubRole(r, s) => {
            format!("(subrole {} {})", sig.relation_name(*r), sig.relation_name(*s))
        }
        GeneralAxiom::RoleChain(r1, r2, s) => format!(
            "(rolechain {} {} {})",
            sig.relation_name(*r1),
            sig.relation_name(*r2),
            sig.relation_name(*s)
        ),
    }
}
