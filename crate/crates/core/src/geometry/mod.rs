//! Ball embeddings: parameters, loss terms, the GCI2 score and gradients.
//!
//! A class `c` is the open ball with center `f(c)` and radius `r(c)`, a
//! relation `r` is a translation `f(r)`. Radii are stored raw and may go
//! negative.

mod checkpoint;
mod grad;

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{ClassId, Form, NormalizedAxiom, RelId};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use grad::{DenseGradient, GradSink, NoGrad, SparseGradient};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("axiom references unknown id: {0}")]
    UnknownId(String),
    #[error("term {term} does not apply to {form} axioms")]
    FormMismatch { term: Term, form: Form },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegMode {
    /// `|‖x‖ − 1|`
    Strict,
    /// `max(0, ‖x‖ − R)`
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            _ if x > 0.0 => x,
            Activation::Relu => 0.0,
            Activation::LeakyRelu { slope } => slope * x,
        }
    }

    /// Derivative, taking the left side at 0.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            _ if x > 0.0 => 1.0,
            Activation::Relu => 0.0,
            Activation::LeakyRelu { slope } => slope,
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => write!(f, "relu"),
            Activation::LeakyRelu { slope } => write!(f, "leaky_relu({slope})"),
        }
    }
}

/// Hyperparameters fixed at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub dim: usize,
    pub margin: f64,
    pub reg_mode: RegMode,
    pub reg_radius: f64,
    pub activation: Activation,
}

/// The twelve differentiable terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    Gci0,
    Gci1,
    Gci2,
    Gci3,
    Gci0Bot,
    Gci1Bot,
    Gci3Bot,
    Gci0Neg,
    Gci1Neg,
    Gci2Neg,
    Gci3Neg,
    Score,
}

impl Term {
    pub const ALL: [Term; 12] = [
        Term::Gci0,
        Term::Gci1,
        Term::Gci2,
        Term::Gci3,
        Term::Gci0Bot,
        Term::Gci1Bot,
        Term::Gci3Bot,
        Term::Gci0Neg,
        Term::Gci1Neg,
        Term::Gci2Neg,
        Term::Gci3Neg,
        Term::Score,
    ];

    pub const NEGATIVE: [Term; 4] = [Term::Gci0Neg, Term::Gci1Neg, Term::Gci2Neg, Term::Gci3Neg];

    pub fn name(self) -> &'static str {
        match self {
            Term::Gci0 => "gci0",
            Term::Gci1 => "gci1",
            Term::Gci2 => "gci2",
            Term::Gci3 => "gci3",
            Term::Gci0Bot => "gci0_bot",
            Term::Gci1Bot => "gci1_bot",
            Term::Gci3Bot => "gci3_bot",
            Term::Gci0Neg => "gci0_neg",
            Term::Gci1Neg => "gci1_neg",
            Term::Gci2Neg => "gci2_neg",
            Term::Gci3Neg => "gci3_neg",
            Term::Score => "score",
        }
    }

    /// The axiom form the term is evaluated on.
    pub fn form(self) -> Form {
        match self {
            Term::Gci0 | Term::Gci0Neg => Form::Gci0,
            Term::Gci1 | Term::Gci1Neg => Form::Gci1,
            Term::Gci2 | Term::Gci2Neg | Term::Score => Form::Gci2,
            Term::Gci3 | Term::Gci3Neg => Form::Gci3,
            Term::Gci0Bot => Form::Gci0Bot,
            Term::Gci1Bot => Form::Gci1Bot,
            Term::Gci3Bot => Form::Gci3Bot,
        }
    }

    pub fn positive(form: Form) -> Option<Term> {
        Some(match form {
            Form::Gci0 => Term::Gci0,
            Form::Gci1 => Term::Gci1,
            Form::Gci2 => Term::Gci2,
            Form::Gci3 => Term::Gci3,
            Form::Gci0Bot => Term::Gci0Bot,
            Form::Gci1Bot => Term::Gci1Bot,
            Form::Gci3Bot => Term::Gci3Bot,
            Form::Ri0 | Form::Ri1 => return None,
        })
    }

    pub fn negative(form: Form) -> Option<Term> {
        Some(match form {
            Form::Gci0 => Term::Gci0Neg,
            Form::Gci1 => Term::Gci1Neg,
            Form::Gci2 => Term::Gci2Neg,
            Form::Gci3 => Term::Gci3Neg,
            _ => return None,
        })
    }

    pub fn is_negative(self) -> bool {
        Term::NEGATIVE.contains(&self)
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-term losses with their weights.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub terms: BTreeMap<Term, f64>,
    pub weights: BTreeMap<Term, f64>,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(terms: BTreeMap<Term, f64>, weights: BTreeMap<Term, f64>) -> Self {
        let mut b = LossBreakdown {
            terms,
            weights,
            total: 0.0,
        };
        b.total = b.weighted_sum();
        b
    }

    /// `Σ w_g · l_g` in term order.
    pub fn weighted_sum(&self) -> f64 {
        self.terms
            .iter()
            .map(|(t, l)| self.weights.get(t).copied().unwrap_or(0.0) * l)
            .sum()
    }

    /// `Σ w_g · l_g` over the positive terms only.
    pub fn positive_total(&self) -> f64 {
        self.terms
            .iter()
            .filter(|(t, _)| !t.is_negative())
            .map(|(t, l)| self.weights.get(t).copied().unwrap_or(0.0) * l)
            .sum()
    }

    /// Unweighted sum of the positive terms.
    pub fn positive_sum(&self) -> f64 {
        self.terms
            .iter()
            .filter(|(t, _)| !t.is_negative())
            .map(|(_, l)| l)
            .sum()
    }
}

#[derive(Clone, Copy)]
enum Vector {
    Center(ClassId),
    Rel(RelId),
}

/// `l(sn · ‖Σ vᵢ·aᵢ‖ + Σ r(cⱼ)·bⱼ + gs · γ)`
#[derive(Clone, Copy)]
struct Hinge {
    sn: f64,
    vecs: [(Vector, f64); 3],
    nv: usize,
    rads: [(ClassId, f64); 2],
    nr: usize,
    gs: f64,
}

#[derive(Clone, Copy)]
enum Piece {
    Hinge(Hinge),
    /// `l(min(r(c), r(d)) − r(e) − γ)`
    Min(ClassId, ClassId, ClassId),
    Reg(ClassId),
}

fn hinge(sn: f64, vecs: &[(Vector, f64)], rads: &[(ClassId, f64)], gs: f64) -> Piece {
    let mut h = Hinge {
        sn,
        vecs: [(Vector::Center(ClassId(0)), 0.0); 3],
        nv: vecs.len(),
        rads: [(ClassId(0), 0.0); 2],
        nr: rads.len(),
        gs,
    };
    h.vecs[..vecs.len()].copy_from_slice(vecs);
    h.rads[..rads.len()].copy_from_slice(rads);
    Piece::Hinge(h)
}

fn for_each_piece(term: Term, ax: &NormalizedAxiom, mut f: impl FnMut(Piece)) {
    use NormalizedAxiom as A;
    use Vector::{Center as C, Rel as R};
    match (term, *ax) {
        (Term::Gci0, A::Gci0(c, d)) => {
            f(hinge(1.0, &[(C(c), 1.0), (C(d), -1.0)], &[(c, 1.0), (d, -1.0)], -1.0));
            f(Piece::Reg(c));
            f(Piece::Reg(d));
        }
        (Term::Gci1, A::Gci1(c, d, e)) => {
            f(hinge(1.0, &[(C(c), 1.0), (C(d), -1.0)], &[(c, -1.0), (d, -1.0)], -1.0));
            f(hinge(1.0, &[(C(c), 1.0), (C(e), -1.0)], &[(c, 1.0), (e, -1.0)], -1.0));
            f(hinge(1.0, &[(C(d), 1.0), (C(e), -1.0)], &[(d, 1.0), (e, -1.0)], -1.0));
            f(Piece::Min(c, d, e));
            f(Piece::Reg(c));
            f(Piece::Reg(d));
            f(Piece::Reg(e));
        }
        (Term::Gci2, A::Gci2(c, r, d)) => {
            f(hinge(1.0, &[(C(c), 1.0), (R(r), 1.0), (C(d), -1.0)], &[(c, 1.0), (d, -1.0)], -1.0));
            f(Piece::Reg(c));
            f(Piece::Reg(d));
        }
        (Term::Gci3, A::Gci3(r, c, d)) => {
            f(hinge(1.0, &[(C(c), 1.0), (R(r), -1.0), (C(d), -1.0)], &[(c, -1.0), (d, -1.0)], -1.0));
            f(Piece::Reg(c));
            f(Piece::Reg(d));
        }
        (Term::Gci0Bot, A::Gci0Bot(c)) | (Term::Gci3Bot, A::Gci3Bot(_, c)) => {
            f(hinge(0.0, &[], &[(c, 1.0)], 0.0));
        }
        (Term::Gci1Bot, A::Gci1Bot(c, d)) | (Term::Gci0Neg, A::Gci0(c, d)) => {
            f(hinge(-1.0, &[(C(c), 1.0), (C(d), -1.0)], &[(c, 1.0), (d, 1.0)], 1.0));
            f(Piece::Reg(c));
            f(Piece::Reg(d));
        }
        (Term::Gci1Neg, A::Gci1(c, d, e)) => {
            f(hinge(1.0, &[(C(c), 1.0), (C(d), -1.0)], &[(c, -1.0), (d, -1.0)], -1.0));
            f(hinge(-1.0, &[(C(c), 1.0), (C(e), -1.0)], &[(c, 1.0)], 1.0));
            f(hinge(-1.0, &[(C(d), 1.0), (C(e), -1.0)], &[(d, 1.0)], 1.0));
            f(Piece::Reg(c));
            f(Piece::Reg(d));
            f(Piece::Reg(e));
        }
        (Term::Gci2Neg, A::Gci2(c, r, d)) => {
            f(hinge(-1.0, &[(C(c), 1.0), (R(r), 1.0), (C(d), -1.0)], &[(c, 1.0), (d, 1.0)], 1.0));
            f(Piece::Reg(c));
            f(Piece::Reg(d));
        }
        (Term::Gci3Neg, A::Gci3(r, c, d)) => {
            f(hinge(-1.0, &[(C(c), 1.0), (R(r), -1.0), (C(d), -1.0)], &[(c, 1.0), (d, 1.0)], 1.0));
            f(Piece::Reg(c));
            f(Piece::Reg(d));
        }
        (Term::Score, A::Gci2(c, r, d)) => {
            f(hinge(1.0, &[(C(c), 1.0), (R(r), 1.0), (C(d), -1.0)], &[(c, -1.0), (d, -1.0)], -1.0));
        }
        (t, a) => unreachable!("term {t} on {:?}", a.form()),
    }
}

/// Class balls, relation translations and fixed hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    config: ModelConfig,
    seed: u64,
    num_classes: usize,
    num_relations: usize,
    centers: Vec<f64>,
    radii: Vec<f64>,
    relations: Vec<f64>,
}

impl EmbeddingModel {
    /// Parameters drawn i.i.d. uniform on `[−1/√n, 1/√n]`.
    pub fn new(num_classes: usize, num_relations: usize, config: ModelConfig, seed: u64) -> Self {
        let dim = config.dim;
        let bound = 1.0 / (dim.max(1) as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.gen_range(-bound..=bound)).collect() };
        let centers = draw(num_classes * dim);
        let radii = draw(num_classes);
        let relations = draw(num_relations * dim);
        EmbeddingModel {
            config,
            seed,
            num_classes,
            num_relations,
            centers,
            radii,
            relations,
        }
    }

    pub(crate) fn from_parts(
        config: ModelConfig,
        seed: u64,
        centers: Vec<f64>,
        radii: Vec<f64>,
        relations: Vec<f64>,
    ) -> Self {
        let num_classes = radii.len();
        let num_relations = relations.len().checked_div(config.dim).unwrap_or(0);
        EmbeddingModel {
            config,
            seed,
            num_classes,
            num_relations,
            centers,
            radii,
            relations,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn center(&self, c: ClassId) -> &[f64] {
        let n = self.config.dim;
        &self.centers[c.index() * n..(c.index() + 1) * n]
    }

    pub fn radius(&self, c: ClassId) -> f64 {
        self.radii[c.index()]
    }

    pub fn relation(&self, r: RelId) -> &[f64] {
        let n = self.config.dim;
        &self.relations[r.index() * n..(r.index() + 1) * n]
    }

    pub fn set_center(&mut self, c: ClassId, v: &[f64]) {
        let n = self.config.dim;
        self.centers[c.index() * n..(c.index() + 1) * n].copy_from_slice(v);
    }

    pub fn set_radius(&mut self, c: ClassId, r: f64) {
        self.radii[c.index()] = r;
    }

    pub fn set_relation(&mut self, r: RelId, v: &[f64]) {
        let n = self.config.dim;
        self.relations[r.index() * n..(r.index() + 1) * n].copy_from_slice(v);
    }

    /// Flat parameter arrays: centers (row-major), radii, relation vectors.
    pub fn params(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.centers, &self.radii, &self.relations)
    }

    pub fn params_mut(&mut self) -> (&mut [f64], &mut [f64], &mut [f64]) {
        (&mut self.centers, &mut self.radii, &mut self.relations)
    }

    pub fn is_finite(&self) -> bool {
        self.centers
            .iter()
            .chain(&self.radii)
            .chain(&self.relations)
            .all(|x| x.is_finite())
    }

    fn vector(&self, v: Vector) -> &[f64] {
        match v {
            Vector::Center(c) => self.center(c),
            Vector::Rel(r) => self.relation(r),
        }
    }

    fn check(&self, term: Term, ax: &NormalizedAxiom) -> Result<(), GeometryError> {
        if ax.form() != term.form() {
            return Err(GeometryError::FormMismatch {
                term,
                form: ax.form(),
            });
        }
        if let Some(c) = ax.classes().into_iter().find(|c| c.index() >= self.num_classes) {
            return Err(GeometryError::UnknownId(format!("class {c}")));
        }
        if let Some(r) = ax.relations().into_iter().find(|r| r.index() >= self.num_relations) {
            return Err(GeometryError::UnknownId(format!("relation {r}")));
        }
        Ok(())
    }

    /// Regularizer of a center.
    pub fn reg(&self, c: ClassId) -> f64 {
        self.reg_of_norm(norm(self.center(c)))
    }

    fn reg_of_norm(&self, n: f64) -> f64 {
        match self.config.reg_mode {
            RegMode::Strict => (n - 1.0).abs(),
            RegMode::Relaxed => (n - self.config.reg_radius).max(0.0),
        }
    }

    fn reg_piece<S: GradSink>(&self, c: ClassId, scale: f64, sink: &mut S, grad: bool) -> f64 {
        let x = self.center(c);
        let n = norm(x);
        let value = self.reg_of_norm(n);
        if grad && n > 0.0 {
            let slope = match self.config.reg_mode {
                RegMode::Strict if n > 1.0 => 1.0,
                RegMode::Strict if n < 1.0 => -1.0,
                RegMode::Relaxed if n > self.config.reg_radius => 1.0,
                _ => 0.0,
            };
            if slope != 0.0 {
                sink.center(c, scale * slope / n, x);
            }
        }
        value
    }

    fn hinge_arg(&self, h: &Hinge, buf: &mut Vec<f64>) -> (f64, f64) {
        let n = self.config.dim;
        buf.clear();
        buf.resize(n, 0.0);
        for &(v, a) in &h.vecs[..h.nv] {
            for (b, x) in buf.iter_mut().zip(self.vector(v)) {
                *b += a * x;
            }
        }
        let nm = if h.nv == 0 { 0.0 } else { norm(buf) };
        let mut arg = h.sn * nm + h.gs * self.config.margin;
        for &(c, b) in &h.rads[..h.nr] {
            arg += b * self.radius(c);
        }
        (arg, nm)
    }

    fn piece<S: GradSink>(&self, p: &Piece, scale: f64, sink: &mut S, grad: bool, buf: &mut Vec<f64>) -> f64 {
        let act = self.config.activation;
        match p {
            Piece::Hinge(h) => {
                let (arg, nm) = self.hinge_arg(h, buf);
                if grad {
                    let d = scale * act.derivative(arg);
                    if d != 0.0 {
                        if nm > 0.0 {
                            for &(v, a) in &h.vecs[..h.nv] {
                                let coef = d * h.sn * a / nm;
                                match v {
                                    Vector::Center(c) => sink.center(c, coef, buf),
                                    Vector::Rel(r) => sink.relation(r, coef, buf),
                                }
                            }
                        }
                        for &(c, b) in &h.rads[..h.nr] {
                            sink.radius(c, d * b);
                        }
                    }
                }
                act.apply(arg)
            }
            Piece::Min(c, d, e) => {
                let (rc, rd) = (self.radius(*c), self.radius(*d));
                let (m, mc) = if rc <= rd { (rc, *c) } else { (rd, *d) };
                let arg = m - self.radius(*e) - self.config.margin;
                if grad {
                    let g = scale * act.derivative(arg);
                    if g != 0.0 {
                        sink.radius(mc, g);
                        sink.radius(*e, -g);
                    }
                }
                act.apply(arg)
            }
            Piece::Reg(c) => self.reg_piece(*c, scale, sink, grad),
        }
    }

    /// Value of `term` on `ax`; adds `scale ·` its gradient into `sink` when
    /// `grad` is set. Ids and form are not checked.
    pub fn accumulate<S: GradSink>(
        &self,
        term: Term,
        ax: &NormalizedAxiom,
        scale: f64,
        sink: &mut S,
        grad: bool,
    ) -> f64 {
        let mut buf = Vec::with_capacity(self.config.dim);
        let sign = if term == Term::Score { -1.0 } else { 1.0 };
        let mut total = 0.0;
        for_each_piece(term, ax, |p| {
            total += self.piece(&p, sign * scale, sink, grad, &mut buf);
        });
        sign * total
    }

    /// Value of one term.
    pub fn loss(&self, term: Term, ax: &NormalizedAxiom) -> Result<f64, GeometryError> {
        self.check(term, ax)?;
        Ok(self.accumulate(term, ax, 1.0, &mut NoGrad, false))
    }

    /// Value and analytic gradient of one term.
    pub fn gradient(&self, term: Term, ax: &NormalizedAxiom) -> Result<(f64, SparseGradient), GeometryError> {
        self.check(term, ax)?;
        let mut g = SparseGradient::new(self.config.dim);
        let v = self.accumulate(term, ax, 1.0, &mut g, true);
        Ok((v, g))
    }

    /// Plausibility of `c ⊑ ∃r.d`; higher is more plausible.
    pub fn score_gci2(&self, c: ClassId, r: RelId, d: ClassId) -> Result<f64, GeometryError> {
        self.loss(Term::Score, &NormalizedAxiom::Gci2(c, r, d))
    }

    /// Unchecked score for hot loops.
    pub fn score_unchecked(&self, c: ClassId, r: RelId, d: ClassId) -> f64 {
        self.accumulate(Term::Score, &NormalizedAxiom::Gci2(c, r, d), 1.0, &mut NoGrad, false)
    }

    /// Scores of `c ⊑ ∃r.d` for every `d` in `tails`, written to `out`.
    /// Bit-identical to [`Self::score_gci2`].
    pub fn score_tails(&self, c: ClassId, r: RelId, tails: &[ClassId], out: &mut Vec<f64>) {
        let cr: Vec<f64> = self
            .center(c)
            .iter()
            .zip(self.relation(r))
            .map(|(x, y)| (0.0 + x) + y)
            .collect();
        let (gamma, rc, act) = (self.config.margin, self.radius(c), self.config.activation);
        out.clear();
        out.extend(tails.iter().map(|&d| {
            let nm = norm_diff(&cr, self.center(d));
            let arg = nm + -gamma + -rc + -self.radius(d);
            -act.apply(arg)
        }));
    }

    /// How far the balls satisfy the axiom: the smallest negated activation
    /// argument over the pieces of the positive loss, margin included and
    /// regularizer ignored. Non-negative iff those pieces are all zero.
    pub fn containment_slack(&self, ax: &NormalizedAxiom) -> Result<f64, GeometryError> {
        let Some(term) = Term::positive(ax.form()) else {
            return Err(GeometryError::FormMismatch {
                term: Term::Gci0,
                form: ax.form(),
            });
        };
        self.check(term, ax)?;
        let mut buf = Vec::new();
        let mut slack = f64::INFINITY;
        for_each_piece(term, ax, |p| match p {
            Piece::Hinge(h) => {
                let (arg, _) = self.hinge_arg(&h, &mut buf);
                slack = slack.min(-arg);
            }
            Piece::Min(c, d, e) => {
                let m = self.radius(c).min(self.radius(d));
                slack = slack.min(self.radius(e) + self.config.margin - m);
            }
            Piece::Reg(_) => {}
        });
        Ok(slack)
    }
}

#[inline]
fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x + -y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

#[inline]
pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
