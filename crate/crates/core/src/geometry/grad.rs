use std::collections::HashMap;

use crate::kb::{ClassId, RelId};

/// Receives partial derivatives from loss evaluation.
pub trait GradSink {
    /// Add `coef * v` to the gradient of the center of `c`.
    fn center(&mut self, c: ClassId, coef: f64, v: &[f64]);
    fn radius(&mut self, c: ClassId, g: f64);
    /// Add `coef * v` to the gradient of the vector of `r`.
    fn relation(&mut self, r: RelId, coef: f64, v: &[f64]);
}

/// Discards everything; used for value-only evaluation.
pub struct NoGrad;

impl GradSink for NoGrad {
    fn center(&mut self, _: ClassId, _: f64, _: &[f64]) {}
    fn radius(&mut self, _: ClassId, _: f64) {}
    fn relation(&mut self, _: RelId, _: f64, _: &[f64]) {}
}

fn axpy(dst: &mut [f64], coef: f64, v: &[f64]) {
    for (d, x) in dst.iter_mut().zip(v) {
        *d += coef * x;
    }
}

/// Gradient restricted to the parameters an evaluation touched.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseGradient {
    dim: usize,
    pub centers: HashMap<ClassId, Vec<f64>>,
    pub radii: HashMap<ClassId, f64>,
    pub relations: HashMap<RelId, Vec<f64>>,
}

impl SparseGradient {
    pub fn new(dim: usize) -> Self {
        SparseGradient {
            dim,
            ..Default::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty() && self.radii.is_empty() && self.relations.is_empty()
    }

    pub fn center_grad(&self, c: ClassId) -> Option<&[f64]> {
        self.centers.get(&c).map(Vec::as_slice)
    }

    pub fn radius_grad(&self, c: ClassId) -> f64 {
        self.radii.get(&c).copied().unwrap_or(0.0)
    }

    pub fn relation_grad(&self, r: RelId) -> Option<&[f64]> {
        self.relations.get(&r).map(Vec::as_slice)
    }

    /// Add every entry into a dense buffer.
    pub fn add_to(&self, dense: &mut DenseGradient) {
        for (c, v) in &self.centers {
            dense.center(*c, 1.0, v);
        }
        for (c, g) in &self.radii {
            dense.radius(*c, *g);
        }
        for (r, v) in &self.relations {
            dense.relation(*r, 1.0, v);
        }
    }
}

impl GradSink for SparseGradient {
    fn center(&mut self, c: ClassId, coef: f64, v: &[f64]) {
        let dim = self.dim;
        axpy(self.centers.entry(c).or_insert_with(|| vec![0.0; dim]), coef, v);
    }

    fn radius(&mut self, c: ClassId, g: f64) {
        *self.radii.entry(c).or_insert(0.0) += g;
    }

    fn relation(&mut self, r: RelId, coef: f64, v: &[f64]) {
        let dim = self.dim;
        axpy(self.relations.entry(r).or_insert_with(|| vec![0.0; dim]), coef, v);
    }
}

/// Gradient laid out like the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGradient {
    pub dim: usize,
    pub centers: Vec<f64>,
    pub radii: Vec<f64>,
    pub relations: Vec<f64>,
}

impl DenseGradient {
    pub fn zeros(num_classes: usize, num_relations: usize, dim: usize) -> Self {
        DenseGradient {
            dim,
            centers: vec![0.0; num_classes * dim],
            radii: vec![0.0; num_classes],
            relations: vec![0.0; num_relations * dim],
        }
    }

    pub fn clear(&mut self) {
        self.centers.fill(0.0);
        self.radii.fill(0.0);
        self.relations.fill(0.0);
    }
}

impl GradSink for DenseGradient {
    fn center(&mut self, c: ClassId, coef: f64, v: &[f64]) {
        let i = c.index() * self.dim;
        axpy(&mut self.centers[i..i + self.dim], coef, v);
    }

    fn radius(&mut self, c: ClassId, g: f64) {
        self.radii[c.index()] += g;
    }

    fn relation(&mut self, r: RelId, coef: f64, v: &[f64]) {
        let i = r.index() * self.dim;
        axpy(&mut self.relations[i..i + self.dim], coef, v);
    }
}
