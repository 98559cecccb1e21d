//! Negative sampling by tail corruption, optionally filtered against the
//! deductive closure.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closure::DeductiveClosure;
use crate::kb::{ClassId, Form, NormalizedAxiom};

pub const DEFAULT_MAX_ATTEMPTS: u32 = 10;

/// Forms that have a negative loss.
pub const CORRUPTIBLE: [Form; 4] = [Form::Gci0, Form::Gci1, Form::Gci2, Form::Gci3];

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("pool exhausted")]
    PoolExhausted,
    #[error("{0} axioms cannot be corrupted")]
    UnsupportedForm(Form),
    #[error("no corruption pool for {0} axioms")]
    MissingPool(Form),
    #[error("closure filtering and entailed negatives need a deductive closure")]
    MissingClosure,
    #[error("entailed_ratio must lie in [0, 1], got {0}")]
    BadRatio(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub filter_with_closure: bool,
    pub entailed_ratio: f64,
    pub max_resample_attempts: u32,
    pub seed: u64,
    /// Replacement candidates per corruptible form.
    pub pools: BTreeMap<Form, Vec<ClassId>>,
}

impl SamplerConfig {
    /// The same pool for every corruptible form.
    pub fn with_pool(pool: Vec<ClassId>, seed: u64) -> Self {
        let mut dedup = pool;
        dedup.sort_unstable();
        dedup.dedup();
        SamplerConfig {
            filter_with_closure: false,
            entailed_ratio: 0.0,
            max_resample_attempts: DEFAULT_MAX_ATTEMPTS,
            seed,
            pools: CORRUPTIBLE.iter().map(|f| (*f, dedup.clone())).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplerStats {
    /// Axioms for which a negative was requested.
    pub requested: u64,
    pub returned: u64,
    /// Requests that ran out of attempts and produced nothing.
    pub dropped: u64,
    /// Candidates rejected for being entailed or asserted.
    pub rejected: u64,
    /// Negatives drawn from the entailed pool.
    pub entailed: u64,
}

impl SamplerStats {
    pub fn drop_rate(&self) -> f64 {
        if self.requested == 0 {
            0.0
        } else {
            self.dropped as f64 / self.requested as f64
        }
    }
}

/// Replace the tail slot (`d`, or `e` for GCI1) by a uniform draw from
/// `pool` without the current tail.
pub fn corrupt<R: Rng + ?Sized>(
    ax: &NormalizedAxiom,
    pool: &[ClassId],
    rng: &mut R,
) -> Result<NormalizedAxiom, SamplingError> {
    use NormalizedAxiom::*;
    let tail = match *ax {
        Gci0(_, d) | Gci2(_, _, d) | Gci3(_, _, d) => d,
        Gci1(_, _, e) => e,
        _ => return Err(SamplingError::UnsupportedForm(ax.form())),
    };
    let new = draw_excluding(pool, tail, rng)?;
    Ok(match *ax {
        Gci0(c, _) => Gci0(c, new),
        Gci1(c, d, _) => Gci1(c, d, new),
        Gci2(c, r, _) => Gci2(c, r, new),
        Gci3(r, c, _) => Gci3(r, c, new),
        _ => unreachable!(),
    })
}

fn draw_excluding<R: Rng + ?Sized>(pool: &[ClassId], skip: ClassId, rng: &mut R) -> Result<ClassId, SamplingError> {
    if pool.is_empty() {
        return Err(SamplingError::PoolExhausted);
    }
    for _ in 0..64 {
        let c = pool[rng.gen_range(0..pool.len())];
        if c != skip {
            return Ok(c);
        }
    }
    // Pools dominated by `skip` (duplicates): fall back to an exact draw.
    let rest: Vec<ClassId> = pool.iter().copied().filter(|c| *c != skip).collect();
    if rest.is_empty() {
        return Err(SamplingError::PoolExhausted);
    }
    Ok(rest[rng.gen_range(0..rest.len())])
}

/// Stateful negative generator with its own random stream.
pub struct Sampler<'a> {
    cfg: SamplerConfig,
    dc: Option<&'a DeductiveClosure>,
    train: HashSet<NormalizedAxiom>,
    entailed: BTreeMap<Form, Vec<NormalizedAxiom>>,
    rng: ChaCha8Rng,
    stats: SamplerStats,
}

impl<'a> Sampler<'a> {
    pub fn new(
        cfg: SamplerConfig,
        dc: Option<&'a DeductiveClosure>,
        train: impl IntoIterator<Item = NormalizedAxiom>,
    ) -> Result<Self, SamplingError> {
        if !(0.0..=1.0).contains(&cfg.entailed_ratio) {
            return Err(SamplingError::BadRatio(cfg.entailed_ratio));
        }
        if dc.is_none() && (cfg.filter_with_closure || cfg.entailed_ratio > 0.0) {
            return Err(SamplingError::MissingClosure);
        }
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        Ok(Sampler {
            train: train.into_iter().map(NormalizedAxiom::canonical).collect(),
            cfg,
            dc,
            entailed: BTreeMap::new(),
            rng,
            stats: SamplerStats::default(),
        })
    }

    pub fn stats(&self) -> &SamplerStats {
        &self.stats
    }

    pub fn take_stats(&mut self) -> SamplerStats {
        std::mem::take(&mut self.stats)
    }

    fn is_known(&self, ax: &NormalizedAxiom) -> bool {
        self.train.contains(&ax.canonical())
            || self
                .dc
                .is_some_and(|dc| dc.contains(ax).unwrap_or(false))
    }

    /// Closure members of `form` that are not training axioms.
    fn entailed_pool(&mut self, form: Form) -> &[NormalizedAxiom] {
        if !self.entailed.contains_key(&form) {
            let pool = match self.dc {
                Some(dc) => dc
                    .members(form)
                    .into_iter()
                    .map(|(a, _)| a)
                    .filter(|a| !self.train.contains(a))
                    .collect(),
                None => Vec::new(),
            };
            self.entailed.insert(form, pool);
        }
        &self.entailed[&form]
    }

    fn one(&mut self, ax: &NormalizedAxiom) -> Result<Option<NormalizedAxiom>, SamplingError> {
        let form = ax.form();
        if !CORRUPTIBLE.contains(&form) {
            return Err(SamplingError::UnsupportedForm(form));
        }
        if self.cfg.entailed_ratio > 0.0 && self.rng.gen_bool(self.cfg.entailed_ratio) {
            let n = self.entailed_pool(form).len();
            if n > 0 {
                let i = self.rng.gen_range(0..n);
                self.stats.entailed += 1;
                return Ok(Some(self.entailed[&form][i]));
            }
        }
        let pool = self.cfg.pools.get(&form).ok_or(SamplingError::MissingPool(form))?;
        if !self.cfg.filter_with_closure {
            return corrupt(ax, pool, &mut self.rng).map(Some);
        }
        for _ in 0..self.cfg.max_resample_attempts {
            let cand = corrupt(ax, pool, &mut self.rng)?;
            if self.is_known(&cand) {
                self.stats.rejected += 1;
            } else {
                return Ok(Some(cand));
            }
        }
        Ok(None)
    }

    /// At most one negative per input axiom, in input order.
    pub fn sample_negatives(&mut self, batch: &[NormalizedAxiom]) -> Result<Vec<NormalizedAxiom>, SamplingError> {
        let mut out = Vec::with_capacity(batch.len());
        for ax in batch {
            self.stats.requested += 1;
            match self.one(ax)? {
                Some(neg) => {
                    self.stats.returned += 1;
                    out.push(neg);
                }
                None => self.stats.dropped += 1,
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closure::{compute_closure_from, ClosureConfig};
    use crate::reasoner::saturate_axioms;
    use NormalizedAxiom::*;

    fn ids(xs: &[u32]) -> Vec<ClassId> {
        xs.iter().map(|x| ClassId(*x)).collect()
    }

    const R: crate::kb::RelId = crate::kb::RelId(0);

    #[test]
    fn forced_draw() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = corrupt(&Gci2(ClassId(2), R, ClassId(3)), &ids(&[3, 4]), &mut rng).unwrap();
        assert_eq!(out, Gci2(ClassId(2), R, ClassId(4)));
    }

    #[test]
    fn exhausted_pool() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let err = corrupt(&Gci0(ClassId(2), ClassId(3)), &ids(&[3]), &mut rng).unwrap_err();
        assert_eq!(err.to_string(), "pool exhausted");
        assert!(corrupt(&Gci0Bot(ClassId(2)), &ids(&[3, 4]), &mut rng).is_err());
    }

    #[test]
    fn corrupts_only_the_tail() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pool = ids(&[2, 3, 4, 5, 6]);
        for _ in 0..200 {
            let Gci1(c, d, e) = corrupt(&Gci1(ClassId(2), ClassId(3), ClassId(4)), &pool, &mut rng).unwrap() else {
                panic!()
            };
            assert_eq!((c, d), (ClassId(2), ClassId(3)));
            assert_ne!(e, ClassId(4));
            let Gci3(_, c, d) = corrupt(&Gci3(R, ClassId(2), ClassId(4)), &pool, &mut rng).unwrap() else {
                panic!()
            };
            assert_eq!(c, ClassId(2));
            assert_ne!(d, ClassId(4));
        }
    }

    #[test]
    fn duplicate_heavy_pool_still_terminates() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut pool = vec![ClassId(3); 10_000];
        pool.push(ClassId(4));
        let out = corrupt(&Gci0(ClassId(2), ClassId(3)), &pool, &mut rng).unwrap();
        assert_eq!(out, Gci0(ClassId(2), ClassId(4)));
    }

    fn example() -> (Vec<NormalizedAxiom>, DeductiveClosure) {
        // A ⊑ ∃r.B, B ⊑ B'
        let (a, b, b2) = (ClassId(2), ClassId(3), ClassId(4));
        let kb = vec![Gci2(a, R, b), Gci0(b, b2)];
        let sub = saturate_axioms(6, kb.iter());
        let dc = compute_closure_from(kb.clone(), &sub, &ClosureConfig::default()).unwrap();
        (kb, dc)
    }

    #[test]
    fn filtering_rejects_entailed_corruptions() {
        let (kb, dc) = example();
        let mut cfg = SamplerConfig::with_pool(ids(&[3, 4, 5]), 0);
        cfg.filter_with_closure = true;
        let mut s = Sampler::new(cfg, Some(&dc), kb.clone()).unwrap();
        let batch = vec![kb[0]; 500];
        let negs = s.sample_negatives(&batch).unwrap();
        // Each request fails all ten attempts with probability 2^-10.
        assert_eq!(negs.len() as u64 + s.stats().dropped, 500);
        assert!(negs.len() > 480);
        assert!(negs.iter().all(|n| *n == Gci2(ClassId(2), R, ClassId(5))));
        assert!(s.stats().rejected > 0);
    }

    #[test]
    fn exhausted_attempts_drop_the_slot() {
        let (kb, dc) = example();
        let mut cfg = SamplerConfig::with_pool(ids(&[3, 4]), 0);
        cfg.filter_with_closure = true;
        let mut s = Sampler::new(cfg, Some(&dc), kb.clone()).unwrap();
        let negs = s.sample_negatives(&[kb[0]; 7]).unwrap();
        assert!(negs.is_empty());
        let st = s.stats();
        assert_eq!((st.requested, st.dropped, st.rejected), (7, 7, 70));
        assert_eq!(st.drop_rate(), 1.0);
    }

    #[test]
    fn entailed_ratio_one_returns_closure_members() {
        let (kb, dc) = example();
        let mut cfg = SamplerConfig::with_pool(ids(&[3, 4, 5]), 0);
        cfg.entailed_ratio = 1.0;
        let mut s = Sampler::new(cfg, Some(&dc), kb.clone()).unwrap();
        let negs = s.sample_negatives(&[kb[0]; 50]).unwrap();
        assert_eq!(negs.len(), 50);
        for n in &negs {
            assert!(dc.contains(n).unwrap());
            assert!(!kb.contains(n));
        }
    }

    #[test]
    fn needs_closure_and_valid_ratio() {
        let mut cfg = SamplerConfig::with_pool(ids(&[3, 4]), 0);
        cfg.filter_with_closure = true;
        assert_eq!(Sampler::new(cfg.clone(), None, []).err(), Some(SamplingError::MissingClosure));
        cfg.filter_with_closure = false;
        cfg.entailed_ratio = 1.5;
        assert_eq!(Sampler::new(cfg, None, []).err(), Some(SamplingError::BadRatio(1.5)));
    }

    #[test]
    fn same_seed_same_sequence() {
        let (kb, dc) = example();
        let run = |seed| {
            let mut cfg = SamplerConfig::with_pool(ids(&[2, 3, 4, 5]), seed);
            cfg.filter_with_closure = true;
            cfg.entailed_ratio = 0.3;
            let mut s = Sampler::new(cfg, Some(&dc), kb.clone()).unwrap();
            s.sample_negatives(&[kb[0]; 100]).unwrap()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }
}
