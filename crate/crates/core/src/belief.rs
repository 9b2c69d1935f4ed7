//! Per-cell Bayesian knowledge about the weed count, its entropy, the
//! "mapped" threshold and the expected information gain of one more look.
//!
//! All entropies are in nats.

use crate::grid::CellCoord;
use crate::sensor::SensorModel;
use std::io::{self, Write};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum BeliefError {
    /// The observation has zero predictive probability under the current
    /// belief. The belief is left untouched.
    #[error("observation {o} is impossible under the current belief")]
    ImpossibleObservation { o: usize },
}

#[inline]
fn neg_xlnx(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.ln()
    } else {
        0.0
    }
}

/// Shannon entropy `-Σ p ln p`, with `0 ln 0 = 0`.
pub fn entropy(probs: &[f64]) -> f64 {
    probs.iter().map(|&p| neg_xlnx(p)).sum()
}

/// Entropy of the two-outcome belief `[(n_w - 1)/n_w, 1/n_w]`: one count is
/// much more likely than a single remaining alternative. Defined for
/// `n_w >= 2`; `n_w = 1` degenerates to 0.
pub fn mapped_threshold(n_w: usize) -> f64 {
    assert!(n_w >= 1, "n_w must be at least 1");
    let n = n_w as f64;
    entropy(&[(n - 1.0) / n, 1.0 / n])
}

/// Belief over the weed count `0..=n_w` of a single cell.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeVector {
    probs: Vec<f64>,
    entropy: f64,
    mapped: bool,
}

impl KnowledgeVector {
    pub fn uniform(n_w: usize) -> Self {
        assert!(n_w >= 1, "n_w must be at least 1");
        let probs = vec![1.0 / (n_w + 1) as f64; n_w + 1];
        let entropy = entropy(&probs);
        Self {
            probs,
            entropy,
            mapped: false,
        }
    }

    /// Wraps an explicit distribution. The mapped flag is evaluated against
    /// `threshold` once.
    pub fn from_probs(probs: Vec<f64>, threshold: f64) -> Self {
        let entropy = entropy(&probs);
        Self {
            probs,
            entropy,
            mapped: entropy <= threshold,
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn n_w(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn entropy(&self) -> f64 {
        self.entropy
    }

    pub fn is_mapped(&self) -> bool {
        self.mapped
    }

    /// Most likely count; ties go to the lowest count.
    pub fn estimate(&self) -> usize {
        let mut best = 0;
        for (w, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = w;
            }
        }
        best
    }

    /// Posterior after observing `o`. The mapped flag latches: once set it
    /// stays set whatever later observations say.
    pub fn bayes_update(
        &mut self,
        model: &SensorModel,
        o: usize,
        threshold: f64,
    ) -> Result<(), BeliefError> {
        debug_assert_eq!(model.n_w(), self.n_w());
        let likelihood = model.row(o);
        let evidence: f64 = self
            .probs
            .iter()
            .zip(likelihood)
            .map(|(p, t)| p * t)
            .sum();
        if !(evidence > 0.0) {
            return Err(BeliefError::ImpossibleObservation { o });
        }
        for (p, t) in self.probs.iter_mut().zip(likelihood) {
            *p = *p * t / evidence;
        }
        self.entropy = entropy(&self.probs);
        self.mapped |= self.entropy <= threshold;
        Ok(())
    }

    /// Expected entropy reduction from one more observation of this cell.
    ///
    /// Uses `pred(o) H(W | o) = pred(o) ln pred(o) - Σ_w a(o,w) ln a(o,w)`
    /// with `a(o,w) = T(o,w) p(w)`, so no posterior is materialised.
    pub fn information_gain(&self, model: &SensorModel) -> f64 {
        debug_assert_eq!(model.n_w(), self.n_w());
        let mut conditional = 0.0;
        for o in 0..model.n_observations() {
            let mut pred = 0.0;
            let mut joint_term = 0.0;
            for (p, t) in self.probs.iter().zip(model.row(o)) {
                let a = p * t;
                pred += a;
                joint_term += neg_xlnx(a);
            }
            if pred > 0.0 {
                conditional += joint_term - neg_xlnx(pred);
            }
        }
        (self.entropy - conditional).clamp(0.0, self.entropy)
    }
}

/// `true` iff the belief's entropy is at or below `threshold`.
pub fn is_mapped(kv: &KnowledgeVector, threshold: f64) -> bool {
    kv.entropy() <= threshold
}

/// One agent's `C × C` map of knowledge vectors.
#[derive(Debug, Clone)]
pub struct BeliefMap {
    c: usize,
    n_w: usize,
    threshold: f64,
    cells: Vec<KnowledgeVector>,
    observation_counts: Vec<u32>,
}

impl BeliefMap {
    pub fn uniform(c: usize, n_w: usize) -> Self {
        Self {
            c,
            n_w,
            threshold: mapped_threshold(n_w),
            cells: vec![KnowledgeVector::uniform(n_w); c * c],
            observation_counts: vec![0; c * c],
        }
    }

    pub fn side(&self) -> usize {
        self.c
    }

    pub fn n_w(&self) -> usize {
        self.n_w
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn cell(&self, cell: CellCoord) -> &KnowledgeVector {
        &self.cells[cell.index(self.c)]
    }

    pub fn cells(&self) -> &[KnowledgeVector] {
        &self.cells
    }

    pub fn is_mapped(&self, cell: CellCoord) -> bool {
        self.cells[cell.index(self.c)].is_mapped()
    }

    pub fn observation_count(&self, cell: CellCoord) -> u32 {
        self.observation_counts[cell.index(self.c)]
    }

    pub fn observation_counts(&self) -> &[u32] {
        &self.observation_counts
    }

    pub fn mapped_count(&self) -> usize {
        self.cells.iter().filter(|kv| kv.is_mapped()).count()
    }

    /// Folds one observation of `cell` into the map. Impossible observations
    /// are logged and skipped; they do not count as incorporated.
    pub fn incorporate(
        &mut self,
        cell: CellCoord,
        model: &SensorModel,
        o: usize,
    ) -> Result<(), BeliefError> {
        let idx = cell.index(self.c);
        match self.cells[idx].bayes_update(model, o, self.threshold) {
            Ok(()) => {
                self.observation_counts[idx] += 1;
                Ok(())
            }
            Err(err) => {
                log::warn!("cell {cell}: {err}; update skipped");
                Err(err)
            }
        }
    }

    /// Text dump, one line per cell: `x y estimate entropy mapped count`.
    pub fn dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# x y estimate entropy mapped observations")?;
        for (idx, kv) in self.cells.iter().enumerate() {
            let cell = CellCoord::from_index(idx, self.c);
            writeln!(
                out,
                "{} {} {} {:.9} {} {}",
                cell.x,
                cell.y,
                kv.estimate(),
                kv.entropy(),
                u8::from(kv.is_mapped()),
                self.observation_counts[idx]
            )?;
        }
        Ok(())
    }
}
