//! Mark-interval layout: which marks trigger which jumps.
//!
//! Every ordered pair `(i, j)` owns a half-open interval
//! `Λ_ij(y, n) = [offset_ij, offset_ij + λ_ij(y, n))` of marks. Offsets are
//! partial sums of the pairs' envelope rates in lexicographic pair order, so
//! intervals of distinct pairs never overlap and intervals of the *same* pair
//! at different `(y, n)` share their left endpoint — the property that makes
//! two coupled paths jump together exactly when a mark lands in the shorter
//! of their two intervals.
//!
//! With the sup-norm envelope (the only mode built), offsets are constants
//! precomputed from `‖λ_ij‖_∞`.

use crate::rates::{ordered_pairs, pair_index, RateModel};

/// Choice of envelope rates `λ̃_ij` positioning the intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EnvelopeMode {
    /// `λ̃_ij = max(‖λ_ij‖_∞, λ_ij(y, n))`, which equals the sup-norm
    /// everywhere for models whose rates respect their declared sups.
    #[default]
    SupNorm,
}

/// A half-open interval `[start, end)` of marks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkInterval {
    pub start: f64,
    pub end: f64,
}

impl MarkInterval {
    pub fn len(&self) -> f64 {
        (self.end - self.start).max(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Exact half-open membership, no epsilon.
    pub fn contains(&self, v: f64) -> bool {
        v >= self.start && v < self.end
    }

    pub fn intersection_len(&self, other: &MarkInterval) -> f64 {
        (self.end.min(other.end) - self.start.max(other.start)).max(0.0)
    }
}

/// Per-target decomposition of two same-source interval families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapSplit {
    pub target: usize,
    /// Mark length accepted only by the first component.
    pub only_first: f64,
    /// Mark length accepted only by the second component.
    pub only_second: f64,
    /// Mark length accepted by both (jump together, same target).
    pub shared: f64,
}

/// Precomputed interval layout for a rate model.
#[derive(Debug, Clone)]
pub struct MarkResolution<'a> {
    model: &'a RateModel,
    mode: EnvelopeMode,
    offsets: Vec<f64>,
    row_bounds: Vec<f64>,
    strip_height: f64,
}

impl<'a> MarkResolution<'a> {
    pub fn new(model: &'a RateModel) -> Self {
        let num_states = model.num_states();
        let mut offsets = Vec::with_capacity(num_states * (num_states - 1));
        let mut acc = 0.0;
        for (i, j) in ordered_pairs(num_states) {
            offsets.push(acc);
            acc += model.sup_norm(i, j);
        }
        let mut row_bounds = Vec::with_capacity(num_states);
        let mut bound = 0.0;
        for i in 1..=num_states {
            bound += model.exit_sup(i);
            row_bounds.push(bound);
        }
        Self {
            model,
            mode: EnvelopeMode::SupNorm,
            offsets,
            row_bounds,
            strip_height: acc,
        }
    }

    pub fn model(&self) -> &RateModel {
        self.model
    }

    pub fn mode(&self) -> EnvelopeMode {
        self.mode
    }

    /// Total height of the mark strip: the sum of all sup-norms.
    pub fn strip_height(&self) -> f64 {
        self.strip_height
    }

    /// Upper bound of the mark range row `i` can ever accept
    /// (`C_i = Σ_{k ≤ i} c_k`).
    pub fn row_bound(&self, i: usize) -> f64 {
        self.row_bounds[i - 1]
    }

    /// Left endpoint of pair `(i, j)`'s interval — constant in `(y, n)`.
    pub fn offset(&self, i: usize, j: usize) -> f64 {
        self.offsets[pair_index(self.model.num_states(), i, j)]
    }

    /// `Λ_ij(y, n)`: empty when the rate vanishes there.
    pub fn interval_of(&self, i: usize, j: usize, y: f64, n: u64) -> MarkInterval {
        let start = self.offset(i, j);
        MarkInterval {
            start,
            end: start + self.model.rate(i, j, y, n),
        }
    }

    /// Resolves a mark against row `i`: the unique jump target whose interval
    /// contains `v`, or `None` when the mark falls outside every interval.
    pub fn resolve_mark(&self, i: usize, y: f64, n: u64, v: f64) -> Option<usize> {
        if v < 0.0 {
            return None;
        }
        for j in 1..=self.model.num_states() {
            if j != i && self.interval_of(i, j, y, n).contains(v) {
                return Some(j);
            }
        }
        None
    }

    /// Splits the mark lengths of two same-source components into
    /// first-only, second-only, and shared parts, per target.
    pub fn overlap_lengths(
        &self,
        i: usize,
        y1: f64,
        n1: u64,
        y2: f64,
        n2: u64,
    ) -> Vec<OverlapSplit> {
        (1..=self.model.num_states())
            .filter(|&j| j != i)
            .map(|j| {
                let a = self.model.rate(i, j, y1, n1);
                let b = self.model.rate(i, j, y2, n2);
                OverlapSplit {
                    target: j,
                    only_first: (a - b).max(0.0),
                    only_second: (b - a).max(0.0),
                    shared: a.min(b),
                }
            })
            .collect()
    }
}
