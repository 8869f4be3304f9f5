//! δ-discretized sets on dyadic grids.
//!
//! A [`DyadicSet`] is a finite union of dyadic cells of side `2^-m` inside
//! the unit cube, stored as sorted Morton codes so that coarser covering
//! numbers are exact prefix counts. Spread constants quantify the
//! `(δ,s,C)`-set condition `|P ∩ B(x,r)|_δ <= C r^s |P|_δ` over dyadic radii.

use crate::numerics::{morton_decode, morton_encode};
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

/// Scale caps per dimension: exact counting stays cheap below these.
fn max_level(dim: usize) -> u32 {
    match dim {
        1 | 2 => 16,
        3 => 12,
        4 => 10,
        _ => 0,
    }
}

/// Hard cap on stored cells.
const MAX_CELLS: usize = 1 << 24;

/// A finite union of dyadic δ-cells in `[0,1]^k`, `δ = 2^-m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DyadicSet {
    dim: usize,
    level: u32,
    /// Sorted, deduplicated Morton codes of the occupied cells.
    cells: Vec<u64>,
}

/// Measured spread data of a set at one exponent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpreadReport {
    pub exponent: f64,
    /// Best constant over the tested centers and radii.
    pub constant: f64,
    pub witness_center: Vec<f64>,
    pub witness_radius: f64,
    /// Number of (center, radius) pairs tested exactly.
    pub tested: usize,
}

impl DyadicSet {
    pub fn from_codes(dim: usize, level: u32, mut cells: Vec<u64>) -> Result<Self> {
        check_scale(dim, level, cells.len())?;
        cells.sort_unstable();
        cells.dedup();
        Ok(Self { dim, level, cells })
    }

    pub fn from_tuples(dim: usize, level: u32, tuples: &[Vec<u32>]) -> Result<Self> {
        let side = 1u32 << level;
        let mut cells = Vec::with_capacity(tuples.len());
        for t in tuples {
            if t.len() != dim || t.iter().any(|&c| c >= side) {
                return Err(Error::InvalidParameter(format!(
                    "cell {t:?} outside [0,{side})^{dim}"
                )));
            }
            cells.push(morton_encode(t, level));
        }
        Self::from_codes(dim, level, cells)
    }

    pub fn empty(dim: usize, level: u32) -> Self {
        Self { dim, level, cells: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn delta(&self) -> f64 {
        (self.level as f64).exp2().recip()
    }

    pub fn cardinality(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn codes(&self) -> &[u64] {
        &self.cells
    }

    pub fn contains_code(&self, code: u64) -> bool {
        self.cells.binary_search(&code).is_ok()
    }

    /// Integer coordinates of every cell, in Morton order.
    pub fn tuples(&self) -> Vec<Vec<u32>> {
        self.cells
            .iter()
            .map(|&c| morton_decode(c, self.dim, self.level))
            .collect()
    }

    /// Center of a cell in `[0,1]^k`.
    pub fn cell_center(&self, code: u64) -> Vec<f64> {
        let delta = self.delta();
        morton_decode(code, self.dim, self.level)
            .iter()
            .map(|&c| (c as f64 + 0.5) * delta)
            .collect()
    }

    /// Exact δ'-covering number at a coarser scale `m' <= m`.
    pub fn covering_number(&self, at_level: u32) -> Result<usize> {
        if at_level > self.level {
            return Err(Error::InvalidScale { requested: at_level, stored: self.level });
        }
        let shift = (self.dim as u32) * (self.level - at_level);
        let mut count = 0usize;
        let mut last = u64::MAX;
        for &c in &self.cells {
            let p = c >> shift;
            if p != last {
                count += 1;
                last = p;
            }
        }
        Ok(count)
    }

    /// The same set represented at a coarser scale.
    pub fn coarsen(&self, at_level: u32) -> Result<DyadicSet> {
        if at_level > self.level {
            return Err(Error::InvalidScale { requested: at_level, stored: self.level });
        }
        let shift = (self.dim as u32) * (self.level - at_level);
        let mut cells: Vec<u64> = self.cells.iter().map(|&c| c >> shift).collect();
        cells.dedup();
        Ok(DyadicSet { dim: self.dim, level: at_level, cells })
    }

    /// Sorted-merge intersection (same dimension and scale required).
    pub fn intersect(&self, other: &DyadicSet) -> Result<DyadicSet> {
        self.check_compatible(other)?;
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.cells.len() && j < other.cells.len() {
            match self.cells[i].cmp(&other.cells[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(self.cells[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        Ok(DyadicSet { dim: self.dim, level: self.level, cells: out })
    }

    /// Sorted-merge union (same dimension and scale required).
    pub fn union(&self, other: &DyadicSet) -> Result<DyadicSet> {
        self.check_compatible(other)?;
        let mut out = Vec::with_capacity(self.cells.len() + other.cells.len());
        let (mut i, mut j) = (0, 0);
        while i < self.cells.len() || j < other.cells.len() {
            let take_left = j >= other.cells.len()
                || (i < self.cells.len() && self.cells[i] <= other.cells[j]);
            if take_left {
                let c = self.cells[i];
                if j < other.cells.len() && other.cells[j] == c {
                    j += 1;
                }
                out.push(c);
                i += 1;
            } else {
                out.push(other.cells[j]);
                j += 1;
            }
        }
        Ok(DyadicSet { dim: self.dim, level: self.level, cells: out })
    }

    /// All cells within one cell of the set in the sup metric (the `3^k`
    /// neighborhood, clipped to the unit cube).
    pub fn dilate(&self) -> DyadicSet {
        let side = 1u64 << self.level;
        let mut out = Vec::with_capacity(self.cells.len() * 3usize.pow(self.dim as u32));
        let mut offsets = vec![0i64; self.dim];
        loop {
            for &c in &self.cells {
                let coords = morton_decode(c, self.dim, self.level);
                let mut ok = true;
                let mut shifted = vec![0u32; self.dim];
                for (i, &co) in coords.iter().enumerate() {
                    let v = co as i64 + offsets[i];
                    if v < 0 || v >= side as i64 {
                        ok = false;
                        break;
                    }
                    shifted[i] = v as u32;
                }
                if ok {
                    out.push(morton_encode(&shifted, self.level));
                }
            }
            let mut axis = 0;
            loop {
                if axis == self.dim {
                    out.sort_unstable();
                    out.dedup();
                    return DyadicSet { dim: self.dim, level: self.level, cells: out };
                }
                offsets[axis] += 1;
                if offsets[axis] <= 1 {
                    break;
                }
                offsets[axis] = -1;
                axis += 1;
            }
        }
    }

    /// Orthogonal projection dropping the last coordinate.
    pub fn project_drop_last(&self) -> Result<DyadicSet> {
        if self.dim < 2 {
            return Err(Error::InvalidParameter("cannot project a 1-dimensional set".into()));
        }
        let tuples: Vec<Vec<u32>> = self
            .tuples()
            .into_iter()
            .map(|mut t| {
                t.pop();
                t
            })
            .collect();
        DyadicSet::from_tuples(self.dim - 1, self.level, &tuples)
    }

    /// Bounding box in integer cell coordinates: `(lo, hi)` inclusive.
    pub fn bounding_box(&self) -> Option<(Vec<u32>, Vec<u32>)> {
        if self.cells.is_empty() {
            return None;
        }
        let mut lo = vec![u32::MAX; self.dim];
        let mut hi = vec![0u32; self.dim];
        for &c in &self.cells {
            for (i, &v) in morton_decode(c, self.dim, self.level).iter().enumerate() {
                lo[i] = lo[i].min(v);
                hi[i] = hi[i].max(v);
            }
        }
        Some((lo, hi))
    }

    fn check_compatible(&self, other: &DyadicSet) -> Result<()> {
        if self.dim != other.dim || self.level != other.level {
            return Err(Error::InvalidParameter(format!(
                "incompatible sets: ({}, 2^-{}) vs ({}, 2^-{})",
                self.dim, self.level, other.dim, other.level
            )));
        }
        Ok(())
    }

    // -- binary / JSON formats ----------------------------------------------

    /// Binary layout: `u32 dim | u32 level | u64 count | count * dim * u32`
    /// little-endian cell coordinates sorted lexicographically.
    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&self.level.to_le_bytes())?;
        w.write_all(&(self.cells.len() as u64).to_le_bytes())?;
        let mut tuples = self.tuples();
        tuples.sort();
        for t in tuples {
            for c in t {
                w.write_all(&c.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<DyadicSet> {
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4)?;
        let level = u32::from_le_bytes(b4);
        r.read_exact(&mut b8)?;
        let count = u64::from_le_bytes(b8) as usize;
        check_scale(dim, level, count)?;
        let mut tuples = Vec::with_capacity(count);
        for _ in 0..count {
            let mut t = Vec::with_capacity(dim);
            for _ in 0..dim {
                r.read_exact(&mut b4)?;
                t.push(u32::from_le_bytes(b4));
            }
            tuples.push(t);
        }
        DyadicSet::from_tuples(dim, level, &tuples)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut tuples = self.tuples();
        tuples.sort();
        serde_json::json!({
            "dim": self.dim,
            "level": self.level,
            "cells": tuples,
        })
    }

    pub fn from_json(v: &serde_json::Value) -> Result<DyadicSet> {
        let dim = v["dim"]
            .as_u64()
            .ok_or_else(|| Error::InvalidParameter("missing dim".into()))? as usize;
        let level = v["level"]
            .as_u64()
            .ok_or_else(|| Error::InvalidParameter("missing level".into()))? as u32;
        let tuples: Vec<Vec<u32>> = serde_json::from_value(v["cells"].clone())?;
        DyadicSet::from_tuples(dim, level, &tuples)
    }
}

fn check_scale(dim: usize, level: u32, count: usize) -> Result<()> {
    if dim == 0 || dim > 4 {
        return Err(Error::InvalidParameter(format!("dimension {dim} unsupported")));
    }
    if level > max_level(dim) {
        return Err(Error::TooFine(format!(
            "level {level} exceeds the cap {} for dimension {dim}",
            max_level(dim)
        )));
    }
    if count > MAX_CELLS {
        return Err(Error::TooFine(format!("{count} cells exceed the cap {MAX_CELLS}")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// spread constants
// ---------------------------------------------------------------------------

/// Measure the best constant `C` in `|P ∩ B(x,r)|_δ <= C r^s |P|_δ` over
/// Euclidean balls with dyadic radii `r = 2^-j`, `δ <= r <= 1`.
///
/// Centers run over the full δ-grid of the bounding box when that grid is
/// small, and over the cell centers of `P` otherwise; the restriction costs
/// at most a bounded factor in `C` (shifting a center onto `P` at doubled
/// radius covers the original ball).
pub fn spread_constant(p: &DyadicSet, s: f64) -> SpreadReport {
    assert!(!p.is_empty(), "spread_constant needs a non-empty set");
    let delta = p.delta();
    let total = p.cardinality() as f64;
    let dim = p.dim();

    let mut best = 0.0f64;
    let mut witness_center = vec![0.0; dim];
    let mut witness_radius = delta;
    let mut tested = 0usize;

    // candidate centers: exhaustive on a small bounding-box grid, else the
    // cell centers of P itself
    let (lo, hi) = p.bounding_box().expect("non-empty");
    let grid_cells: u64 = lo
        .iter()
        .zip(&hi)
        .map(|(&a, &b)| (b - a + 1) as u64)
        .product();
    let centers: Vec<Vec<f64>> = if grid_cells <= 1 << 16 {
        let mut out = Vec::with_capacity(grid_cells as usize);
        let mut idx = lo.clone();
        loop {
            out.push(idx.iter().map(|&c| (c as f64 + 0.5) * delta).collect());
            let mut axis = 0;
            loop {
                if axis == dim {
                    break;
                }
                idx[axis] += 1;
                if idx[axis] <= hi[axis] {
                    break;
                }
                idx[axis] = lo[axis];
                axis += 1;
            }
            if idx == lo {
                break;
            }
        }
        out
    } else {
        Vec::new()
    };

    let exhaustive = grid_cells <= 1 << 16;
    let cell_pts: Vec<Vec<f64>> = p.codes().iter().map(|&c| p.cell_center(c)).collect();

    for j in (0..=p.level()).rev() {
        let r = (j as f64).exp2().recip();
        let denom = r.powf(s) * total;
        // large sets: one candidate center per (r/2)-block keeps the sweep
        // near-linear; the lost factor is within the documented slack
        let centers_j: Vec<Vec<f64>>;
        let centers_f: &[Vec<f64>] = if exhaustive {
            &centers
        } else {
            let block = (j + 1).min(p.level());
            let shift = (dim as u32) * (p.level() - block);
            let mut picked = Vec::new();
            let mut last = u64::MAX;
            for (&code, pt) in p.codes().iter().zip(&cell_pts) {
                let pre = code >> shift;
                if pre != last {
                    picked.push(pt.clone());
                    last = pre;
                }
            }
            centers_j = picked;
            &centers_j
        };
        for c in centers_f {
            // count cells of P whose centers fall in the Euclidean ball
            let r2 = r * r;
            let count = cell_pts
                .iter()
                .filter(|q| {
                    let mut d2 = 0.0;
                    for i in 0..dim {
                        let d = q[i] - c[i];
                        d2 += d * d;
                        if d2 > r2 {
                            return false;
                        }
                    }
                    true
                })
                .count();
            tested += 1;
            let ratio = count as f64 / denom;
            if ratio > best {
                best = ratio;
                witness_center = c.clone();
                witness_radius = r;
            }
        }
    }
    SpreadReport {
        exponent: s,
        constant: best,
        witness_center,
        witness_radius,
        tested,
    }
}

// ---------------------------------------------------------------------------
// subset extraction
// ---------------------------------------------------------------------------

/// Extract a `t`-spread subset of roughly `δ^{-t}` cells.
///
/// Cells are ranked by bit-reversed Morton order (coarsest dyadic level
/// last), which enumerates the set in a maximally spread sequence: the
/// first `q` picks land in `q` distinct coarse blocks whenever the set
/// allows it, at every scale simultaneously. Taking the first
/// `ceil(2^{t m})` cells of that sequence is the deterministic top-down
/// selection with the best balance across parents; when the set holds
/// fewer cells, everything is kept and the target cardinality is simply
/// not achievable, which the report's constant makes visible.
pub fn extract_spread_subset(p: &DyadicSet, t: f64) -> (DyadicSet, SpreadReport) {
    let m = p.level();
    let kdim = p.dim() as u32;
    if p.is_empty() {
        let empty = DyadicSet::empty(p.dim(), m);
        return (
            empty.clone(),
            SpreadReport {
                exponent: t,
                constant: 0.0,
                witness_center: vec![0.0; p.dim()],
                witness_radius: p.delta(),
                tested: 0,
            },
        );
    }
    let target = (2f64.powf(t * m as f64)).ceil().min(MAX_CELLS as f64) as usize;
    let mut ranked: Vec<(u64, u64)> = p
        .codes()
        .iter()
        .map(|&c| (reverse_levels(c, kdim, m), c))
        .collect();
    ranked.sort_unstable();
    let mut kept: Vec<u64> = ranked
        .into_iter()
        .take(target)
        .map(|(_, c)| c)
        .collect();
    kept.sort_unstable();
    let subset = DyadicSet { dim: p.dim(), level: m, cells: kept };
    let report = spread_constant(&subset, t);
    (subset, report)
}

/// Reverse the order of the `m` per-level chunks (`k` bits each) of a
/// Morton code, mapping depth-first order to breadth-spread order.
fn reverse_levels(code: u64, k: u32, m: u32) -> u64 {
    let mask = (1u64 << k) - 1;
    let mut out = 0u64;
    for j in 0..m {
        let chunk = (code >> (k * j)) & mask;
        out |= chunk << (k * (m - 1 - j));
    }
    out
}

// ---------------------------------------------------------------------------
// generators
// ---------------------------------------------------------------------------

/// Test-set generators; all deterministic in their parameters and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetSpec {
    /// `k`-fold product of the self-similar Cantor set keeping two end
    /// intervals of relative length `ratio` per step.
    Cantor { ratio: f64, depth: u32, k: usize },
    /// Product of one-dimensional sets (dimensions add).
    Product { factors: Vec<SetSpec> },
    /// Full grid at scale `2^-m`.
    Uniform { m: u32, k: usize },
    /// Level-wise random subsampling with mean branching `2^s`.
    RandomSpread { s: f64, m: u32, k: usize, seed: u64 },
}

pub fn generate_set(spec: &SetSpec) -> Result<DyadicSet> {
    match spec {
        SetSpec::Cantor { ratio, depth, k } => {
            if !(*ratio > 0.0 && *ratio < 0.5) {
                return Err(Error::InvalidParameter(format!(
                    "cantor ratio must lie in (0, 1/2), got {ratio}"
                )));
            }
            let one_d = cantor_1d(*ratio, *depth)?;
            let mut out = one_d.clone();
            for _ in 1..*k {
                out = product(&out, &one_d)?;
            }
            Ok(out)
        }
        SetSpec::Product { factors } => {
            let mut sets = factors.iter().map(generate_set).collect::<Result<Vec<_>>>()?;
            let mut out = sets.remove(0);
            for s in sets {
                out = product(&out, &s)?;
            }
            Ok(out)
        }
        SetSpec::Uniform { m, k } => {
            check_scale(*k, *m, 0)?;
            let per_axis = 1u64 << m;
            let total = per_axis.pow(*k as u32);
            if total > MAX_CELLS as u64 {
                return Err(Error::TooFine(format!(
                    "uniform grid would hold {total} cells"
                )));
            }
            let mut cells = Vec::with_capacity(total as usize);
            let mut idx = vec![0u32; *k];
            loop {
                cells.push(morton_encode(&idx, *m));
                let mut axis = 0;
                loop {
                    if axis == *k {
                        return DyadicSet::from_codes(*k, *m, cells);
                    }
                    idx[axis] += 1;
                    if (idx[axis] as u64) < per_axis {
                        break;
                    }
                    idx[axis] = 0;
                    axis += 1;
                }
            }
        }
        SetSpec::RandomSpread { s, m, k, seed } => {
            check_scale(*k, *m, 0)?;
            if !(*s > 0.0 && *s <= *k as f64) {
                return Err(Error::InvalidParameter(format!(
                    "spread exponent must lie in (0, {k}], got {s}"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let keep_prob = 2f64.powf(s - *k as f64);
            let mut cells: Vec<u64> = vec![0];
            for _level in 1..=*m {
                let mut next = Vec::with_capacity(cells.len() * 2);
                for &c in &cells {
                    let base = c << k;
                    let mut kept_any = false;
                    for child in 0..(1u64 << k) {
                        if rng.random_range(0.0..1.0) < keep_prob {
                            next.push(base | child);
                            kept_any = true;
                        }
                    }
                    // keep the lineage alive: resample one child if all died
                    if !kept_any {
                        let pick = rng.random_range(0..(1u64 << k));
                        next.push(base | pick);
                    }
                }
                cells = next;
                if cells.len() > MAX_CELLS {
                    return Err(Error::TooFine("random spread set exceeded the cell cap".into()));
                }
            }
            DyadicSet::from_codes(*k, *m, cells)
        }
    }
}

/// One-dimensional Cantor construction: dyadic cells at the finest scale
/// meeting the union of depth-`d` intervals. With `ratio = 1/4` the cells
/// are exactly the intervals themselves.
fn cantor_1d(ratio: f64, depth: u32) -> Result<DyadicSet> {
    let m = ((depth as f64) * (1.0 / ratio).log2()).ceil() as u32;
    check_scale(1, m, 0)?;
    let mut intervals = vec![(0.0f64, 1.0f64)];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(intervals.len() * 2);
        for (a, b) in intervals {
            let w = (b - a) * ratio;
            next.push((a, a + w));
            next.push((b - w, b));
        }
        intervals = next;
    }
    let scale = (1u64 << m) as f64;
    let mut cells = Vec::new();
    for (a, b) in intervals {
        let first = (a * scale).floor().max(0.0) as u64;
        let last = ((b * scale).ceil() as u64).min(1 << m);
        for c in first..last {
            // keep cells that genuinely meet [a, b]
            let lo = c as f64 / scale;
            let hi = (c + 1) as f64 / scale;
            if hi > a && lo < b {
                cells.push(c);
            }
        }
    }
    DyadicSet::from_codes(1, m, cells)
}

/// Cartesian product of two sets (common scale = the finer of the two after
/// refusing mismatched levels to keep counting exact).
pub fn product(a: &DyadicSet, b: &DyadicSet) -> Result<DyadicSet> {
    if a.level != b.level {
        return Err(Error::InvalidParameter(format!(
            "product factors must share a scale, got 2^-{} and 2^-{}",
            a.level, b.level
        )));
    }
    let dim = a.dim + b.dim;
    let count = a.cells.len() * b.cells.len();
    check_scale(dim, a.level, count)?;
    let mut tuples = Vec::with_capacity(count);
    for ca in &a.cells {
        let ta = morton_decode(*ca, a.dim, a.level);
        for cb in &b.cells {
            let tb = morton_decode(*cb, b.dim, b.level);
            let mut t = ta.clone();
            t.extend_from_slice(&tb);
            tuples.push(t);
        }
    }
    DyadicSet::from_tuples(dim, a.level, &tuples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_full_square_and_empty() {
        let full = generate_set(&SetSpec::Uniform { m: 3, k: 2 }).unwrap();
        assert_eq!(full.covering_number(3).unwrap(), 64);
        assert_eq!(full.covering_number(1).unwrap(), 4);
        let empty = DyadicSet::empty(2, 5);
        assert_eq!(empty.covering_number(3).unwrap(), 0);
    }

    #[test]
    fn quarter_cantor_counts() {
        // depth-8 two-branch Cantor with ratio 1/4: 2^8 cells at scale 4^-8
        let c = generate_set(&SetSpec::Cantor { ratio: 0.25, depth: 8, k: 1 }).unwrap();
        assert_eq!(c.level(), 16);
        assert_eq!(c.cardinality(), 256);
        assert_eq!(c.covering_number(16).unwrap(), 256);
        // count doubles every two dyadic levels
        assert_eq!(c.covering_number(14).unwrap(), 128);
        assert_eq!(c.covering_number(13).unwrap(), 128);
        assert_eq!(c.covering_number(12).unwrap(), 64);
        assert_eq!(c.covering_number(10).unwrap(), 32);
    }

    #[test]
    fn cantor_depth6_has64_cells() {
        let c = generate_set(&SetSpec::Cantor { ratio: 0.25, depth: 6, k: 1 }).unwrap();
        assert_eq!(c.cardinality(), 64);
        assert_eq!(c.level(), 12);
    }

    #[test]
    fn invalid_scale_errors() {
        let c = generate_set(&SetSpec::Cantor { ratio: 0.25, depth: 2, k: 1 }).unwrap();
        assert!(matches!(
            c.covering_number(10),
            Err(Error::InvalidScale { .. })
        ));
        assert!(matches!(
            generate_set(&SetSpec::Uniform { m: 30, k: 2 }),
            Err(Error::TooFine(_))
        ));
    }

    #[test]
    fn uniform_grid_is_one_spread_with_small_constant() {
        let g = generate_set(&SetSpec::Uniform { m: 6, k: 1 }).unwrap();
        let report = spread_constant(&g, 1.0);
        assert!(report.constant >= 1.0 && report.constant <= 4.0, "C = {}", report.constant);
    }

    #[test]
    fn singleton_spread_forced_at_bottom_scale() {
        let s = DyadicSet::from_tuples(1, 6, &[vec![17]]).unwrap();
        let report = spread_constant(&s, 0.5);
        let delta: f64 = 1.0 / 64.0;
        assert!((report.constant - delta.powf(-0.5)).abs() < 1e-9);
    }

    #[test]
    fn cantor_spread_at_half_dim_is_small() {
        let c = generate_set(&SetSpec::Cantor { ratio: 0.25, depth: 8, k: 1 }).unwrap();
        let report = spread_constant(&c, 0.5);
        assert!(report.constant <= 8.0, "C = {}", report.constant);
    }

    #[test]
    fn spread_cardinality_lower_bound() {
        // non-empty (δ,s,C)-set has at least C^{-1} δ^{-s} cells
        for spec in [
            SetSpec::Cantor { ratio: 0.25, depth: 6, k: 1 },
            SetSpec::Uniform { m: 6, k: 1 },
            SetSpec::RandomSpread { s: 0.7, m: 10, k: 1, seed: 42 },
        ] {
            let p = generate_set(&spec).unwrap();
            let s = 0.6;
            let rep = spread_constant(&p, s);
            let lower = rep.constant.recip() * p.delta().powf(-s);
            assert!(p.cardinality() as f64 >= lower - 1e-9);
        }
    }

    #[test]
    fn random_spread_is_reproducible_and_spread() {
        let spec = SetSpec::RandomSpread { s: 0.7, m: 10, k: 1, seed: 42 };
        let a = generate_set(&spec).unwrap();
        let b = generate_set(&spec).unwrap();
        assert_eq!(a, b);
        let report = spread_constant(&a, 0.7);
        assert!(report.constant <= 16.0, "C = {}", report.constant);
    }

    #[test]
    fn extract_keeps_uniform_grid_nearly_whole() {
        let g = generate_set(&SetSpec::Uniform { m: 6, k: 1 }).unwrap();
        let (sub, _rep) = extract_spread_subset(&g, 1.0);
        assert!(sub.cardinality() >= g.cardinality() / 2);
    }

    #[test]
    fn extract_from_column_keeps_a_line_shaped_set() {
        // all mass in one δ-column of the square: the column is genuinely
        // one-dimensional, so extraction at t = 1 keeps it whole with a
        // small constant
        let tuples: Vec<Vec<u32>> = (0..64).map(|y| vec![3u32, y]).collect();
        let p = DyadicSet::from_tuples(2, 6, &tuples).unwrap();
        let (sub, rep) = extract_spread_subset(&p, 1.0);
        assert_eq!(sub.cardinality(), 64);
        assert!(rep.constant <= 4.0, "C = {}", rep.constant);
    }

    #[test]
    fn extract_from_concentrated_set_pays_penalty() {
        // mass clustered in a 4x4 corner block: the target cardinality
        // δ^{-t} = 64 is unreachable and the constant shows the
        // concentration
        let tuples: Vec<Vec<u32>> =
            (0..4).flat_map(|x| (0..4).map(move |y| vec![x, y])).collect();
        let p = DyadicSet::from_tuples(2, 6, &tuples).unwrap();
        let (sub, rep) = extract_spread_subset(&p, 1.0);
        assert!(sub.cardinality() < 64);
        assert!(rep.constant > 3.0, "C = {}", rep.constant);
    }

    #[test]
    fn extract_lower_exponent_from_cantor() {
        let c = generate_set(&SetSpec::Cantor { ratio: 0.25, depth: 8, k: 1 }).unwrap();
        let parent = spread_constant(&c, 0.25);
        let (sub, rep) = extract_spread_subset(&c, 0.25);
        assert!(!sub.is_empty());
        // extraction at a lower exponent never degrades the constant much
        assert!(rep.constant <= parent.constant * 2f64.powi(1) + 1e-9);
    }

    #[test]
    fn product_of_cantors_has_square_count() {
        let c = generate_set(&SetSpec::Cantor { ratio: 0.25, depth: 6, k: 1 }).unwrap();
        let p = product(&c, &c).unwrap();
        assert_eq!(p.cardinality(), 64 * 64);
        assert_eq!(p.dim(), 2);
    }

    #[test]
    fn binary_round_trip() {
        let c = generate_set(&SetSpec::RandomSpread { s: 0.9, m: 8, k: 2, seed: 5 }).unwrap();
        let mut buf = Vec::new();
        c.write_binary(&mut buf).unwrap();
        let back = DyadicSet::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back, c);
        let js = c.to_json();
        let back = DyadicSet::from_json(&js).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn coarsening_monotone() {
        let c = generate_set(&SetSpec::RandomSpread { s: 1.3, m: 8, k: 2, seed: 11 }).unwrap();
        let mut prev = c.cardinality();
        for m in (0..8).rev() {
            let n = c.covering_number(m).unwrap();
            assert!(n <= prev);
            prev = n;
        }
    }

    #[test]
    fn dilation_covers_the_set() {
        let c = generate_set(&SetSpec::RandomSpread { s: 1.0, m: 6, k: 2, seed: 3 }).unwrap();
        let d = c.dilate();
        assert!(d.cardinality() >= c.cardinality());
        for &code in c.codes() {
            assert!(d.contains_code(code));
        }
    }
}
