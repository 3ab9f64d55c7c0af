//! The tensor-product index set `𝒵^d_{M,N}` and its evaluable basis.

use std::sync::Arc;

use super::table::WaveletSpec;
use crate::error::{domain, Result};

/// Index `l = (l1, l2, l3)` of a tensor basis function.
///
/// `kind` encodes the bit vector `l3 ∈ {0,1}^d` with coordinate 0 as the most
/// significant bit, so numeric order equals lexicographic order. Scaling
/// indices have `l1 = 0` and `kind = 0`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WaveletIndex {
    pub l1: u32,
    pub l2: Vec<i64>,
    pub kind: u32,
}

impl WaveletIndex {
    pub fn scaling(l2: Vec<i64>) -> Self {
        Self { l1: 0, l2, kind: 0 }
    }

    pub fn detail(l1: u32, l2: Vec<i64>, kind: u32) -> Self {
        Self { l1, l2, kind }
    }

    pub fn is_scaling(&self) -> bool {
        self.kind == 0
    }

    pub fn dim(&self) -> usize {
        self.l2.len()
    }

    /// Bit `l3_i` (0 selects φ, 1 selects ψ).
    pub fn kind_bit(&self, i: usize) -> bool {
        kind_bit(self.kind, self.dim(), i)
    }
}

#[inline]
fn kind_bit(kind: u32, d: usize, i: usize) -> bool {
    (kind >> (d - 1 - i)) & 1 == 1
}

/// `|𝒵^d_{M,N}| = (2N+1)^d + Σ_{l=0}^{M} (2^d−1)(2^{l+1}N+1)^d`, or `None` on overflow.
pub fn cardinality(d: usize, max_level: u32, radius: u32) -> Option<u128> {
    let d32 = u32::try_from(d).ok()?;
    let side = |s: u128| s.checked_pow(d32);
    let mut total = side(2 * radius as u128 + 1)?;
    let kinds = 1u128.checked_shl(d32)?.checked_sub(1)?;
    for l in 0..=max_level {
        let s = (1u128.checked_shl(l + 1)?).checked_mul(radius as u128)? + 1;
        total = total.checked_add(kinds.checked_mul(side(s)?)?)?;
    }
    Some(total)
}

/// Full enumeration of `𝒵^d_{M,N}` in canonical order: the scaling block first,
/// then detail indices ordered by `(l1, l2 lexicographic, l3 lexicographic)`.
pub fn enumerate_indices(d: usize, max_level: u32, radius: u32) -> Vec<WaveletIndex> {
    assert!(d >= 1 && radius >= 1, "enumerate_indices needs d >= 1, N >= 1");
    let mut out = Vec::new();
    let n = radius as i64;
    for_each_shift(d, n, |l2| out.push(WaveletIndex::scaling(l2.to_vec())));
    for l1 in 0..=max_level {
        let bound = (1i64 << l1) * n;
        for_each_shift(d, bound, |l2| {
            for kind in 1..(1u32 << d) {
                out.push(WaveletIndex::detail(l1, l2.to_vec(), kind));
            }
        });
    }
    out
}

fn for_each_shift(d: usize, bound: i64, mut f: impl FnMut(&[i64])) {
    let mut l2 = vec![-bound; d];
    loop {
        f(&l2);
        let mut i = d;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if l2[i] < bound {
                l2[i] += 1;
                break;
            }
            l2[i] = -bound;
        }
    }
}

#[derive(Debug, Clone)]
struct Block {
    /// Level `l1`; `None` for the scaling block.
    level: Option<u32>,
    offset: usize,
    /// Shift bound `‖l2‖∞ ≤ bound`.
    bound: i64,
    /// Per-entry weight `L^d 2^{l1(d/2+1)}` of the ‖·‖_ℬ norm.
    weight: f64,
}

/// The finite system `(Ψ_l)_{l ∈ 𝒵^d_{M,N}}`.
#[derive(Debug, Clone)]
pub struct WaveletDictionary {
    d: usize,
    max_level: u32,
    radius: u32,
    spec: Arc<WaveletSpec>,
    indices: Vec<WaveletIndex>,
    blocks: Vec<Block>,
    weights: Vec<f64>,
}

/// Reusable buffers for [`WaveletDictionary::for_each_active_with`].
#[derive(Debug, Default)]
pub struct ActiveScratch {
    active: Vec<Vec<(usize, f64, f64)>>,
    combo: Vec<usize>,
    kind_prod: Vec<f64>,
}

/// Largest dictionary that will be materialized.
pub const MAX_DICTIONARY_LEN: u128 = 1 << 24;

impl WaveletDictionary {
    pub fn new(spec: Arc<WaveletSpec>, d: usize, max_level: u32, radius: u32) -> Result<Self> {
        if d == 0 || radius == 0 {
            return domain(format!("dictionary needs d >= 1 and N >= 1 (got d={d}, N={radius})"));
        }
        if d > 24 {
            return domain(format!("dimension {d} too large for a tensor dictionary"));
        }
        match cardinality(d, max_level, radius) {
            Some(k) if k <= MAX_DICTIONARY_LEN => {}
            _ => {
                return domain(format!(
                    "dictionary (d={d}, M={max_level}, N={radius}) exceeds {MAX_DICTIONARY_LEN} entries"
                ))
            }
        }
        let indices = enumerate_indices(d, max_level, radius);
        let ld = spec.l_const().powi(d as i32);
        let kinds = (1usize << d) - 1;
        let mut blocks = Vec::with_capacity(max_level as usize + 2);
        let n = radius as i64;
        let mut offset = 0usize;
        blocks.push(Block {
            level: None,
            offset,
            bound: n,
            weight: ld,
        });
        offset += ((2 * n + 1) as usize).pow(d as u32);
        for l1 in 0..=max_level {
            let bound = (1i64 << l1) * n;
            blocks.push(Block {
                level: Some(l1),
                offset,
                bound,
                weight: ld * (l1 as f64 * (d as f64 / 2.0 + 1.0)).exp2(),
            });
            offset += ((2 * bound + 1) as usize).pow(d as u32) * kinds;
        }
        debug_assert_eq!(offset, indices.len());
        let mut weights = Vec::with_capacity(offset);
        for (bi, b) in blocks.iter().enumerate() {
            let end = blocks.get(bi + 1).map_or(offset, |n| n.offset);
            weights.extend(std::iter::repeat_n(b.weight, end - b.offset));
        }
        Ok(Self {
            d,
            max_level,
            radius,
            spec,
            indices,
            blocks,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn max_level(&self) -> u32 {
        self.max_level
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn spec(&self) -> &Arc<WaveletSpec> {
        &self.spec
    }

    pub fn indices(&self) -> &[WaveletIndex] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Number of leading entries forming `𝒵^d_{level,N}` (a prefix in canonical order).
    pub fn prefix_len(&self, level: u32) -> usize {
        let level = level.min(self.max_level);
        self.blocks
            .get(level as usize + 2)
            .map_or(self.len(), |b| b.offset)
    }

    /// Per-entry weights `L^d 2^{l1(d/2+1)}` of the ‖·‖_ℬ norm.
    pub fn norm_weights(&self) -> &[f64] {
        &self.weights
    }

    /// Position of `l` in the canonical order, if it belongs to the dictionary.
    pub fn position(&self, l: &WaveletIndex) -> Option<usize> {
        if l.dim() != self.d {
            return None;
        }
        let block = if l.is_scaling() {
            if l.l1 != 0 {
                return None;
            }
            &self.blocks[0]
        } else {
            if l.l1 > self.max_level || l.kind >= (1 << self.d) {
                return None;
            }
            &self.blocks[l.l1 as usize + 1]
        };
        if l.l2.iter().any(|s| s.abs() > block.bound) {
            return None;
        }
        let side = 2 * block.bound + 1;
        let lin = l
            .l2
            .iter()
            .fold(0i64, |acc, s| acc * side + (s + block.bound)) as usize;
        Some(if l.is_scaling() {
            block.offset + lin
        } else {
            block.offset + lin * ((1 << self.d) - 1) + l.kind as usize - 1
        })
    }

    /// `Ψ_l(x) = 2^{l1 d/2} ∏ ψ_{l3,i}(2^{l1} x_i − l2_i)`.
    pub fn eval_basis(&self, l: &WaveletIndex, x: &[f64]) -> Result<f64> {
        if self.position(l).is_none() {
            return domain(format!("index {l:?} is not in the dictionary"));
        }
        if x.len() != self.d {
            return domain(format!("point has dimension {}, dictionary {}", x.len(), self.d));
        }
        Ok(self.eval_basis_unchecked(l, x))
    }

    pub(crate) fn eval_basis_unchecked(&self, l: &WaveletIndex, x: &[f64]) -> f64 {
        let scale = (l.l1 as f64).exp2();
        let mut v = (l.l1 as f64 * self.d as f64 / 2.0).exp2();
        for (i, xi) in x.iter().enumerate().take(self.d) {
            v *= self
                .spec
                .eval_kind(l.kind_bit(i), scale * xi - l.l2[i] as f64);
            if v == 0.0 {
                break;
            }
        }
        v
    }

    /// Visits every `(position, Ψ_l(x))` with a (possibly) nonzero value at `x`.
    pub fn for_each_active(&self, x: &[f64], visit: impl FnMut(usize, f64)) {
        self.for_each_active_with(&mut ActiveScratch::default(), x, visit)
    }

    /// As [`Self::for_each_active`], reusing `scratch` across calls.
    pub fn for_each_active_with(
        &self,
        scratch: &mut ActiveScratch,
        x: &[f64],
        mut visit: impl FnMut(usize, f64),
    ) {
        let d = self.d;
        debug_assert_eq!(x.len(), d);
        let support = self.spec.support_len();
        let kinds = 1usize << d;
        // Per coordinate: list of (shift offset within the block box, φ, ψ).
        scratch.active.resize_with(d, Vec::new);
        scratch.combo.resize(d, 0);
        scratch.kind_prod.resize(kinds, 0.0);
        let ActiveScratch {
            active,
            combo,
            kind_prod,
        } = scratch;

        for block in &self.blocks {
            let level = block.level.unwrap_or(0);
            let scale = (level as f64).exp2();
            let bound = block.bound;
            let side = (2 * bound + 1) as usize;
            let mut empty = false;
            for (i, list) in active.iter_mut().enumerate() {
                list.clear();
                let t = scale * x[i];
                if !t.is_finite() {
                    empty = true;
                    break;
                }
                let lo = ((t - support).floor() as i64 + 1).max(-bound);
                let hi = (t.floor() as i64).min(bound);
                for k in lo..=hi {
                    let (p, q) = self.spec.eval_pair(t - k as f64);
                    if p != 0.0 || q != 0.0 {
                        list.push(((k + bound) as usize, p, q));
                    }
                }
                if list.is_empty() {
                    empty = true;
                    break;
                }
            }
            if empty {
                continue;
            }
            let norm = (level as f64 * d as f64 / 2.0).exp2();
            combo.iter_mut().for_each(|c| *c = 0);
            'combos: loop {
                let mut lin = 0usize;
                for i in 0..d {
                    lin = lin * side + active[i][combo[i]].0;
                }
                if block.level.is_none() {
                    let v: f64 = (0..d).map(|i| active[i][combo[i]].1).product();
                    if v != 0.0 {
                        visit(block.offset + lin, v);
                    }
                } else {
                    // Products over all 2^d kinds, built coordinate by coordinate.
                    kind_prod[0] = norm;
                    let mut filled = 1usize;
                    for i in 0..d {
                        let (_, p, q) = active[i][combo[i]];
                        for j in (0..filled).rev() {
                            let base = kind_prod[j];
                            kind_prod[2 * j] = base * p;
                            kind_prod[2 * j + 1] = base * q;
                        }
                        filled *= 2;
                    }
                    let base = block.offset + lin * (kinds - 1);
                    for (kind, v) in kind_prod.iter().enumerate().skip(1) {
                        if *v != 0.0 {
                            visit(base + kind - 1, *v);
                        }
                    }
                }
                // Odometer over the active shift lists.
                let mut i = d;
                loop {
                    if i == 0 {
                        break 'combos;
                    }
                    i -= 1;
                    combo[i] += 1;
                    if combo[i] < active[i].len() {
                        continue 'combos;
                    }
                    combo[i] = 0;
                }
            }
        }
    }

    /// Writes `Σ_l β_l Ψ_l(z_j)` for every point `z_j` without forming the design.
    pub fn predict_into(&self, points: &[f64], beta: &[f64], out: &mut Vec<f64>) {
        assert_eq!(beta.len(), self.len(), "coefficient length mismatch");
        out.clear();
        let mut scratch = ActiveScratch::default();
        for z in points.chunks_exact(self.d) {
            let mut acc = 0.0;
            self.for_each_active_with(&mut scratch, z, |pos, v| acc += beta[pos] * v);
            out.push(acc);
        }
    }

    /// Sparse design matrix with rows `(Ψ_l(z_j))_l` for points `z_j` stored row-major.
    pub fn design(&self, points: &[f64]) -> Design {
        let d = self.d;
        assert_eq!(points.len() % d, 0, "point buffer not a multiple of d");
        let rows = points.len() / d;
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        let mut scratch = ActiveScratch::default();
        for z in points.chunks_exact(d) {
            self.for_each_active_with(&mut scratch, z, |pos, v| {
                cols.push(pos as u32);
                vals.push(v);
            });
            row_ptr.push(cols.len());
        }
        Design {
            ncols: self.len(),
            row_ptr,
            cols,
            vals,
        }
    }
}

/// CSR matrix of basis evaluations.
#[derive(Debug, Clone, Default)]
pub struct Design {
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl Design {
    pub fn nrows(&self) -> usize {
        self.row_ptr.len().saturating_sub(1)
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()]
            .iter()
            .zip(&self.vals[range])
            .map(|(c, v)| (*c as usize, *v))
    }

    /// `out = D β`. Coefficients beyond `beta.len()` are treated as zero.
    pub fn apply_into(&self, beta: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.nrows()).map(|r| {
            self.row(r)
                .filter_map(|(c, v)| beta.get(c).map(|b| b * v))
                .sum::<f64>()
        }));
    }

    pub fn apply(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.nrows());
        self.apply_into(beta, &mut out);
        out
    }
}
