//! Step-function and piecewise-linear calculus on the unit interval.
//!
//! Everything downstream of this module rests on one fact: for finitely
//! supported marginals, both quantile functions are constant on the cells of
//! a merged breakpoint grid of (0, 1], so the cumulative integrals `Ψ₊` and
//! `Ψ₋` of the positive/negative parts of `F_mu^{-1} - F_nu^{-1}` are
//! piecewise linear with known nodes, and compositions like
//! `φ = Ψ₋^{-1} ∘ Ψ₊` are piecewise affine with computable breakpoints.
//!
//! Composed maps are kept symbolic (an inverse of one piecewise-linear
//! function wrapped around another, optionally with an affine window flip in
//! between) and only materialized on partition cells. Cutting each grid cell
//! at the preimages of the outer function's node levels guarantees that on
//! every refined cell the composition is affine and the target quantile
//! value is constant, which turns all the almost-everywhere statements of
//! the construction into exact finite sums.

use crate::error::{Error, Result};
use crate::measures::{merged_cells, DiscreteMeasure};

/// Classification of a partition cell by the sign of `F_mu^{-1} - F_nu^{-1}`.
/// `Tail` marks the identity region of the supermartingale kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellTag {
    Plus,
    Minus,
    Zero,
    Tail,
}

/// A left-continuous step function on (0, 1]: `values[j]` on
/// `(bounds[j], bounds[j+1]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    bounds: Vec<f64>,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(bounds: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let ok = bounds.len() == values.len() + 1
            && bounds.len() >= 2
            && bounds.windows(2).all(|w| w[0] < w[1])
            && bounds.first() == Some(&0.0)
            && bounds.last() == Some(&1.0);
        if !ok {
            return Err(Error::SupportViolation {
                context: "step function needs bounds 0 = u0 < ... < uk = 1",
            });
        }
        Ok(Self { bounds, values })
    }

    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value on the cell containing `u ∈ (0, 1]`.
    pub fn eval(&self, u: f64) -> f64 {
        let j = self.bounds.partition_point(|&b| b < u);
        self.values[j.clamp(1, self.values.len()) - 1]
    }
}

/// The merged breakpoint grid of two measures: on each cell
/// `(bounds[j], bounds[j+1]]` both quantile functions are constant.
#[derive(Debug, Clone)]
pub struct QuantileGrid {
    pub bounds: Vec<f64>,
    pub mu_q: Vec<f64>,
    pub nu_q: Vec<f64>,
}

impl QuantileGrid {
    pub fn new(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Self {
        let mut bounds = vec![0.0];
        let mut mu_q = Vec::new();
        let mut nu_q = Vec::new();
        let mut acc = 0.0;
        merged_cells(mu, nu, |len, x, y| {
            acc += len;
            bounds.push(acc);
            mu_q.push(x);
            nu_q.push(y);
        });
        *bounds.last_mut().expect("nonempty") = 1.0;
        Self { bounds, mu_q, nu_q }
    }

    pub fn cell_count(&self) -> usize {
        self.mu_q.len()
    }

    /// `F_mu^{-1} - F_nu^{-1}` as a step function on the grid.
    pub fn quantile_difference(&self) -> StepFunction {
        let values = self
            .mu_q
            .iter()
            .zip(&self.nu_q)
            .map(|(x, y)| x - y)
            .collect();
        StepFunction::new(self.bounds.clone(), values).expect("grid is a valid step support")
    }

    /// Index of the cell `(bounds[j], bounds[j+1]]` containing `u`.
    pub fn cell_of(&self, u: f64) -> usize {
        let j = self.bounds.partition_point(|&b| b < u);
        j.clamp(1, self.cell_count()) - 1
    }

    /// True when the quantile difference is nonnegative-then-nonpositive
    /// (zeros allowed anywhere).
    pub fn single_sign_change(&self) -> bool {
        let mut seen_minus = false;
        for (x, y) in self.mu_q.iter().zip(&self.nu_q) {
            if x > y && seen_minus {
                return false;
            }
            if x < y {
                seen_minus = true;
            }
        }
        true
    }
}

/// A continuous nondecreasing piecewise-linear function given by its nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear {
    us: Vec<f64>,
    vals: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(us: Vec<f64>, vals: Vec<f64>) -> Result<Self> {
        let ok = us.len() == vals.len()
            && us.len() >= 2
            && us.windows(2).all(|w| w[0] < w[1])
            && vals.windows(2).all(|w| w[0] <= w[1]);
        if !ok {
            return Err(Error::SupportViolation {
                context: "piecewise-linear nodes must be increasing with nondecreasing values",
            });
        }
        Ok(Self { us, vals })
    }

    /// Cumulative integral of a nonnegative density that is constant on the
    /// cells of `bounds`.
    pub fn integral_of_steps(bounds: &[f64], density: &[f64]) -> Self {
        debug_assert_eq!(bounds.len(), density.len() + 1);
        let mut vals = Vec::with_capacity(bounds.len());
        vals.push(0.0);
        let mut acc = 0.0;
        for (j, d) in density.iter().enumerate() {
            debug_assert!(*d >= 0.0);
            acc += d * (bounds[j + 1] - bounds[j]);
            vals.push(acc);
        }
        Self {
            us: bounds.to_vec(),
            vals,
        }
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.us, &self.vals)
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.us[0], *self.us.last().expect("nonempty"))
    }

    pub fn total(&self) -> f64 {
        *self.vals.last().expect("nonempty")
    }

    pub fn eval(&self, u: f64) -> f64 {
        if u <= self.us[0] {
            return self.vals[0];
        }
        let n = self.us.len();
        if u >= self.us[n - 1] {
            return self.vals[n - 1];
        }
        let j = self.us.partition_point(|&t| t < u);
        if self.us[j] == u {
            return self.vals[j];
        }
        let (u0, u1) = (self.us[j - 1], self.us[j]);
        let (v0, v1) = (self.vals[j - 1], self.vals[j]);
        v0 + (u - u0) * (v1 - v0) / (u1 - u0)
    }

    /// Copy with extra nodes inserted (values interpolated).
    pub fn with_nodes(&self, extra: &[f64]) -> Self {
        let (lo, hi) = self.domain();
        let mut us = self.us.clone();
        us.extend(extra.iter().copied().filter(|&u| u > lo && u < hi));
        us.sort_by(|a, b| a.partial_cmp(b).expect("finite nodes"));
        us.dedup();
        let vals = us.iter().map(|&u| self.eval(u)).collect();
        Self { us, vals }
    }
}

/// Left-continuous generalized inverse of a [`PiecewiseLinear`] function,
/// `Ψ^{-1}(w) = inf{u : Ψ(u) >= w}`, with the right-continuous variant
/// `sup{u : Ψ(u) <= w}` exposed separately.
#[derive(Debug, Clone)]
pub struct GeneralizedInverse {
    base: PiecewiseLinear,
}

pub fn gen_inverse(psi: &PiecewiseLinear) -> GeneralizedInverse {
    GeneralizedInverse { base: psi.clone() }
}

impl GeneralizedInverse {
    pub fn base(&self) -> &PiecewiseLinear {
        &self.base
    }

    pub fn eval(&self, w: f64) -> f64 {
        let (us, vals) = (&self.base.us, &self.base.vals);
        if w <= vals[0] {
            return us[0];
        }
        let n = vals.len();
        if w > vals[n - 1] {
            return us[n - 1];
        }
        let j = vals.partition_point(|&v| v < w);
        // vals[j-1] < w <= vals[j], so the cell has positive slope.
        let slope = (vals[j] - vals[j - 1]) / (us[j] - us[j - 1]);
        us[j - 1] + (w - vals[j - 1]) / slope
    }

    /// `sup{u : Ψ(u) <= w}`.
    pub fn eval_right(&self, w: f64) -> f64 {
        let (us, vals) = (&self.base.us, &self.base.vals);
        if w < vals[0] {
            return us[0];
        }
        let n = vals.len();
        let j = vals.partition_point(|&v| v <= w);
        if j == n {
            return us[n - 1];
        }
        // vals[j-1] <= w < vals[j]
        let slope = (vals[j] - vals[j - 1]) / (us[j] - us[j - 1]);
        us[j - 1] + (w - vals[j - 1]) / slope
    }

    /// Values of the base function at its nodes: every kink or jump of the
    /// inverse happens at one of these levels.
    pub fn levels(&self) -> &[f64] {
        &self.base.vals
    }

    /// Levels at which the inverse jumps (flat intervals of the base).
    pub fn jump_levels(&self) -> Vec<f64> {
        let vals = &self.base.vals;
        let mut out: Vec<f64> = vals
            .windows(2)
            .filter(|w| w[0] == w[1])
            .map(|w| w[0])
            .collect();
        out.dedup();
        out
    }
}

/// A map `u ↦ outer(mid(inner(u)))` where `inner` is piecewise linear
/// nondecreasing, `mid` is an optional affine flip `w ↦ lo + hi - w` on
/// `(lo, hi]`, and `outer` is a generalized inverse. Stored symbolically and
/// evaluated on partition cells.
#[derive(Debug, Clone)]
pub struct ComposedMap {
    inner: PiecewiseLinear,
    flip: Option<(f64, f64)>,
    outer: GeneralizedInverse,
}

impl ComposedMap {
    pub fn new(inner: PiecewiseLinear, outer: GeneralizedInverse) -> Self {
        Self {
            inner,
            flip: None,
            outer,
        }
    }

    pub fn with_flip(inner: PiecewiseLinear, lo: f64, hi: f64, outer: GeneralizedInverse) -> Self {
        debug_assert!(lo < hi);
        Self {
            inner,
            flip: Some((lo, hi)),
            outer,
        }
    }

    fn mid(&self, w: f64) -> f64 {
        match self.flip {
            Some((lo, hi)) if w > lo && w <= hi => lo + hi - w,
            _ => w,
        }
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.outer.eval(self.mid(self.inner.eval(u)))
    }

    /// Inner value, after the flip, at `u` — the coordinate in which the
    /// outer inverse is consulted.
    pub fn level_at(&self, u: f64) -> f64 {
        self.mid(self.inner.eval(u))
    }

    /// All `w`-levels whose preimages must become cell boundaries for the
    /// composition to be affine (and its target-cell index constant) between
    /// consecutive cuts.
    fn w_levels(&self) -> Vec<f64> {
        let mut levels: Vec<f64> = self.outer.levels().to_vec();
        if let Some((lo, hi)) = self.flip {
            let flipped: Vec<f64> = levels.iter().map(|&l| lo + hi - l).collect();
            levels.extend(flipped);
            levels.push(lo);
            levels.push(hi);
        }
        levels.sort_by(|a, b| a.partial_cmp(b).expect("finite levels"));
        levels.dedup();
        levels
    }

    /// Cut points strictly inside `(a, b)`, assuming `inner` is affine
    /// there (true for cells of the grid the map was built on).
    pub fn cut_points(&self, a: f64, b: f64, out: &mut Vec<f64>) {
        let wa = self.inner.eval(a);
        let wb = self.inner.eval(b);
        if wb <= wa {
            return;
        }
        for l in self.w_levels() {
            if l > wa && l < wb {
                out.push(a + (l - wa) * (b - a) / (wb - wa));
            }
        }
    }
}

/// An interval partition of (0, 1) refining the quantile grid so that every
/// registered composed map is affine on each cell.
#[derive(Debug, Clone)]
pub struct BreakpointPartition {
    pub cells: Vec<PartitionCell>,
}

#[derive(Debug, Clone, Copy)]
pub struct PartitionCell {
    pub lo: f64,
    pub hi: f64,
    pub tag: CellTag,
    /// `F_mu^{-1}` on the cell.
    pub mu_q: f64,
    /// `F_nu^{-1}` on the cell.
    pub nu_q: f64,
}

impl PartitionCell {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    /// A point safely interior to the half-open cell.
    pub fn midpoint(&self) -> f64 {
        let m = 0.5 * (self.lo + self.hi);
        if m > self.lo {
            m
        } else {
            self.hi
        }
    }
}

/// Common refinement of the quantile grid by the cut points of `maps` and
/// the explicit `extra` points.
/// Cut points closer than this (in u-space) count as coincident: the solves
/// producing them can land one ulp off an existing breakpoint, and the
/// resulting sliver cells would resolve their targets on the wrong side.
const CUT_TOL: f64 = 1e-13;

pub(crate) fn partition_grid(
    grid: &QuantileGrid,
    maps: &[&ComposedMap],
    extra: &[f64],
) -> BreakpointPartition {
    let mut cells = Vec::new();
    let mut cuts: Vec<f64> = Vec::new();
    for j in 0..grid.cell_count() {
        let (lo, hi) = (grid.bounds[j], grid.bounds[j + 1]);
        cuts.clear();
        for m in maps {
            m.cut_points(lo, hi, &mut cuts);
        }
        cuts.extend(extra.iter().copied());
        cuts.retain(|&u| u > lo + CUT_TOL && u < hi - CUT_TOL);
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cuts"));
        cuts.dedup_by(|a, b| (*a - *b).abs() <= CUT_TOL);
        let (x, y) = (grid.mu_q[j], grid.nu_q[j]);
        let tag = if x > y {
            CellTag::Plus
        } else if x < y {
            CellTag::Minus
        } else {
            CellTag::Zero
        };
        let mut prev = lo;
        for &c in cuts.iter().chain(std::iter::once(&hi)) {
            if c > prev {
                cells.push(PartitionCell {
                    lo: prev,
                    hi: c,
                    tag,
                    mu_q: x,
                    nu_q: y,
                });
                prev = c;
            }
        }
    }
    BreakpointPartition { cells }
}

/// Common refinement such that `F_mu^{-1}`, `F_nu^{-1}` and every map in
/// `maps` are constant resp. affine on each cell.
pub fn partition(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    maps: &[&ComposedMap],
) -> BreakpointPartition {
    partition_grid(&QuantileGrid::new(mu, nu), maps, &[])
}

/// The pair `Ψ₊, Ψ₋` of cumulative integrals of the positive and negative
/// parts of the quantile difference, together with their common total mass.
#[derive(Debug, Clone)]
pub struct PsiPair {
    pub plus: PiecewiseLinear,
    pub minus: PiecewiseLinear,
    pub gamma: f64,
}

pub(crate) fn psis_from_grid(grid: &QuantileGrid) -> (PiecewiseLinear, PiecewiseLinear) {
    let pos: Vec<f64> = grid
        .mu_q
        .iter()
        .zip(&grid.nu_q)
        .map(|(x, y)| (x - y).max(0.0))
        .collect();
    let neg: Vec<f64> = grid
        .mu_q
        .iter()
        .zip(&grid.nu_q)
        .map(|(x, y)| (y - x).max(0.0))
        .collect();
    (
        PiecewiseLinear::integral_of_steps(&grid.bounds, &pos),
        PiecewiseLinear::integral_of_steps(&grid.bounds, &neg),
    )
}

/// Exact `Ψ₊`, `Ψ₋` for a pair of distinct measures with equal means.
pub fn psi_pair(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: f64) -> Result<PsiPair> {
    let scale = 1.0 + mu.abs_moment(1.0) + nu.abs_moment(1.0);
    let (m1, m2) = (mu.mean(), nu.mean());
    if (m1 - m2).abs() > tol * scale {
        return Err(Error::UnequalMeans { mean1: m1, mean2: m2 });
    }
    let grid = QuantileGrid::new(mu, nu);
    let (plus, minus) = psis_from_grid(&grid);
    let gamma = plus.total();
    if gamma <= 0.0 {
        return Err(Error::IdenticalMeasures);
    }
    Ok(PsiPair { plus, minus, gamma })
}

/// The maps `φ = Ψ₋^{-1} ∘ Ψ₊` and `φ̃ = Ψ₊^{-1} ∘ Ψ₋`, plus the truncation
/// level `u_d = sup{u : Ψ₊(u) <= Ψ₋(1)}` used by the supermartingale
/// construction (`u_d = 1` when the means are equal).
#[derive(Debug, Clone)]
pub struct PhiMaps {
    pub phi: ComposedMap,
    pub phi_tilde: ComposedMap,
    pub u_d: f64,
}

pub fn phi_maps(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<PhiMaps> {
    let report = mu.check_order(nu, crate::error::DEFAULT_TOL);
    if !report.dcx {
        return Err(Error::OrderViolation {
            context: "phi maps need mu <=_dcx nu",
        });
    }
    let grid = QuantileGrid::new(mu, nu);
    let (plus, minus) = psis_from_grid(&grid);
    let u_d = truncation_level(mu, nu, &plus, &minus);
    Ok(PhiMaps {
        phi: ComposedMap::new(plus.clone(), gen_inverse(&minus)),
        phi_tilde: ComposedMap::new(minus, gen_inverse(&plus)),
        u_d,
    })
}

/// `u_d = sup{u : Ψ₊(u) <= Ψ₋(1)}`, the point where the positive
/// quantile-difference mass exhausts the negative one. Means that agree up
/// to accumulation noise give `u_d = 1` outright: the exact level then sits
/// on the final jump of the inverse, and noise alone would otherwise
/// collapse the martingale region.
pub(crate) fn truncation_level(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    plus: &PiecewiseLinear,
    minus: &PiecewiseLinear,
) -> f64 {
    let scale = 1.0 + mu.abs_moment(1.0) + nu.abs_moment(1.0);
    if plus.total() - minus.total() <= 1e-12 * scale {
        return 1.0;
    }
    gen_inverse(plus).eval_right(minus.total())
}

/// `χ₊ = Ψ₊`, `χ₋(u) = γ - Ψ₋(1 - u)` and `Γ = χ₋^{-1} ∘ χ₊`, defined under
/// the single-sign-change hypothesis.
#[derive(Debug, Clone)]
pub struct ChiMaps {
    pub chi_plus: PiecewiseLinear,
    pub chi_minus: PiecewiseLinear,
    pub gamma_map: ComposedMap,
}

pub fn chi_maps(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<ChiMaps> {
    let report = mu.check_order(nu, crate::error::DEFAULT_TOL);
    if !report.cx {
        return Err(Error::OrderViolation {
            context: "chi maps need mu <=_cx nu",
        });
    }
    if !report.strict {
        return Err(Error::IdenticalMeasures);
    }
    let grid = QuantileGrid::new(mu, nu);
    if !grid.single_sign_change() {
        return Err(Error::SingleSignChangeViolation);
    }
    let (plus, minus) = psis_from_grid(&grid);
    let gamma = plus.total();
    let (us, vals) = minus.nodes();
    let chi_us: Vec<f64> = us.iter().rev().map(|&u| 1.0 - u).collect();
    let chi_vals: Vec<f64> = vals.iter().rev().map(|&v| gamma - v).collect();
    let chi_minus = PiecewiseLinear::new(chi_us, chi_vals)?;
    let gamma_map = ComposedMap::new(plus.clone(), gen_inverse(&chi_minus));
    Ok(ChiMaps {
        chi_plus: plus,
        chi_minus,
        gamma_map,
    })
}

/// Evaluates both sides of the change-of-variables identity
/// `∫_0^{u0} h(Γ(u)) f1(u) du = ∫_0^1 h(v) f2(v) dv` with
/// `Γ = Ψ₂^{-1} ∘ Ψ₁`, exactly on the refined partition.
pub fn change_of_variables_check(
    f1: &StepFunction,
    f2: &StepFunction,
    u0: f64,
    h: &StepFunction,
) -> Result<(f64, f64)> {
    if f1.values.iter().chain(&f2.values).any(|&v| v < 0.0) {
        return Err(Error::SupportViolation {
            context: "densities must be nonnegative",
        });
    }
    let psi1 = PiecewiseLinear::integral_of_steps(&f1.bounds, &f1.values);
    let psi2 = PiecewiseLinear::integral_of_steps(&f2.bounds, &f2.values);
    let mass1 = psi1.eval(u0);
    let mass2 = psi2.total();
    if (mass1 - mass2).abs() > 1e-12 * (1.0 + mass1.abs() + mass2.abs()) {
        return Err(Error::MassMismatch {
            lhs: mass1,
            rhs: mass2,
        });
    }
    // Refining psi2 with h's breakpoints makes them cut levels of the map.
    let psi2_ref = psi2.with_nodes(&h.bounds);
    let map = ComposedMap::new(psi1.clone(), gen_inverse(&psi2_ref));

    let mut lhs = 0.0;
    let mut cuts = Vec::new();
    for j in 0..f1.values.len() {
        let (lo, hi) = (f1.bounds[j], f1.bounds[j + 1].min(u0));
        if hi <= lo {
            break;
        }
        cuts.clear();
        map.cut_points(lo, hi, &mut cuts);
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cuts"));
        cuts.dedup();
        let mut prev = lo;
        for &c in cuts.iter().chain(std::iter::once(&hi)) {
            if c > prev {
                let mid = 0.5 * (prev + c);
                lhs += (c - prev) * f1.values[j] * h.eval(map.eval(mid));
                prev = c;
            }
        }
    }

    let mut rhs = 0.0;
    let mut vs: Vec<f64> = f2.bounds.iter().chain(h.bounds.iter()).copied().collect();
    vs.sort_by(|a, b| a.partial_cmp(b).expect("finite bounds"));
    vs.dedup();
    for w in vs.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        rhs += (w[1] - w[0]) * f2.eval(mid) * h.eval(mid);
    }
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(pairs: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::from_atoms(pairs, false).unwrap()
    }

    fn pair_a() -> (DiscreteMeasure, DiscreteMeasure) {
        (m(&[(-1.0, 0.5), (1.0, 0.5)]), m(&[(-2.0, 0.5), (2.0, 0.5)]))
    }

    fn pair_b() -> (DiscreteMeasure, DiscreteMeasure) {
        (
            m(&[(-1.0, 0.5), (1.0, 0.5)]),
            m(&[(-8.0, 0.125), (-6.0, 0.25), (4.0, 0.625)]),
        )
    }

    #[test]
    fn psi_pair_pair_a() {
        let (mu, nu) = pair_a();
        let psi = psi_pair(&mu, &nu, 1e-9).unwrap();
        assert_eq!(psi.gamma, 0.5);
        // Ψ₊(u) = min(u, 1/2), Ψ₋(u) = (u - 1/2)^+
        assert_eq!(psi.plus.eval(0.25), 0.25);
        assert_eq!(psi.plus.eval(0.75), 0.5);
        assert_eq!(psi.minus.eval(0.25), 0.0);
        assert_eq!(psi.minus.eval(0.75), 0.25);
    }

    #[test]
    fn psi_pair_pair_b_slopes() {
        let (mu, nu) = pair_b();
        let psi = psi_pair(&mu, &nu, 1e-9).unwrap();
        assert_eq!(psi.gamma, 17.0 / 8.0);
        // slopes (7, 5, 0, 0) on the grid (0, 1/8, 3/8, 1/2, 1)
        assert_eq!(psi.plus.eval(0.125), 7.0 / 8.0);
        assert_eq!(psi.plus.eval(0.375), 17.0 / 8.0);
        assert_eq!(psi.plus.eval(1.0), 17.0 / 8.0);
        assert_eq!(psi.minus.eval(0.375), 0.0);
        assert_eq!(psi.minus.eval(0.5), 5.0 / 8.0);
    }

    #[test]
    fn psi_pair_symmetric_spread() {
        let mu = DiscreteMeasure::dirac(0.0);
        let nu = m(&[(-1.0, 0.5), (1.0, 0.5)]);
        let psi = psi_pair(&mu, &nu, 1e-9).unwrap();
        assert_eq!(psi.gamma, 0.5);
        assert_eq!(psi.plus.eval(0.3), 0.3);
        assert_eq!(psi.plus.eval(0.9), 0.5);
        assert_eq!(psi.minus.eval(0.9), 0.4);
    }

    #[test]
    fn psi_pair_preconditions() {
        let (mu, _) = pair_a();
        assert!(matches!(
            psi_pair(&mu, &DiscreteMeasure::dirac(1.0), 1e-9),
            Err(Error::UnequalMeans { .. })
        ));
        assert!(matches!(
            psi_pair(&mu, &mu, 1e-9),
            Err(Error::IdenticalMeasures)
        ));
    }

    #[test]
    fn generalized_inverse_basics() {
        // Ψ₋(u) = (u - 1/2)^+ has inverse w ↦ w + 1/2 on (0, 1/2]
        let psi = PiecewiseLinear::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.0, 0.5]).unwrap();
        let inv = gen_inverse(&psi);
        assert_eq!(inv.eval(0.25), 0.75);
        assert_eq!(inv.eval(0.5), 1.0);

        let id = PiecewiseLinear::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let inv = gen_inverse(&id);
        assert_eq!(inv.eval(0.3), 0.3);

        // flat on (0.2, 0.6) at level 0.2: inverse jumps there
        let psi =
            PiecewiseLinear::new(vec![0.0, 0.2, 0.6, 1.0], vec![0.0, 0.2, 0.2, 0.6]).unwrap();
        let inv = gen_inverse(&psi);
        assert_eq!(inv.eval(0.2), 0.2);
        assert_eq!(inv.eval_right(0.2), 0.6);
        assert_eq!(inv.jump_levels(), vec![0.2]);
    }

    #[test]
    fn inverse_round_trips() {
        let psi =
            PiecewiseLinear::new(vec![0.0, 0.25, 0.5, 1.0], vec![0.0, 0.5, 0.5, 2.0]).unwrap();
        let inv = gen_inverse(&psi);
        // Ψ(Ψ^{-1}(w)) = w on (0, Ψ(1)) by continuity
        for k in 1..40 {
            let w = 2.0 * k as f64 / 40.0;
            let u = inv.eval(w);
            assert!((psi.eval(u) - w).abs() <= 1e-15, "w = {w}");
        }
        // Ψ^{-1}(Ψ(u)) = u at midpoints of increase intervals
        for u in [0.1, 0.2, 0.6, 0.9] {
            assert!((inv.eval(psi.eval(u)) - u).abs() <= 1e-15);
        }
    }

    #[test]
    fn phi_map_values() {
        let (mu, nu) = pair_a();
        let maps = phi_maps(&mu, &nu).unwrap();
        assert_eq!(maps.phi.eval(0.25), 0.75);
        assert_eq!(maps.u_d, 1.0);

        let d = DiscreteMeasure::dirac(0.0);
        let nu_d = m(&[(-2.0, 0.5), (1.0, 0.5)]);
        let maps = phi_maps(&d, &nu_d).unwrap();
        assert_eq!(maps.u_d, 0.25);

        let (mu, nu) = pair_a();
        assert!(matches!(
            phi_maps(&nu, &mu),
            Err(Error::OrderViolation { .. })
        ));
    }

    #[test]
    fn phi_exceeds_identity_and_round_trips_on_plus_cells() {
        let (mu, nu) = pair_b();
        let maps = phi_maps(&mu, &nu).unwrap();
        let part = partition(&mu, &nu, &[&maps.phi, &maps.phi_tilde]);
        for cell in &part.cells {
            if cell.tag == CellTag::Plus {
                let u = cell.midpoint();
                let v = maps.phi.eval(u);
                assert!(v > u, "phi({u}) = {v}");
                assert!((maps.phi_tilde.eval(v) - u).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn chi_maps_on_pair_a_and_sign_violations() {
        let (mu, nu) = pair_a();
        let chi = chi_maps(&mu, &nu).unwrap();
        // Γ(u) = u on (0, 1/2]
        assert_eq!(chi.gamma_map.eval(0.25), 0.25);
        assert_eq!(chi.chi_minus.eval(0.25), 0.25);

        // alternating signs (+, -, +, -) are rejected
        let mu = m(&[(-3.0, 1.0 / 3.0), (0.0, 1.0 / 3.0), (3.0, 1.0 / 3.0)]);
        let nu = m(&[
            (-4.0, 1.0 / 4.0),
            (-1.0, 1.0 / 4.0),
            (1.0, 1.0 / 4.0),
            (4.0, 1.0 / 4.0),
        ]);
        let grid = QuantileGrid::new(&mu, &nu);
        assert!(!grid.single_sign_change());
        let r = mu.check_order(&nu, 1e-9);
        if r.cx {
            assert!(matches!(
                chi_maps(&mu, &nu),
                Err(Error::SingleSignChangeViolation)
            ));
        }
    }

    #[test]
    fn partition_cells_pair_a() {
        let (mu, nu) = pair_a();
        let maps = phi_maps(&mu, &nu).unwrap();
        let part = partition(&mu, &nu, &[&maps.phi]);
        assert_eq!(part.cells.len(), 2);
        assert_eq!(part.cells[0].tag, CellTag::Plus);
        assert_eq!((part.cells[0].lo, part.cells[0].hi), (0.0, 0.5));
        assert_eq!(part.cells[1].tag, CellTag::Minus);
    }

    #[test]
    fn partition_cuts_pair_b_at_5_56() {
        let (mu, nu) = pair_b();
        let maps = phi_maps(&mu, &nu).unwrap();
        let part = partition(&mu, &nu, &[&maps.phi]);
        let expected = 5.0 / 56.0;
        assert!(
            part.cells
                .iter()
                .any(|c| (c.hi - expected).abs() <= 1e-15 || (c.lo - expected).abs() <= 1e-15),
            "missing cut at 5/56"
        );
    }

    #[test]
    fn partition_tags_zero_cells() {
        let mu = m(&[(-1.0, 0.25), (0.0, 0.5), (1.0, 0.25)]);
        let nu = m(&[(-2.0, 0.25), (0.0, 0.5), (2.0, 0.25)]);
        let part = partition(&mu, &nu, &[]);
        assert!(part
            .cells
            .iter()
            .any(|c| c.tag == CellTag::Zero && c.mu_q == 0.0));
    }

    #[test]
    fn change_of_variables_identity_map() {
        let ones = StepFunction::new(vec![0.0, 1.0], vec![1.0]).unwrap();
        let h = StepFunction::new(vec![0.0, 0.3, 1.0], vec![2.0, -1.0]).unwrap();
        let (lhs, rhs) = change_of_variables_check(&ones, &ones, 1.0, &h).unwrap();
        assert!((lhs - rhs).abs() <= 1e-15);
    }

    #[test]
    fn change_of_variables_pair_a_densities() {
        // f1 = (F_mu^{-1}-F_nu^{-1})^+ = 1 on (0,1/2], f2 = mirror image
        let f1 = StepFunction::new(vec![0.0, 0.5, 1.0], vec![1.0, 0.0]).unwrap();
        let f2 = StepFunction::new(vec![0.0, 0.5, 1.0], vec![0.0, 1.0]).unwrap();
        let h = StepFunction::new(vec![0.0, 0.5, 1.0], vec![0.0, 1.0]).unwrap();
        let (lhs, rhs) = change_of_variables_check(&f1, &f2, 1.0, &h).unwrap();
        assert_eq!(rhs, 0.5);
        assert!((lhs - rhs).abs() <= 1e-15);
    }

    #[test]
    fn change_of_variables_mass_mismatch() {
        let f1 = StepFunction::new(vec![0.0, 1.0], vec![1.0]).unwrap();
        let f2 = StepFunction::new(vec![0.0, 1.0], vec![0.5]).unwrap();
        let h = StepFunction::new(vec![0.0, 1.0], vec![1.0]).unwrap();
        assert!(matches!(
            change_of_variables_check(&f1, &f2, 1.0, &h),
            Err(Error::MassMismatch { .. })
        ));
    }

    #[test]
    fn change_of_variables_random_vs_quadrature() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            // random step densities with matched mass
            let k = rng.random_range(2..6);
            let mut b1: Vec<f64> = (0..k - 1).map(|_| rng.random::<f64>()).collect();
            b1.push(0.0);
            b1.push(1.0);
            b1.sort_by(|a, b| a.partial_cmp(b).unwrap());
            b1.dedup();
            let v1: Vec<f64> = (0..b1.len() - 1).map(|_| rng.random::<f64>() + 0.05).collect();
            let f1 = StepFunction::new(b1, v1).unwrap();
            let psi1 = PiecewiseLinear::integral_of_steps(f1.bounds(), f1.values());
            let mass = psi1.total();

            let mut b2 = vec![0.0, rng.random::<f64>().clamp(0.2, 0.8), 1.0];
            b2.dedup();
            let raw: Vec<f64> = (0..b2.len() - 1).map(|_| rng.random::<f64>() + 0.05).collect();
            let psi2_raw = PiecewiseLinear::integral_of_steps(&b2, &raw);
            let scale = mass / psi2_raw.total();
            let v2: Vec<f64> = raw.iter().map(|v| v * scale).collect();
            let f2 = StepFunction::new(b2, v2).unwrap();

            let h = StepFunction::new(
                vec![0.0, 0.25, 0.7, 1.0],
                vec![rng.random(), rng.random(), rng.random()],
            )
            .unwrap();

            let (lhs, rhs) = change_of_variables_check(&f1, &f2, 1.0, &h).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12, "{lhs} vs {rhs}");

            // quadrature oracle for the left-hand side
            let psi2 = PiecewiseLinear::integral_of_steps(f2.bounds(), f2.values());
            let map = ComposedMap::new(psi1.clone(), gen_inverse(&psi2));
            let n = 1_000_000usize;
            let mut quad = 0.0;
            for i in 0..n {
                let u = (2 * i + 1) as f64 / (2 * n) as f64;
                quad += f1.eval(u) * h.eval(map.eval(u));
            }
            quad /= n as f64;
            assert!((lhs - quad).abs() <= 1e-4, "{lhs} vs quadrature {quad}");
        }
    }

    #[test]
    fn psi_plus_dominates_psi_minus_under_cx() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..30 {
            let (mu, nu) = crate::test_pairs::random_cx_pair(&mut rng, 10);
            let psi = psi_pair(&mu, &nu, 1e-9).unwrap();
            let (us, _) = psi.plus.nodes();
            for &u in us {
                assert!(
                    psi.plus.eval(u) >= psi.minus.eval(u) - 1e-12,
                    "Psi+ must dominate Psi- at u = {u}"
                );
            }
        }
    }

    #[test]
    fn randomized_cdf_uniformization() {
        // W = F(X-) + V (F(X) - F(X-)) is uniform on (0,1) and F^{-1}(W)
        // recovers X exactly, sample by sample
        use rand::{Rng, SeedableRng};
        let mu = m(&[(-8.0, 0.125), (-6.0, 0.25), (4.0, 0.625)]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let n = 100_000usize;
        let mut ws = Vec::with_capacity(n);
        for _ in 0..n {
            let mut u: f64 = rng.random();
            while u <= 0.0 {
                u = rng.random();
            }
            let x = mu.quantile(u).unwrap();
            let mut v: f64 = rng.random();
            while v <= 0.0 {
                v = rng.random();
            }
            let lo = mu.cdf(x, crate::measures::Side::Left);
            let hi = mu.cdf(x, crate::measures::Side::Right);
            let w = lo + v * (hi - lo);
            assert_eq!(mu.quantile(w).unwrap(), x);
            ws.push(w);
        }
        ws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut ks: f64 = 0.0;
        for (i, &w) in ws.iter().enumerate() {
            ks = ks.max((w - i as f64 / n as f64).abs());
            ks = ks.max((w - (i + 1) as f64 / n as f64).abs());
        }
        // 1% Kolmogorov-Smirnov level
        assert!(ks <= 1.63 / (n as f64).sqrt(), "KS statistic {ks}");
    }

    #[test]
    fn substitution_identity_exact_vs_quadrature() {
        // ∫ f(Ψ(s)) dΨ(s) = ∫_{Ψ(0)}^{Ψ(1)} f(t) dt for nondecreasing continuous Ψ
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5 {
            let bounds = vec![0.0, 0.3, 0.55, 1.0];
            let dens: Vec<f64> = (0..3).map(|_| rng.random::<f64>() * 2.0).collect();
            let psi = PiecewiseLinear::integral_of_steps(&bounds, &dens);
            let total = psi.total();
            let f = StepFunction::new(
                vec![0.0, 0.4, 1.0],
                vec![rng.random::<f64>(), rng.random::<f64>()],
            )
            .unwrap();
            let scale = |t: f64| (t / total.max(1e-300)).clamp(0.0, 1.0);

            // exact: cut each psi cell at preimages of f's breakpoints (scaled)
            let f_levels: Vec<f64> = f.bounds().iter().map(|&b| b * total).collect();
            let mut exact = 0.0;
            for j in 0..dens.len() {
                let (lo, hi) = (bounds[j], bounds[j + 1]);
                let (wlo, whi) = (psi.eval(lo), psi.eval(hi));
                if whi <= wlo {
                    continue;
                }
                let mut cuts: Vec<f64> = f_levels
                    .iter()
                    .filter(|&&l| l > wlo && l < whi)
                    .map(|&l| lo + (l - wlo) * (hi - lo) / (whi - wlo))
                    .collect();
                cuts.push(hi);
                cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mut prev = lo;
                for c in cuts {
                    if c > prev {
                        let mid = 0.5 * (prev + c);
                        exact += f.eval(scale(psi.eval(mid))) * dens[j] * (c - prev);
                        prev = c;
                    }
                }
            }
            // right side: ∫_0^{total} f(t/total) dt computed exactly
            let mut right = 0.0;
            for w in f.bounds().windows(2) {
                right += f.eval(0.5 * (w[0] + w[1])) * (w[1] - w[0]) * total;
            }
            assert!((exact - right).abs() <= 1e-10, "{exact} vs {right}");

            let n = 2_000_000usize;
            let mut quad = 0.0;
            for i in 0..n {
                let s = (2 * i + 1) as f64 / (2 * n) as f64;
                let j = bounds.partition_point(|&b| b < s).clamp(1, dens.len()) - 1;
                quad += f.eval(scale(psi.eval(s))) * dens[j];
            }
            quad /= n as f64;
            assert!((exact - quad).abs() <= 1e-4);
        }
    }
}
