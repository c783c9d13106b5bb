//! Exact small-scale transport linear programming.
//!
//! A dense two-phase primal simplex with Bland's rule solves min/max cost
//! transport between two discrete marginals, optionally under per-row
//! martingale (`Σ_j P_ij (y_j - x_i) = 0`), supermartingale (`<= 0`) or
//! submartingale (`>= 0`) constraints. Infeasibility of the martingale mode
//! certifies failure of the convex order. This is the independent oracle
//! the coupling constructions are checked against, so it favors exactness
//! over speed and is capped at 64 atoms per marginal.

use crate::coupling::JointMeasure;
use crate::error::{Error, Result};
use crate::measures::{pow_abs, DiscreteMeasure};

pub const MAX_ATOMS: usize = 64;
pub const MAX_JOINT_ATOMS: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintMode {
    None,
    Martingale,
    Supermartingale,
    Submartingale,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub value: f64,
    /// Sparse plan entries `(i, j, mass)`.
    pub plan: Vec<(usize, usize, f64)>,
    pub status: LpStatus,
}

/// Cost specification: either `|x - y|^rho` or an explicit matrix.
#[derive(Debug, Clone)]
pub enum CostSpec {
    Rho(f64),
    Matrix(Vec<Vec<f64>>),
}

/// A transport LP over explicit row/column atoms.
#[derive(Debug, Clone)]
pub struct TransportLp {
    pub row_locations: Vec<f64>,
    pub row_weights: Vec<f64>,
    pub col_locations: Vec<f64>,
    pub col_weights: Vec<f64>,
    /// Row-major `n x m` cost matrix.
    pub cost: Vec<f64>,
    pub mode: ConstraintMode,
    pub sense: Sense,
}

impl TransportLp {
    pub fn from_measures(
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
        cost: &CostSpec,
        mode: ConstraintMode,
        sense: Sense,
    ) -> Result<Self> {
        let (n, m) = (mu.len(), nu.len());
        if n > MAX_ATOMS || m > MAX_ATOMS {
            return Err(Error::SizeLimit {
                size: n.max(m),
                limit: MAX_ATOMS,
            });
        }
        let row_locations: Vec<f64> = mu.atoms().map(|(x, _)| x).collect();
        let col_locations: Vec<f64> = nu.atoms().map(|(x, _)| x).collect();
        let cost = match cost {
            CostSpec::Rho(rho) => {
                if rho.is_nan() || *rho < 0.0 {
                    return Err(Error::InvalidRho { rho: *rho });
                }
                let mut c = Vec::with_capacity(n * m);
                for &x in &row_locations {
                    for &y in &col_locations {
                        c.push(pow_abs(x - y, *rho));
                    }
                }
                c
            }
            CostSpec::Matrix(rows) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != m) {
                    return Err(Error::SupportViolation {
                        context: "cost matrix shape must match the marginals",
                    });
                }
                rows.iter().flatten().copied().collect()
            }
        };
        Ok(Self {
            row_locations,
            row_weights: mu.atoms().map(|(_, w)| w).collect(),
            col_locations,
            col_weights: nu.atoms().map(|(_, w)| w).collect(),
            cost,
            mode,
            sense,
        })
    }

    pub fn solve(&self) -> Result<LpSolution> {
        let (n, m) = (self.row_weights.len(), self.col_weights.len());
        let nm = n * m;
        let n_slack = match self.mode {
            ConstraintMode::Supermartingale | ConstraintMode::Submartingale => n,
            _ => 0,
        };
        let n_drift_rows = if self.mode == ConstraintMode::None { 0 } else { n };
        let rows = n + m + n_drift_rows;
        let cols = nm + n_slack;

        // constraint matrix in dense row-major form, rhs >= 0 throughout
        let mut a = vec![0.0f64; rows * cols];
        let mut b = vec![0.0f64; rows];
        for i in 0..n {
            for j in 0..m {
                a[i * cols + i * m + j] = 1.0;
            }
            b[i] = self.row_weights[i];
        }
        for j in 0..m {
            for i in 0..n {
                a[(n + j) * cols + i * m + j] = 1.0;
            }
            b[n + j] = self.col_weights[j];
        }
        if self.mode != ConstraintMode::None {
            let max_abs = self
                .row_locations
                .iter()
                .chain(&self.col_locations)
                .fold(0.0f64, |acc, v| acc.max(v.abs()));
            let scale = 1.0 / (1.0 + max_abs);
            for i in 0..n {
                let r = n + m + i;
                for j in 0..m {
                    a[r * cols + i * m + j] =
                        (self.col_locations[j] - self.row_locations[i]) * scale;
                }
                match self.mode {
                    // Σ P (y - x) + s = 0
                    ConstraintMode::Supermartingale => a[r * cols + nm + i] = 1.0,
                    // Σ P (y - x) - s = 0
                    ConstraintMode::Submartingale => a[r * cols + nm + i] = -1.0,
                    _ => {}
                }
            }
        }

        let mut obj: Vec<f64> = vec![0.0; cols];
        let flip = if self.sense == Sense::Max { -1.0 } else { 1.0 };
        for (o, c) in obj.iter_mut().zip(&self.cost) {
            *o = flip * c;
        }

        // hybrid pivoting first; if the basic solution drifts out of the
        // polytope (tiny-pivot corruption), retry with pure Bland steps
        for bland_only in [false, true] {
            let mut tableau = Tableau::new(a.clone(), b.clone(), rows, cols, bland_only);
            match tableau.two_phase(&obj)? {
                LpStatus::Infeasible => {
                    return Ok(LpSolution {
                        value: f64::NAN,
                        plan: Vec::new(),
                        status: LpStatus::Infeasible,
                    })
                }
                LpStatus::Unbounded => {
                    return Ok(LpSolution {
                        value: f64::NAN,
                        plan: Vec::new(),
                        status: LpStatus::Unbounded,
                    })
                }
                LpStatus::Optimal => {
                    let x = tableau.primal_solution();
                    if self.residual(&x) > FEAS_EPS {
                        continue;
                    }
                    let mut value = 0.0;
                    let mut plan = Vec::new();
                    for i in 0..n {
                        for j in 0..m {
                            let v = x[i * m + j];
                            if v > 1e-12 {
                                plan.push((i, j, v));
                                value += self.cost[i * m + j] * v;
                            }
                        }
                    }
                    return Ok(LpSolution {
                        value,
                        plan,
                        status: LpStatus::Optimal,
                    });
                }
            }
        }
        Err(Error::NumericalFailure {
            context: "simplex solution violates the constraints",
        })
    }

    /// Feasibility residual of a raw variable vector.
    fn residual(&self, x: &[f64]) -> f64 {
        let (n, m) = (self.row_weights.len(), self.col_weights.len());
        let mut resid: f64 = 0.0;
        for i in 0..n {
            let s: f64 = (0..m).map(|j| x[i * m + j]).sum();
            resid = resid.max((s - self.row_weights[i]).abs());
        }
        for j in 0..m {
            let s: f64 = (0..n).map(|i| x[i * m + j]).sum();
            resid = resid.max((s - self.col_weights[j]).abs());
        }
        if self.mode != ConstraintMode::None {
            let max_abs = self
                .row_locations
                .iter()
                .chain(&self.col_locations)
                .fold(0.0f64, |acc, v| acc.max(v.abs()));
            for i in 0..n {
                let drift: f64 = (0..m)
                    .map(|j| x[i * m + j] * (self.col_locations[j] - self.row_locations[i]))
                    .sum::<f64>()
                    / (1.0 + max_abs);
                let v = match self.mode {
                    ConstraintMode::Martingale => drift.abs(),
                    ConstraintMode::Supermartingale => drift.max(0.0),
                    ConstraintMode::Submartingale => (-drift).max(0.0),
                    ConstraintMode::None => 0.0,
                };
                resid = resid.max(v);
            }
        }
        resid
    }
}

/// Coefficients below this never become pivots: dividing a row by noise
/// amplifies it enough to corrupt the rest of the tableau.
const PIVOT_EPS: f64 = 1e-9;
const FEAS_EPS: f64 = 1e-9;
const MAX_ITER: usize = 1_000_000;

/// Dense simplex tableau over the structural columns plus one artificial
/// variable per row.
struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows x (cols + rows + 1)` matrix: structural, artificial, rhs.
    t: Vec<f64>,
    basis: Vec<usize>,
    bland_only: bool,
    /// Pivot-row copy reused across eliminations.
    scratch: Vec<f64>,
}

impl Tableau {
    fn new(a: Vec<f64>, b: Vec<f64>, rows: usize, cols: usize, bland_only: bool) -> Self {
        let width = cols + rows + 1;
        let mut t = vec![0.0f64; rows * width];
        for r in 0..rows {
            for c in 0..cols {
                t[r * width + c] = a[r * cols + c];
            }
            t[r * width + cols + r] = 1.0;
            t[r * width + width - 1] = b[r];
        }
        let basis = (0..rows).map(|r| cols + r).collect();
        Self {
            rows,
            cols,
            t,
            basis,
            bland_only,
            scratch: Vec::with_capacity(width),
        }
    }

    fn width(&self) -> usize {
        self.cols + self.rows + 1
    }

    /// Runs phase one (artificial elimination) then phase two on `obj`.
    fn two_phase(&mut self, obj: &[f64]) -> Result<LpStatus> {
        let width = self.width();
        // phase one: minimize the sum of artificials
        let mut z = vec![0.0f64; width];
        for r in 0..self.rows {
            for (zc, tc) in z.iter_mut().zip(&self.t[r * width..(r + 1) * width]) {
                *zc -= tc;
            }
        }
        for zc in &mut z[self.cols..self.cols + self.rows] {
            *zc += 1.0;
        }
        let mut iter = 0usize;
        self.pivot_until_optimal(&mut z, width, &mut iter, usize::MAX)?;
        let phase1 = -z[width - 1];
        if phase1 > FEAS_EPS {
            return Ok(LpStatus::Infeasible);
        }
        // drive remaining artificials out of the basis where possible
        for r in 0..self.rows {
            if self.basis[r] >= self.cols {
                if let Some(c) = (0..self.cols)
                    .find(|&c| self.t[r * width + c].abs() > PIVOT_EPS)
                {
                    self.pivot(r, c);
                }
            }
        }

        // phase two: rebuild reduced costs for the real objective
        let mut z = vec![0.0f64; width];
        z[..self.cols].copy_from_slice(&obj[..self.cols]);
        for r in 0..self.rows {
            let bv = self.basis[r];
            let cb = if bv < self.cols { obj[bv] } else { 0.0 };
            if cb != 0.0 {
                for (zc, tc) in z.iter_mut().zip(&self.t[r * width..(r + 1) * width]) {
                    *zc -= cb * tc;
                }
            }
        }
        self.pivot_until_optimal(&mut z, self.cols, &mut iter, usize::MAX)
    }

    /// Dantzig pivoting (most negative reduced cost) with a switch to
    /// Bland's smallest-index rule after a run of degenerate pivots, which
    /// keeps termination guaranteed on the heavily degenerate transportation
    /// polytopes while staying far faster than Bland alone.
    fn pivot_until_optimal(
        &mut self,
        z: &mut [f64],
        allowed_cols: usize,
        iter: &mut usize,
        iter_budget: usize,
    ) -> Result<LpStatus> {
        const STALL_LIMIT: usize = 64;
        let width = self.width();
        let allowed = allowed_cols.min(width - 1);
        let mut stall = if self.bland_only { STALL_LIMIT } else { 0 };
        loop {
            *iter += 1;
            if *iter > MAX_ITER.min(iter_budget) {
                return Err(Error::NumericalFailure {
                    context: "simplex iteration cap exceeded",
                });
            }
            let bland = self.bland_only || stall >= STALL_LIMIT;
            let entering = if bland {
                z[..allowed].iter().position(|&v| v < -PIVOT_EPS)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for (c, &v) in z[..allowed].iter().enumerate() {
                    if v < -PIVOT_EPS && best.is_none_or(|(_, bz)| v < bz) {
                        best = Some((c, v));
                    }
                }
                best.map(|(c, _)| c)
            };
            let Some(e) = entering else {
                return Ok(LpStatus::Optimal);
            };
            // ratio test; ties go to the smallest basis index under Bland
            // (anti-cycling) and to the largest pivot element otherwise
            // (conditioning)
            let mut leave: Option<(usize, f64, f64)> = None;
            for r in 0..self.rows {
                let coeff = self.t[r * width + e];
                if coeff > PIVOT_EPS {
                    let ratio = self.t[r * width + width - 1] / coeff;
                    let better = match leave {
                        None => true,
                        Some((lr, lratio, lcoeff)) => {
                            let tie = 1e-12 * (1.0 + lratio.abs());
                            if ratio < lratio - tie {
                                true
                            } else if ratio <= lratio + tie {
                                if bland {
                                    self.basis[r] < self.basis[lr]
                                } else {
                                    coeff > lcoeff
                                }
                            } else {
                                false
                            }
                        }
                    };
                    if better {
                        leave = Some((r, ratio, coeff));
                    }
                }
            }
            let Some((lr, _, _)) = leave else {
                return Ok(LpStatus::Unbounded);
            };
            let before = z[width - 1];
            self.pivot_with_obj(lr, e, z);
            if z[width - 1] > before + 1e-15 {
                stall = 0;
            } else if !self.bland_only {
                stall += 1;
            }
        }
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let width = self.width();
        let pivot = self.t[row * width + col];
        debug_assert!(pivot.abs() > 0.0);
        let inv = 1.0 / pivot;
        for tc in &mut self.t[row * width..(row + 1) * width] {
            *tc *= inv;
        }
        self.scratch.clear();
        self.scratch
            .extend_from_slice(&self.t[row * width..(row + 1) * width]);
        for r in 0..self.rows {
            if r == row {
                continue;
            }
            let factor = self.t[r * width + col];
            if factor != 0.0 {
                for (tc, pc) in self.t[r * width..(r + 1) * width]
                    .iter_mut()
                    .zip(&self.scratch)
                {
                    *tc -= factor * pc;
                }
            }
        }
        self.basis[row] = col;
    }

    fn pivot_with_obj(&mut self, row: usize, col: usize, z: &mut [f64]) {
        self.pivot(row, col);
        let width = self.width();
        let factor = z[col];
        if factor != 0.0 {
            for (zc, pc) in z.iter_mut().zip(&self.t[row * width..(row + 1) * width]) {
                *zc -= factor * pc;
            }
        }
    }

    fn primal_solution(&self) -> Vec<f64> {
        let width = self.width();
        let mut x = vec![0.0f64; self.cols];
        for r in 0..self.rows {
            if self.basis[r] < self.cols {
                x[self.basis[r]] = self.t[r * width + width - 1];
            }
        }
        x
    }
}

/// Min/max transport cost between `mu` and `nu` with the given constraint
/// mode. In martingale mode, infeasibility certifies that the pair is not
/// in convex order.
pub fn min_cost_coupling(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    cost: &CostSpec,
    mode: ConstraintMode,
    sense: Sense,
) -> Result<LpSolution> {
    TransportLp::from_measures(mu, nu, cost, mode, sense)?.solve()
}

/// Optimal-transport distance with `L¹` ground cost between two measures on
/// the plane.
pub fn w1_r2(j1: &JointMeasure, j2: &JointMeasure) -> Result<f64> {
    let (n, m) = (j1.len(), j2.len());
    if n + m > MAX_JOINT_ATOMS {
        return Err(Error::SizeLimit {
            size: n + m,
            limit: MAX_JOINT_ATOMS,
        });
    }
    let a1: Vec<(f64, f64, f64)> = j1.atoms().collect();
    let a2: Vec<(f64, f64, f64)> = j2.atoms().collect();
    let cost: Vec<f64> = a1
        .iter()
        .flat_map(|p| {
            a2.iter()
                .map(move |q| (p.0 - q.0).abs() + (p.1 - q.1).abs())
        })
        .collect();
    let lp = TransportLp {
        row_locations: a1.iter().map(|p| p.0).collect(),
        row_weights: a1.iter().map(|p| p.2).collect(),
        col_locations: a2.iter().map(|p| p.0).collect(),
        col_weights: a2.iter().map(|p| p.2).collect(),
        cost,
        mode: ConstraintMode::None,
        sense: Sense::Min,
    };
    let sol = lp.solve()?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.value),
        _ => Err(Error::NumericalFailure {
            context: "plain transport LP must be feasible",
        }),
    }
}

/// Feasibility residual of an explicit plan against the LP constraints:
/// max over marginal and drift rows.
pub fn plan_residual(
    joint: &JointMeasure,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    mode: ConstraintMode,
) -> f64 {
    let mut resid: f64 = 0.0;
    let xm = joint.x_marginal();
    let ym = joint.y_marginal();
    resid = resid.max(super_gap(&xm, mu));
    resid = resid.max(super_gap(&ym, nu));
    if mode != ConstraintMode::None {
        for (x, mass, mean) in joint.conditional_means() {
            let drift = (mean - x) * mass;
            let v = match mode {
                ConstraintMode::Martingale => drift.abs(),
                ConstraintMode::Supermartingale => drift.max(0.0),
                ConstraintMode::Submartingale => (-drift).max(0.0),
                ConstraintMode::None => 0.0,
            };
            resid = resid.max(v / (1.0 + x.abs()));
        }
    }
    resid
}

fn super_gap(a: &DiscreteMeasure, b: &DiscreteMeasure) -> f64 {
    let mut gap: f64 = 0.0;
    let mut i = 0;
    let mut j = 0;
    while i < a.len() || j < b.len() {
        if j >= b.len() || (i < a.len() && a.location(i) < b.location(j)) {
            gap = gap.max(a.weight(i));
            i += 1;
        } else if i >= a.len() || b.location(j) < a.location(i) {
            gap = gap.max(b.weight(j));
            j += 1;
        } else {
            gap = gap.max((a.weight(i) - b.weight(j)).abs());
            i += 1;
            j += 1;
        }
    }
    gap
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{build_kernel, comonotone, lift_to_joint};
    use crate::qparam::q_it;

    fn m(pairs: &[(f64, f64)]) -> DiscreteMeasure {
        DiscreteMeasure::from_atoms(pairs, false).unwrap()
    }

    fn pair_a() -> (DiscreteMeasure, DiscreteMeasure) {
        (m(&[(-1.0, 0.5), (1.0, 0.5)]), m(&[(-2.0, 0.5), (2.0, 0.5)]))
    }

    #[test]
    fn martingale_lp_pair_a() {
        let (mu, nu) = pair_a();
        let sol = min_cost_coupling(
            &mu,
            &nu,
            &CostSpec::Rho(1.0),
            ConstraintMode::Martingale,
            Sense::Min,
        )
        .unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.value - 1.5).abs() <= 1e-12);
        // the plan is the unique martingale coupling
        let expected = [
            (0, 0, 0.375),
            (0, 1, 0.125),
            (1, 0, 0.125),
            (1, 1, 0.375),
        ];
        for &(i, j, w) in &expected {
            let got = sol
                .plan
                .iter()
                .find(|p| p.0 == i && p.1 == j)
                .map(|p| p.2)
                .unwrap_or(0.0);
            assert!((got - w).abs() <= 1e-12, "plan entry ({i},{j})");
        }
    }

    #[test]
    fn unconstrained_lp_matches_w1() {
        let (mu, nu) = pair_a();
        let sol = min_cost_coupling(
            &mu,
            &nu,
            &CostSpec::Rho(1.0),
            ConstraintMode::None,
            Sense::Min,
        )
        .unwrap();
        assert!((sol.value - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn reversed_order_is_infeasible() {
        let (mu, _) = pair_a();
        let sol = min_cost_coupling(
            &mu,
            &DiscreteMeasure::dirac(0.0),
            &CostSpec::Rho(1.0),
            ConstraintMode::Martingale,
            Sense::Min,
        )
        .unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn size_limit_enforced() {
        let pairs: Vec<(f64, f64)> = (0..65).map(|k| (k as f64, 1.0)).collect();
        let big = DiscreteMeasure::from_atoms(&pairs, true).unwrap();
        assert!(matches!(
            min_cost_coupling(
                &big,
                &big,
                &CostSpec::Rho(1.0),
                ConstraintMode::None,
                Sense::Min
            ),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn w1_r2_cases() {
        let (mu, nu) = pair_a();
        let it = lift_to_joint(&build_kernel(&q_it(&mu, &nu).unwrap(), &mu, &nu).unwrap(), &mu);
        assert_eq!(w1_r2(&it, &it).unwrap(), 0.0);

        // ITMC vs comonotone on pair A: supplies 1/8 at (-1,2) and (1,-2),
        // demands 1/8 at (-1,-2) and (1,2); the cheap matching moves each
        // supply across x at distance 2, so the optimum is 2*(1/8)*2 = 0.5
        let como = comonotone(&mu, &nu);
        let d = w1_r2(&it, &como).unwrap();
        assert!(d > 0.0);
        assert!((d - 0.5).abs() <= 1e-12, "got {d}");

        // translation by (t, t) costs 2|t|
        let shifted: Vec<(f64, f64, f64)> =
            it.atoms().map(|(x, y, w)| (x + 0.75, y + 0.75, w)).collect();
        let shifted = JointMeasure::from_atoms(&shifted).unwrap();
        assert!((w1_r2(&it, &shifted).unwrap() - 1.5).abs() <= 1e-12);
    }

    #[test]
    fn oracle_consistency_w1_and_feasibility() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for trial in 0..100 {
            let mu = crate::test_pairs::random_measure(&mut rng, 6);
            let nu = crate::test_pairs::random_measure(&mut rng, 6);
            let sol = min_cost_coupling(
                &mu,
                &nu,
                &CostSpec::Rho(1.0),
                ConstraintMode::None,
                Sense::Min,
            )
            .unwrap();
            let w1 = mu.wasserstein(&nu, 1.0).unwrap();
            assert!(
                (sol.value - w1).abs() <= 1e-9 * (1.0 + w1),
                "trial {trial}: {} vs {w1}",
                sol.value
            );
        }
    }

    #[test]
    fn martingale_feasibility_iff_cx() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(6);
        for trial in 0..60 {
            let (mu, nu) = if trial % 2 == 0 {
                crate::test_pairs::random_cx_pair(&mut rng, 8)
            } else {
                (
                    crate::test_pairs::random_measure(&mut rng, 5),
                    crate::test_pairs::random_measure(&mut rng, 5),
                )
            };
            let cx = mu.check_order(&nu, 1e-9).cx;
            let sol = min_cost_coupling(
                &mu,
                &nu,
                &CostSpec::Rho(1.0),
                ConstraintMode::Martingale,
                Sense::Min,
            )
            .unwrap();
            assert_eq!(
                sol.status == LpStatus::Optimal,
                cx,
                "feasibility must match the order check"
            );
        }
    }

    #[test]
    fn family_builds_are_feasible_and_bound_lp() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..40 {
            let (mu, nu) = crate::test_pairs::random_cx_pair(&mut rng, 8);
            let joint =
                lift_to_joint(&build_kernel(&q_it(&mu, &nu).unwrap(), &mu, &nu).unwrap(), &mu);
            assert!(plan_residual(&joint, &mu, &nu, ConstraintMode::Martingale) <= 1e-10);
            let lp = min_cost_coupling(
                &mu,
                &nu,
                &CostSpec::Rho(1.0),
                ConstraintMode::Martingale,
                Sense::Min,
            )
            .unwrap();
            let cost1 = joint.transport_cost(1.0);
            let w1 = mu.wasserstein(&nu, 1.0).unwrap();
            assert!(w1 <= lp.value + 1e-9);
            assert!(lp.value <= cost1 + 1e-9);
        }
    }

    #[test]
    fn super_and_sub_modes() {
        let mu = DiscreteMeasure::dirac(0.0);
        let nu = m(&[(-2.0, 0.5), (1.0, 0.5)]);
        // dcx pair: supermartingale feasible, martingale not
        let sol = min_cost_coupling(
            &mu,
            &nu,
            &CostSpec::Rho(1.0),
            ConstraintMode::Supermartingale,
            Sense::Min,
        )
        .unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        let sol_mart = min_cost_coupling(
            &mu,
            &nu,
            &CostSpec::Rho(1.0),
            ConstraintMode::Martingale,
            Sense::Min,
        )
        .unwrap();
        assert_eq!(sol_mart.status, LpStatus::Infeasible);
        // icx pair (the reflection of the dcx pair above)
        let nu_up = m(&[(-1.0, 0.5), (2.0, 0.5)]);
        let sol_sub = min_cost_coupling(
            &mu,
            &nu_up,
            &CostSpec::Rho(1.0),
            ConstraintMode::Submartingale,
            Sense::Min,
        )
        .unwrap();
        assert_eq!(sol_sub.status, LpStatus::Optimal);
    }

    #[test]
    fn max_sense_exceeds_min() {
        let (mu, nu) = pair_a();
        let lo = min_cost_coupling(
            &mu,
            &nu,
            &CostSpec::Rho(1.0),
            ConstraintMode::None,
            Sense::Min,
        )
        .unwrap();
        let hi = min_cost_coupling(
            &mu,
            &nu,
            &CostSpec::Rho(1.0),
            ConstraintMode::None,
            Sense::Max,
        )
        .unwrap();
        assert!(hi.value >= lo.value + 1.0);
        // max over plain couplings of |x - y| for pair A: anti-comonotone
        assert!((hi.value - 3.0).abs() <= 1e-12);
    }

    #[test]
    fn explicit_cost_matrix() {
        let (mu, nu) = pair_a();
        let cost = CostSpec::Matrix(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        let sol =
            min_cost_coupling(&mu, &nu, &cost, ConstraintMode::None, Sense::Min).unwrap();
        assert_eq!(sol.value, 0.0);
    }
}
