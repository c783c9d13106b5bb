//! Verification and metrics for built couplings.
//!
//! [`verify_coupling`] checks marginals atom-by-atom, classifies the drift
//! of the conditional means, and reports the `|x-y|` cost against `2 W₁`
//! together with the quadratic-cost identity (for martingale couplings the
//! quadratic cost equals the second-moment gap of the marginals, whatever
//! the coupling). [`c_rho`] evaluates the off-diagonal ρ-cost of a kernel
//! against the ν-quantile anchor — the functional the inverse transform
//! kernel extremizes. The remaining operations cover Monge-map optimality,
//! irreducible components, the comonotone uniqueness test, the parametric
//! left-curtain family, marginal-stability runs, and extremality tables.

use serde::Serialize;

use crate::coupling::{build_kernel, lift_to_joint, JointMeasure, KernelCell};
use crate::error::{Error, Result, DEFAULT_TOL};
use crate::lp::w1_r2;
use crate::measures::{pow_abs, DiscreteMeasure, Side};
use crate::qparam::{q_it, QParam};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftSign {
    Martingale,
    Super,
    Sub,
    None,
}

/// Outcome of [`verify_coupling`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CouplingReport {
    /// Worst weight gap between the x-marginal and `mu`, atom-by-atom.
    pub marginal_err_mu: f64,
    /// Worst weight gap between the y-marginal and `nu`, atom-by-atom.
    pub marginal_err_nu: f64,
    /// Max over μ-atoms of |conditional mean - x|.
    pub martingale_defect: f64,
    pub drift_sign: DriftSign,
    /// `∫ |x-y| dM`.
    pub cost1: f64,
    /// `W₁(mu, nu)`.
    pub w1: f64,
    /// `cost1 / w1`.
    pub ratio: f64,
    /// Whether `cost1 <= 2 w1` within tolerance.
    pub bound_2w1_holds: bool,
    /// Relative gap of `∫ |x-y|² dM` against the second-moment difference.
    pub cost2_identity_err: f64,
}

/// Worst atom-by-atom weight gap between a marginal and a reference
/// measure; locations missing on either side count with their full weight.
fn marginal_gap(marginal: &DiscreteMeasure, reference: &DiscreteMeasure) -> f64 {
    let mut gap: f64 = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    while i < marginal.len() || j < reference.len() {
        if j >= reference.len() {
            gap = gap.max(marginal.weight(i));
            i += 1;
        } else if i >= marginal.len() {
            gap = gap.max(reference.weight(j));
            j += 1;
        } else {
            let (xm, xr) = (marginal.location(i), reference.location(j));
            if xm == xr {
                gap = gap.max((marginal.weight(i) - reference.weight(j)).abs());
                i += 1;
                j += 1;
            } else if xm < xr {
                gap = gap.max(marginal.weight(i));
                i += 1;
            } else {
                gap = gap.max(reference.weight(j));
                j += 1;
            }
        }
    }
    gap
}

pub fn verify_coupling(
    joint: &JointMeasure,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    tol: f64,
) -> CouplingReport {
    let marginal_err_mu = marginal_gap(&joint.x_marginal(), mu);
    let marginal_err_nu = marginal_gap(&joint.y_marginal(), nu);

    let mut martingale_defect: f64 = 0.0;
    let mut above = false;
    let mut below = false;
    for (x, _, mean) in joint.conditional_means() {
        let defect = mean - x;
        martingale_defect = martingale_defect.max(defect.abs());
        let cell_tol = tol * (1.0 + x.abs());
        if defect > cell_tol {
            above = true;
        }
        if defect < -cell_tol {
            below = true;
        }
    }
    let drift_sign = match (above, below) {
        (false, false) => DriftSign::Martingale,
        (false, true) => DriftSign::Super,
        (true, false) => DriftSign::Sub,
        (true, true) => DriftSign::None,
    };

    let cost1 = joint.transport_cost(1.0);
    let w1 = mu.wasserstein(nu, 1.0).expect("rho = 1 is valid");
    let scale = 1.0 + mu.abs_moment(1.0) + nu.abs_moment(1.0);
    let ratio = if w1 > 0.0 {
        cost1 / w1
    } else if cost1 <= tol * scale {
        1.0
    } else {
        f64::INFINITY
    };
    let bound_2w1_holds = cost1 <= 2.0 * w1 + tol * scale;

    let moment_gap = nu.abs_moment(2.0) - mu.abs_moment(2.0);
    let cost2_identity_err =
        (joint.transport_cost(2.0) - moment_gap).abs() / (1.0 + moment_gap.abs());

    CouplingReport {
        marginal_err_mu,
        marginal_err_nu,
        martingale_defect,
        drift_sign,
        cost1,
        w1,
        ratio,
        bound_2w1_holds,
        cost2_identity_err,
    }
}

/// `∫ |x-y|^rho dM`.
pub fn cost(joint: &JointMeasure, rho: f64) -> f64 {
    joint.transport_cost(rho)
}

/// Off-diagonal ρ-cost of a kernel against the ν-quantile anchor:
/// `∫∫ |F_nu^{-1}(u) - y|^rho 1{y != F_nu^{-1}(u)} m(u, dy) du`.
pub fn c_rho(cells: &[KernelCell], rho: f64) -> f64 {
    let mut acc = 0.0;
    for c in cells {
        let len = c.len();
        for &(y, p) in &c.targets {
            if y != c.stay_y {
                acc += len * p * pow_abs(c.stay_y - y, rho);
            }
        }
    }
    acc
}

/// Monge-map optimality check: when `F_nu^{-1}` is constant on the jumps of
/// `F_mu`, the comonotone coupling is the map `T = F_nu^{-1} ∘ F_mu`, and
/// every parameter-built coupling attains `∫ |y - T(x)| dM = W₁`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MongeReport {
    pub applicable: bool,
    pub cost_vs_t: f64,
    pub equals_w1: bool,
}

pub fn monge_check(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    joint: &JointMeasure,
    tol: f64,
) -> MongeReport {
    // applicable iff no ν-breakpoint falls strictly inside a μ-atom interval
    let mu_cum = mu.cumulative();
    let applicable = nu.cumulative()[..nu.len() - 1]
        .iter()
        .all(|d| mu_cum.iter().any(|c| c == d));
    if !applicable {
        return MongeReport {
            applicable,
            cost_vs_t: f64::NAN,
            equals_w1: false,
        };
    }
    let mut cost_vs_t = 0.0;
    for (x, y, w) in joint.atoms() {
        let t = nu
            .quantile(mu.cdf(x, Side::Right))
            .expect("CDF values are valid quantile levels");
        cost_vs_t += w * (y - t).abs();
    }
    let w1 = mu.wasserstein(nu, 1.0).expect("rho = 1 is valid");
    let scale = 1.0 + mu.abs_moment(1.0) + nu.abs_moment(1.0);
    MongeReport {
        applicable,
        cost_vs_t,
        equals_w1: (cost_vs_t - w1).abs() <= tol * scale,
    }
}

/// One irreducible component of a pair in convex order.
#[derive(Debug, Clone)]
pub struct Component {
    pub t_low: f64,
    pub t_high: f64,
    pub mu_n: DiscreteMeasure,
    pub nu_n: DiscreteMeasure,
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub struct IrreducibleDecomposition {
    pub components: Vec<Component>,
}

/// Maximal intervals where the CDF potential of `mu` sits strictly below
/// that of `nu`, with the restricted measures of each component.
pub fn irreducible_components(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<IrreducibleDecomposition> {
    let report = mu.check_order(nu, DEFAULT_TOL);
    if !report.cx {
        return Err(Error::OrderViolation {
            context: "irreducible components need mu <=_cx nu",
        });
    }
    let mut xs: Vec<f64> = mu
        .atoms()
        .map(|(x, _)| x)
        .chain(nu.atoms().map(|(x, _)| x))
        .collect();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite support"));
    xs.dedup();
    // g(t) = ∫ (t - x)^+ dnu - ∫ (t - x)^+ dmu, nonnegative under cx order
    let potential = |m: &DiscreteMeasure, t: f64| -> f64 {
        m.atoms()
            .map(|(x, w)| w * (t - x).max(0.0))
            .sum::<f64>()
    };
    let scale = 1.0 + mu.abs_moment(1.0) + nu.abs_moment(1.0);
    let kappa = 1e-12 * scale;
    let g: Vec<f64> = xs
        .iter()
        .map(|&t| potential(nu, t) - potential(mu, t))
        .collect();

    let mut components = Vec::new();
    let mut i = 0;
    while i < xs.len() {
        if g[i] > kappa || i + 1 >= xs.len() || g[i + 1] <= kappa {
            i += 1;
            continue;
        }
        // g vanishes at xs[i] and is positive on the next stretch
        let start = i;
        let mut end = i + 1;
        while end < xs.len() && g[end] > kappa {
            end += 1;
        }
        debug_assert!(end < xs.len(), "potential gap must close by equal means");
        let (t_low, t_high) = (xs[start], xs[end]);
        let mass = mu.cdf(t_high, Side::Left) - mu.cdf(t_low, Side::Right);
        debug_assert!(mass > 0.0);
        let mu_pairs: Vec<(f64, f64)> = mu
            .atoms()
            .filter(|&(x, _)| x > t_low && x < t_high)
            .map(|(x, w)| (x, w / mass))
            .collect();
        let mut nu_pairs: Vec<(f64, f64)> = nu
            .atoms()
            .filter(|&(x, _)| x > t_low && x < t_high)
            .map(|(x, w)| (x, w / mass))
            .collect();
        let w_low = nu.cdf(t_low, Side::Right) - mu.cdf(t_low, Side::Right);
        if w_low > 0.0 {
            nu_pairs.push((t_low, w_low / mass));
        }
        let w_high = mu.cdf(t_high, Side::Left) - nu.cdf(t_high, Side::Left);
        if w_high > 0.0 {
            nu_pairs.push((t_high, w_high / mass));
        }
        components.push(Component {
            t_low,
            t_high,
            mu_n: DiscreteMeasure::from_atoms(&mu_pairs, true)?,
            nu_n: DiscreteMeasure::from_atoms(&nu_pairs, true)?,
            mass,
        });
        i = end;
    }
    Ok(IrreducibleDecomposition { components })
}

/// True iff the comonotone coupling is a martingale coupling: for every
/// μ-atom `x`, the ν-quantile average over `(F_mu(x-), F_mu(x)]` equals `x`.
pub fn comonotone_is_martingale(mu: &DiscreteMeasure, nu: &DiscreteMeasure, tol: f64) -> bool {
    let grid = crate::quantile::QuantileGrid::new(mu, nu);
    let mut sums = vec![0.0f64; mu.len()];
    let mu_cum = mu.cumulative();
    for j in 0..grid.cell_count() {
        let (lo, hi) = (grid.bounds[j], grid.bounds[j + 1]);
        let mid = 0.5 * (lo + hi);
        let i = mu_cum.partition_point(|&c| c < mid).min(mu.len() - 1);
        sums[i] += (hi - lo) * grid.nu_q[j];
    }
    (0..mu.len()).all(|i| {
        let x = mu.location(i);
        (sums[i] / mu.weight(i) - x).abs() <= tol * (1.0 + x.abs())
    })
}

/// The parametric left-curtain coupling for a positively supported `mu`:
/// each atom `x` goes up to `u x` with probability `q = (1+d)/(u+d)` and
/// down to `-d x` otherwise. Returns the joint together with its report
/// against the implied second marginal.
pub fn left_curtain_family(
    mu: &DiscreteMeasure,
    u: f64,
    d: f64,
) -> Result<(JointMeasure, CouplingReport)> {
    if u.is_nan() || d.is_nan() || u <= 1.0 || d <= 0.0 {
        return Err(Error::SupportViolation {
            context: "left-curtain family needs u > 1 and d > 0",
        });
    }
    if mu.atoms().any(|(x, _)| x <= 0.0) {
        return Err(Error::SupportViolation {
            context: "left-curtain family needs mu supported on (0, inf)",
        });
    }
    let q = (1.0 + d) / (u + d);
    let mut raw = Vec::with_capacity(2 * mu.len());
    for (x, w) in mu.atoms() {
        raw.push((x, u * x, q * w));
        raw.push((x, -d * x, (1.0 - q) * w));
    }
    let joint = JointMeasure::from_atoms(&raw)?;
    let nu = joint.y_marginal();
    let report = verify_coupling(&joint, mu, &nu, DEFAULT_TOL);
    Ok((joint, report))
}

/// One row of [`stability_experiment`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct StabilityRow {
    pub w1_mu: f64,
    pub w1_nu: f64,
    pub w1_joint: f64,
}

/// Reduces a joint measure to at most `max_atoms` atoms by barycentric
/// quantile binning, first along x then along y.
fn coarsen_joint(joint: &JointMeasure, max_atoms: usize) -> JointMeasure {
    if joint.len() <= max_atoms {
        return joint.clone();
    }
    let kx = (max_atoms as f64).sqrt().floor() as usize;
    let ky = max_atoms / kx;
    let atoms: Vec<(f64, f64, f64)> = joint.atoms().collect();
    let total: f64 = atoms.iter().map(|a| a.2).sum();
    // atoms are sorted by (x, y); split into kx mass bins along x
    let mut bins: Vec<Vec<(f64, f64, f64)>> = vec![Vec::new(); kx];
    let mut acc = 0.0;
    for a in atoms {
        let idx = ((acc / total * kx as f64) as usize).min(kx - 1);
        bins[idx].push(a);
        acc += a.2;
    }
    let mut raw = Vec::new();
    for bin in bins.iter_mut().filter(|b| !b.is_empty()) {
        bin.sort_by(|a, b| (a.1, a.0).partial_cmp(&(b.1, b.0)).expect("finite"));
        let bin_mass: f64 = bin.iter().map(|a| a.2).sum();
        let mut sub: Vec<(f64, f64, f64)> = vec![(0.0, 0.0, 0.0); ky];
        let mut seen = 0.0;
        for &(x, y, w) in bin.iter() {
            let idx = ((seen / bin_mass * ky as f64) as usize).min(ky - 1);
            sub[idx].0 += x * w;
            sub[idx].1 += y * w;
            sub[idx].2 += w;
            seen += w;
        }
        for (sx, sy, sw) in sub {
            if sw > 0.0 {
                raw.push((sx / sw, sy / sw, sw));
            }
        }
    }
    JointMeasure::from_atoms(&raw).expect("binning preserves mass")
}

/// Builds the inverse transform coupling for `(mu, nu)` and for every pair
/// in the schedule, and measures the `W₁` drift of marginals and joints
/// (the joint distance via the transport LP with `L¹` ground cost).
pub fn stability_experiment(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    schedule: &[(DiscreteMeasure, DiscreteMeasure)],
) -> Result<Vec<StabilityRow>> {
    let base = lift_to_joint(&build_kernel(&q_it(mu, nu)?, mu, nu)?, mu);
    let base_c = coarsen_joint(&base, 40);
    let mut rows = Vec::with_capacity(schedule.len());
    for (mu_n, nu_n) in schedule {
        let report = mu_n.check_order(nu_n, DEFAULT_TOL);
        if !(report.cx && report.strict) {
            return Err(Error::OrderViolation {
                context: "every schedule pair must be strictly cx ordered",
            });
        }
        let joint_n = lift_to_joint(&build_kernel(&q_it(mu_n, nu_n)?, mu_n, nu_n)?, mu_n);
        let joint_nc = coarsen_joint(&joint_n, 40);
        rows.push(StabilityRow {
            w1_mu: mu_n.wasserstein(mu, 1.0)?,
            w1_nu: nu_n.wasserstein(nu, 1.0)?,
            w1_joint: w1_r2(&joint_nc, &base_c)?,
        });
    }
    Ok(rows)
}

/// `C_ρ` values per parameter and exponent.
#[derive(Debug, Clone)]
pub struct CrhoTable {
    pub rhos: Vec<f64>,
    pub rows: Vec<CrhoRow>,
}

#[derive(Debug, Clone)]
pub struct CrhoRow {
    pub label: String,
    pub values: Vec<f64>,
}

impl CrhoTable {
    /// Index of the row minimizing `C_ρ` for the `k`-th exponent.
    pub fn argmin(&self, k: usize) -> usize {
        (0..self.rows.len())
            .min_by(|&a, &b| {
                self.rows[a].values[k]
                    .partial_cmp(&self.rows[b].values[k])
                    .expect("finite costs")
            })
            .expect("nonempty table")
    }

    pub fn argmax(&self, k: usize) -> usize {
        (0..self.rows.len())
            .max_by(|&a, &b| {
                self.rows[a].values[k]
                    .partial_cmp(&self.rows[b].values[k])
                    .expect("finite costs")
            })
            .expect("nonempty table")
    }
}

pub fn crho_extremality(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    qs: &[QParam],
    rhos: &[f64],
) -> Result<CrhoTable> {
    let mut rows = Vec::with_capacity(qs.len());
    for q in qs {
        let cells = build_kernel(q, mu, nu)?;
        rows.push(CrhoRow {
            label: q.kind().label().to_string(),
            values: rhos.iter().map(|&r| c_rho(&cells, r)).collect(),
        });
    }
    Ok(CrhoTable {
        rhos: rhos.to_vec(),
        rows,
    })
}
