//! Parameters on the unit square that induce martingale couplings.
//!
//! A [`QParam`] is a probability measure on `(0,1)^2` whose first marginal
//! is `dΨ₊/γ`, whose second marginal is `dΨ₋/γ`, and which lives above the
//! diagonal. The constructors cover the four families built here — the
//! inverse transform parameter (deterministic map `φ`), its nonincreasing
//! twin (through the flipped map `u ↦ 1 - Γ(u)`), the product parameter,
//! and the local window flip — plus convex mixtures, which stay in the set.
//!
//! Deterministic kinds are stored as symbolic composed maps; the product
//! kind stores the ν-constant blocks of both sign regions. [`validate_q`]
//! recomputes both marginals cell-exactly (no Monte Carlo), together with
//! the above-diagonal mass and the mass carried by the squares of the
//! irreducible components.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use crate::analysis::irreducible_components;
use crate::error::{Error, Result, DEFAULT_TOL};
use crate::measures::DiscreteMeasure;
use crate::quantile::{
    gen_inverse, partition_grid, psis_from_grid, CellTag, ComposedMap, QuantileGrid,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QKind {
    /// Deterministic map `v = φ(u)`.
    InverseTransform,
    /// Deterministic nonincreasing map `v = 1 - Γ(u)`.
    NonincreasingTwin,
    /// `Q₁ = (1/γ²) dΨ₊ ⊗ dΨ₋`.
    Product,
    /// Inverse transform with an affine flip on a small window.
    Zeta,
    Mixture,
}

impl QKind {
    pub fn label(&self) -> &'static str {
        match self {
            QKind::InverseTransform => "it",
            QKind::NonincreasingTwin => "nit",
            QKind::Product => "product",
            QKind::Zeta => "zeta",
            QKind::Mixture => "mix",
        }
    }
}

/// A maximal run of same-sign grid cells on which `F_nu^{-1}` is constant.
/// `hi` is kept to merge adjacent runs during construction.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Block {
    pub hi: f64,
    /// `F_nu^{-1}` on the block.
    pub y: f64,
    /// `dΨ₊` (plus blocks) or `dΨ₋` (minus blocks) mass of the block.
    pub mass: f64,
}

#[derive(Debug, Clone)]
pub(crate) enum Body {
    /// Deterministic kinds: `up` transports `U₊`, `down` transports `U₋`.
    Map {
        up: Box<ComposedMap>,
        down: Box<ComposedMap>,
        /// `(u0, eps)` for the zeta kind.
        window: Option<(f64, f64)>,
    },
    Product {
        up_blocks: Vec<Block>,
        down_blocks: Vec<Block>,
    },
    Mix {
        lambda: f64,
        left: Box<QParam>,
        right: Box<QParam>,
    },
}

/// A member of the parameter set, tied to the marginals it was built from.
#[derive(Debug, Clone)]
pub struct QParam {
    kind: QKind,
    fingerprint: u64,
    body: Body,
}

pub(crate) fn fingerprint(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> u64 {
    let mut h = DefaultHasher::new();
    for (x, w) in mu.atoms() {
        x.to_bits().hash(&mut h);
        w.to_bits().hash(&mut h);
    }
    0xffff_ffffu64.hash(&mut h);
    for (x, w) in nu.atoms() {
        x.to_bits().hash(&mut h);
        w.to_bits().hash(&mut h);
    }
    h.finish()
}

impl QParam {
    pub fn kind(&self) -> QKind {
        self.kind
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub(crate) fn body(&self) -> &Body {
        &self.body
    }

    /// Window parameters `(u0, eps)` of a zeta parameter.
    pub fn window(&self) -> Option<(f64, f64)> {
        match &self.body {
            Body::Map { window, .. } => *window,
            _ => None,
        }
    }

    /// Serializes kind, parameters and the marginal fingerprint.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("qparam serialization")
    }

    fn to_json_value(&self) -> serde_json::Value {
        use serde_json::json;
        let mut v = match &self.body {
            Body::Map {
                window: Some((u0, eps)),
                ..
            } => json!({"kind": self.kind.label(), "u0": u0, "eps": eps}),
            Body::Mix {
                lambda,
                left,
                right,
            } => json!({
                "kind": "mix",
                "lambda": lambda,
                "left": left.to_json_value(),
                "right": right.to_json_value(),
            }),
            _ => json!({"kind": self.kind.label()}),
        };
        v["fingerprint"] = serde_json::Value::String(format!("{:016x}", self.fingerprint));
        v
    }

    /// Rebuilds a parameter from its JSON form against the same marginals.
    pub fn from_json_str(s: &str, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(s).map_err(|_| Error::SupportViolation {
            context: "malformed qparam JSON",
        })?;
        let q = Self::from_json_value(&v, mu, nu)?;
        let stored = v
            .get("fingerprint")
            .and_then(|f| f.as_str())
            .and_then(|f| u64::from_str_radix(f, 16).ok());
        match stored {
            Some(fp) if fp == q.fingerprint => Ok(q),
            Some(_) => Err(Error::FingerprintMismatch),
            None => Ok(q),
        }
    }

    fn from_json_value(
        v: &serde_json::Value,
        mu: &DiscreteMeasure,
        nu: &DiscreteMeasure,
    ) -> Result<Self> {
        let kind = v.get("kind").and_then(|k| k.as_str()).unwrap_or("");
        match kind {
            "it" => q_it(mu, nu),
            "nit" => q_nit(mu, nu),
            "product" => q_product(mu, nu),
            "zeta" => {
                let u0 = v.get("u0").and_then(|x| x.as_f64());
                let eps = v.get("eps").and_then(|x| x.as_f64());
                match (u0, eps) {
                    (Some(u0), Some(eps)) => q_zeta_with_window(mu, nu, u0, eps),
                    _ => q_zeta(mu, nu),
                }
            }
            "mix" => {
                let lambda = v.get("lambda").and_then(|x| x.as_f64()).unwrap_or(0.5);
                let left = Self::from_json_value(
                    v.get("left").ok_or(Error::SupportViolation {
                        context: "mix without left parameter",
                    })?,
                    mu,
                    nu,
                )?;
                let right = Self::from_json_value(
                    v.get("right").ok_or(Error::SupportViolation {
                        context: "mix without right parameter",
                    })?,
                    mu,
                    nu,
                )?;
                q_mix(lambda, left, right)
            }
            other => Err(Error::UnknownDistribution {
                name: other.to_string(),
            }),
        }
    }
}

fn require_strict_cx(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
    let r = mu.check_order(nu, DEFAULT_TOL);
    if !r.strict {
        return Err(Error::IdenticalMeasures);
    }
    if !r.cx {
        return Err(Error::OrderViolation {
            context: "the parameter set is empty unless mu <_cx nu",
        });
    }
    Ok(())
}

/// The inverse transform parameter: `π₊(u, dv) = δ_{φ(u)}`.
pub fn q_it(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<QParam> {
    require_strict_cx(mu, nu)?;
    let grid = QuantileGrid::new(mu, nu);
    let (plus, minus) = psis_from_grid(&grid);
    Ok(QParam {
        kind: QKind::InverseTransform,
        fingerprint: fingerprint(mu, nu),
        body: Body::Map {
            up: Box::new(ComposedMap::new(plus.clone(), gen_inverse(&minus))),
            down: Box::new(ComposedMap::new(minus, gen_inverse(&plus))),
            window: None,
        },
    })
}

/// The nonincreasing twin: `π₊(u, dv) = δ_{1 - Γ(u)}`, requiring the
/// quantile difference to change sign only once.
pub fn q_nit(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<QParam> {
    require_strict_cx(mu, nu)?;
    let grid = QuantileGrid::new(mu, nu);
    if !grid.single_sign_change() {
        return Err(Error::SingleSignChangeViolation);
    }
    let (plus, minus) = psis_from_grid(&grid);
    let gamma = plus.total();
    // 1 - Γ(u) = Ψ₋^{-1}(γ - Ψ₊(u)) and its mirror image.
    Ok(QParam {
        kind: QKind::NonincreasingTwin,
        fingerprint: fingerprint(mu, nu),
        body: Body::Map {
            up: Box::new(ComposedMap::with_flip(plus.clone(), 0.0, gamma, gen_inverse(&minus))),
            down: Box::new(ComposedMap::with_flip(minus, 0.0, gamma, gen_inverse(&plus))),
            window: None,
        },
    })
}

/// The product parameter `Q₁ = (1/γ²) dΨ₊ ⊗ dΨ₋`, valid under a single
/// sign change.
pub fn q_product(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<QParam> {
    require_strict_cx(mu, nu)?;
    let grid = QuantileGrid::new(mu, nu);
    if !grid.single_sign_change() {
        return Err(Error::SingleSignChangeViolation);
    }
    let up_blocks = sign_blocks(&grid, CellTag::Plus);
    let down_blocks = sign_blocks(&grid, CellTag::Minus);
    Ok(QParam {
        kind: QKind::Product,
        fingerprint: fingerprint(mu, nu),
        body: Body::Product {
            up_blocks,
            down_blocks,
        },
    })
}

fn sign_blocks(grid: &QuantileGrid, tag: CellTag) -> Vec<Block> {
    let mut blocks: Vec<Block> = Vec::new();
    for j in 0..grid.cell_count() {
        let (x, y) = (grid.mu_q[j], grid.nu_q[j]);
        let cell_tag = if x > y {
            CellTag::Plus
        } else if x < y {
            CellTag::Minus
        } else {
            CellTag::Zero
        };
        if cell_tag != tag {
            continue;
        }
        let (lo, hi) = (grid.bounds[j], grid.bounds[j + 1]);
        let mass = (hi - lo) * (x - y).abs();
        match blocks.last_mut() {
            Some(b) if b.hi == lo && b.y == y => {
                b.hi = hi;
                b.mass += mass;
            }
            _ => blocks.push(Block { hi, y, mass }),
        }
    }
    blocks
}

/// The local-inversion parameter: `φ` flipped affinely on the window
/// `(Ψ₊(u0 - ε), Ψ₊(u0)]`. The window is searched by scanning the maximal
/// `U₊` runs left to right, taking the run midpoint and a quarter run
/// length, and halving `ε` until the defining conditions hold. Runs rather
/// than single grid cells let the window straddle μ-atoms, which is what
/// makes the flip visible at the coupling level.
pub fn q_zeta(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<QParam> {
    require_strict_cx(mu, nu)?;
    let grid = QuantileGrid::new(mu, nu);
    let (plus, minus) = psis_from_grid(&grid);
    let phi = ComposedMap::new(plus.clone(), gen_inverse(&minus));
    let jump_levels = gen_inverse(&minus).jump_levels();

    // maximal runs of consecutive cells with a positive quantile difference
    let mut runs: Vec<(f64, f64)> = Vec::new();
    for j in 0..grid.cell_count() {
        if grid.mu_q[j] <= grid.nu_q[j] {
            continue;
        }
        let (lo, hi) = (grid.bounds[j], grid.bounds[j + 1]);
        match runs.last_mut() {
            Some(r) if r.1 == lo => r.1 = hi,
            _ => runs.push((lo, hi)),
        }
    }

    for (lo, hi) in runs {
        if plus.eval(hi) <= minus.eval(hi) {
            continue;
        }
        let u0 = 0.5 * (lo + hi);
        if phi.eval(u0) >= 1.0 {
            continue;
        }
        let mut eps = 0.25 * (hi - lo);
        for _ in 0..60 {
            let left = u0 - eps;
            let w_left = plus.eval(left);
            if phi.eval(left) > u0 && !jump_levels.contains(&w_left) {
                return q_zeta_with_window(mu, nu, u0, eps);
            }
            eps *= 0.5;
        }
    }
    Err(Error::NoValidWindow)
}

/// Zeta parameter with an explicit, already validated window.
pub fn q_zeta_with_window(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    u0: f64,
    eps: f64,
) -> Result<QParam> {
    require_strict_cx(mu, nu)?;
    if eps.is_nan() || u0.is_nan() || eps <= 0.0 || eps >= u0 || u0 >= 1.0 {
        return Err(Error::NoValidWindow);
    }
    let grid = QuantileGrid::new(mu, nu);
    let (plus, minus) = psis_from_grid(&grid);
    let (w_lo, w_hi) = (plus.eval(u0 - eps), plus.eval(u0));
    if w_lo.is_nan() || w_hi.is_nan() || w_lo >= w_hi {
        return Err(Error::NoValidWindow);
    }
    Ok(QParam {
        kind: QKind::Zeta,
        fingerprint: fingerprint(mu, nu),
        body: Body::Map {
            up: Box::new(ComposedMap::with_flip(plus.clone(), w_lo, w_hi, gen_inverse(&minus))),
            down: Box::new(ComposedMap::with_flip(minus, w_lo, w_hi, gen_inverse(&plus))),
            window: Some((u0, eps)),
        },
    })
}

/// Convex mixture `λ q1 + (1 - λ) q2` of parameters built against the same
/// marginals.
pub fn q_mix(lambda: f64, q1: QParam, q2: QParam) -> Result<QParam> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::OutOfRange { u: lambda });
    }
    if q1.fingerprint != q2.fingerprint {
        return Err(Error::FingerprintMismatch);
    }
    let fingerprint = q1.fingerprint;
    Ok(QParam {
        kind: QKind::Mixture,
        fingerprint,
        body: Body::Mix {
            lambda,
            left: Box::new(q1),
            right: Box::new(q2),
        },
    })
}

/// Marginal, diagonal and component-support checks for a parameter.
#[derive(Debug, Clone, Copy)]
pub struct QValidationReport {
    /// Worst CDF gap of the first marginal against `Ψ₊/γ`.
    pub marginal1_err: f64,
    /// Worst CDF gap of the second marginal against `Ψ₋/γ`.
    pub marginal2_err: f64,
    pub support_mass_above_diagonal: f64,
    /// Mass on the union of squared irreducible components.
    pub component_mass: f64,
}

impl QValidationReport {
    pub fn is_valid(&self, tol: f64) -> bool {
        self.marginal1_err <= tol
            && self.marginal2_err <= tol
            && self.support_mass_above_diagonal >= 1.0 - tol
            && self.component_mass >= 1.0 - tol
    }
}

/// Per-cell transport view of a parameter on the refined partition: each
/// `U₊` cell carries its `dΨ₊` mass and a list of `(v-interval, fraction)`
/// targets; mirrored for `U₋` cells (the reverse factorization).
struct CellTransport {
    lo: f64,
    hi: f64,
    /// `dΨ₊` mass (plus cells) or `dΨ₋` mass (minus cells) of the cell.
    mass: f64,
    /// Target intervals with the fraction of `mass` they receive. For
    /// deterministic kinds the single interval is the oriented affine image
    /// `(value at lo, value at hi)`, which may be decreasing.
    targets: Vec<(f64, f64, f64)>,
    tag: CellTag,
    deterministic: bool,
}

/// Flattens a parameter into weighted cell transports. Mixtures recurse
/// with scaled masses.
fn cell_transports(
    q: &QParam,
    grid: &QuantileGrid,
    gamma: f64,
    weight: f64,
    out: &mut Vec<CellTransport>,
) {
    match q.body() {
        Body::Map { up, down, .. } => {
            let part = partition_grid(grid, &[up, down], &[]);
            for cell in &part.cells {
                if cell.tag != CellTag::Plus && cell.tag != CellTag::Minus {
                    continue;
                }
                let map = if cell.tag == CellTag::Plus { up } else { down };
                let len = cell.len();
                let t1 = cell.lo + 0.25 * len;
                let t2 = cell.lo + 0.75 * len;
                let (m1, m2) = (map.eval(t1), map.eval(t2));
                let half = m2 - m1;
                // affine extrapolation to the cell endpoints
                let (v_lo, v_hi) = (m1 - 0.5 * half, m2 + 0.5 * half);
                let mass = len * (cell.mu_q - cell.nu_q).abs() / gamma * weight;
                out.push(CellTransport {
                    lo: cell.lo,
                    hi: cell.hi,
                    mass,
                    targets: vec![(v_lo, v_hi, 1.0)],
                    tag: cell.tag,
                    deterministic: true,
                });
            }
        }
        Body::Product { .. } => {
            // Targets are enumerated per opposite-sign grid cell rather than
            // per block: the dΨ∓ density can change inside a block, and the
            // pushforward is only uniform cell by cell.
            let part = partition_grid(grid, &[], &[]);
            let sign_cells = |want: CellTag| -> Vec<(f64, f64, f64)> {
                part.cells
                    .iter()
                    .filter(|c| c.tag == want)
                    .map(|c| (c.lo, c.hi, c.len() * (c.mu_q - c.nu_q).abs() / gamma))
                    .collect()
            };
            let plus_cells = sign_cells(CellTag::Plus);
            let minus_cells = sign_cells(CellTag::Minus);
            for cell in &part.cells {
                let opposite = match cell.tag {
                    CellTag::Plus => &minus_cells,
                    CellTag::Minus => &plus_cells,
                    _ => continue,
                };
                let len = cell.len();
                let mass = len * (cell.mu_q - cell.nu_q).abs() / gamma * weight;
                let targets = opposite.iter().map(|&(lo, hi, m)| (lo, hi, m)).collect();
                out.push(CellTransport {
                    lo: cell.lo,
                    hi: cell.hi,
                    mass,
                    targets,
                    tag: cell.tag,
                    deterministic: false,
                });
            }
        }
        Body::Mix {
            lambda,
            left,
            right,
        } => {
            cell_transports(left, grid, gamma, weight * lambda, out);
            cell_transports(right, grid, gamma, weight * (1.0 - lambda), out);
        }
    }
}

/// `P(U < V)` for independent uniforms on `(a, b)` and `(c, d)`.
fn prob_uniform_less(a: f64, b: f64, c: f64, d: f64) -> f64 {
    if b <= c {
        return 1.0;
    }
    if d <= a {
        return 0.0;
    }
    // integrate P(U < v) = clamp((v - a)/(b - a), 0, 1) over v ~ U(c, d)
    let mut pts = vec![c, d];
    if a > c && a < d {
        pts.push(a);
    }
    if b > c && b < d {
        pts.push(b);
    }
    pts.sort_by(|p, q| p.partial_cmp(q).expect("finite"));
    let mut acc = 0.0;
    for w in pts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        acc += ((mid - a) / (b - a)).clamp(0.0, 1.0) * (w[1] - w[0]);
    }
    acc / (d - c)
}

/// Exact marginal, diagonal and component checks against `(mu, nu)`.
pub fn validate_q(
    q: &QParam,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    _tol: f64,
) -> Result<QValidationReport> {
    if q.fingerprint() != fingerprint(mu, nu) {
        return Err(Error::FingerprintMismatch);
    }
    let grid = QuantileGrid::new(mu, nu);
    let (plus, minus) = psis_from_grid(&grid);
    let gamma = plus.total();
    let mut cells = Vec::new();
    cell_transports(q, &grid, gamma, 1.0, &mut cells);

    // First marginal: accumulated U₊ cell masses vs Ψ₊/γ, and mirrored.
    let mut eval_pts: Vec<f64> = grid.bounds.clone();
    for c in &cells {
        eval_pts.push(c.hi);
        for &(tlo, thi, _) in &c.targets {
            eval_pts.push(tlo);
            eval_pts.push(thi);
        }
    }
    eval_pts.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    eval_pts.dedup();

    // Forward factorization: U₊ cell masses give the first marginal, their
    // targets the second. The reverse factorization (U₋ cells) must
    // reproduce the same marginals on its own.
    let mut marginal1_err: f64 = 0.0;
    let mut marginal2_err: f64 = 0.0;
    for &p in &eval_pts {
        let mut fwd1 = 0.0;
        let mut fwd2 = 0.0;
        let mut rev1 = 0.0;
        let mut rev2 = 0.0;
        for c in &cells {
            let along = if c.hi <= p {
                1.0
            } else if c.lo >= p {
                0.0
            } else {
                (p - c.lo) / (c.hi - c.lo)
            };
            let mut pushed = 0.0;
            for &(ta, tb, frac) in &c.targets {
                let (tlo, thi) = (ta.min(tb), ta.max(tb));
                let part = if thi <= p {
                    1.0
                } else if tlo >= p {
                    0.0
                } else if thi > tlo {
                    (p - tlo) / (thi - tlo)
                } else {
                    1.0
                };
                pushed += c.mass * frac * part;
            }
            match c.tag {
                CellTag::Plus => {
                    fwd1 += c.mass * along;
                    fwd2 += pushed;
                }
                CellTag::Minus => {
                    rev2 += c.mass * along;
                    rev1 += pushed;
                }
                _ => {}
            }
        }
        let target1 = plus.eval(p) / gamma;
        let target2 = minus.eval(p) / gamma;
        marginal1_err = marginal1_err
            .max((fwd1 - target1).abs())
            .max((rev1 - target1).abs());
        marginal2_err = marginal2_err
            .max((fwd2 - target2).abs())
            .max((rev2 - target2).abs());
    }

    // Above-diagonal mass, counting only the forward (U₊) representation.
    let mut diag_mass = 0.0;
    let mut total_up = 0.0;
    for c in &cells {
        if c.tag != CellTag::Plus {
            continue;
        }
        total_up += c.mass;
        if c.deterministic {
            // v = map(u) affine on the cell: the above-diagonal fraction is
            // the positive part of the affine gap map(u) - u.
            let (ta, tb, _) = c.targets[0];
            let d_lo = ta - c.lo;
            let d_hi = tb - c.hi;
            let frac = if d_lo == 0.0 && d_hi == 0.0 {
                // map equals the identity on the cell: all mass sits on the
                // diagonal, none strictly above it
                0.0
            } else if d_lo >= 0.0 && d_hi >= 0.0 {
                1.0
            } else if d_lo <= 0.0 && d_hi <= 0.0 {
                0.0
            } else {
                d_lo.max(d_hi) / (d_lo - d_hi).abs()
            };
            diag_mass += c.mass * frac;
        } else {
            for &(tlo, thi, frac) in &c.targets {
                diag_mass += c.mass * frac * prob_uniform_less(c.lo, c.hi, tlo, thi);
            }
        }
    }
    let support_mass_above_diagonal = if total_up > 0.0 {
        diag_mass / total_up
    } else {
        1.0
    };

    // Mass on the union of squared irreducible components.
    let decomposition = irreducible_components(mu, nu)?;
    let comps: Vec<(f64, f64)> = decomposition
        .components
        .iter()
        .map(|c| {
            (
                mu.cdf(c.t_low, crate::measures::Side::Right),
                mu.cdf(c.t_high, crate::measures::Side::Left),
            )
        })
        .collect();
    let inside = |lo: f64, hi: f64| {
        let m = 0.5 * (lo + hi);
        comps.iter().any(|&(a, b)| m > a && m < b)
    };
    let mut comp_mass = 0.0;
    for c in &cells {
        if c.tag != CellTag::Plus {
            continue;
        }
        if !inside(c.lo, c.hi) {
            continue;
        }
        for &(tlo, thi, frac) in &c.targets {
            if inside(tlo, thi) {
                comp_mass += c.mass * frac;
            }
        }
    }
    let component_mass = if total_up > 0.0 {
        comp_mass / total_up
    } else {
        1.0
    };

    Ok(QValidationReport {
        marginal1_err,
        marginal2_err,
        support_mass_above_diagonal,
        component_mass,
    })
}

/// Lower bound on `∫ |map_1 - map_2| dΨ₊ / γ` between the forward maps of
/// two deterministic parameters; positive values certify `q1 != q2`. Both
/// maps are affine per partition cell, so quarter-point evaluation
/// integrates the difference exactly over each half cell (midpoints alone
/// would miss antisymmetric flips, whose fixed point is the cell center).
pub fn forward_map_gap(q1: &QParam, q2: &QParam, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> f64 {
    let (up1, up2) = match (q1.body(), q2.body()) {
        (Body::Map { up: a, .. }, Body::Map { up: b, .. }) => (a, b),
        _ => return 0.0,
    };
    let grid = QuantileGrid::new(mu, nu);
    let (plus, _) = psis_from_grid(&grid);
    let gamma = plus.total();
    let part = partition_grid(&grid, &[up1, up2], &[]);
    let mut acc = 0.0;
    for cell in &part.cells {
        if cell.tag != CellTag::Plus {
            continue;
        }
        let len = cell.len();
        let mass = len * (cell.mu_q - cell.nu_q) / gamma;
        for t in [cell.lo + 0.25 * len, cell.lo + 0.75 * len] {
            acc += (up1.eval(t) - up2.eval(t)).abs() * 0.5 * mass;
        }
    }
    acc
}
