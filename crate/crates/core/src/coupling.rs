//! Materializing Markov kernels on the quantile interval and lifting them
//! to joint couplings.
//!
//! A [`KernelCell`] is one interval of the refined partition together with
//! everything the kernel does there: the source point `x = F_mu^{-1}`, the
//! stay point `F_nu^{-1}`, and a list of jump targets with their
//! probabilities `p = (F_mu^{-1} - F_nu^{-1}) / (y - F_nu^{-1})`. Because
//! all quantile values are constant per cell, lifting to the joint measure
//! is an exact finite sum: each μ-atom integrates the kernel over its own
//! quantile interval, which the cells subdivide.
//!
//! The supermartingale variant truncates the martingale branch of the `U₊`
//! region at the level `u_d` where the positive quantile-difference mass
//! first exhausts the negative one; beyond it the kernel degenerates to the
//! comonotone assignment, producing a downward drift.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, DEFAULT_TOL};
use crate::measures::{merged_cells, pow_abs, DiscreteMeasure};
pub use crate::quantile::CellTag;
use crate::quantile::{gen_inverse, partition_grid, psis_from_grid, ComposedMap, QuantileGrid};
use crate::qparam::{fingerprint, Body, QParam};

/// One cell of the materialized kernel.
#[derive(Debug, Clone)]
pub struct KernelCell {
    pub lo: f64,
    pub hi: f64,
    /// `F_mu^{-1}` on the cell.
    pub x: f64,
    /// `F_nu^{-1}` on the cell — the stay point.
    pub stay_y: f64,
    /// Jump targets `(y, p)`; the stay weight is `1 - Σ p`.
    pub targets: Vec<(f64, f64)>,
    pub tag: CellTag,
}

impl KernelCell {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn stay_weight(&self) -> f64 {
        1.0 - self.targets.iter().map(|t| t.1).sum::<f64>()
    }

    /// Conditional mean of the kernel on the cell.
    pub fn conditional_mean(&self) -> f64 {
        self.stay_weight() * self.stay_y
            + self.targets.iter().map(|&(y, p)| y * p).sum::<f64>()
    }
}

fn delta_cell(lo: f64, hi: f64, x: f64, y: f64, tag: CellTag) -> KernelCell {
    KernelCell {
        lo,
        hi,
        x,
        stay_y: y,
        targets: Vec::new(),
        tag,
    }
}

/// Builds the two-point branch cell for a deterministic map: jump to the
/// ν-quantile value at `map(u)`, stay at `F_nu^{-1}(u)`.
fn map_branch_cell(
    grid: &QuantileGrid,
    lo: f64,
    hi: f64,
    x: f64,
    y: f64,
    tag: CellTag,
    map: &ComposedMap,
) -> Result<KernelCell> {
    let mid = if 0.5 * (lo + hi) > lo {
        0.5 * (lo + hi)
    } else {
        hi
    };
    let v = map.eval(mid);
    let y_t = grid.nu_q[grid.cell_of(v)];
    let ok = match tag {
        CellTag::Plus => y_t > x,
        CellTag::Minus => y_t < x,
        _ => unreachable!("map branches only fire on signed cells"),
    };
    if !ok {
        return Err(Error::KernelBranchViolation {
            lo,
            hi,
            x,
            target: y_t,
        });
    }
    let p = (x - y) / (y_t - y);
    debug_assert!((0.0..=1.0 + 1e-12).contains(&p));
    Ok(KernelCell {
        lo,
        hi,
        x,
        stay_y: y,
        targets: vec![(y_t, p.min(1.0))],
        tag,
    })
}

/// Materializes the kernel of a parameter on the refined partition.
pub fn build_kernel(
    q: &QParam,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<Vec<KernelCell>> {
    if q.fingerprint() != fingerprint(mu, nu) {
        return Err(Error::FingerprintMismatch);
    }
    let grid = QuantileGrid::new(mu, nu);
    build_kernel_inner(q, &grid)
}

fn build_kernel_inner(q: &QParam, grid: &QuantileGrid) -> Result<Vec<KernelCell>> {
    match q.body() {
        Body::Map { up, down, .. } => {
            let part = partition_grid(grid, &[up, down], &[]);
            let mut cells = Vec::with_capacity(part.cells.len());
            for c in &part.cells {
                let cell = match c.tag {
                    CellTag::Zero => delta_cell(c.lo, c.hi, c.mu_q, c.nu_q, c.tag),
                    CellTag::Plus => {
                        map_branch_cell(grid, c.lo, c.hi, c.mu_q, c.nu_q, c.tag, up)?
                    }
                    CellTag::Minus => {
                        map_branch_cell(grid, c.lo, c.hi, c.mu_q, c.nu_q, c.tag, down)?
                    }
                    CellTag::Tail => unreachable!("tail cells only arise in drift builds"),
                };
                cells.push(cell);
            }
            Ok(cells)
        }
        Body::Product {
            up_blocks,
            down_blocks,
        } => {
            let (plus, _) = psis_from_grid(grid);
            let gamma = plus.total();
            let part = partition_grid(grid, &[], &[]);
            let mut cells = Vec::with_capacity(part.cells.len());
            for c in &part.cells {
                let blocks = match c.tag {
                    CellTag::Zero => {
                        cells.push(delta_cell(c.lo, c.hi, c.mu_q, c.nu_q, c.tag));
                        continue;
                    }
                    CellTag::Plus => down_blocks,
                    CellTag::Minus => up_blocks,
                    CellTag::Tail => unreachable!("tail cells only arise in drift builds"),
                };
                let (x, y) = (c.mu_q, c.nu_q);
                let mut targets = Vec::with_capacity(blocks.len());
                for b in blocks {
                    let ok = match c.tag {
                        CellTag::Plus => b.y > x,
                        _ => b.y < x,
                    };
                    if !ok {
                        return Err(Error::KernelBranchViolation {
                            lo: c.lo,
                            hi: c.hi,
                            x,
                            target: b.y,
                        });
                    }
                    targets.push((b.y, (x - y) / (b.y - y) * b.mass / gamma));
                }
                cells.push(KernelCell {
                    lo: c.lo,
                    hi: c.hi,
                    x,
                    stay_y: y,
                    targets,
                    tag: c.tag,
                });
            }
            Ok(cells)
        }
        Body::Mix {
            lambda,
            left,
            right,
        } => {
            let a = build_kernel_inner(left, grid)?;
            let b = build_kernel_inner(right, grid)?;
            Ok(mix_kernels(*lambda, &a, &b))
        }
    }
}

/// Common refinement of two kernels over the same grid, with targets scaled
/// by `lambda` and `1 - lambda`. Lifting the result equals the same mixture
/// of the two lifted joints.
fn mix_kernels(lambda: f64, a: &[KernelCell], b: &[KernelCell]) -> Vec<KernelCell> {
    let mut bounds: Vec<f64> = a
        .iter()
        .chain(b.iter())
        .flat_map(|c| [c.lo, c.hi])
        .collect();
    bounds.sort_by(|p, q| p.partial_cmp(q).expect("finite bounds"));
    bounds.dedup();
    let locate = |cells: &[KernelCell], mid: f64| -> usize {
        cells.partition_point(|c| c.hi < mid).min(cells.len() - 1)
    };
    let mut out = Vec::with_capacity(bounds.len());
    for w in bounds.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let mid = if 0.5 * (lo + hi) > lo { 0.5 * (lo + hi) } else { hi };
        let ca = &a[locate(a, mid)];
        let cb = &b[locate(b, mid)];
        debug_assert_eq!(ca.x, cb.x);
        debug_assert_eq!(ca.stay_y, cb.stay_y);
        let mut targets: Vec<(f64, f64)> = Vec::with_capacity(ca.targets.len() + cb.targets.len());
        for &(y, p) in &ca.targets {
            targets.push((y, lambda * p));
        }
        for &(y, p) in &cb.targets {
            match targets.iter_mut().find(|t| t.0 == y) {
                Some(t) => t.1 += (1.0 - lambda) * p,
                None => targets.push((y, (1.0 - lambda) * p)),
            }
        }
        targets.retain(|t| t.1 > 0.0);
        out.push(KernelCell {
            lo,
            hi,
            x: ca.x,
            stay_y: ca.stay_y,
            targets,
            tag: ca.tag,
        });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct JointAtom {
    x: f64,
    y: f64,
    w: f64,
}

#[derive(Serialize, Deserialize)]
struct JointJson {
    atoms: Vec<JointAtom>,
}

/// A finitely supported measure on the plane, atoms sorted by `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointMeasure {
    atoms: Vec<JointAtom>,
}

impl JointMeasure {
    pub fn from_atoms(raw: &[(f64, f64, f64)]) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::EmptyInput);
        }
        let mut atoms: Vec<JointAtom> = raw
            .iter()
            .filter(|t| t.2 != 0.0)
            .map(|&(x, y, w)| JointAtom { x, y, w })
            .collect();
        for a in &atoms {
            if !a.w.is_finite() || a.w <= 0.0 || !a.x.is_finite() || !a.y.is_finite() {
                return Err(Error::NonPositiveWeight {
                    location: a.x,
                    weight: a.w,
                });
            }
        }
        atoms.sort_by(|a, b| {
            (a.x, a.y)
                .partial_cmp(&(b.x, b.y))
                .expect("finite joint atoms")
        });
        let mut merged: Vec<JointAtom> = Vec::with_capacity(atoms.len());
        for a in atoms {
            match merged.last_mut() {
                Some(m) if m.x == a.x && m.y == a.y => m.w += a.w,
                _ => merged.push(a),
            }
        }
        // floating-point dust control: drop near-zero atoms, renormalize
        let before: f64 = merged.iter().map(|a| a.w).sum();
        merged.retain(|a| a.w > 1e-15);
        if merged.is_empty() {
            return Err(Error::EmptyInput);
        }
        let after: f64 = merged.iter().map(|a| a.w).sum();
        debug_assert!((before - after).abs() <= 1e-12 * before.max(1.0));
        for a in &mut merged {
            a.w *= before / after;
        }
        Ok(Self { atoms: merged })
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.atoms.iter().map(|a| (a.x, a.y, a.w))
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.w).sum()
    }

    pub fn x_marginal(&self) -> DiscreteMeasure {
        let pairs: Vec<(f64, f64)> = self.atoms.iter().map(|a| (a.x, a.w)).collect();
        DiscreteMeasure::from_atoms(&pairs, false).expect("marginal of a joint measure")
    }

    pub fn y_marginal(&self) -> DiscreteMeasure {
        let pairs: Vec<(f64, f64)> = self.atoms.iter().map(|a| (a.y, a.w)).collect();
        DiscreteMeasure::from_atoms(&pairs, false).expect("marginal of a joint measure")
    }

    /// `∫ |x - y|^rho dM`.
    pub fn transport_cost(&self, rho: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.w * pow_abs(a.x - a.y, rho))
            .sum()
    }

    /// Image under `(x, y) ↦ (-x, -y)`.
    pub fn reflect(&self) -> Self {
        let raw: Vec<(f64, f64, f64)> = self.atoms.iter().map(|a| (-a.x, -a.y, a.w)).collect();
        Self::from_atoms(&raw).expect("reflection preserves validity")
    }

    /// Conditional means per distinct `x`, as `(x, mass, mean)` triples.
    pub fn conditional_means(&self) -> Vec<(f64, f64, f64)> {
        let mut out: Vec<(f64, f64, f64)> = Vec::new();
        for a in &self.atoms {
            match out.last_mut() {
                Some(m) if m.0 == a.x => {
                    m.1 += a.w;
                    m.2 += a.w * a.y;
                }
                _ => out.push((a.x, a.w, a.w * a.y)),
            }
        }
        for m in &mut out {
            m.2 /= m.1;
        }
        out
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(&JointJson {
            atoms: self.atoms.clone(),
        })
        .expect("joint serialization")
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let doc: JointJson = serde_json::from_str(s).map_err(|_| Error::SupportViolation {
            context: "malformed joint JSON",
        })?;
        let raw: Vec<(f64, f64, f64)> = doc.atoms.iter().map(|a| (a.x, a.y, a.w)).collect();
        Self::from_atoms(&raw)
    }

    pub fn to_csv_string(&self) -> String {
        let mut s = String::from("x,y,w\n");
        for a in &self.atoms {
            s.push_str(&format!("{},{},{}\n", a.x, a.y, a.w));
        }
        s
    }
}

/// Integrates a kernel against `mu`: every cell contributes its length
/// times each branch weight to the atom `(x, y)`.
pub fn lift_to_joint(cells: &[KernelCell], mu: &DiscreteMeasure) -> JointMeasure {
    let mut raw: Vec<(f64, f64, f64)> = Vec::with_capacity(2 * cells.len());
    for c in cells {
        let len = c.len();
        let stay = c.stay_weight();
        if stay > 0.0 {
            raw.push((c.x, c.stay_y, len * stay));
        }
        for &(y, p) in &c.targets {
            if p > 0.0 {
                raw.push((c.x, y, len * p));
            }
        }
    }
    let joint = JointMeasure::from_atoms(&raw).expect("kernel cells cover (0,1)");
    debug_assert_eq!(joint.x_marginal().len(), mu.len());
    joint
}

/// The law of `(F_mu^{-1}(U), F_nu^{-1}(U))` as an exact joint measure.
pub fn comonotone(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> JointMeasure {
    let mut raw = Vec::new();
    merged_cells(mu, nu, |len, x, y| raw.push((x, y, len)));
    JointMeasure::from_atoms(&raw).expect("merged grid covers (0,1)")
}

/// Inverse transform supermartingale coupling for `mu <=_dcx nu`: the
/// martingale branch runs on `U₊ ∩ (0, u_d)` and on `U₋`; beyond `u_d` the
/// kernel follows the comonotone assignment, whose value lies strictly
/// below `x` there.
pub fn build_supermartingale(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<JointMeasure> {
    let report = mu.check_order(nu, DEFAULT_TOL);
    if !report.dcx {
        return Err(Error::OrderViolation {
            context: "supermartingale coupling needs mu <=_dcx nu",
        });
    }
    let grid = QuantileGrid::new(mu, nu);
    let (plus, minus) = psis_from_grid(&grid);
    if minus.total() == 0.0 {
        // F_mu^{-1} >= F_nu^{-1} everywhere: the comonotone coupling already
        // drifts downward
        return Ok(comonotone(mu, nu));
    }
    let u_d = crate::quantile::truncation_level(mu, nu, &plus, &minus);
    let phi = ComposedMap::new(plus.clone(), gen_inverse(&minus));
    let phi_tilde = ComposedMap::new(minus, gen_inverse(&plus));
    let part = partition_grid(&grid, &[&phi, &phi_tilde], &[u_d]);
    let mut cells = Vec::with_capacity(part.cells.len());
    for c in &part.cells {
        let cell = match c.tag {
            CellTag::Zero => delta_cell(c.lo, c.hi, c.mu_q, c.nu_q, c.tag),
            CellTag::Plus if c.hi <= u_d => {
                map_branch_cell(&grid, c.lo, c.hi, c.mu_q, c.nu_q, c.tag, &phi)?
            }
            CellTag::Plus => delta_cell(c.lo, c.hi, c.mu_q, c.nu_q, CellTag::Tail),
            CellTag::Minus => {
                map_branch_cell(&grid, c.lo, c.hi, c.mu_q, c.nu_q, c.tag, &phi_tilde)?
            }
            CellTag::Tail => unreachable!("tags come from the sign partition"),
        };
        cells.push(cell);
    }
    Ok(lift_to_joint(&cells, mu))
}

/// Submartingale coupling for `mu <=_icx nu`, by reflection of the
/// supermartingale construction.
pub fn build_submartingale(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<JointMeasure> {
    let report = mu.check_order(nu, DEFAULT_TOL);
    if !report.icx {
        return Err(Error::OrderViolation {
            context: "submartingale coupling needs mu <=_icx nu",
        });
    }
    Ok(build_supermartingale(&mu.reflect(), &nu.reflect())?.reflect())
}

/// Draws `n` i.i.d. pairs from the coupling: `U` uniform picks the cell and
/// `x = F_mu^{-1}(U)`; an independent uniform `V` picks the branch. The
/// generator is ChaCha8 seeded with `seed`, so output is reproducible
/// byte-for-byte.
pub fn sample(cells: &[KernelCell], mu: &DiscreteMeasure, n: usize, seed: u64) -> Vec<(f64, f64)> {
    debug_assert!(!cells.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut u: f64 = rng.random();
        while u <= 0.0 {
            u = rng.random();
        }
        let idx = cells.partition_point(|c| c.hi < u).min(cells.len() - 1);
        let cell = &cells[idx];
        debug_assert_eq!(mu.quantile(u).ok(), Some(cell.x));
        let v: f64 = rng.random();
        let mut acc = 0.0;
        let mut y = cell.stay_y;
        for &(ty, p) in &cell.targets {
            acc += p;
            if v < acc {
                y = ty;
                break;
            }
        }
        out.push((cell.x, y));
    }
    out
}
