//! Martingale couplings between one-dimensional probability measures in
//! convex order.
//!
//! The library builds couplings between two finitely supported measures
//! `mu <=_cx nu` from parameters living on the unit square: the inverse
//! transform coupling (a deterministic quantile-level map), its nonincreasing
//! twin, the product parameter, local window flips, and convex mixtures.
//! Every construction is carried out exactly on a common breakpoint grid of
//! the two quantile functions, so marginal and martingale identities hold to
//! floating-point accuracy rather than Monte-Carlo accuracy.
//!
//! Supporting machinery: discrete measures with CDF/quantile evaluation and
//! 1-D Wasserstein distances ([`measures`]), step-function and
//! piecewise-linear calculus with left-continuous generalized inverses
//! ([`quantile`]), coupling verification and cost functionals ([`analysis`]),
//! and a dense-simplex transport LP used as an independent oracle ([`lp`]).

pub mod analysis;
pub mod error;
pub mod lp;
pub mod measures;
pub mod qparam;
pub mod quantile;

mod coupling;

#[cfg(test)]
pub(crate) mod test_pairs;

pub use coupling::{
    build_kernel, build_submartingale, build_supermartingale, comonotone, lift_to_joint, sample,
    CellTag, JointMeasure, KernelCell,
};
pub use error::{Error, Result};
pub use measures::{DiscreteMeasure, OrderReport, Side};
pub use qparam::{q_it, q_mix, q_nit, q_product, q_zeta, QKind, QParam, QValidationReport};
