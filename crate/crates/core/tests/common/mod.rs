//! Shared helpers for the integration and acceptance suites.

use mcouple::DiscreteMeasure;
use rand::Rng;

pub fn m(pairs: &[(f64, f64)]) -> DiscreteMeasure {
    DiscreteMeasure::from_atoms(pairs, false).unwrap()
}

pub fn pair_a() -> (DiscreteMeasure, DiscreteMeasure) {
    (m(&[(-1.0, 0.5), (1.0, 0.5)]), m(&[(-2.0, 0.5), (2.0, 0.5)]))
}

pub fn pair_b() -> (DiscreteMeasure, DiscreteMeasure) {
    (
        m(&[(-1.0, 0.5), (1.0, 0.5)]),
        m(&[(-8.0, 0.125), (-6.0, 0.25), (4.0, 0.625)]),
    )
}

pub fn random_measure(rng: &mut impl Rng, max_atoms: usize) -> DiscreteMeasure {
    let n = rng.random_range(1..=max_atoms);
    let mut pairs = Vec::with_capacity(n);
    for _ in 0..n {
        let x = ((rng.random::<f64>() - 0.5) * 16.0 * 8.0).round() / 8.0;
        let w = (rng.random::<f64>() * 15.0).floor() + 1.0;
        pairs.push((x, w));
    }
    DiscreteMeasure::from_atoms(&pairs, true).unwrap()
}

pub fn mean_preserving_spread(rng: &mut impl Rng, m: &DiscreteMeasure) -> DiscreteMeasure {
    let i = rng.random_range(0..m.len());
    let (x, w) = (m.location(i), m.weight(i));
    let alpha = 0.25 + 0.5 * rng.random::<f64>();
    let moved = alpha * w;
    let a = 0.25 + (rng.random::<f64>() * 8.0).round() / 4.0;
    let b = 0.25 + (rng.random::<f64>() * 8.0).round() / 4.0;
    let p = b / (a + b);
    let mut pairs: Vec<(f64, f64)> = m.atoms().collect();
    pairs[i].1 -= moved;
    if pairs[i].1 <= 0.0 {
        pairs.remove(i);
    }
    pairs.push((x + a, moved * p));
    pairs.push((x - b, moved * (1.0 - p)));
    DiscreteMeasure::from_atoms(&pairs, true).unwrap()
}

pub fn random_cx_pair(rng: &mut impl Rng, max_atoms: usize) -> (DiscreteMeasure, DiscreteMeasure) {
    loop {
        let mu = random_measure(rng, max_atoms / 2);
        let mut nu = mu.clone();
        let spreads = rng.random_range(1..=3);
        for _ in 0..spreads {
            if nu.len() + 2 > max_atoms {
                break;
            }
            nu = mean_preserving_spread(rng, &nu);
        }
        let report = mu.check_order(&nu, 1e-9);
        if report.cx && report.strict {
            return (mu, nu);
        }
    }
}

pub fn random_single_crossing_pair(
    rng: &mut impl Rng,
    max_atoms: usize,
) -> (DiscreteMeasure, DiscreteMeasure) {
    loop {
        let mu = random_measure(rng, max_atoms);
        if mu.len() < 2 {
            continue;
        }
        let c = mu.mean();
        let s = 1.25 + rng.random::<f64>();
        let pairs: Vec<(f64, f64)> = mu.atoms().map(|(x, w)| (c + s * (x - c), w)).collect();
        let nu = DiscreteMeasure::from_atoms(&pairs, false).unwrap();
        let report = mu.check_order(&nu, 1e-9);
        if report.cx && report.strict {
            return (mu, nu);
        }
    }
}

pub fn random_dcx_pair(rng: &mut impl Rng, max_atoms: usize) -> (DiscreteMeasure, DiscreteMeasure) {
    let (mu, nu) = random_cx_pair(rng, max_atoms);
    let shift = if rng.random::<f64>() < 0.34 {
        0.0
    } else {
        (rng.random::<f64>() * 8.0).round() / 4.0
    };
    let pairs: Vec<(f64, f64)> = nu.atoms().map(|(x, w)| (x - shift, w)).collect();
    (mu, DiscreteMeasure::from_atoms(&pairs, false).unwrap())
}

/// Barycentric equal-mass quantile binning into at most `k` atoms.
pub fn quantile_bin(m: &DiscreteMeasure, k: usize) -> DiscreteMeasure {
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(k);
    let mut acc_m = 0.0;
    let mut acc_xw = 0.0;
    let mut cur = 0.0;
    let mut bi = 1usize;
    for (x, w) in m.atoms() {
        let mut lo = cur;
        let hi = cur + w;
        while bi < k && hi > bi as f64 / k as f64 + 1e-12 {
            let bound = bi as f64 / k as f64;
            let part = bound - lo;
            acc_m += part;
            acc_xw += x * part;
            pairs.push((acc_xw / acc_m, acc_m));
            acc_m = 0.0;
            acc_xw = 0.0;
            lo = bound;
            bi += 1;
        }
        acc_m += hi - lo;
        acc_xw += x * (hi - lo);
        cur = hi;
    }
    if acc_m > 1e-12 {
        pairs.push((acc_xw / acc_m, acc_m));
    }
    DiscreteMeasure::from_atoms(&pairs, true).unwrap()
}
