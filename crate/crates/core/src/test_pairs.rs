//! Randomized pair generators shared by the unit tests.

use crate::measures::DiscreteMeasure;
use rand::Rng;

/// Random dyadic-friendly measure with at most `max_atoms` atoms.
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

/// Applies one mean-preserving two-point spread to `m`: mass `alpha * w` of
/// a random atom is split onto `x - b` and `x + a` with martingale weights.
pub fn mean_preserving_spread(rng: &mut impl Rng, m: &DiscreteMeasure) -> DiscreteMeasure {
    let i = rng.random_range(0..m.len());
    let (x, w) = (m.location(i), m.weight(i));
    let alpha = 0.25 + 0.5 * rng.random::<f64>();
    let moved = alpha * w;
    let a = 0.25 + (rng.random::<f64>() * 8.0).round() / 4.0;
    let b = 0.25 + (rng.random::<f64>() * 8.0).round() / 4.0;
    // p * a = (1 - p) * b keeps the mean at x
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

/// A strictly convex-ordered pair, built by spreading a random base measure.
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

/// A strictly convex-ordered pair whose quantile difference changes sign
/// exactly once: `nu` is a dilation of `mu` around its mean.
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

/// A decreasing-convex-ordered pair: a convex-ordered pair with `nu`
/// shifted downward. With probability ~1/3 the shift is zero, so the pair
/// keeps equal means.
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

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn generators_meet_their_postconditions() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let (mu, nu) = random_single_crossing_pair(&mut rng, 10);
            let r = mu.check_order(&nu, 1e-9);
            assert!(r.cx && r.strict);
            assert!(crate::quantile::QuantileGrid::new(&mu, &nu).single_sign_change());

            let (mu, nu) = random_dcx_pair(&mut rng, 10);
            assert!(mu.check_order(&nu, 1e-9).dcx);
        }
    }
}
