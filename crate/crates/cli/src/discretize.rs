//! Equal-mass quantile-midpoint discretization of a few named
//! distributions: `n` atoms of weight `1/n` at `F^{-1}((2k-1)/(2n))`.

use mcouple::error::{Error, Result};
use mcouple::DiscreteMeasure;
use statrs::distribution::{ContinuousCDF, Normal};

pub fn discretize(
    dist: &str,
    rate: f64,
    mean: f64,
    std: f64,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<DiscreteMeasure> {
    if n < 2 {
        return Err(Error::EmptyInput);
    }
    match dist {
        "exponential" => {
            if rate.is_nan() || rate <= 0.0 {
                return Err(Error::SupportViolation {
                    context: "exponential rate must be positive",
                });
            }
            DiscreteMeasure::from_quantile_fn(|u| -(1.0 - u).ln() / rate, n)
        }
        "gaussian" => {
            if std.is_nan() || std <= 0.0 {
                return Err(Error::SupportViolation {
                    context: "gaussian needs a positive standard deviation",
                });
            }
            let normal = Normal::new(mean, std).expect("validated parameters");
            DiscreteMeasure::from_quantile_fn(|u| normal.inverse_cdf(u), n)
        }
        "uniform" => {
            if hi.is_nan() || lo.is_nan() || hi <= lo {
                return Err(Error::SupportViolation {
                    context: "uniform needs lo < hi",
                });
            }
            DiscreteMeasure::from_quantile_fn(|u| lo + u * (hi - lo), n)
        }
        other => Err(Error::UnknownDistribution {
            name: other.to_string(),
        }),
    }
}
