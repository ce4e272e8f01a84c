//! Innovation distributions and reference CDFs.
//!
//! The engine itself is distribution-free; these types exist for the
//! simulation harness (drawing innovations) and for building analytic
//! Hoeffding components and change magnitudes in tests and calibration.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use statrs::distribution::{Continuous, ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// Scale that turns a t3 variate into a unit-variance one: Var(t3) = 3.
const T3_SCALE: f64 = 1.732_050_807_568_877_2; // sqrt(3)

/// Innovation distribution for simulated streams. Both choices have mean 0
/// and variance 1 so that a shift of `d` means the same thing across them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Innovation {
    StdNormal,
    /// t distribution with 3 degrees of freedom, divided by sqrt(3).
    StdT3,
}

impl Innovation {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Innovation::StdNormal => std_normal().cdf(x),
            Innovation::StdT3 => std_t3().cdf(x),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match self {
            Innovation::StdNormal => std_normal().pdf(x),
            Innovation::StdT3 => std_t3().pdf(x),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Innovation::StdNormal => rng.sample::<f64, _>(StandardNormal),
            Innovation::StdT3 => {
                let t: f64 = StudentT::new(3.0).expect("valid dof").sample(rng);
                t / T3_SCALE
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Innovation::StdNormal => "normal",
            Innovation::StdT3 => "t3",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "stdnormal" | "gaussian" => Ok(Innovation::StdNormal),
            "t3" | "stdt3" => Ok(Innovation::StdT3),
            other => Err(Error::InvalidParameter(format!(
                "unknown distribution '{other}' (expected 'normal' or 't3')"
            ))),
        }
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("valid parameters")
}

fn std_t3() -> StudentsT {
    // location 0, scale 1/sqrt(3), 3 dof => unit variance
    StudentsT::new(0.0, 1.0 / T3_SCALE, 3.0).expect("valid parameters")
}

/// Distribution function used to build Hoeffding components: analytic for
/// the built-in innovation laws, empirical for observed data.
#[derive(Debug, Clone)]
pub enum ReferenceCdf {
    StdNormal,
    StdT3,
    /// Sorted reference sample; F(x) = (# values <= x) / n.
    Empirical(Vec<f64>),
}

impl ReferenceCdf {
    pub fn empirical(sample: &[f64]) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::EmptyReferenceSample);
        }
        let mut sorted = sample.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(ReferenceCdf::Empirical(sorted))
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            ReferenceCdf::StdNormal => Innovation::StdNormal.cdf(x),
            ReferenceCdf::StdT3 => Innovation::StdT3.cdf(x),
            ReferenceCdf::Empirical(sorted) => {
                let below = sorted.partition_point(|v| *v <= x);
                below as f64 / sorted.len() as f64
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            ReferenceCdf::StdNormal | ReferenceCdf::StdT3 => 0.0,
            ReferenceCdf::Empirical(sorted) => {
                sorted.iter().sum::<f64>() / sorted.len() as f64
            }
        }
    }
}

impl From<Innovation> for ReferenceCdf {
    fn from(value: Innovation) -> Self {
        match value {
            Innovation::StdNormal => ReferenceCdf::StdNormal,
            Innovation::StdT3 => ReferenceCdf::StdT3,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn std_t3_has_unit_variance() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let n = 200_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let x = Innovation::StdT3.sample(&mut rng);
            sum += x;
            sum_sq += x * x;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        // t3 has heavy tails, so the variance estimate converges slowly.
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.1, "var {var}");
    }

    #[test]
    fn t3_cdf_is_symmetric_and_heavier_tailed() {
        assert!((Innovation::StdT3.cdf(0.0) - 0.5).abs() < 1e-12);
        let tail_t3 = 1.0 - Innovation::StdT3.cdf(3.0);
        let tail_normal = 1.0 - Innovation::StdNormal.cdf(3.0);
        assert!(tail_t3 > tail_normal);
    }

    #[test]
    fn empirical_cdf_counts_weakly_below() {
        let cdf = ReferenceCdf::empirical(&[3.0, 1.0, 2.0]).unwrap();
        assert_eq!(cdf.cdf(0.5), 0.0);
        assert_eq!(cdf.cdf(1.0), 1.0 / 3.0);
        assert_eq!(cdf.cdf(2.5), 2.0 / 3.0);
        assert_eq!(cdf.cdf(9.0), 1.0);
        assert!((cdf.mean() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn empirical_cdf_rejects_empty_sample() {
        assert!(matches!(
            ReferenceCdf::empirical(&[]),
            Err(Error::EmptyReferenceSample)
        ));
    }
}
