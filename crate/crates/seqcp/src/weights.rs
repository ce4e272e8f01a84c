//! Weight / boundary functions for open-ended monitoring.
//!
//! The detector is compared against `c_alpha / w(m, k)`, where
//! `w(m, k) = m^{-1/2} rho(k / m)` after a burn-in of zero weight. The
//! built-in family is `rho(t) = (1 + t)^{-1} ((1 + t) / t)^gamma` with
//! `gamma` in `[0, 1/2)`; larger `gamma` concentrates sensitivity on early
//! monitoring times.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Which pivotal normalization the monitor applies before comparing against
/// a critical value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Normalization {
    /// Equal variances: statistic `w(m,k) |Psi| / sigma`.
    Homoscedastic,
    /// Unequal variances: statistic `sigma1 |Psi| / (sqrt(m) (sigma2^2 + sigma1^2 k/m))`.
    Heteroscedastic,
}

impl Normalization {
    pub fn name(&self) -> &'static str {
        match self {
            Normalization::Homoscedastic => "homo",
            Normalization::Heteroscedastic => "hetero",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "homo" | "homoscedastic" => Ok(Normalization::Homoscedastic),
            "hetero" | "heteroscedastic" => Ok(Normalization::Heteroscedastic),
            other => Err(Error::InvalidParameter(format!(
                "unknown normalization '{other}' (expected 'homo' or 'hetero')"
            ))),
        }
    }
}

type RhoFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Weight configuration: rho exponent, burn-in, mMOSUM discard fraction and
/// normalization mode. Immutable after construction.
#[derive(Clone)]
pub struct WeightConfig {
    pub gamma: f64,
    /// Monitoring times `k <= burn_in` carry zero weight.
    pub burn_in: usize,
    /// Fraction of early monitoring observations the mMOSUM scheme discards.
    pub mmosum_b: f64,
    pub normalization: Normalization,
    custom_rho: Option<RhoFn>,
}

impl fmt::Debug for WeightConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WeightConfig")
            .field("gamma", &self.gamma)
            .field("burn_in", &self.burn_in)
            .field("mmosum_b", &self.mmosum_b)
            .field("normalization", &self.normalization)
            .field("custom_rho", &self.custom_rho.is_some())
            .finish()
    }
}

impl WeightConfig {
    pub fn new(gamma: f64, burn_in: usize, mmosum_b: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&gamma) {
            return Err(Error::InvalidParameter(format!(
                "gamma must lie in [0, 0.5), got {gamma}"
            )));
        }
        if !(0.0 < mmosum_b && mmosum_b < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "mmosum_b must lie in (0, 1), got {mmosum_b}"
            )));
        }
        if burn_in == 0 {
            return Err(Error::InvalidParameter(
                "burn_in must be at least 1".into(),
            ));
        }
        Ok(WeightConfig {
            gamma,
            burn_in,
            mmosum_b,
            normalization: Normalization::Homoscedastic,
            custom_rho: None,
        })
    }

    /// Default burn-in: monitoring starts only after ceil(sqrt(m))
    /// observations, suppressing the volatile early statistics.
    pub fn default_burn_in(m: usize) -> usize {
        (m as f64).sqrt().ceil() as usize
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    /// Replace the built-in rho family with a user-supplied positive shape.
    /// Positivity is only spot-checked; critical values for custom shapes
    /// must come from a user-run simulation.
    pub fn with_custom_rho<F>(mut self, rho: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        for t in [1e-6, 1e-3, 0.1, 1.0, 10.0, 1e3] {
            let v = rho(t);
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "custom rho must be positive and finite, but rho({t}) = {v}"
                )));
            }
        }
        self.custom_rho = Some(Arc::new(rho));
        Ok(self)
    }

    fn rho_at(&self, t: f64) -> Result<f64> {
        match &self.custom_rho {
            Some(f) => {
                if t <= 0.0 {
                    Err(Error::WeightUndefinedAtNonpositiveTime { t })
                } else {
                    Ok(f(t))
                }
            }
            None => rho(self.gamma, t),
        }
    }

    /// w(m, k): zero during burn-in, `m^{-1/2} rho(k / m)` afterwards.
    pub fn weight(&self, m: usize, k: usize) -> f64 {
        debug_assert!(m >= 1 && k >= 1);
        if k <= self.burn_in {
            return 0.0;
        }
        let t = k as f64 / m as f64;
        self.rho_at(t).expect("k/m > 0") / (m as f64).sqrt()
    }
}

/// rho(t) = (1 + t)^{-1} ((1 + t) / t)^gamma for t > 0.
pub fn rho(gamma: f64, t: f64) -> Result<f64> {
    debug_assert!((0.0..0.5).contains(&gamma), "gamma out of range: {gamma}");
    if t <= 0.0 {
        return Err(Error::WeightUndefinedAtNonpositiveTime { t });
    }
    let base = 1.0 + t;
    Ok((base / t).powf(gamma) / base)
}

/// Normalization factor of the unequal-variance statistic:
/// `sigma1 / (sqrt(m) (sigma2^2 + sigma1^2 k/m))`.
pub fn hetero_weight(m: usize, k: usize, sigma1: f64, sigma2: f64) -> Result<f64> {
    if sigma1 <= 0.0 || sigma2 <= 0.0 {
        return Err(Error::NonpositiveScale { sigma1, sigma2 });
    }
    let ratio = k as f64 / m as f64;
    Ok(sigma1 / ((m as f64).sqrt() * (sigma2 * sigma2 + sigma1 * sigma1 * ratio)))
}
