//! Two-sample U-statistic kernels.
//!
//! A kernel `h(x, y)` compares one historic observation against one
//! monitoring observation. Each kernel ships with its null expectation
//! `theta`, its Hoeffding decomposition `h = theta + h1(x) + h2(y) + r(x, y)`,
//! the magnitude by which a level shift moves its expectation, and a policy
//! for obtaining the variances that normalize the monitoring statistic.

use crate::dist::{Innovation, ReferenceCdf};
use crate::error::{Error, Result};

pub const WILCOXON_VARIANCE: f64 = 1.0 / 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    /// Difference of means: h(x, y) = x - y.
    Dom,
    /// Rank indicator: h(x, y) = 1 if x < y, else 0 (strict; ties count 0).
    Wilcoxon,
    /// h(x, y) = (x + y) / 2, sensitive to departures from a zero-mean
    /// symmetric distribution.
    SymmetricSum,
}

impl KernelKind {
    pub fn name(&self) -> &'static str {
        match self {
            KernelKind::Dom => "dom",
            KernelKind::Wilcoxon => "wilcoxon",
            KernelKind::SymmetricSum => "symmetric_sum",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dom" => Ok(KernelKind::Dom),
            "wilcoxon" | "wil" => Ok(KernelKind::Wilcoxon),
            "symmetric_sum" | "symmetric-sum" | "sym" => Ok(KernelKind::SymmetricSum),
            other => Err(Error::InvalidParameter(format!(
                "unknown kernel '{other}' (expected 'dom', 'wilcoxon' or 'symmetric_sum')"
            ))),
        }
    }
}

/// How the variances (sigma1^2, sigma2^2) of the linear Hoeffding parts are
/// obtained. For independent data the Wilcoxon kernel needs no estimate at
/// all; for dependent data callers supply long-run variances themselves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VariancePolicy {
    /// Unbiased empirical variance of the historic sample (divisor m - 1).
    EstimateFromHistoric,
    KnownConstant(f64),
    UserSupplied { sigma1_sq: f64, sigma2_sq: f64 },
}

/// A kernel together with its null expectation and variance policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    /// Null expectation E h(Y, Y') for independent copies Y, Y'.
    pub theta: f64,
    pub variance_policy: VariancePolicy,
}

impl KernelSpec {
    pub fn new(kind: KernelKind) -> Self {
        let (theta, variance_policy) = match kind {
            KernelKind::Dom => (0.0, VariancePolicy::EstimateFromHistoric),
            KernelKind::Wilcoxon => (0.5, VariancePolicy::KnownConstant(WILCOXON_VARIANCE)),
            KernelKind::SymmetricSum => (0.0, VariancePolicy::EstimateFromHistoric),
        };
        KernelSpec {
            kind,
            theta,
            variance_policy,
        }
    }

    pub fn with_variance_policy(mut self, policy: VariancePolicy) -> Self {
        self.variance_policy = policy;
        self
    }

    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        match self.kind {
            KernelKind::Dom => x - y,
            KernelKind::Wilcoxon => {
                if x < y {
                    1.0
                } else {
                    0.0
                }
            }
            KernelKind::SymmetricSum => 0.5 * (x + y),
        }
    }

    /// Shift in the kernel expectation caused by adding `d` to the
    /// post-change observations.
    ///
    /// For the rank kernel this is `int f(z) (F(z + d) - F(z)) dz`, evaluated
    /// by adaptive quadrature to an absolute error below 1e-8. The
    /// symmetric-sum kernel does not respond to a location shift parameter
    /// alone; see [`KernelSpec::symmetric_sum_magnitude`].
    pub fn change_magnitude(&self, d: f64, dist: Innovation) -> Result<f64> {
        if !d.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "change height must be finite, got {d}"
            )));
        }
        match self.kind {
            KernelKind::Dom => Ok(-d),
            KernelKind::Wilcoxon => Ok(wilcoxon_shift_magnitude(d, dist)),
            KernelKind::SymmetricSum => Err(Error::MagnitudeRequiresPostChangeMean),
        }
    }

    /// Change magnitude of the symmetric-sum kernel: the post-change mean
    /// E(Z) itself (its null expectation is 0 for a symmetric distribution).
    pub fn symmetric_sum_magnitude(&self, post_change_mean: f64) -> f64 {
        debug_assert_eq!(self.kind, KernelKind::SymmetricSum);
        post_change_mean
    }

    /// Hoeffding decomposition of this kernel under the given reference CDF.
    pub fn hoeffding_components(&self, cdf: ReferenceCdf) -> HoeffdingComponents {
        let reference_mean = cdf.mean();
        let theta = match self.kind {
            // E(X - Y) = 0 and the rank kernel has expectation 1/2 for any
            // continuous law; the symmetric-sum expectation is the mean.
            KernelKind::Dom => 0.0,
            KernelKind::Wilcoxon => 0.5,
            KernelKind::SymmetricSum => reference_mean,
        };
        HoeffdingComponents {
            kind: self.kind,
            theta,
            reference_mean,
            reference: cdf,
        }
    }

    /// Resolve (sigma1^2, sigma2^2) according to the variance policy.
    ///
    /// The Wilcoxon kernel is distribution-free for continuous data, so the
    /// estimate-from-historic policy still yields 1/12 there. The
    /// symmetric-sum kernel has h1(x) = (x - mu)/2, hence a quarter of the
    /// sample variance.
    pub fn kernel_variance(&self, historic: &[f64]) -> Result<(f64, f64)> {
        match self.variance_policy {
            VariancePolicy::UserSupplied {
                sigma1_sq,
                sigma2_sq,
            } => Ok((sigma1_sq, sigma2_sq)),
            VariancePolicy::KnownConstant(v) => Ok((v, v)),
            VariancePolicy::EstimateFromHistoric => match self.kind {
                KernelKind::Wilcoxon => Ok((WILCOXON_VARIANCE, WILCOXON_VARIANCE)),
                KernelKind::Dom => {
                    let s_sq = sample_variance(historic)?;
                    Ok((s_sq, s_sq))
                }
                KernelKind::SymmetricSum => {
                    let s_sq = sample_variance(historic)?;
                    Ok((s_sq / 4.0, s_sq / 4.0))
                }
            },
        }
    }
}

/// Unbiased sample variance with divisor n - 1.
pub fn sample_variance(sample: &[f64]) -> Result<f64> {
    if sample.len() < 2 {
        return Err(Error::InsufficientHistoricData {
            needed: 2,
            got: sample.len(),
        });
    }
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let ss = sample.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    Ok(ss / (n - 1.0))
}

/// Hoeffding decomposition h(x, y) = theta + h1(x) + h2(y) + r(x, y) under a
/// reference CDF. h1 and h2 are centered under that CDF; for the DOM and
/// Wilcoxon kernels h2 = -h1 and the remainder of the DOM kernel vanishes.
#[derive(Debug, Clone)]
pub struct HoeffdingComponents {
    kind: KernelKind,
    theta: f64,
    reference_mean: f64,
    reference: ReferenceCdf,
}

impl HoeffdingComponents {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn reference(&self) -> &ReferenceCdf {
        &self.reference
    }

    pub fn h1(&self, x: f64) -> f64 {
        match self.kind {
            KernelKind::Dom => x - self.reference_mean,
            KernelKind::Wilcoxon => 0.5 - self.reference.cdf(x),
            KernelKind::SymmetricSum => 0.5 * (x - self.reference_mean),
        }
    }

    pub fn h2(&self, y: f64) -> f64 {
        match self.kind {
            KernelKind::Dom => self.reference_mean - y,
            KernelKind::Wilcoxon => self.reference.cdf(y) - 0.5,
            KernelKind::SymmetricSum => 0.5 * (y - self.reference_mean),
        }
    }

    pub fn remainder(&self, x: f64, y: f64) -> f64 {
        match self.kind {
            KernelKind::Dom | KernelKind::SymmetricSum => 0.0,
            KernelKind::Wilcoxon => {
                let ind = if x < y { 1.0 } else { 0.0 };
                ind + self.reference.cdf(x) - self.reference.cdf(y) - 0.5
            }
        }
    }
}

fn wilcoxon_shift_magnitude(d: f64, dist: Innovation) -> f64 {
    if d == 0.0 {
        return 0.0;
    }
    let integrand = |z: f64| dist.pdf(z) * (dist.cdf(z + d) - dist.cdf(z));
    // The integrand decays like z^-8 even for t3, so a wide fixed window
    // costs nothing and keeps the truncation error far below the target.
    let half_width = 60.0 + d.abs();
    adaptive_simpson(&integrand, -half_width, half_width, 1e-9)
}

/// Adaptive Simpson quadrature with an absolute error target. The interval
/// is pre-split so a bump in the middle cannot be missed by the first probe.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    const PANELS: usize = 32;
    let width = (b - a) / PANELS as f64;
    let mut total = 0.0;
    for i in 0..PANELS {
        let lo = a + i as f64 * width;
        let hi = lo + width;
        let mid = 0.5 * (lo + hi);
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        let whole = simpson(lo, hi, flo, fmid, fhi);
        total += simpson_recurse(
            f,
            lo,
            hi,
            flo,
            fmid,
            fhi,
            whole,
            tol / PANELS as f64,
            48,
        );
    }
    total
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn simpson_recurse(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + simpson_recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
}
