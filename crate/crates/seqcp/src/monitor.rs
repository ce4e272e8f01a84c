//! Streaming monitor.
//!
//! After a change-free historic sample of length `m`, each new observation
//! updates the two-sample detector
//! `D(m, k) = (1/m) sum_i sum_j (h(X_i, X_{m+j}) - theta)` incrementally in
//! O(1) (O(log m) for the rank kernel) and compares a scheme statistic
//! against a critical value:
//!
//! * CUSUM uses `|D(m, k)|`,
//! * mMOSUM discards the earliest `floor(k b)` monitoring observations,
//! * Page-CUSUM takes the worst difference against any earlier prefix.
//!
//! An alarm is raised at the first `k` where the normalized statistic
//! exceeds `c_alpha`; the stopping time is then frozen.

use crate::error::{Error, Result};
use crate::kernels::{KernelKind, KernelSpec};
use crate::weights::{hetero_weight, Normalization, WeightConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Cusum,
    MMosum,
    PageCusum,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Cusum => "cusum",
            Scheme::MMosum => "mmosum",
            Scheme::PageCusum => "page",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cusum" => Ok(Scheme::Cusum),
            "mmosum" => Ok(Scheme::MMosum),
            "page" | "page-cusum" | "pagecusum" => Ok(Scheme::PageCusum),
            other => Err(Error::InvalidParameter(format!(
                "unknown scheme '{other}' (expected 'cusum', 'mmosum' or 'page')"
            ))),
        }
    }
}

/// Index of the prefix discarded by the mMOSUM scheme at monitoring time k.
/// Shared by the streaming engine and the brute-force oracle so both floor
/// the same floating-point product.
pub(crate) fn mmosum_lower_index(k: usize, b: f64) -> usize {
    (k as f64 * b).floor() as usize
}

/// Immutable per-stream summary of the historic sample. One summary can
/// back any number of monitor states.
#[derive(Debug, Clone)]
pub struct HistoricSummary {
    pub m: usize,
    pub mean: f64,
    /// Ascending copy of the historic sample, used for rank counting.
    pub sorted_historic: Vec<f64>,
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub theta: f64,
    pub kernel: KernelSpec,
}

impl HistoricSummary {
    /// Detector increment contributed by one new observation:
    /// `(1/m) sum_i (h(X_i, x) - theta)`.
    fn increment(&self, x: f64) -> f64 {
        match self.kernel.kind {
            KernelKind::Dom => self.mean - x,
            KernelKind::Wilcoxon => {
                let below = self.sorted_historic.partition_point(|v| *v < x);
                below as f64 / self.m as f64 - 0.5
            }
            KernelKind::SymmetricSum => 0.5 * (self.mean + x),
        }
    }
}

/// One row of the diagnostic trace: raw detector, scheme statistic, weight
/// and the statistic normalized by the critical value (alarm level is 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub k: usize,
    pub detector: f64,
    pub scheme_stat: f64,
    pub weight: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    Continue { stat: f64, margin: f64 },
    Reject { at: usize },
}

impl Decision {
    pub fn is_reject(&self) -> bool {
        matches!(self, Decision::Reject { .. })
    }
}

/// Mutable per-stream monitoring state.
#[derive(Debug, Clone)]
pub struct MonitorState {
    expected_m: usize,
    k: usize,
    detector: f64,
    /// Detector prefix D(m, l) for l = 0..=k, with D(m, 0) = 0. Grows by one
    /// entry per step; kept in full so any mMOSUM fraction and post-hoc
    /// diagnostics can be served.
    prefix: Vec<f64>,
    min_seen: f64,
    max_seen: f64,
    stopped_at: Option<usize>,
    pub scheme: Scheme,
    pub c_alpha: f64,
    pub cfg: WeightConfig,
    trace: Option<Vec<TracePoint>>,
}

impl MonitorState {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn detector(&self) -> f64 {
        self.detector
    }

    pub fn prefix(&self) -> &[f64] {
        &self.prefix
    }

    pub fn stopped_at(&self) -> Option<usize> {
        self.stopped_at
    }

    /// Scheme statistic at the current monitoring time (0 at k = 0).
    pub fn scheme_stat(&self) -> f64 {
        match self.scheme {
            Scheme::Cusum => self.detector.abs(),
            Scheme::MMosum => {
                let l = mmosum_lower_index(self.k, self.cfg.mmosum_b);
                (self.detector - self.prefix[l]).abs()
            }
            Scheme::PageCusum => {
                (self.detector - self.min_seen).max(self.max_seen - self.detector)
            }
        }
    }

    /// Keep updating the detector and trace after an alarm instead of
    /// freezing. The stopping time itself never changes.
    pub fn enable_trace(&mut self) {
        if self.trace.is_none() {
            self.trace = Some(Vec::new());
        }
    }

    pub fn trace(&self) -> Option<&[TracePoint]> {
        self.trace.as_deref()
    }
}

/// Build the historic summary and a fresh monitoring state.
pub fn init_monitor(
    historic: &[f64],
    kernel: KernelSpec,
    scheme: Scheme,
    cfg: WeightConfig,
    c_alpha: f64,
) -> Result<(HistoricSummary, MonitorState)> {
    if historic.len() < 2 {
        return Err(Error::InsufficientHistoricData {
            needed: 2,
            got: historic.len(),
        });
    }
    if historic.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(
            "historic sample contains non-finite values".into(),
        ));
    }
    if !(c_alpha.is_finite() && c_alpha > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "critical value must be positive and finite, got {c_alpha}"
        )));
    }
    let (sigma1_sq, sigma2_sq) = kernel.kernel_variance(historic)?;
    if sigma1_sq <= 0.0 || sigma2_sq <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "resolved variances must be positive (got {sigma1_sq}, {sigma2_sq}); \
             a constant historic sample cannot be monitored"
        )));
    }
    let m = historic.len();
    let mean = historic.iter().sum::<f64>() / m as f64;
    let mut sorted_historic = historic.to_vec();
    sorted_historic.sort_by(f64::total_cmp);
    let summary = HistoricSummary {
        m,
        mean,
        sorted_historic,
        sigma1_sq,
        sigma2_sq,
        theta: kernel.theta,
        kernel,
    };
    let state = MonitorState {
        expected_m: m,
        k: 0,
        detector: 0.0,
        prefix: vec![0.0],
        min_seen: 0.0,
        max_seen: 0.0,
        stopped_at: None,
        scheme,
        c_alpha,
        cfg,
        trace: None,
    };
    Ok((summary, state))
}

/// Feed one observation. Returns the decision at the new monitoring time;
/// after an alarm the call is a no-op (unless tracing) that repeats the
/// stored rejection.
pub fn step(summary: &HistoricSummary, state: &mut MonitorState, x_new: f64) -> Result<Decision> {
    debug_assert_eq!(
        state.expected_m, summary.m,
        "state used with a different historic summary"
    );
    if let Some(at) = state.stopped_at {
        if state.trace.is_none() {
            return Ok(Decision::Reject { at });
        }
    }
    if !x_new.is_finite() {
        return Err(Error::NonFiniteObservation { step: state.k + 1 });
    }

    state.k += 1;
    state.detector += summary.increment(x_new);
    state.prefix.push(state.detector);
    state.min_seen = state.min_seen.min(state.detector);
    state.max_seen = state.max_seen.max(state.detector);

    let psi = state.scheme_stat();
    let stat = normalized_stat(summary, &state.cfg, state.k, psi);
    if let Some(trace) = state.trace.as_mut() {
        trace.push(TracePoint {
            k: state.k,
            detector: state.detector,
            scheme_stat: psi,
            weight: state.cfg.weight(summary.m, state.k),
            normalized: stat / state.c_alpha,
        });
    }

    if let Some(at) = state.stopped_at {
        return Ok(Decision::Reject { at });
    }
    if stat > state.c_alpha {
        state.stopped_at = Some(state.k);
        Ok(Decision::Reject { at: state.k })
    } else {
        Ok(Decision::Continue {
            stat,
            margin: state.c_alpha - stat,
        })
    }
}

/// The fully normalized monitoring statistic compared against `c_alpha`.
fn normalized_stat(summary: &HistoricSummary, cfg: &WeightConfig, k: usize, psi: f64) -> f64 {
    if k <= cfg.burn_in {
        return 0.0;
    }
    match cfg.normalization {
        Normalization::Homoscedastic => {
            cfg.weight(summary.m, k) * psi / summary.sigma1_sq.sqrt()
        }
        Normalization::Heteroscedastic => {
            let w = hetero_weight(
                summary.m,
                k,
                summary.sigma1_sq.sqrt(),
                summary.sigma2_sq.sqrt(),
            )
            .expect("variances validated at init");
            w * psi
        }
    }
}

/// O(m k) reference evaluation of the detector, used as a test oracle for
/// the incremental update.
pub fn brute_detector(historic: &[f64], monitoring: &[f64], kernel: KernelSpec, k: usize) -> f64 {
    assert!(k <= monitoring.len());
    let mut acc = 0.0;
    for x_new in &monitoring[..k] {
        for x_old in historic {
            acc += kernel.evaluate(*x_old, *x_new) - kernel.theta;
        }
    }
    acc / historic.len() as f64
}

/// Literal evaluation of a scheme statistic from the definition (the Page
/// scheme enumerates every prefix).
pub fn brute_scheme_stat(
    historic: &[f64],
    monitoring: &[f64],
    kernel: KernelSpec,
    scheme: Scheme,
    cfg: &WeightConfig,
    k: usize,
) -> f64 {
    let at = |l: usize| brute_detector(historic, monitoring, kernel, l);
    match scheme {
        Scheme::Cusum => at(k).abs(),
        Scheme::MMosum => (at(k) - at(mmosum_lower_index(k, cfg.mmosum_b))).abs(),
        Scheme::PageCusum => {
            let d_k = at(k);
            (0..=k)
                .map(|l| (d_k - at(l)).abs())
                .fold(0.0, f64::max)
        }
    }
}
