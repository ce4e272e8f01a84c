//! Scenario generation and experiment driver.
//!
//! A `Scenario` describes one cell of a simulation grid: historic length,
//! innovation distribution, change height `d` applied from observation
//! `k* + 1` on (with `k* = floor(m^beta)`), monitoring horizon, kernel,
//! scheme and weight parameters. `run_experiment` streams every replication
//! through a monitor and aggregates empirical size or power together with
//! the detection-delay distribution; `size_corrected_power` first calibrates
//! the threshold so the empirical size equals the nominal level.
//!
//! Replications use counter-derived RNG streams (seed, batch, replication),
//! so results are independent of the worker-thread count, and scenarios that
//! differ only in kernel, scheme or gamma see identical streams (common
//! random numbers).

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::critvals::{self, upper_quantile, LimitFunctionalSpec};
use crate::dist::Innovation;
use crate::error::{Error, Result};
use crate::kernels::{KernelKind, KernelSpec};
use crate::monitor::{init_monitor, step, Decision, Scheme};
use crate::weights::{Normalization, WeightConfig};

/// Replication batches drawing from disjoint stream ranges of one seed.
#[derive(Debug, Clone, Copy)]
pub(crate) enum StreamBatch {
    /// The batch reported by `run_experiment`.
    Main = 0,
    /// Fresh streams used to calibrate size-corrected thresholds.
    Calibration = 1,
    /// Held-out streams for validating a calibrated threshold.
    Holdout = 2,
}

fn stream_rng(seed: u64, batch: StreamBatch, replication: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(((batch as u64) << 40) | replication);
    rng
}

/// One cell of the simulation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub m: usize,
    pub dist: Innovation,
    /// Change height added after the change point; 0 leaves the stream null.
    pub d: f64,
    /// Change-time exponent: `k* = floor(m^beta)`. `None` puts the change at
    /// infinity (a pure null stream).
    pub beta: Option<f64>,
    /// Number of monitoring observations per replication.
    pub horizon: usize,
    pub kernel: KernelKind,
    pub scheme: Scheme,
    pub gamma: f64,
    pub b: f64,
    pub alpha: f64,
    pub burn_in: usize,
    pub replications: usize,
    pub seed: u64,
}

impl Scenario {
    /// k* = floor(m^beta), or None under the null.
    pub fn change_time(&self) -> Option<usize> {
        self.beta
            .map(|beta| (self.m as f64).powf(beta).floor() as usize)
    }

    /// Default horizon: 10 m for null streams, 2 k* + 10 m otherwise (late
    /// changes need room for post-change detections).
    pub fn default_horizon(m: usize, change_time: Option<usize>) -> usize {
        10 * m + change_time.map_or(0, |k| 2 * k)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::InvalidParameter(format!(
                "historic length must be at least 2, got {}",
                self.m
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.replications == 0 {
            return Err(Error::InvalidParameter("replications must be positive".into()));
        }
        WeightConfig::new(self.gamma, self.burn_in, self.b)?;
        if self.horizon <= self.burn_in {
            return Err(Error::InvalidParameter(format!(
                "horizon {} does not exceed the burn-in {}",
                self.horizon, self.burn_in
            )));
        }
        if let Some(k_star) = self.change_time() {
            if self.horizon <= k_star {
                return Err(Error::InvalidParameter(format!(
                    "horizon {} does not reach past the change time k* = {k_star}",
                    self.horizon
                )));
            }
        }
        Ok(())
    }

    fn weight_config(&self) -> WeightConfig {
        WeightConfig::new(self.gamma, self.burn_in, self.b)
            .expect("validated")
            .with_normalization(Normalization::Homoscedastic)
    }
}

/// Draw the historic and monitoring samples for one replication. The shift
/// is applied strictly after observation `k*`, i.e. `monitoring[k*]`
/// (0-based) is the first shifted draw. Streams depend only on the
/// distributional part of the scenario, so cells differing in kernel,
/// scheme or weights share their random numbers.
pub fn generate_stream(scenario: &Scenario, replication: u64) -> (Vec<f64>, Vec<f64>) {
    generate_stream_batch(scenario, StreamBatch::Main, replication)
}

pub(crate) fn generate_stream_batch(
    scenario: &Scenario,
    batch: StreamBatch,
    replication: u64,
) -> (Vec<f64>, Vec<f64>) {
    let mut rng = stream_rng(scenario.seed, batch, replication);
    let historic: Vec<f64> = (0..scenario.m)
        .map(|_| scenario.dist.sample(&mut rng))
        .collect();
    let k_star = scenario.change_time().unwrap_or(usize::MAX);
    let monitoring: Vec<f64> = (0..scenario.horizon)
        .map(|j| {
            let y = scenario.dist.sample(&mut rng);
            if j >= k_star {
                y + scenario.d
            } else {
                y
            }
        })
        .collect();
    (historic, monitoring)
}

/// Detection-delay distribution over the truly detecting replications.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaySummary {
    pub count: usize,
    pub mean: f64,
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
    /// Unit-width histogram: (delay, count).
    pub histogram: Vec<(usize, usize)>,
}

impl DelaySummary {
    fn from_delays(delays: &mut Vec<usize>) -> Option<Self> {
        if delays.is_empty() {
            return None;
        }
        delays.sort_unstable();
        let as_f64: Vec<f64> = delays.iter().map(|d| *d as f64).collect();
        let q = |p: f64| upper_quantile(&as_f64, 1.0 - p);
        let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
        for d in delays.iter() {
            *histogram.entry(*d).or_insert(0) += 1;
        }
        Some(DelaySummary {
            count: delays.len(),
            mean: as_f64.iter().sum::<f64>() / as_f64.len() as f64,
            q05: q(0.05),
            q25: q(0.25),
            q50: q(0.50),
            q75: q(0.75),
            q95: q(0.95),
            histogram: histogram.into_iter().collect(),
        })
    }
}

/// Aggregated result of one scenario cell.
#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub scenario: Scenario,
    pub used_c_alpha: f64,
    pub size_corrected: bool,
    /// Replications that alarmed at any monitoring time.
    pub rejections: usize,
    pub rejection_rate: f64,
    /// Alarms at or before the change time (false positives under H1).
    pub pre_change_alarms: usize,
    pub false_alarm_rate_pre_change: f64,
    /// Alarms strictly after the change time.
    pub true_detections: usize,
    pub delays: Option<DelaySummary>,
}

/// Stream every replication through a monitor with the given critical value.
pub fn run_experiment(scenario: &Scenario, c_alpha: f64) -> Result<SimulationReport> {
    scenario.validate()?;
    let stop_times = stopping_times(scenario, StreamBatch::Main, c_alpha)?;
    Ok(aggregate(scenario, c_alpha, false, &stop_times))
}

fn stopping_times(
    scenario: &Scenario,
    batch: StreamBatch,
    c_alpha: f64,
) -> Result<Vec<Option<usize>>> {
    let kernel = KernelSpec::new(scenario.kernel);
    let cfg = scenario.weight_config();
    (0..scenario.replications as u64)
        .into_par_iter()
        .map(|rep| {
            let (historic, monitoring) = generate_stream_batch(scenario, batch, rep);
            let (summary, mut state) =
                init_monitor(&historic, kernel, scenario.scheme, cfg.clone(), c_alpha)?;
            for x in &monitoring {
                if step(&summary, &mut state, *x)?.is_reject() {
                    break;
                }
            }
            Ok(state.stopped_at())
        })
        .collect()
}

fn aggregate(
    scenario: &Scenario,
    c_alpha: f64,
    size_corrected: bool,
    stop_times: &[Option<usize>],
) -> SimulationReport {
    let r = stop_times.len();
    let k_star = scenario.change_time();
    let rejections = stop_times.iter().flatten().count();
    let mut pre_change = 0usize;
    let mut delays: Vec<usize> = Vec::new();
    for tau in stop_times.iter().flatten() {
        match k_star {
            Some(k) if *tau > k => delays.push(*tau - k),
            Some(_) => pre_change += 1,
            // every alarm on a null stream is a false alarm
            None => pre_change += 1,
        }
    }
    let true_detections = delays.len();
    SimulationReport {
        scenario: scenario.clone(),
        used_c_alpha: c_alpha,
        size_corrected,
        rejections,
        rejection_rate: rejections as f64 / r as f64,
        pre_change_alarms: pre_change,
        false_alarm_rate_pre_change: pre_change as f64 / r as f64,
        true_detections,
        delays: DelaySummary::from_delays(&mut delays),
    }
}

/// Empirical (1 - alpha)-quantile of `sup_k` of the normalized statistic
/// over null replications of `h0`, drawn from a stream batch disjoint from
/// the one `run_experiment` consumes.
pub fn calibrate_threshold(h0: &Scenario) -> Result<f64> {
    h0.validate()?;
    if h0.d != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "calibration scenario must have d = 0, got {}",
            h0.d
        )));
    }
    let kernel = KernelSpec::new(h0.kernel);
    let cfg = h0.weight_config();
    let sups: Result<Vec<f64>> = (0..h0.replications as u64)
        .into_par_iter()
        .map(|rep| {
            let (historic, monitoring) =
                generate_stream_batch(h0, StreamBatch::Calibration, rep);
            let (summary, mut state) =
                init_monitor(&historic, kernel, h0.scheme, cfg.clone(), f64::MAX)?;
            let mut sup = 0.0f64;
            for x in &monitoring {
                if let Decision::Continue { stat, .. } = step(&summary, &mut state, *x)? {
                    sup = sup.max(stat);
                }
            }
            Ok(sup)
        })
        .collect();
    let mut sups = sups?;
    sups.sort_by(f64::total_cmp);
    Ok(upper_quantile(&sups, h0.alpha))
}

/// Size-corrected power: calibrate the threshold on null replications of
/// `h0`, then evaluate `h1` with it. The two scenarios must agree in
/// everything but the change height.
pub fn size_corrected_power(h0: &Scenario, h1: &Scenario) -> Result<SimulationReport> {
    let mut h0_like_h1 = h1.clone();
    h0_like_h1.d = h0.d;
    if h0_like_h1 != *h0 {
        return Err(Error::InvalidParameter(
            "size correction requires scenarios identical except for d".into(),
        ));
    }
    let c = calibrate_threshold(h0)?;
    h1.validate()?;
    let stop_times = stopping_times(h1, StreamBatch::Main, c)?;
    Ok(aggregate(h1, c, true, &stop_times))
}

/// Run `run_experiment` on held-out streams; used to check a calibrated
/// threshold against data that neither the calibration nor the main batch
/// has seen.
pub fn run_experiment_holdout(scenario: &Scenario, c_alpha: f64) -> Result<SimulationReport> {
    scenario.validate()?;
    let stop_times = stopping_times(scenario, StreamBatch::Holdout, c_alpha)?;
    Ok(aggregate(scenario, c_alpha, false, &stop_times))
}

/// Resolve a critical value for a scenario from the cache, optionally
/// simulating it on a miss.
pub fn resolve_critical_value(
    scenario: &Scenario,
    cv_grid: usize,
    cv_reps: usize,
    cv_seed: u64,
    cache_dir: &Path,
    compute_if_missing: bool,
) -> Result<f64> {
    let spec = LimitFunctionalSpec::new(
        scenario.scheme,
        scenario.gamma,
        scenario.b,
        Normalization::Homoscedastic,
        cv_grid,
        cv_reps,
        cv_seed,
    )?;
    let table = if compute_if_missing {
        critvals::load_or_compute(&spec, cache_dir)?
    } else {
        critvals::cache_load(&spec, cache_dir)?.ok_or(Error::MissingCriticalValues {
            key: spec.key(),
        })?
    };
    table.critical_value(scenario.alpha)
}

// ---------------------------------------------------------------------------
// Scenario grid files and report rendering
// ---------------------------------------------------------------------------

/// One parsed block of a scenario grid file.
#[derive(Debug, Clone)]
pub struct SimCell {
    pub name: String,
    pub scenario: Scenario,
    pub size_corrected: bool,
    pub cv_grid: usize,
    pub cv_reps: usize,
    pub cv_seed: u64,
}

/// Parse a line-oriented `key = value` scenario grid; blocks are separated
/// by blank lines and `#` starts a comment.
pub fn parse_scenario_grid(text: &str) -> Result<Vec<SimCell>> {
    let mut cells = Vec::new();
    let mut block: Vec<(usize, String, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            if !block.is_empty() {
                cells.push(build_cell(&block, cells.len())?);
                block.clear();
            }
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(Error::ConfigParse {
            line: idx + 1,
            reason: format!("expected 'key = value', got '{line}'"),
        })?;
        block.push((idx + 1, key.trim().to_string(), value.trim().to_string()));
    }
    if !block.is_empty() {
        cells.push(build_cell(&block, cells.len())?);
    }
    if cells.is_empty() {
        return Err(Error::ConfigParse {
            line: 0,
            reason: "no scenario blocks found".into(),
        });
    }
    Ok(cells)
}

fn build_cell(block: &[(usize, String, String)], index: usize) -> Result<SimCell> {
    let mut name = format!("cell{index:03}");
    let mut m: Option<usize> = None;
    let mut dist = Innovation::StdNormal;
    let mut d = 0.0f64;
    let mut beta: Option<f64> = None;
    let mut horizon: Option<usize> = None;
    let mut kernel: Option<KernelKind> = None;
    let mut scheme: Option<Scheme> = None;
    let mut gamma = 0.0f64;
    let mut b = 0.4f64;
    let mut alpha = 0.05f64;
    let mut burn_in: Option<usize> = None;
    let mut replications = 2000usize;
    let mut seed = 0u64;
    let mut size_corrected = false;
    let mut cv_grid = LimitFunctionalSpec::DESK_GRID;
    let mut cv_reps = LimitFunctionalSpec::DESK_REPS;
    let mut cv_seed = 1u64;

    for (line, key, value) in block {
        let bad = |what: &str| Error::ConfigParse {
            line: *line,
            reason: format!("invalid {what} '{value}'"),
        };
        match key.as_str() {
            "name" => name = value.clone(),
            "m" => m = Some(value.parse().map_err(|_| bad("m"))?),
            "dist" => dist = Innovation::parse(value)?,
            "d" => d = value.parse().map_err(|_| bad("d"))?,
            "beta" => {
                beta = match value.to_ascii_lowercase().as_str() {
                    "h0" | "inf" | "none" => None,
                    _ => Some(value.parse().map_err(|_| bad("beta"))?),
                }
            }
            "horizon" => horizon = Some(value.parse().map_err(|_| bad("horizon"))?),
            "kernel" => kernel = Some(KernelKind::parse(value)?),
            "scheme" => scheme = Some(Scheme::parse(value)?),
            "gamma" => gamma = value.parse().map_err(|_| bad("gamma"))?,
            "b" => b = value.parse().map_err(|_| bad("b"))?,
            "alpha" => alpha = value.parse().map_err(|_| bad("alpha"))?,
            "burn_in" => burn_in = Some(value.parse().map_err(|_| bad("burn_in"))?),
            "replications" => replications = value.parse().map_err(|_| bad("replications"))?,
            "seed" => seed = value.parse().map_err(|_| bad("seed"))?,
            "size_corrected" => {
                size_corrected = value.parse().map_err(|_| bad("size_corrected"))?
            }
            "cv_grid" => cv_grid = value.parse().map_err(|_| bad("cv_grid"))?,
            "cv_reps" => cv_reps = value.parse().map_err(|_| bad("cv_reps"))?,
            "cv_seed" => cv_seed = value.parse().map_err(|_| bad("cv_seed"))?,
            other => {
                return Err(Error::ConfigParse {
                    line: *line,
                    reason: format!("unknown key '{other}'"),
                })
            }
        }
    }
    let first_line = block.first().map(|(l, _, _)| *l).unwrap_or(0);
    let missing = |what: &str| Error::ConfigParse {
        line: first_line,
        reason: format!("scenario block is missing '{what}'"),
    };
    let m = m.ok_or_else(|| missing("m"))?;
    let mut scenario = Scenario {
        m,
        dist,
        d,
        beta,
        horizon: 0,
        kernel: kernel.ok_or_else(|| missing("kernel"))?,
        scheme: scheme.ok_or_else(|| missing("scheme"))?,
        gamma,
        b,
        alpha,
        burn_in: burn_in.unwrap_or_else(|| WeightConfig::default_burn_in(m)),
        replications,
        seed,
    };
    scenario.horizon =
        horizon.unwrap_or_else(|| Scenario::default_horizon(m, scenario.change_time()));
    scenario.validate()?;
    Ok(SimCell {
        name,
        scenario,
        size_corrected,
        cv_grid,
        cv_reps,
        cv_seed,
    })
}

/// Run one cell end to end (threshold resolution included).
pub fn run_cell(cell: &SimCell, cache_dir: &Path) -> Result<SimulationReport> {
    if cell.size_corrected {
        let mut h0 = cell.scenario.clone();
        h0.d = 0.0;
        size_corrected_power(&h0, &cell.scenario)
    } else {
        let c = resolve_critical_value(
            &cell.scenario,
            cell.cv_grid,
            cell.cv_reps,
            cell.cv_seed,
            cache_dir,
            true,
        )?;
        run_experiment(&cell.scenario, c)
    }
}

pub const REPORT_SCHEMA: &str = "# seqcp simulate report v1";
pub const REPORT_COLUMNS: &str = "name\tm\tdist\td\tbeta\tk_star\thorizon\tkernel\tscheme\tgamma\tb\talpha\tburn_in\treplications\tseed\tsize_corrected\tc_alpha\trejections\trejection_rate\tpre_change_alarms\tfalse_alarm_rate_pre_change\ttrue_detections\tdelay_mean\tdelay_q05\tdelay_q25\tdelay_q50\tdelay_q75\tdelay_q95";

pub fn render_report_row(name: &str, report: &SimulationReport) -> String {
    let s = &report.scenario;
    let beta = s.beta.map_or("h0".to_string(), |b| b.to_string());
    let k_star = s
        .change_time()
        .map_or("inf".to_string(), |k| k.to_string());
    let delay = |f: fn(&DelaySummary) -> f64| {
        report
            .delays
            .as_ref()
            .map_or("nan".to_string(), |d| f(d).to_string())
    };
    format!(
        "{name}\t{}\t{}\t{}\t{beta}\t{k_star}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
        s.m,
        s.dist.name(),
        s.d,
        s.horizon,
        s.kernel.name(),
        s.scheme.name(),
        s.gamma,
        s.b,
        s.alpha,
        s.burn_in,
        s.replications,
        s.seed,
        report.size_corrected,
        report.used_c_alpha,
        report.rejections,
        report.rejection_rate,
        report.pre_change_alarms,
        report.false_alarm_rate_pre_change,
        report.true_detections,
        delay(|d| d.mean),
        delay(|d| d.q05),
        delay(|d| d.q25),
        delay(|d| d.q50),
        delay(|d| d.q75),
        delay(|d| d.q95),
    )
}

pub const HISTOGRAM_SCHEMA: &str = "# seqcp delay histogram v1";

pub fn render_delay_histogram(report: &SimulationReport) -> String {
    let mut out = format!("{HISTOGRAM_SCHEMA}\ndelay\tcount\n");
    if let Some(delays) = &report.delays {
        for (delay, count) in &delays.histogram {
            out.push_str(&format!("{delay}\t{count}\n"));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(m: usize, d: f64, beta: Option<f64>, horizon: usize) -> Scenario {
        Scenario {
            m,
            dist: Innovation::StdNormal,
            d,
            beta,
            horizon,
            kernel: KernelKind::Dom,
            scheme: Scheme::Cusum,
            gamma: 0.0,
            b: 0.4,
            alpha: 0.05,
            burn_in: WeightConfig::default_burn_in(m),
            replications: 400,
            seed: 9,
        }
    }

    #[test]
    fn change_time_examples() {
        assert_eq!(scenario(100, 0.5, Some(0.25), 1100).change_time(), Some(3));
        assert_eq!(scenario(100, 0.5, Some(1.0), 1300).change_time(), Some(100));
        assert_eq!(scenario(100, 0.5, Some(1.4), 2300).change_time(), Some(630));
        assert_eq!(scenario(100, 0.0, None, 1000).change_time(), None);
    }

    #[test]
    fn validation_rejects_vacuous_scenarios() {
        assert!(scenario(100, 0.5, Some(1.4), 630).validate().is_err());
        assert!(scenario(100, 0.5, Some(1.4), 631).validate().is_ok());
        let mut s = scenario(100, 0.0, None, 10);
        assert!(s.validate().is_err()); // horizon == burn_in
        s.horizon = 11;
        assert!(s.validate().is_ok());
    }

    #[test]
    fn shift_starts_strictly_after_change_time() {
        let with_shift = scenario(100, 0.5, Some(1.0), 1300);
        let mut no_shift = with_shift.clone();
        no_shift.d = 0.0;
        let (h1, m1) = generate_stream(&with_shift, 3);
        let (h0, m0) = generate_stream(&no_shift, 3);
        assert_eq!(h1, h0);
        let k_star = with_shift.change_time().unwrap();
        for j in 0..m1.len() {
            let diff = m1[j] - m0[j];
            if j < k_star {
                assert_eq!(diff, 0.0, "unexpected shift at pre-change index {j}");
            } else {
                assert!((diff - 0.5).abs() < 1e-12, "missing shift at index {j}");
            }
        }
    }

    #[test]
    fn null_stream_ignores_d_zero_and_beta() {
        let s = scenario(50, 0.0, Some(1.0), 600);
        let (_, with_beta) = generate_stream(&s, 0);
        let mut null = s.clone();
        null.beta = None;
        let (_, pure) = generate_stream(&null, 0);
        assert_eq!(with_beta, pure);
    }

    #[test]
    fn experiment_is_deterministic_across_thread_counts() {
        let s = scenario(50, 0.5, Some(1.0), 520);
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_experiment(&s, 2.0).unwrap())
        };
        let a = run(1);
        let b = run(4);
        assert_eq!(a.rejections, b.rejections);
        assert_eq!(a.delays, b.delays);
        assert_eq!(a.pre_change_alarms, b.pre_change_alarms);
    }

    #[test]
    fn rejection_counts_are_integer_consistent() {
        let s = scenario(50, 0.0, None, 500);
        let report = run_experiment(&s, 2.0).unwrap();
        let implied = report.rejection_rate * s.replications as f64;
        assert!((implied - report.rejections as f64).abs() < 1e-9);
        assert_eq!(report.rejections, report.pre_change_alarms);
        assert!(report.delays.is_none());
    }

    #[test]
    fn calibrated_threshold_holds_level_on_fresh_nulls() {
        let mut h0 = scenario(50, 0.0, None, 500);
        h0.replications = 1500;
        let c = calibrate_threshold(&h0).unwrap();
        // the main batch is disjoint from the calibration batch
        let recheck = run_experiment(&h0, c).unwrap();
        let se = (0.05f64 * 0.95 / h0.replications as f64).sqrt();
        assert!(
            (recheck.rejection_rate - 0.05).abs() <= 2.0 * se,
            "rate {} vs nominal 0.05 (2se = {:.4})",
            recheck.rejection_rate,
            2.0 * se
        );
    }

    #[test]
    fn size_correction_requires_matching_scenarios() {
        let h1 = scenario(50, 0.5, Some(1.0), 600);
        let mut h0 = h1.clone();
        h0.d = 0.0;
        assert!(size_corrected_power(&h0, &h1).is_ok());
        h0.seed = 1234;
        assert!(size_corrected_power(&h0, &h1).is_err());
        let mut bad_h0 = h1.clone();
        bad_h0.d = 0.1;
        assert!(size_corrected_power(&bad_h0, &h1).is_err());
    }

    #[test]
    fn larger_shifts_detect_more_and_faster() {
        let small = scenario(50, 0.5, Some(0.25), 600);
        let mut h0 = small.clone();
        h0.d = 0.0;
        let small_report = size_corrected_power(&h0, &small).unwrap();
        let mut large = small.clone();
        large.d = 5.0;
        let large_report = size_corrected_power(&h0, &large).unwrap();
        assert!(large_report.rejection_rate >= small_report.rejection_rate);
        assert!(large_report.rejection_rate > 0.99);
        let (sd, ld) = (
            small_report.delays.as_ref().unwrap(),
            large_report.delays.as_ref().unwrap(),
        );
        assert!(ld.q50 < sd.q50);
    }

    #[test]
    fn wilcoxon_size_is_distribution_free() {
        let reps = 4000;
        let mut normal = scenario(100, 0.0, None, 1000);
        normal.kernel = KernelKind::Wilcoxon;
        normal.replications = reps;
        normal.seed = 77;
        let mut t3 = normal.clone();
        t3.dist = Innovation::StdT3;
        let c = 2.2414; // asymptotic CUSUM threshold at alpha = 5%
        let a = run_experiment(&normal, c).unwrap();
        let b = run_experiment(&t3, c).unwrap();
        let se_diff = ((a.rejection_rate * (1.0 - a.rejection_rate)
            + b.rejection_rate * (1.0 - b.rejection_rate))
            / reps as f64)
            .sqrt();
        assert!(
            (a.rejection_rate - b.rejection_rate).abs() <= 2.0 * se_diff.max(1e-4),
            "normal {} vs t3 {}",
            a.rejection_rate,
            b.rejection_rate
        );
    }

    #[test]
    fn power_grows_with_historic_length() {
        // fixed d = 0.5, change at k* = m: power approaches one as m grows
        let mut rates = Vec::new();
        for m in [50usize, 100, 200] {
            let mut h1 = scenario(m, 0.5, Some(1.0), 12 * m);
            h1.replications = 600;
            let mut h0 = h1.clone();
            h0.d = 0.0;
            let report = size_corrected_power(&h0, &h1).unwrap();
            rates.push(report.rejection_rate);
        }
        let se = |p: f64| (p * (1.0 - p) / 600.0).sqrt();
        for w in rates.windows(2) {
            let slack = 2.0 * (se(w[0]).powi(2) + se(w[1]).powi(2)).sqrt();
            assert!(w[1] >= w[0] - slack, "power not increasing: {rates:?}");
        }
        assert!(rates[2] >= 0.99, "power at m = 200 is {}", rates[2]);
    }

    #[test]
    fn scenario_grid_parsing() {
        let text = "\
# two cells
name = null_cell
m = 100
dist = normal
kernel = dom
scheme = cusum
replications = 300

m = 100
dist = t3
kernel = wilcoxon
scheme = mmosum
b = 0.4
d = 0.5
beta = 1.0
size_corrected = true
seed = 5
";
        let cells = parse_scenario_grid(text).unwrap();
        assert_eq!(cells.len(), 2);
        assert_eq!(cells[0].name, "null_cell");
        assert_eq!(cells[0].scenario.horizon, 1000);
        assert_eq!(cells[0].scenario.burn_in, 10);
        assert!(!cells[0].size_corrected);
        assert_eq!(cells[1].name, "cell001");
        assert_eq!(cells[1].scenario.change_time(), Some(100));
        assert_eq!(cells[1].scenario.horizon, 1200);
        assert!(cells[1].size_corrected);

        assert!(parse_scenario_grid("m = 100\n").is_err()); // missing kernel
        assert!(parse_scenario_grid("nonsense\n").is_err());
        assert!(parse_scenario_grid("m = 100\nwat = 1\nkernel = dom\nscheme = cusum\n").is_err());
    }

    #[test]
    fn report_row_has_schema_arity() {
        let s = scenario(50, 0.0, None, 500);
        let report = run_experiment(&s, 2.0).unwrap();
        let row = render_report_row("x", &report);
        assert_eq!(
            row.split('\t').count(),
            REPORT_COLUMNS.split('\t').count()
        );
    }
}
