//! CSV ingestion, deseasonalization and multi-scheme analysis.
//!
//! The input format is a headered CSV with a `date` column holding ISO
//! year-month (or year-month-day) stamps and a configurable value column.
//! Seasonality is removed by subtracting per-calendar-month means estimated
//! from the historic window only; the adjusted series is then monitored in
//! trace mode for every requested (kernel, scheme) pair, emitting normalized
//! statistic traces on which the alarm level is the horizontal line at 1.

use std::fmt;
use std::path::{Path, PathBuf};

use crate::critvals::{self, LimitFunctionalSpec};
use crate::error::{Error, Result};
use crate::kernels::{KernelKind, KernelSpec};
use crate::monitor::{init_monitor, step, Scheme, TracePoint};
use crate::weights::{Normalization, WeightConfig};

/// Calendar month identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct MonthStamp {
    pub year: i32,
    /// 1..=12
    pub month: u32,
}

impl MonthStamp {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) {
            return Err(Error::InvalidParameter(format!(
                "month must lie in 1..=12, got {month}"
            )));
        }
        Ok(MonthStamp { year, month })
    }

    /// Months since year 0; consecutive stamps differ by 1.
    pub fn index(&self) -> i64 {
        self.year as i64 * 12 + (self.month as i64 - 1)
    }

    /// Accepts `YYYY-MM` or `YYYY-MM-DD` (the day is ignored).
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || {
            Error::InvalidParameter(format!(
                "expected an ISO year-month date like 1902-07, got '{s}'"
            ))
        };
        let mut parts = s.trim().split('-');
        let year: i32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let month: u32 = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
        if let Some(day) = parts.next() {
            let _day: u32 = day.parse().map_err(|_| bad())?;
            if parts.next().is_some() {
                return Err(bad());
            }
        }
        MonthStamp::new(year, month).map_err(|_| bad())
    }
}

impl fmt::Display for MonthStamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}", self.year, self.month)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRecord {
    pub timestamp: MonthStamp,
    pub value: f64,
}

/// A loaded series plus any gaps found between consecutive stamps. Gaps are
/// tolerated but surfaced so the caller can report them.
#[derive(Debug, Clone)]
pub struct LoadedSeries {
    pub records: Vec<SeriesRecord>,
    pub gaps: Vec<(MonthStamp, MonthStamp)>,
}

/// Read records from a headered CSV file. The timestamp lives in the `date`
/// column; `value_column` selects the measurement by header name.
pub fn load_csv(path: &Path, value_column: &str) -> Result<LoadedSeries> {
    let data_err = |reason: String| Error::CsvData {
        path: path.display().to_string(),
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| data_err(e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| data_err(e.to_string()))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| data_err(format!("missing column '{name}' (have: {headers:?})")))
    };
    let date_idx = find("date")?;
    let value_idx = find(value_column)?;

    let mut records = Vec::new();
    let mut gaps = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2; // header occupies line 1
        let row = row.map_err(|e| data_err(format!("row at line {line}: {e}")))?;
        let date_cell = row
            .get(date_idx)
            .ok_or_else(|| data_err(format!("row at line {line}: missing date cell")))?;
        let timestamp = MonthStamp::parse(date_cell)
            .map_err(|e| data_err(format!("row at line {line}: {e}")))?;
        let value_cell = row
            .get(value_idx)
            .filter(|v| !v.is_empty())
            .ok_or_else(|| {
                data_err(format!(
                    "row at line {line}: missing value in column '{value_column}'"
                ))
            })?;
        let value: f64 = value_cell.parse().map_err(|_| {
            data_err(format!(
                "row at line {line}: unparseable value '{value_cell}'"
            ))
        })?;
        if let Some(prev) = records.last() {
            let prev: &SeriesRecord = prev;
            if timestamp.index() <= prev.timestamp.index() {
                return Err(data_err(format!(
                    "timestamps not increasing at line {line} ({} after {})",
                    timestamp, prev.timestamp
                )));
            }
            if timestamp.index() - prev.timestamp.index() > 1 {
                gaps.push((prev.timestamp, timestamp));
            }
        }
        records.push(SeriesRecord { timestamp, value });
    }
    Ok(LoadedSeries { records, gaps })
}

/// Subtract per-class seasonal means estimated from the first `historic_len`
/// records only (no look-ahead). With the default `period` of 12 the class
/// of a record is its calendar month; other periods use the record position
/// modulo `period`.
pub fn deseasonalize(
    records: &[SeriesRecord],
    historic_len: usize,
    period: usize,
) -> Result<Vec<SeriesRecord>> {
    if period == 0 {
        return Err(Error::InvalidParameter("period must be positive".into()));
    }
    if historic_len < period {
        return Err(Error::InvalidParameter(format!(
            "historic window of {historic_len} records cannot cover a period of {period}"
        )));
    }
    if records.len() < historic_len {
        return Err(Error::InsufficientHistoricData {
            needed: historic_len,
            got: records.len(),
        });
    }
    let class_of = |i: usize, rec: &SeriesRecord| -> usize {
        if period == 12 {
            rec.timestamp.month as usize - 1
        } else {
            i % period
        }
    };
    let mut sums = vec![0.0f64; period];
    let mut counts = vec![0usize; period];
    for (i, rec) in records[..historic_len].iter().enumerate() {
        let c = class_of(i, rec);
        sums[c] += rec.value;
        counts[c] += 1;
    }
    let mut means = vec![0.0f64; period];
    for c in 0..period {
        if counts[c] == 0 {
            return Err(Error::InvalidParameter(if period == 12 {
                format!(
                    "calendar month {} is absent from the historic window; cannot deseasonalize",
                    c + 1
                )
            } else {
                format!("seasonal class {c} is absent from the historic window")
            }));
        }
        means[c] = sums[c] / counts[c] as f64;
    }
    Ok(records
        .iter()
        .enumerate()
        .map(|(i, rec)| SeriesRecord {
            timestamp: rec.timestamp,
            value: rec.value - means[class_of(i, rec)],
        })
        .collect())
}

/// Parameters of a multi-scheme analysis run.
#[derive(Debug, Clone)]
pub struct AnalyzeConfig {
    pub historic_len: usize,
    pub kernels: Vec<KernelKind>,
    pub schemes: Vec<Scheme>,
    pub gamma: f64,
    pub b: f64,
    pub alpha: f64,
    /// Defaults to ceil(sqrt(historic_len)).
    pub burn_in: Option<usize>,
    pub cv_grid: usize,
    pub cv_reps: usize,
    pub cv_seed: u64,
    pub cache_dir: PathBuf,
}

impl AnalyzeConfig {
    pub fn new(historic_len: usize, cache_dir: PathBuf) -> Self {
        AnalyzeConfig {
            historic_len,
            kernels: vec![KernelKind::Dom, KernelKind::Wilcoxon],
            schemes: vec![Scheme::Cusum, Scheme::MMosum, Scheme::PageCusum],
            gamma: 0.0,
            b: 0.4,
            alpha: 0.05,
            burn_in: None,
            cv_grid: LimitFunctionalSpec::DESK_GRID,
            cv_reps: LimitFunctionalSpec::DESK_REPS,
            cv_seed: 1,
            cache_dir,
        }
    }
}

/// Result of monitoring one (kernel, scheme) pair in trace mode.
#[derive(Debug, Clone)]
pub struct PairOutput {
    pub kernel: KernelKind,
    pub scheme: Scheme,
    pub c_alpha: f64,
    /// First monitoring time whose normalized statistic exceeds 1.
    pub stopped_at: Option<usize>,
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone)]
pub struct AnalysisOutput {
    pub historic_len: usize,
    pub gamma: f64,
    pub b: f64,
    pub alpha: f64,
    pub burn_in: usize,
    pub pairs: Vec<PairOutput>,
}

/// Monitor the post-historic part of `values` with every requested
/// (kernel, scheme) pair. Monitoring continues to the end of the series even
/// after an alarm so the full trace is available.
pub fn analyze(values: &[f64], cfg: &AnalyzeConfig) -> Result<AnalysisOutput> {
    if cfg.historic_len < 2 {
        return Err(Error::InsufficientHistoricData {
            needed: 2,
            got: cfg.historic_len,
        });
    }
    if values.len() <= cfg.historic_len {
        return Err(Error::InvalidParameter(format!(
            "series of length {} leaves no observations to monitor after a historic window of {}",
            values.len(),
            cfg.historic_len
        )));
    }
    let burn_in = cfg
        .burn_in
        .unwrap_or_else(|| WeightConfig::default_burn_in(cfg.historic_len));
    let historic = &values[..cfg.historic_len];
    let monitoring = &values[cfg.historic_len..];
    let mut pairs = Vec::new();
    for &kernel_kind in &cfg.kernels {
        for &scheme in &cfg.schemes {
            let spec = LimitFunctionalSpec::new(
                scheme,
                cfg.gamma,
                cfg.b,
                Normalization::Homoscedastic,
                cfg.cv_grid,
                cfg.cv_reps,
                cfg.cv_seed,
            )?;
            let table = critvals::load_or_compute(&spec, &cfg.cache_dir)?;
            let c_alpha = table.critical_value(cfg.alpha)?;
            let weight_cfg = WeightConfig::new(cfg.gamma, burn_in, cfg.b)?;
            let (summary, mut state) = init_monitor(
                historic,
                KernelSpec::new(kernel_kind),
                scheme,
                weight_cfg,
                c_alpha,
            )?;
            state.enable_trace();
            for x in monitoring {
                step(&summary, &mut state, *x)?;
            }
            pairs.push(PairOutput {
                kernel: kernel_kind,
                scheme,
                c_alpha,
                stopped_at: state.stopped_at(),
                trace: state.trace().unwrap_or_default().to_vec(),
            });
        }
    }
    Ok(AnalysisOutput {
        historic_len: cfg.historic_len,
        gamma: cfg.gamma,
        b: cfg.b,
        alpha: cfg.alpha,
        burn_in,
        pairs,
    })
}

// ---------------------------------------------------------------------------
// Output files
// ---------------------------------------------------------------------------

pub const TRACE_SCHEMA: &str = "# seqcp trace v1";
pub const TRACE_COLUMNS: &str = "k\tdetector\tscheme_stat\tweight\tnormalized";

pub fn render_trace(pair: &PairOutput) -> String {
    let mut out = format!("{TRACE_SCHEMA}\n{TRACE_COLUMNS}\n");
    for p in &pair.trace {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            p.k, p.detector, p.scheme_stat, p.weight, p.normalized
        ));
    }
    out
}

pub fn parse_trace(text: &str) -> Result<Vec<TracePoint>> {
    let fail = |reason: String| Error::CacheParse {
        path: "<trace>".into(),
        reason,
    };
    let mut lines = text.lines();
    match lines.next() {
        Some(TRACE_SCHEMA) => {}
        other => return Err(fail(format!("bad trace header {other:?}"))),
    }
    if lines.next() != Some(TRACE_COLUMNS) {
        return Err(fail("bad trace column header".into()));
    }
    let mut points = Vec::new();
    for line in lines {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 5 {
            return Err(fail(format!("expected 5 columns, got '{line}'")));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| fail(format!("bad number '{s}'")))
        };
        points.push(TracePoint {
            k: cols[0]
                .parse()
                .map_err(|_| fail(format!("bad index '{}'", cols[0])))?,
            detector: parse(cols[1])?,
            scheme_stat: parse(cols[2])?,
            weight: parse(cols[3])?,
            normalized: parse(cols[4])?,
        });
    }
    Ok(points)
}

pub const STOPPING_SCHEMA: &str = "# seqcp stopping times v1";

pub fn render_stopping_summary(output: &AnalysisOutput) -> String {
    let mut out = format!(
        "{STOPPING_SCHEMA}\nkernel\tscheme\tstopped_at\tc_alpha\thistoric_len\tgamma\tb\talpha\tburn_in\n"
    );
    for pair in &output.pairs {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            pair.kernel.name(),
            pair.scheme.name(),
            pair.stopped_at
                .map_or("none".to_string(), |k| k.to_string()),
            pair.c_alpha,
            output.historic_len,
            output.gamma,
            output.b,
            output.alpha,
            output.burn_in,
        ));
    }
    out
}

/// Deterministic synthetic monthly series with a seasonal cycle, Gaussian
/// noise and (optionally) a level shift injected `shift_sd` in-sample
/// standard deviations high, starting at monitoring index `shift_at`
/// (0-based, relative to the end of the historic window).
pub fn synthetic_monthly_series(
    seed: u64,
    total: usize,
    historic_len: usize,
    shift_at: Option<usize>,
    shift_sd: f64,
) -> Vec<SeriesRecord> {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    const SEASONAL: [f64; 12] = [
        -8.2, -6.9, -3.1, 1.8, 6.6, 10.3, 12.1, 11.4, 7.9, 3.4, -1.7, -5.8,
    ];
    const NOISE_SD: f64 = 2.0;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let start = MonthStamp::new(1893, 1).unwrap();
    let mut records: Vec<SeriesRecord> = (0..total)
        .map(|i| {
            let idx = start.index() + i as i64;
            let timestamp = MonthStamp {
                year: (idx.div_euclid(12)) as i32,
                month: (idx.rem_euclid(12) + 1) as u32,
            };
            let z: f64 = StandardNormal.sample(&mut rng);
            SeriesRecord {
                timestamp,
                value: SEASONAL[(i % 12) as usize] + NOISE_SD * z,
            }
        })
        .collect();
    if let Some(at) = shift_at {
        // in-sample scale: sd of the deseasonalized historic window
        let adjusted = deseasonalize(&records, historic_len, 12).expect("fixture is regular");
        let hist: Vec<f64> = adjusted[..historic_len].iter().map(|r| r.value).collect();
        let sd = crate::kernels::sample_variance(&hist)
            .expect("historic_len >= 2")
            .sqrt();
        for rec in records.iter_mut().skip(historic_len + at) {
            rec.value += shift_sd * sd;
        }
    }
    records
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_csv(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    fn month(year: i32, month: u32) -> MonthStamp {
        MonthStamp::new(year, month).unwrap()
    }

    fn series(values: &[f64]) -> Vec<SeriesRecord> {
        let start = month(1900, 1);
        values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let idx = start.index() + i as i64;
                SeriesRecord {
                    timestamp: MonthStamp {
                        year: (idx.div_euclid(12)) as i32,
                        month: (idx.rem_euclid(12) + 1) as u32,
                    },
                    value: *v,
                }
            })
            .collect()
    }

    #[test]
    fn month_stamp_parsing() {
        assert_eq!(MonthStamp::parse("1893-01").unwrap(), month(1893, 1));
        assert_eq!(MonthStamp::parse("1893-01-15").unwrap(), month(1893, 1));
        assert!(MonthStamp::parse("1893-13").is_err());
        assert!(MonthStamp::parse("1893").is_err());
        assert!(MonthStamp::parse("half past nine").is_err());
        assert_eq!(month(1900, 12).index() + 1, month(1901, 1).index());
    }

    #[test]
    fn load_csv_happy_path() {
        let f = write_csv("date,temperature\n1893-01,-2.5\n1893-02,0.75\n");
        let loaded = load_csv(f.path(), "temperature").unwrap();
        assert_eq!(loaded.records.len(), 2);
        assert_eq!(loaded.records[1].value, 0.75);
        assert!(loaded.gaps.is_empty());
    }

    #[test]
    fn load_csv_reports_gaps() {
        let f = write_csv("date,t\n1893-01,1\n1893-04,2\n");
        let loaded = load_csv(f.path(), "t").unwrap();
        assert_eq!(loaded.gaps, vec![(month(1893, 1), month(1893, 4))]);
    }

    #[test]
    fn load_csv_errors_name_the_row() {
        let f = write_csv("date,t\n1893-01,1\n1893-02,\n");
        match load_csv(f.path(), "t") {
            Err(Error::CsvData { reason, .. }) => assert!(reason.contains("line 3"), "{reason}"),
            other => panic!("expected csv error, got {other:?}"),
        }

        let f = write_csv("date,t\n1893-01,1\n1893-02,abc\n");
        assert!(matches!(load_csv(f.path(), "t"), Err(Error::CsvData { .. })));

        let f = write_csv("date,t\n1893-02,1\n1893-01,2\n");
        match load_csv(f.path(), "t") {
            Err(Error::CsvData { reason, .. }) => {
                assert!(reason.contains("not increasing"), "{reason}")
            }
            other => panic!("expected ordering error, got {other:?}"),
        }

        let f = write_csv("date,t\n1893-01,1\n");
        assert!(matches!(
            load_csv(f.path(), "missing"),
            Err(Error::CsvData { .. })
        ));
    }

    #[test]
    fn deseasonalize_constant_series_is_zero() {
        let recs = series(&[3.25; 40]);
        let adjusted = deseasonalize(&recs, 24, 12).unwrap();
        assert!(adjusted.iter().all(|r| r.value == 0.0));
    }

    #[test]
    fn deseasonalize_pure_periodic_signal() {
        let pattern: Vec<f64> = (0..12).map(|i| (i as f64) * 2.0 - 5.0).collect();
        let values: Vec<f64> = (0..60).map(|i| pattern[i % 12]).collect();
        let adjusted = deseasonalize(&series(&values), 36, 12).unwrap();
        for r in &adjusted {
            assert_eq!(r.value, 0.0);
        }
    }

    #[test]
    fn deseasonalize_periodic_plus_post_historic_trend() {
        // integer-valued seasonal pattern and trend keep the arithmetic exact
        let pattern: Vec<f64> = (0..12).map(|i| (i as f64) - 6.0).collect();
        let historic_len = 24;
        let values: Vec<f64> = (0..48)
            .map(|i| {
                let trend = if i >= historic_len {
                    (i - historic_len + 1) as f64
                } else {
                    0.0
                };
                pattern[i % 12] + trend
            })
            .collect();
        let adjusted = deseasonalize(&series(&values), historic_len, 12).unwrap();
        for (i, r) in adjusted.iter().enumerate() {
            let expected = if i >= historic_len {
                (i - historic_len + 1) as f64
            } else {
                0.0
            };
            assert_eq!(r.value, expected, "index {i}");
        }
    }

    #[test]
    fn deseasonalize_never_looks_ahead() {
        let recs = synthetic_monthly_series(5, 300, 120, None, 0.0);
        let full = deseasonalize(&recs, 120, 12).unwrap();
        let truncated = deseasonalize(&recs[..200], 120, 12).unwrap();
        assert_eq!(&full[..200], &truncated[..]);
    }

    #[test]
    fn deseasonalize_missing_month_errors() {
        // 12 records spanning a gap: month 2 never appears in the window
        let mut recs = series(&(0..13).map(|i| i as f64).collect::<Vec<_>>());
        recs.remove(1);
        match deseasonalize(&recs, 12, 12) {
            Err(Error::InvalidParameter(msg)) => assert!(msg.contains("month 2"), "{msg}"),
            other => panic!("expected missing-month error, got {other:?}"),
        }
        assert!(deseasonalize(&series(&[0.0; 20]), 6, 12).is_err());
    }

    fn quick_cfg(historic_len: usize, dir: &Path) -> AnalyzeConfig {
        let mut cfg = AnalyzeConfig::new(historic_len, dir.to_path_buf());
        cfg.cv_grid = 200;
        cfg.cv_reps = 300;
        cfg
    }

    #[test]
    fn analyze_burn_in_rows_are_zero_and_stop_is_minimal() {
        let dir = tempfile::tempdir().unwrap();
        let recs = synthetic_monthly_series(11, 360, 120, Some(60), 2.0);
        let adjusted = deseasonalize(&recs, 120, 12).unwrap();
        let values: Vec<f64> = adjusted.iter().map(|r| r.value).collect();
        let out = analyze(&values, &quick_cfg(120, dir.path())).unwrap();
        assert_eq!(out.pairs.len(), 6);
        assert_eq!(out.burn_in, 11);
        for pair in &out.pairs {
            for p in &pair.trace[..out.burn_in] {
                assert_eq!(p.normalized, 0.0);
            }
            let first_crossing = pair.trace.iter().find(|p| p.normalized > 1.0).map(|p| p.k);
            assert_eq!(pair.stopped_at, first_crossing, "{:?}", pair.kernel);
            assert!(pair.stopped_at.is_some(), "2-sd shift must be detected");
            assert_eq!(pair.trace.len(), values.len() - 120);
        }
    }

    #[test]
    fn analyze_wilcoxon_stops_invariant_under_monotone_transform() {
        let dir = tempfile::tempdir().unwrap();
        let recs = synthetic_monthly_series(13, 360, 120, Some(60), 2.0);
        let adjusted = deseasonalize(&recs, 120, 12).unwrap();
        let values: Vec<f64> = adjusted.iter().map(|r| r.value).collect();
        let transformed: Vec<f64> = values.iter().map(|x| (0.2 * x).sinh()).collect();
        let mut cfg = quick_cfg(120, dir.path());
        cfg.kernels = vec![KernelKind::Wilcoxon];
        let a = analyze(&values, &cfg).unwrap();
        let b = analyze(&transformed, &cfg).unwrap();
        for (pa, pb) in a.pairs.iter().zip(&b.pairs) {
            assert_eq!(pa.stopped_at, pb.stopped_at);
        }
    }

    #[test]
    fn trace_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let recs = synthetic_monthly_series(17, 240, 120, None, 0.0);
        let values: Vec<f64> = deseasonalize(&recs, 120, 12)
            .unwrap()
            .iter()
            .map(|r| r.value)
            .collect();
        let mut cfg = quick_cfg(120, dir.path());
        cfg.kernels = vec![KernelKind::Dom];
        cfg.schemes = vec![Scheme::PageCusum];
        let out = analyze(&values, &cfg).unwrap();
        let rendered = render_trace(&out.pairs[0]);
        let parsed = parse_trace(&rendered).unwrap();
        assert_eq!(parsed, out.pairs[0].trace);
        assert!(parse_trace("nonsense").is_err());
    }

    #[test]
    fn analyze_rejects_short_series() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = quick_cfg(120, dir.path());
        let values = vec![0.0; 120];
        assert!(analyze(&values, &cfg).is_err());
    }
}
