//! Monte-Carlo critical values.
//!
//! Under the null hypothesis the weighted monitoring statistics converge to
//! suprema of Wiener-process functionals over (0, 1). For the built-in
//! weight family the limit of the equal-variance (homoscedastic) statistic
//! is, with `u(t) = t b / (1 - t (1 - b))`,
//!
//! * CUSUM:      `sup_t t^{-gamma} |W(t)|`
//! * mMOSUM:     `sup_t t^{-gamma} |W(t) - (1 - t(1-b)) W(u(t))|`
//! * Page-CUSUM: `sup_t t^{-gamma} (1-t) sup_{s<=t} |W(t)/(1-t) - W(s)/(1-s)|`
//!
//! and the unequal-variance (heteroscedastic) normalization leads to the
//! same functionals with `gamma = 0`. Critical values are the upper
//! empirical quantiles of the supremum over a fixed grid, collected from
//! independent replications with counter-derived RNG streams so the result
//! is bit-identical for any worker-thread count.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::monitor::Scheme;
use crate::weights::Normalization;

pub const CACHE_FORMAT_VERSION: u32 = 1;

/// Hard ceiling on grid_points x replications; beyond this the run is
/// almost certainly a typo.
const BUDGET_CAP: u128 = 20_000_000_000;

/// Alphas always materialized in a table.
pub const NAMED_ALPHAS: [f64; 3] = [0.10, 0.05, 0.01];

/// Resolution of the persisted quantile grid.
const GRID_STEPS: usize = 1000;

/// Which limit functional to simulate, plus the Monte-Carlo budget and seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitFunctionalSpec {
    pub scheme: Scheme,
    pub gamma: f64,
    /// mMOSUM discard fraction; normalized to 0 for the other schemes.
    pub b: f64,
    pub normalization: Normalization,
    pub grid_points: usize,
    pub replications: usize,
    pub seed: u64,
}

impl LimitFunctionalSpec {
    pub fn new(
        scheme: Scheme,
        gamma: f64,
        b: f64,
        normalization: Normalization,
        grid_points: usize,
        replications: usize,
        seed: u64,
    ) -> Result<Self> {
        if !(0.0..0.5).contains(&gamma) {
            return Err(Error::InvalidParameter(format!(
                "gamma must lie in [0, 0.5), got {gamma}"
            )));
        }
        if scheme == Scheme::MMosum && !(0.0 < b && b < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "mMOSUM requires b in (0, 1), got {b}"
            )));
        }
        if grid_points < 100 {
            return Err(Error::InvalidParameter(format!(
                "grid_points must be at least 100, got {grid_points}"
            )));
        }
        if replications < 100 {
            return Err(Error::InvalidParameter(format!(
                "replications must be at least 100, got {replications}"
            )));
        }
        Ok(LimitFunctionalSpec {
            scheme,
            gamma,
            b: if scheme == Scheme::MMosum { b } else { 0.0 },
            normalization,
            grid_points,
            replications,
            seed,
        })
    }

    /// Paper-scale default budget.
    pub const FULL_GRID: usize = 10_000;
    pub const FULL_REPS: usize = 50_000;
    /// Quick desk-scale budget.
    pub const DESK_GRID: usize = 2_000;
    pub const DESK_REPS: usize = 5_000;

    /// Stable identifier used as the cache file stem.
    pub fn key(&self) -> String {
        format!(
            "{}_g{}_b{}_{}_n{}_r{}_s{}_v{}",
            self.scheme.name(),
            self.gamma,
            self.b,
            self.normalization.name(),
            self.grid_points,
            self.replications,
            self.seed,
            CACHE_FORMAT_VERSION
        )
    }
}

#[derive(Debug, Clone)]
enum SampleStore {
    /// Ascending suprema, one per replication.
    Full(Vec<f64>),
    /// Persisted form: c at alpha = i / 1000 for i = 1..=999, in that order.
    QuantileGrid(Vec<f64>),
}

/// Simulated quantiles of one limit functional.
#[derive(Debug, Clone)]
pub struct CriticalValueTable {
    pub spec: LimitFunctionalSpec,
    samples: SampleStore,
    /// c_alpha for the named alphas, descending in alpha.
    pub quantiles: Vec<(f64, f64)>,
    /// Unix timestamp of computation; not persisted in the cache format so
    /// stored tables are byte-identical across reruns.
    pub created_at: Option<u64>,
}

impl CriticalValueTable {
    /// Upper empirical quantile: the (floor((1 - alpha) R) + 1)-th order
    /// statistic, so the exceedance fraction stays strictly below alpha.
    pub fn critical_value(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        match &self.samples {
            SampleStore::Full(sorted) => Ok(upper_quantile(sorted, alpha)),
            SampleStore::QuantileGrid(grid) => {
                // conservative: snap alpha down to the grid resolution
                let idx = (alpha * GRID_STEPS as f64 + 1e-9).floor() as usize;
                if idx < 1 {
                    return Err(Error::InvalidParameter(format!(
                        "alpha {alpha} below the cached quantile resolution of {}",
                        1.0 / GRID_STEPS as f64
                    )));
                }
                Ok(grid[idx.min(GRID_STEPS - 1) - 1])
            }
        }
    }

    /// Ascending supremum samples (full tables only).
    pub fn samples(&self) -> Option<&[f64]> {
        match &self.samples {
            SampleStore::Full(s) => Some(s),
            SampleStore::QuantileGrid(_) => None,
        }
    }
}

/// Upper empirical quantile on an ascending sample.
pub fn upper_quantile(sorted: &[f64], alpha: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let r = sorted.len();
    let rank = ((1.0 - alpha) * r as f64).floor() as usize + 1;
    sorted[rank.clamp(1, r) - 1]
}

/// Simulate the limit functional and collect its quantiles.
pub fn simulate_limit(spec: &LimitFunctionalSpec) -> Result<CriticalValueTable> {
    let budget = spec.grid_points as u128 * spec.replications as u128;
    if budget > BUDGET_CAP {
        return Err(Error::BudgetExceeded {
            grid_points: spec.grid_points,
            replications: spec.replications,
        });
    }
    let n = spec.grid_points;
    let scale = 1.0 / (n as f64).sqrt();
    let spec_copy = *spec;
    let mut sups: Vec<f64> = (0..spec.replications as u64)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n),
            move |path, rep| {
                let mut rng = ChaCha12Rng::seed_from_u64(spec_copy.seed);
                rng.set_stream(rep);
                path.clear();
                path.push(0.0);
                let mut w = 0.0;
                for _ in 1..n {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    w += z * scale;
                    path.push(w);
                }
                functional_supremum(
                    spec_copy.scheme,
                    spec_copy.normalization,
                    spec_copy.gamma,
                    spec_copy.b,
                    path,
                )
            },
        )
        .collect();
    sups.sort_by(f64::total_cmp);
    debug_assert!(sups.iter().all(|s| s.is_finite() && *s >= 0.0));
    let quantiles = NAMED_ALPHAS
        .iter()
        .map(|&a| (a, upper_quantile(&sups, a)))
        .collect();
    Ok(CriticalValueTable {
        spec: *spec,
        samples: SampleStore::Full(sups),
        quantiles,
        created_at: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs()),
    })
}

/// Supremum of the chosen functional over a Wiener path sampled at
/// `t = i / N`, `i = 0..N-1`, with `path[0] = 0` and `N = path.len()`.
/// The supremum runs over `i = 1..N-1`; `t = 1` is excluded.
///
/// Exposed so shared-path diagnostics (scheme dominance, normalization
/// cross-checks, grid refinement) can evaluate several functionals on one
/// path.
pub fn functional_supremum(
    scheme: Scheme,
    normalization: Normalization,
    gamma: f64,
    b: f64,
    path: &[f64],
) -> f64 {
    let n = path.len();
    debug_assert!(n >= 2 && path[0] == 0.0);
    let gamma = match normalization {
        Normalization::Homoscedastic => gamma,
        Normalization::Heteroscedastic => 0.0,
    };
    let mut sup = 0.0f64;
    // running extrema of W(s)/(1-s) for the Page functional; starts at the
    // s -> 0 limit so the inner supremum dominates the CUSUM value
    let mut v_min = 0.0f64;
    let mut v_max = 0.0f64;
    for (i, &w) in path.iter().enumerate().skip(1) {
        let t = i as f64 / n as f64;
        let inner = match scheme {
            Scheme::Cusum => w.abs(),
            Scheme::MMosum => {
                let shrink = 1.0 - t * (1.0 - b);
                let j = (i as f64 * b / shrink).floor() as usize;
                (w - shrink * path[j]).abs()
            }
            Scheme::PageCusum => {
                let one_minus_t = 1.0 - t;
                let v = w / one_minus_t;
                v_min = v_min.min(v);
                v_max = v_max.max(v);
                (w - one_minus_t * v_min).max(one_minus_t * v_max - w)
            }
        };
        let value = if gamma == 0.0 { inner } else { t.powf(-gamma) * inner };
        sup = sup.max(value);
    }
    sup
}

// ---------------------------------------------------------------------------
// Reference distribution of sup |W| on [0, 1]
// ---------------------------------------------------------------------------

/// P(sup_{[0,1]} |W| <= x) via the classical reflection series. Independent
/// closed-form check for the CUSUM functional at gamma = 0.
pub fn sup_abs_brownian_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for j in 0..500 {
        let odd = (2 * j + 1) as f64;
        let term = (if j % 2 == 0 { 1.0 } else { -1.0 }) / odd
            * (-odd * odd * std::f64::consts::PI * std::f64::consts::PI / (8.0 * x * x)).exp();
        sum += term;
        if term.abs() < 1e-17 {
            break;
        }
    }
    (4.0 / std::f64::consts::PI * sum).clamp(0.0, 1.0)
}

/// Quantile of sup |W| by bisection on the series CDF.
pub fn sup_abs_brownian_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    let (mut lo, mut hi) = (1e-6, 20.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sup_abs_brownian_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

/// Cache directory: `SEQCP_CACHE_DIR` if set, else `.seqcp-cache` in the
/// working directory.
pub fn default_cache_dir() -> PathBuf {
    std::env::var_os("SEQCP_CACHE_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(".seqcp-cache"))
}

pub fn cache_file_path(spec: &LimitFunctionalSpec, dir: &Path) -> PathBuf {
    dir.join(format!("{}.txt", spec.key()))
}

/// Persist a table. The file is line-oriented text: a header block with the
/// format version and every spec key, the named quantiles, then the quantile
/// grid at alpha resolution 0.001.
pub fn cache_store(table: &CriticalValueTable, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = cache_file_path(&table.spec, dir);
    fs::write(&path, render_table(table))?;
    Ok(path)
}

/// Write a table in the cache format to an explicit path.
pub fn write_table(table: &CriticalValueTable, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, render_table(table))?;
    Ok(())
}

fn render_table(table: &CriticalValueTable) -> String {
    let spec = &table.spec;
    let mut out = String::new();
    out.push_str(&format!("seqcp critical values v{CACHE_FORMAT_VERSION}\n"));
    out.push_str(&format!("scheme {}\n", spec.scheme.name()));
    out.push_str(&format!("gamma {}\n", spec.gamma));
    out.push_str(&format!("b {}\n", spec.b));
    out.push_str(&format!("normalization {}\n", spec.normalization.name()));
    out.push_str(&format!("grid_points {}\n", spec.grid_points));
    out.push_str(&format!("replications {}\n", spec.replications));
    out.push_str(&format!("seed {}\n", spec.seed));
    for (alpha, c) in &table.quantiles {
        out.push_str(&format!("named {alpha} {c}\n"));
    }
    out.push_str(&format!("grid {}\n", GRID_STEPS - 1));
    for i in 1..GRID_STEPS {
        let alpha = i as f64 / GRID_STEPS as f64;
        let c = match &table.samples {
            SampleStore::Full(sorted) => upper_quantile(sorted, alpha),
            SampleStore::QuantileGrid(grid) => grid[i - 1],
        };
        out.push_str(&format!("{alpha} {c}\n"));
    }
    out
}

/// Load the table for `spec` if a cache file with exactly matching keys
/// exists. A missing file or a key mismatch is a miss (`None`); a present
/// but unreadable file is an error, never silently recomputed over.
pub fn cache_load(spec: &LimitFunctionalSpec, dir: &Path) -> Result<Option<CriticalValueTable>> {
    let path = cache_file_path(spec, dir);
    if !path.exists() {
        return Ok(None);
    }
    let table = parse_table(&fs::read_to_string(&path)?, &path.display().to_string())?;
    if table.spec == *spec {
        Ok(Some(table))
    } else {
        Ok(None)
    }
}

/// Cache lookup falling back to simulation (and storing the result).
pub fn load_or_compute(spec: &LimitFunctionalSpec, dir: &Path) -> Result<CriticalValueTable> {
    if let Some(table) = cache_load(spec, dir)? {
        return Ok(table);
    }
    let table = simulate_limit(spec)?;
    cache_store(&table, dir)?;
    Ok(table)
}

pub fn parse_table(text: &str, origin: &str) -> Result<CriticalValueTable> {
    let fail = |reason: String| Error::CacheParse {
        path: origin.to_string(),
        reason,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| fail("empty file".into()))?;
    let expected = format!("seqcp critical values v{CACHE_FORMAT_VERSION}");
    if header != expected {
        if let Some(version) = header.strip_prefix("seqcp critical values v") {
            return Err(fail(format!(
                "unsupported format version {version} (this build reads v{CACHE_FORMAT_VERSION})"
            )));
        }
        return Err(fail(format!("unrecognized header '{header}'")));
    }

    let mut field = |name: &str| -> Result<String> {
        let line = lines
            .next()
            .ok_or_else(|| fail(format!("missing '{name}' line")))?;
        line.strip_prefix(name)
            .and_then(|rest| rest.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| fail(format!("expected '{name} <value>', got '{line}'")))
    };
    let scheme = Scheme::parse(&field("scheme")?)
        .map_err(|e| fail(e.to_string()))?;
    let gamma: f64 = field("gamma")?
        .parse()
        .map_err(|e| fail(format!("bad gamma: {e}")))?;
    let b: f64 = field("b")?
        .parse()
        .map_err(|e| fail(format!("bad b: {e}")))?;
    let normalization = Normalization::parse(&field("normalization")?)
        .map_err(|e| fail(e.to_string()))?;
    let grid_points: usize = field("grid_points")?
        .parse()
        .map_err(|e| fail(format!("bad grid_points: {e}")))?;
    let replications: usize = field("replications")?
        .parse()
        .map_err(|e| fail(format!("bad replications: {e}")))?;
    let seed: u64 = field("seed")?
        .parse()
        .map_err(|e| fail(format!("bad seed: {e}")))?;

    let spec = LimitFunctionalSpec {
        scheme,
        gamma,
        b,
        normalization,
        grid_points,
        replications,
        seed,
    };

    let mut quantiles = Vec::with_capacity(NAMED_ALPHAS.len());
    let mut rest: Vec<&str> = lines.collect();
    let mut idx = 0;
    while idx < rest.len() && rest[idx].starts_with("named ") {
        let mut parts = rest[idx].split_whitespace().skip(1);
        let alpha: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| fail(format!("bad named quantile line '{}'", rest[idx])))?;
        let c: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| fail(format!("bad named quantile line '{}'", rest[idx])))?;
        quantiles.push((alpha, c));
        idx += 1;
    }
    if quantiles.is_empty() {
        return Err(fail("missing named quantiles".into()));
    }
    let grid_header = rest
        .get(idx)
        .ok_or_else(|| fail("missing grid header".into()))?;
    let count: usize = grid_header
        .strip_prefix("grid ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| fail(format!("expected 'grid <count>', got '{grid_header}'")))?;
    if count != GRID_STEPS - 1 {
        return Err(fail(format!(
            "expected {} grid rows, header says {count}",
            GRID_STEPS - 1
        )));
    }
    rest = rest.split_off(idx + 1);
    if rest.len() < count {
        return Err(fail(format!(
            "expected {count} grid rows, found {}",
            rest.len()
        )));
    }
    let mut grid = Vec::with_capacity(count);
    for (i, line) in rest[..count].iter().enumerate() {
        let mut parts = line.split_whitespace();
        let alpha: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| fail(format!("bad grid row {i}: '{line}'")))?;
        let expected_alpha = (i + 1) as f64 / GRID_STEPS as f64;
        if (alpha - expected_alpha).abs() > 1e-9 {
            return Err(fail(format!(
                "grid row {i} has alpha {alpha}, expected {expected_alpha}"
            )));
        }
        let c: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| fail(format!("bad grid row {i}: '{line}'")))?;
        grid.push(c);
    }
    Ok(CriticalValueTable {
        spec,
        samples: SampleStore::QuantileGrid(grid),
        quantiles,
        created_at: None,
    })
}
