//! Grid scans over `(curve, q, δ)`, CSV persistence, log-log exponent fits and
//! the normalized-ratio reports used to check the growth of `A(q, δ)`.

use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::warn;
use rayon::prelude::*;

use crate::counting::count_near;
use crate::curves::MongeCurve3;
use crate::error::{arg, Error, Result};
use crate::kv::{self, KeyValues};
use crate::linearize::{aggregate_with, block_params, sandwich_check};
use crate::planar_sums::error_term;

/// Persisted column order.
pub const CSV_HEADER: [&str; 11] =
    ["curve", "q", "delta", "A_lo", "A_hi", "B1", "B2", "E", "q0", "r", "runtime_ms"];

/// How `δ` is chosen for each `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaRule {
    Fixed(f64),
    /// `δ = c q^{-θ}`.
    Power { c: f64, theta: f64 },
    /// `δ = c q^{-1/5} (ln q)^{2/5}`.
    Theorem { c: f64 },
}

impl DeltaRule {
    pub fn delta(&self, q: u64) -> f64 {
        let qf = q as f64;
        match *self {
            DeltaRule::Fixed(d) => d,
            DeltaRule::Power { c, theta } => c * qf.powf(-theta),
            DeltaRule::Theorem { c } => c * qf.powf(-0.2) * qf.ln().powf(0.4),
        }
    }
}

impl FromStr for DeltaRule {
    type Err = Error;

    /// `fixed:<δ>`, `power:<c>,<θ>` or `theorem:<c>`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("delta rule `{s}`: expected `kind:params`")))?;
        let nums = kv::split_list(rest)
            .map(|v| kv::parse_f64("delta rule", v))
            .collect::<Result<Vec<_>>>()?;
        let rule = match (kind.trim(), nums.as_slice()) {
            ("fixed", &[d]) => DeltaRule::Fixed(d),
            ("power", &[c, theta]) => {
                if !(0.0..1.0).contains(&theta) {
                    return arg(format!("theta = {theta} must lie in [0, 1)"));
                }
                DeltaRule::Power { c, theta }
            }
            ("theorem", &[c]) => DeltaRule::Theorem { c },
            _ => return Err(Error::Parse(format!("delta rule `{s}` not understood"))),
        };
        Ok(rule)
    }
}

impl fmt::Display for DeltaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeltaRule::Fixed(d) => write!(f, "fixed:{d}"),
            DeltaRule::Power { c, theta } => write!(f, "power:{c},{theta}"),
            DeltaRule::Theorem { c } => write!(f, "theorem:{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    pub curves: Vec<String>,
    pub q_list: Vec<u64>,
    pub rule: DeltaRule,
    pub workers: usize,
    pub output: Option<PathBuf>,
    /// Record wall-clock times; when off `runtime_ms` is written as 0 and the
    /// CSV is byte-reproducible.
    pub timing: bool,
}

/// `10^3, 10^4, ..., 10^7`.
pub fn default_q_list() -> Vec<u64> {
    (3..=7).map(|k| 10u64.pow(k)).collect()
}

impl ScanConfig {
    pub fn new(curves: Vec<String>, q_list: Vec<u64>, rule: DeltaRule) -> Self {
        Self { curves, q_list, rule, workers: 1, output: None, timing: true }
    }

    /// Keys: `curves`, `delta_rule` (required); `q_list`, `workers`,
    /// `output`, `timing` (optional).
    pub fn from_kv(kv: &KeyValues) -> Result<Self> {
        for key in kv.keys() {
            if !["curves", "q_list", "delta_rule", "workers", "output", "timing"].contains(&key) {
                return Err(Error::Parse(format!("unknown config key `{key}`")));
            }
        }
        let curves: Vec<String> = kv::split_list(kv.require("curves")?).map(String::from).collect();
        let q_list = match kv.get("q_list") {
            Some(v) => kv::split_list(v)
                .map(|s| {
                    let x = kv::parse_f64("q_list", s)?;
                    if x < 1.0 || x.fract() != 0.0 {
                        return Err(Error::Parse(format!("q_list entry `{s}` is not a positive integer")));
                    }
                    Ok(x as u64)
                })
                .collect::<Result<Vec<_>>>()?,
            None => default_q_list(),
        };
        let rule: DeltaRule = kv.require("delta_rule")?.parse()?;
        let workers = match kv.get_f64("workers")? {
            Some(w) if w >= 1.0 => w as usize,
            Some(w) => return arg(format!("workers = {w} must be positive")),
            None => 1,
        };
        let timing = match kv.get("timing") {
            None | Some("true") => true,
            Some("false") => false,
            Some(v) => return Err(Error::Parse(format!("timing = `{v}`: expected true/false"))),
        };
        let cfg = Self {
            curves,
            q_list,
            rule,
            workers,
            output: kv.get("output").map(PathBuf::from),
            timing,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_kv(&KeyValues::read(path)?)
    }

    fn validate(&self) -> Result<()> {
        if self.curves.is_empty() || self.q_list.is_empty() {
            return arg("scan needs at least one curve and one q");
        }
        if self.workers == 0 {
            return arg("workers must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanRecord {
    pub curve: String,
    pub q: u64,
    pub delta: f64,
    pub a_lo: u64,
    pub a_hi: u64,
    /// Upper end of the `B1(q, δ)` certainty interval.
    pub b1: Option<u64>,
    /// Lower end of the `B2(q, δ)` certainty interval.
    pub b2: Option<u64>,
    pub e: Option<f64>,
    pub q0: u64,
    pub r: u64,
    pub runtime_ms: f64,
    /// Outcome of the sandwich check when `q0(δ/2) >= 1`; not persisted.
    pub sandwich: Option<bool>,
}

impl ScanRecord {
    /// Numeric value of a CSV column, by header name.
    pub fn field(&self, name: &str) -> Result<Option<f64>> {
        Ok(match name {
            "q" => Some(self.q as f64),
            "delta" => Some(self.delta),
            "A_lo" => Some(self.a_lo as f64),
            "A_hi" => Some(self.a_hi as f64),
            "B1" => self.b1.map(|v| v as f64),
            "B2" => self.b2.map(|v| v as f64),
            "E" => self.e,
            "q0" => Some(self.q0 as f64),
            "r" => Some(self.r as f64),
            "runtime_ms" => Some(self.runtime_ms),
            _ => return arg(format!("unknown field `{name}`")),
        })
    }
}

/// A cell the scan could not evaluate.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedCell {
    pub curve: String,
    pub q: u64,
    pub delta: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutput {
    pub records: Vec<ScanRecord>,
    pub skipped: Vec<SkippedCell>,
}

impl ScanOutput {
    /// Records whose sandwich check failed.
    pub fn sandwich_failures(&self) -> impl Iterator<Item = &ScanRecord> {
        self.records.iter().filter(|r| r.sandwich == Some(false))
    }
}

/// Measures one `(curve, q, δ)` cell.
pub fn measure_cell(curve: &MongeCurve3, q: u64, delta: f64, timing: bool) -> Result<ScanRecord> {
    let start = Instant::now();
    let a = count_near(curve, q, delta)?;
    let params = block_params(q, delta, curve.bounds.c4);
    let (b1, b2, e) = if params.valid {
        let agg = aggregate_with(curve, &params, delta)?;
        (Some(agg.b1.hi), Some(agg.b2.lo), Some(error_term(curve, q, delta)?))
    } else {
        (None, None, None)
    };
    let sandwich = if block_params(q, delta / 2.0, curve.bounds.c4).valid {
        Some(sandwich_check(curve, q, delta)?.holds)
    } else {
        None
    };
    Ok(ScanRecord {
        curve: curve.id.clone(),
        q,
        delta,
        a_lo: a.count_lo,
        a_hi: a.count_hi,
        b1,
        b2,
        e,
        q0: params.q0,
        r: params.r,
        runtime_ms: if timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 },
        sandwich,
    })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Numeric(format!("thread pool: {e}")))
}

pub fn scan(config: &ScanConfig) -> Result<ScanOutput> {
    config.validate()?;
    let curves = config
        .curves
        .iter()
        .map(|id| MongeCurve3::resolve(id))
        .collect::<Result<Vec<_>>>()?;
    let mut cells = Vec::new();
    let mut skipped = Vec::new();
    for curve in &curves {
        for &q in &config.q_list {
            let delta = config.rule.delta(q);
            if delta > 0.0 && delta < 0.5 {
                cells.push((curve, q, delta));
            } else {
                let reason = format!("rule {} gives delta = {delta} outside (0, 1/2)", config.rule);
                warn!("skipping {} q = {q}: {reason}", curve.id);
                skipped.push(SkippedCell { curve: curve.id.clone(), q, delta, reason });
            }
        }
    }
    let timing = config.timing;
    let mut records = pool(config.workers)?.install(|| {
        cells
            .par_iter()
            .map(|&(curve, q, delta)| measure_cell(curve, q, delta, timing))
            .collect::<Result<Vec<_>>>()
    })?;
    records.sort_by(|a, b| {
        (a.curve.as_str(), a.q)
            .cmp(&(b.curve.as_str(), b.q))
            .then(a.delta.total_cmp(&b.delta))
    });
    Ok(ScanOutput { records, skipped })
}

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(records: &[ScanRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let opt_u = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in records {
        w.write_record([
            r.curve.clone(),
            r.q.to_string(),
            fmt_float(r.delta),
            r.a_lo.to_string(),
            r.a_hi.to_string(),
            opt_u(r.b1),
            opt_u(r.b2),
            r.e.map(fmt_float).unwrap_or_default(),
            r.q0.to_string(),
            r.r.to_string(),
            fmt_float(r.runtime_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<ScanRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    if header != CSV_HEADER {
        return Err(Error::Parse(format!("unexpected CSV header {header:?}")));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let get = |i: usize| row.get(i).unwrap_or("");
        let u = |i: usize| {
            get(i).parse::<u64>().map_err(|e| Error::Parse(format!("column {}: {e}", CSV_HEADER[i])))
        };
        let f = |i: usize| kv::parse_f64(CSV_HEADER[i], get(i));
        let opt_u = |i: usize| if get(i).is_empty() { Ok(None) } else { u(i).map(Some) };
        let opt_f = |i: usize| if get(i).is_empty() { Ok(None) } else { f(i).map(Some) };
        out.push(ScanRecord {
            curve: get(0).to_string(),
            q: u(1)?,
            delta: f(2)?,
            a_lo: u(3)?,
            a_hi: u(4)?,
            b1: opt_u(5)?,
            b2: opt_u(6)?,
            e: opt_f(7)?,
            q0: u(8)?,
            r: u(9)?,
            runtime_ms: f(10)?,
            sandwich: None,
        });
    }
    Ok(out)
}

/// Ordinary least squares of `ln y` on `ln x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

pub fn fit_exponent(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < 3 {
        return arg(format!("need at least 3 points, got {}", points.len()));
    }
    if let Some(&(x, y)) = points.iter().find(|&&(x, y)| !(x > 0.0 && y > 0.0)) {
        return arg(format!("nonpositive point ({x}, {y})"));
    }
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return arg("all x values are equal");
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(FitResult { slope, intercept, r_squared, n_points: points.len() })
}

/// Fits `y_field` against `x_field`; records missing either value are skipped.
pub fn fit_records(records: &[ScanRecord], x_field: &str, y_field: &str) -> Result<FitResult> {
    let mut pts = Vec::new();
    for r in records {
        if let (Some(x), Some(y)) = (r.field(x_field)?, r.field(y_field)?) {
            pts.push((x, y));
        }
    }
    fit_exponent(&pts)
}

/// Which term of `δ^2 q + q^{3/5} (ln q)^{4/5}` is larger.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DominantTerm {
    Main,
    Secondary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremCell {
    pub q: u64,
    pub delta: f64,
    pub a_lo: u64,
    pub a_hi: u64,
    /// `A_hi / (δ^2 q + q^{3/5} (ln q)^{4/5})`.
    pub upper_ratio: f64,
    /// `A_lo / (δ^2 q)`.
    pub lower_ratio: f64,
    /// `A_lo / (2 δ q)` and `A_hi / (2 δ q)`, the planar-curve normalization.
    pub planar_ratio: (f64, f64),
    pub dominant: DominantTerm,
    pub sandwich: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremReport {
    pub curve: String,
    pub rule: DeltaRule,
    pub cells: Vec<TheoremCell>,
    pub skipped: Vec<SkippedCell>,
}

fn spread(vals: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = vals.collect();
    if v.is_empty() {
        return None;
    }
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    Some(max / min)
}

impl TheoremReport {
    /// `max / min` of the upper-bound ratio; `None` without cells.
    pub fn upper_spread(&self) -> Option<f64> {
        spread(self.cells.iter().map(|c| c.upper_ratio))
    }

    pub fn lower_spread(&self) -> Option<f64> {
        spread(self.cells.iter().map(|c| c.lower_ratio))
    }

    pub fn lower_min(&self) -> Option<f64> {
        self.cells.iter().map(|c| c.lower_ratio).reduce(f64::min)
    }

    /// Exponent of `A_lo` against `q`, when at least three cells exist.
    pub fn fit(&self) -> Option<FitResult> {
        let pts: Vec<(f64, f64)> = self.cells.iter().map(|c| (c.q as f64, c.a_lo as f64)).collect();
        fit_exponent(&pts).ok()
    }

    pub fn sandwich_ok(&self) -> bool {
        self.cells.iter().all(|c| c.sandwich != Some(false))
    }
}

/// `q^{3/5} (ln q)^{4/5}`.
pub fn secondary_term(q: u64) -> f64 {
    let qf = q as f64;
    qf.powf(0.6) * qf.ln().powf(0.8)
}

pub fn verify_theorem(curve: &MongeCurve3, q_list: &[u64], rule: DeltaRule, workers: usize) -> Result<TheoremReport> {
    if !curve.torsion {
        warn!("curve `{}` is not torsion-certified; ratios are diagnostic only", curve.id);
    }
    let mut cfg = ScanConfig::new(vec![curve.id.clone()], q_list.to_vec(), rule);
    cfg.workers = workers;
    let mut skipped = Vec::new();
    let mut jobs = Vec::new();
    for &q in q_list {
        let delta = rule.delta(q);
        if delta > 0.0 && delta < 0.5 {
            jobs.push((q, delta));
        } else {
            let reason = format!("rule {rule} gives delta = {delta} outside (0, 1/2)");
            warn!("skipping q = {q}: {reason}");
            skipped.push(SkippedCell { curve: curve.id.clone(), q, delta, reason });
        }
    }
    let cells = pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|&(q, delta)| {
                let a = count_near(curve, q, delta)?;
                let sandwich = if block_params(q, delta / 2.0, curve.bounds.c4).valid {
                    Some(sandwich_check(curve, q, delta)?.holds)
                } else {
                    None
                };
                let qf = q as f64;
                let main = delta * delta * qf;
                let second = secondary_term(q);
                Ok(TheoremCell {
                    q,
                    delta,
                    a_lo: a.count_lo,
                    a_hi: a.count_hi,
                    upper_ratio: a.count_hi as f64 / (main + second),
                    lower_ratio: a.count_lo as f64 / main,
                    planar_ratio: (a.count_lo as f64 / (2.0 * delta * qf), a.count_hi as f64 / (2.0 * delta * qf)),
                    dominant: if main >= second { DominantTerm::Main } else { DominantTerm::Secondary },
                    sandwich,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(TheoremReport { curve: curve.id.clone(), rule, cells, skipped })
}

/// Smallest `c` in `c_grid` for which the theorem rule keeps
/// `A_lo / (δ^2 q) >= floor` on every `q` it admits (at least one).
pub fn estimate_theorem_constant(
    curve: &MongeCurve3,
    q_list: &[u64],
    c_grid: &[f64],
    floor: f64,
) -> Result<Option<f64>> {
    let mut grid = c_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    for c in grid {
        let rep = verify_theorem(curve, q_list, DeltaRule::Theorem { c }, 1)?;
        if rep.lower_min().is_some_and(|m| m >= floor) {
            return Ok(Some(c));
        }
    }
    Ok(None)
}
