//! `nearpoints`: CSV front end for the counting and bounding kernels.
//!
//! Exit status is 0 on success, 1 when a sandwich check fails and 2 on any
//! other error.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use nearpoints::counting::{count_near, count_near_exact};
use nearpoints::harness::{self, default_q_list, DeltaRule, ScanConfig};
use nearpoints::linearize::sandwich_check;
use nearpoints::planar_sums::{error_term, lemma3_count, lemma4_sum, DEFAULT_EPSILON};
use nearpoints::selberg::{SelbergSystem, Side};
use nearpoints::sublevel::{cell_bound_check, classify, measure_sublevel, prop_sum};
use nearpoints::{Interval, MongeCurve3, PlanarCurve, Profile, RatPoly};

#[derive(Parser)]
#[command(name = "nearpoints", version, about = "Integral points near dilated space curves")]
struct Cli {
    /// Size of the global worker pool (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct CellArgs {
    /// Built-in id (veronese, parabola, cubic) or a curve file.
    #[arg(long)]
    curve: String,
    #[arg(long)]
    q: u64,
    #[arg(long)]
    delta: f64,
}

#[derive(Args)]
struct LemmaArgs {
    /// Planar id (x2, half_x2, x2_x3) or polynomial coefficients `c0, c1, ...`.
    #[arg(long)]
    phi: String,
    /// Interval `a,b`.
    #[arg(long = "K", allow_hyphen_values = true)]
    k: String,
    #[arg(long = "U")]
    u: f64,
    #[arg(long)]
    delta: f64,
}

#[derive(Subcommand)]
enum Cmd {
    /// A(q, δ) as one CSV row.
    Count {
        #[command(flatten)]
        cell: CellArgs,
        /// Exact rational arithmetic instead of the guarded float path.
        #[arg(long)]
        exact: bool,
    },
    /// B2(q, δ/2) <= A(q, δ) <= B1(q, 3δ/2).
    Sandwich {
        #[command(flatten)]
        cell: CellArgs,
    },
    /// Majorant and minorant coefficients for the interval (α, β).
    Selberg {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long = "J")]
        j: usize,
    },
    /// Sum of sublevel-set measures over 0 < |j| <= J against its bound.
    Prop5 {
        #[arg(long = "curve-planar", default_value = "x2")]
        curve_planar: String,
        #[arg(long = "J")]
        j: u32,
        #[arg(long)]
        lambda: f64,
    },
    /// Per-level measures of {x : ‖j1 x + j2 f(x)‖ < λ} with their bounds.
    Measure {
        #[arg(long = "curve-planar", default_value = "x2")]
        curve_planar: String,
        #[arg(long, allow_hyphen_values = true)]
        j1: i64,
        #[arg(long, allow_hyphen_values = true)]
        j2: i64,
        #[arg(long)]
        lambda: f64,
    },
    /// Count of (u, t) with ‖u φ(t/u)‖ < δ.
    Lemma3 {
        #[command(flatten)]
        args: LemmaArgs,
        #[arg(long, default_value_t = DEFAULT_EPSILON)]
        epsilon: f64,
    },
    /// Sum of ‖u φ(t/u)‖^{-Λ} over the pairs at distance at least δ.
    Lemma4 {
        #[command(flatten)]
        args: LemmaArgs,
        #[arg(long = "Lambda")]
        lambda: f64,
    },
    /// Exponential-sum error term E(q, δ).
    Eterm {
        #[command(flatten)]
        cell: CellArgs,
    },
    /// Grid scan driven by a key-value config file.
    Scan {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output path; `-` for standard output.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Log-log least squares between two columns of a scan CSV.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "q")]
        x: String,
        #[arg(long, default_value = "A_lo")]
        y: String,
    },
    /// Normalized ratios of A(q, δ) under a δ rule.
    Verify {
        #[arg(long)]
        curve: String,
        /// `fixed:<δ>`, `power:<c>,<θ>` or `theorem:<c>`.
        #[arg(long)]
        rule: String,
        /// Comma-separated q values (default 1e3..1e7 by decades).
        #[arg(long)]
        q_list: Option<String>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
}

enum Outcome {
    Ok,
    SandwichFailed,
}

fn stdout_csv() -> csv::Writer<io::StdoutLock<'static>> {
    csv::Writer::from_writer(io::stdout().lock())
}

fn f(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_interval(s: &str) -> Result<Interval> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, b] = parts.as_slice() else {
        bail!("interval `{s}`: expected `a,b`");
    };
    Ok(Interval::new(a.parse()?, b.parse()?)?)
}

fn resolve_phi(id: &str) -> Result<Arc<dyn Profile>> {
    if let Some(p) = PlanarCurve::builtin(id) {
        return Ok(p.profile().clone());
    }
    let poly = RatPoly::parse(id).with_context(|| format!("`{id}` is neither a planar id nor coefficients"))?;
    Ok(Arc::new(poly))
}

fn parse_q_list(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|v| {
            let x: f64 = v.trim().parse().with_context(|| format!("q value `{v}`"))?;
            if x < 1.0 || x.fract() != 0.0 {
                bail!("q value `{v}` is not a positive integer");
            }
            Ok(x as u64)
        })
        .collect()
}

fn run(cmd: Cmd) -> Result<Outcome> {
    match cmd {
        Cmd::Count { cell, exact } => {
            let curve = MongeCurve3::resolve(&cell.curve)?;
            let r = if exact {
                count_near_exact(&curve, cell.q, cell.delta)?
            } else {
                count_near(&curve, cell.q, cell.delta)?
            };
            let mut w = stdout_csv();
            w.write_record(["curve", "q", "delta", "A_lo", "A_hi", "uncertain", "exact", "runtime_ms"])?;
            w.write_record([
                curve.id.clone(),
                r.q.to_string(),
                f(r.delta),
                r.count_lo.to_string(),
                r.count_hi.to_string(),
                r.uncertain.to_string(),
                r.exact.to_string(),
                f(r.elapsed_ms),
            ])?;
            w.flush()?;
        }
        Cmd::Sandwich { cell } => {
            let curve = MongeCurve3::resolve(&cell.curve)?;
            let r = sandwich_check(&curve, cell.q, cell.delta)?;
            let mut w = stdout_csv();
            w.write_record(["q", "delta", "B2_half", "A_lo", "A_hi", "B1_threehalf", "holds"])?;
            w.write_record([
                r.q.to_string(),
                f(r.delta),
                r.b2_half.to_string(),
                r.a_mid.count_lo.to_string(),
                r.a_mid.count_hi.to_string(),
                r.b1_threehalf.to_string(),
                r.holds.to_string(),
            ])?;
            w.flush()?;
            if !r.holds {
                return Ok(Outcome::SandwichFailed);
            }
        }
        Cmd::Selberg { alpha, beta, j } => {
            let s = SelbergSystem::new(alpha, beta, j)?;
            let mut w = stdout_csv();
            w.write_record(["j", "re_plus", "im_plus", "re_minus", "im_minus"])?;
            let jm = j as i64;
            for k in -jm..=jm {
                let (p, m) = (s.coeff(Side::Plus, k), s.coeff(Side::Minus, k));
                w.write_record([k.to_string(), f(p.re), f(p.im), f(m.re), f(m.im)])?;
            }
            w.flush()?;
        }
        Cmd::Prop5 { curve_planar, j, lambda } => {
            let planar = PlanarCurve::resolve(&curve_planar)?;
            let r = prop_sum(&planar, j, lambda)?;
            let mut w = stdout_csv();
            w.write_record(["J", "lambda", "sum", "bound", "ratio"])?;
            w.write_record([r.j.to_string(), f(r.lambda), f(r.sum), f(r.bound), f(r.ratio)])?;
            w.flush()?;
        }
        Cmd::Measure { curve_planar, j1, j2, lambda } => {
            let planar = PlanarCurve::resolve(&curve_planar)?;
            let q = classify(&planar, j1, j2, lambda)?;
            let total = measure_sublevel(&q)?.total;
            let mut w = stdout_csv();
            w.write_record(["p", "measure", "bound", "ratio", "case"])?;
            for row in cell_bound_check(&q)? {
                w.write_record([
                    row.p.to_string(),
                    f(row.measure),
                    f(row.bound),
                    f(row.ratio),
                    format!("{:?}", row.case),
                ])?;
            }
            w.write_record(["total".to_string(), f(total), String::new(), String::new(), String::new()])?;
            w.flush()?;
        }
        Cmd::Lemma3 { args, epsilon } => {
            let phi = resolve_phi(&args.phi)?;
            let r = lemma3_count(phi.as_ref(), parse_interval(&args.k)?, args.delta, args.u, epsilon)?;
            write_lemma(&r)?;
        }
        Cmd::Lemma4 { args, lambda } => {
            let phi = resolve_phi(&args.phi)?;
            let r = lemma4_sum(phi.as_ref(), parse_interval(&args.k)?, args.delta, lambda, args.u)?;
            write_lemma(&r)?;
        }
        Cmd::Eterm { cell } => {
            let curve = MongeCurve3::resolve(&cell.curve)?;
            let e = error_term(&curve, cell.q, cell.delta)?;
            let mut w = stdout_csv();
            w.write_record(["curve", "q", "delta", "E"])?;
            w.write_record([curve.id.clone(), cell.q.to_string(), f(cell.delta), f(e)])?;
            w.flush()?;
        }
        Cmd::Scan { config, output } => {
            let mut cfg = ScanConfig::read(&config)?;
            if output.is_some() {
                cfg.output = output;
            }
            let out = harness::scan(&cfg)?;
            match cfg.output.as_deref() {
                Some(p) if p.as_os_str() != "-" => {
                    let file = File::create(p).with_context(|| format!("creating {}", p.display()))?;
                    harness::write_csv(&out.records, io::BufWriter::new(file))?;
                }
                _ => harness::write_csv(&out.records, io::stdout().lock())?,
            }
            for s in &out.skipped {
                eprintln!("skipped {} q={}: {}", s.curve, s.q, s.reason);
            }
            let failed: Vec<_> = out.sandwich_failures().collect();
            for r in &failed {
                eprintln!("sandwich FAILED for {} q={} delta={}", r.curve, r.q, r.delta);
            }
            if !failed.is_empty() {
                return Ok(Outcome::SandwichFailed);
            }
        }
        Cmd::Fit { input, x, y } => {
            let file = File::open(&input).with_context(|| format!("opening {}", input.display()))?;
            let records = harness::read_csv(file)?;
            let fit = harness::fit_records(&records, &x, &y)?;
            let mut w = stdout_csv();
            w.write_record(["x", "y", "slope", "intercept", "r_squared", "n"])?;
            w.write_record([
                x,
                y,
                f(fit.slope),
                f(fit.intercept),
                f(fit.r_squared),
                fit.n_points.to_string(),
            ])?;
            w.flush()?;
        }
        Cmd::Verify { curve, rule, q_list, workers } => {
            let curve = MongeCurve3::resolve(&curve)?;
            let rule: DeltaRule = rule.parse()?;
            let qs = match q_list {
                Some(s) => parse_q_list(&s)?,
                None => default_q_list(),
            };
            let rep = harness::verify_theorem(&curve, &qs, rule, workers)?;
            let mut w = stdout_csv();
            w.write_record([
                "curve", "q", "delta", "A_lo", "A_hi", "upper_ratio", "lower_ratio", "planar_lo", "planar_hi",
                "dominant", "sandwich",
            ])?;
            for c in &rep.cells {
                w.write_record([
                    rep.curve.clone(),
                    c.q.to_string(),
                    f(c.delta),
                    c.a_lo.to_string(),
                    c.a_hi.to_string(),
                    f(c.upper_ratio),
                    f(c.lower_ratio),
                    f(c.planar_ratio.0),
                    f(c.planar_ratio.1),
                    format!("{:?}", c.dominant),
                    c.sandwich.map(|b| b.to_string()).unwrap_or_default(),
                ])?;
            }
            w.flush()?;
            for s in &rep.skipped {
                eprintln!("skipped q={}: {}", s.q, s.reason);
            }
            if let Some(sp) = rep.upper_spread() {
                eprintln!("upper ratio max/min = {sp:.4}");
            }
            if let Some(fit) = rep.fit() {
                eprintln!("A_lo ~ q^{:.4} (r^2 = {:.6})", fit.slope, fit.r_squared);
            }
            if !rep.sandwich_ok() {
                return Ok(Outcome::SandwichFailed);
            }
        }
    }
    Ok(Outcome::Ok)
}

fn write_lemma(r: &nearpoints::planar_sums::LemmaSumReport) -> Result<()> {
    let mut w = stdout_csv();
    w.write_record(["U", "delta", "value", "bound", "ratio", "pairs"])?;
    w.write_record([f(r.u), f(r.delta), f(r.count_or_sum), f(r.bound), f(r.ratio), r.pairs.to_string()])?;
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.cmd) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::SandwichFailed) => ExitCode::from(1),
        Err(e) => {
            let _ = writeln!(io::stderr(), "error: {e:#}");
            ExitCode::from(2)
        }
    }
}
