//! Seeded multi-start trials around a reference optimum, convergence
//! curves and mean-iteration summaries.
//!
//! Trial `t` draws its start from `ChaCha8Rng::seed_from_u64(base_seed + t)`
//! (ChaCha with 8 rounds, portable across platforms): each coordinate is
//! uniform in `[x*_i (1 - band), x*_i (1 + band)]`, then clipped to the
//! variable bounds.

use std::fmt::{self, Write as _};
use std::io;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::driver::{solve, Algorithm, SolveOptions};
use crate::problems::{BenchmarkDef, BenchmarkId};

/// Bands used for the published tables.
pub const BANDS: [f64; 3] = [0.1, 0.5, 0.8];
/// A converged trial counts as a success when `|f - f*| / |f*|` is below this.
pub const SUCCESS_TOLERANCE: f64 = 1e-4;
pub const DEFAULT_TRIALS: usize = 100;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid trial configuration: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialConfig {
    pub benchmark: BenchmarkId,
    pub algorithm: Algorithm,
    pub n_trials: usize,
    pub band: f64,
    pub base_seed: u64,
    pub options: SolveOptions,
}

impl TrialConfig {
    pub fn new(benchmark: BenchmarkId, algorithm: Algorithm, band: f64) -> Self {
        Self {
            benchmark,
            algorithm,
            n_trials: DEFAULT_TRIALS,
            band,
            base_seed: 0,
            options: SolveOptions::new(algorithm),
        }
    }

    /// Band 0 (every trial starts at the reference) is accepted as a
    /// degenerate case besides the published bands.
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.n_trials == 0 {
            return Err(BenchError::Config("n_trials must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.band) {
            return Err(BenchError::Config(format!("band {} outside [0, 1)", self.band)));
        }
        if self.options.algorithm != self.algorithm {
            return Err(BenchError::Config(format!(
                "options are for {} but the trial runs {}",
                self.options.algorithm, self.algorithm
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub x0: Vec<f64>,
    /// Solver converged and the objective matches the reference.
    pub converged: bool,
    pub iterations: usize,
    /// Termination reason, or `error` when the solve could not run.
    pub termination: String,
    pub f_final: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSet {
    pub config: TrialConfig,
    pub reference_objective: f64,
    pub max_iter: usize,
    /// Ordered by trial index.
    pub records: Vec<TrialRecord>,
}

impl TrialSet {
    pub fn n_converged(&self) -> usize {
        self.records.iter().filter(|r| r.converged).count()
    }

    pub fn success_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.n_converged() as f64 / self.records.len() as f64
    }

    /// Mean iterations over successful trials; `None` if there are none.
    pub fn mean_iterations(&self) -> Option<f64> {
        let its: Vec<usize> = self.records.iter().filter(|r| r.converged).map(|r| r.iterations).collect();
        (!its.is_empty()).then(|| its.iter().sum::<usize>() as f64 / its.len() as f64)
    }

    /// Rebuilds a set from CSV rows. Start points are not stored, so `x0` is
    /// empty, and `max_iter` is the largest recorded count.
    pub fn from_rows(config: TrialConfig, reference_objective: f64, rows: &[TrialRow]) -> Self {
        let mut config = config;
        config.n_trials = rows.len().max(1);
        Self {
            config,
            reference_objective,
            max_iter: rows.iter().map(|r| r.iterations).max().unwrap_or(0),
            records: rows
                .iter()
                .map(|r| TrialRecord {
                    trial: r.trial,
                    seed: r.seed,
                    x0: Vec::new(),
                    converged: r.converged,
                    iterations: r.iterations,
                    termination: r.termination.clone(),
                    f_final: r.f_final,
                    wall_ms: r.wall_ms,
                })
                .collect(),
        }
    }
}

/// Start point for one trial.
pub fn sample_start(reference: &[f64], lower: &[f64], upper: &[f64], band: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    reference
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let v = if band > 0.0 {
                x * rng.gen_range(1.0 - band..=1.0 + band)
            } else {
                x
            };
            v.clamp(lower[i], upper[i])
        })
        .collect()
}

fn run_one(cfg: &TrialConfig, def: &BenchmarkDef, lower: &[f64], upper: &[f64], trial: usize) -> TrialRecord {
    let seed = cfg.base_seed.wrapping_add(trial as u64);
    let x0 = sample_start(&def.reference.x, lower, upper, cfg.band, seed);
    let f_ref = def.reference.objective;
    let start = Instant::now();
    let outcome = solve(&def.problem, &x0, &cfg.options);
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    match outcome {
        Ok(r) => TrialRecord {
            trial,
            seed,
            x0,
            converged: r.termination.converged() && (r.f_star - f_ref).abs() <= SUCCESS_TOLERANCE * f_ref.abs(),
            iterations: r.iterations,
            termination: r.termination.as_str().to_string(),
            f_final: r.f_star,
            wall_ms,
        },
        Err(e) => {
            log::debug!("{} trial {trial}: {e}", cfg.benchmark);
            TrialRecord {
                trial,
                seed,
                x0,
                converged: false,
                iterations: 0,
                termination: "error".into(),
                f_final: f64::NAN,
                wall_ms,
            }
        }
    }
}

/// Runs `cfg.n_trials` solves, in parallel on `jobs` threads (all cores when
/// `None`). Records come back in trial order whatever the schedule.
pub fn run_trials(cfg: &TrialConfig, def: &BenchmarkDef, jobs: Option<usize>) -> Result<TrialSet, BenchError> {
    cfg.validate()?;
    if def.id != cfg.benchmark {
        return Err(BenchError::Config(format!(
            "configuration is for {} but the definition is {}",
            cfg.benchmark, def.id
        )));
    }
    let (lower, upper) = (def.problem.lower_bounds(), def.problem.upper_bounds());
    let work = || -> Vec<TrialRecord> {
        (0..cfg.n_trials)
            .into_par_iter()
            .map(|t| run_one(cfg, def, &lower, &upper, t))
            .collect()
    };
    let records = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| BenchError::Config(e.to_string()))?
            .install(work),
        None => work(),
    };
    Ok(TrialSet {
        config: *cfg,
        reference_objective: def.reference.objective,
        max_iter: cfg.options.max_iter,
        records,
    })
}

/// `(k, fraction of trials that succeeded within k iterations)` for
/// `k = 1..=max_iter`. Empty when the set has no trials.
pub fn convergence_curve(ts: &TrialSet) -> Vec<(usize, f64)> {
    if ts.records.is_empty() {
        return Vec::new();
    }
    let n = ts.records.len() as f64;
    let mut counts = vec![0usize; ts.max_iter + 1];
    for r in ts.records.iter().filter(|r| r.converged) {
        counts[r.iterations.min(ts.max_iter)] += 1;
    }
    let mut total = counts[0];
    (1..=ts.max_iter)
        .map(|k| {
            total += counts[k];
            (k, total as f64 / n)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub trials: usize,
    pub converged: usize,
    pub mean_iterations: Option<f64>,
    /// Percent change of the mean against SQP in the same table.
    pub vs_sqp: Option<f64>,
    pub vs_lsqp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub benchmark: BenchmarkId,
    pub band: f64,
    pub rows: Vec<SummaryRow>,
}

impl SummaryTable {
    pub fn row(&self, algorithm: Algorithm) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm)
    }

    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), BenchError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["benchmark", "band", "algorithm", "trials", "converged", "mean_iterations", "vs_sqp_pct", "vs_lsqp_pct"])?;
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_default();
        for r in &self.rows {
            out.write_record([
                self.benchmark.as_str().to_string(),
                self.band.to_string(),
                r.algorithm.as_str().to_string(),
                r.trials.to_string(),
                r.converged.to_string(),
                opt(r.mean_iterations),
                opt(r.vs_sqp),
                opt(r.vs_lsqp),
            ])?;
        }
        out.flush().map_err(|source| BenchError::Io {
            path: "summary".into(),
            source,
        })?;
        Ok(())
    }
}

fn percent_change(mean: Option<f64>, base: Option<f64>) -> Option<f64> {
    Some((mean? / base? - 1.0) * 100.0)
}

/// Mean iterations per algorithm with percent changes against SQP and LSQP
/// when those algorithms are present.
pub fn summarize(sets: &[TrialSet]) -> Result<SummaryTable, BenchError> {
    let first = sets.first().ok_or_else(|| BenchError::Config("no trial sets to summarize".into()))?;
    let (benchmark, band) = (first.config.benchmark, first.config.band);
    if sets.iter().any(|s| s.config.benchmark != benchmark || s.config.band != band) {
        return Err(BenchError::Config("trial sets mix benchmarks or bands".into()));
    }
    let mut sets: Vec<&TrialSet> = sets.iter().collect();
    sets.sort_by_key(|s| s.config.algorithm);
    let mean_of = |a: Algorithm| sets.iter().find(|s| s.config.algorithm == a).and_then(|s| s.mean_iterations());
    let (sqp, lsqp) = (mean_of(Algorithm::Sqp), mean_of(Algorithm::Lsqp));
    let rows = sets
        .iter()
        .map(|s| {
            let a = s.config.algorithm;
            let mean = s.mean_iterations();
            SummaryRow {
                algorithm: a,
                trials: s.records.len(),
                converged: s.n_converged(),
                mean_iterations: mean,
                vs_sqp: if a == Algorithm::Sqp { None } else { percent_change(mean, sqp) },
                vs_lsqp: if a == Algorithm::Slcp { percent_change(mean, lsqp) } else { None },
            }
        })
        .collect();
    Ok(SummaryTable { benchmark, band, rows })
}

impl fmt::Display for SummaryTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} +/-{:.0}%", self.benchmark, self.band * 100.0)?;
        for r in &self.rows {
            let mean = match r.mean_iterations {
                Some(m) => format!("{m:.2}"),
                None => "-".into(),
            };
            let change = match (r.vs_sqp, r.vs_lsqp) {
                (Some(s), Some(l)) => format!(" ({s:+.2}% vs sqp, {l:+.2}% vs lsqp)"),
                (Some(s), None) => format!(" ({s:+.2}% vs sqp)"),
                (None, Some(l)) => format!(" ({l:+.2}% vs lsqp)"),
                (None, None) => String::new(),
            };
            writeln!(
                f,
                "  {:<5} {:>8}{change}   converged {}/{}",
                r.algorithm.as_str(),
                mean,
                r.converged,
                r.trials
            )?;
        }
        Ok(())
    }
}

const CSV_HEADER: [&str; 7] = ["trial", "seed", "converged", "iterations", "termination", "f_final", "wall_ms"];

/// Writes `trial,seed,converged,iterations,termination,f_final,wall_ms`.
pub fn write_trials_csv<W: io::Write>(ts: &TrialSet, w: W) -> Result<(), BenchError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in &ts.records {
        out.write_record([
            r.trial.to_string(),
            r.seed.to_string(),
            r.converged.to_string(),
            r.iterations.to_string(),
            r.termination.clone(),
            format!("{:.17e}", r.f_final),
            format!("{:.3}", r.wall_ms),
        ])?;
    }
    out.flush().map_err(|source| BenchError::Io {
        path: "trials".into(),
        source,
    })?;
    Ok(())
}

/// Parsed CSV row. Start points are not part of the file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub trial: usize,
    pub seed: u64,
    pub converged: bool,
    pub iterations: usize,
    pub termination: String,
    pub f_final: f64,
    pub wall_ms: f64,
}

pub fn read_trials_csv<R: io::Read>(r: R) -> Result<Vec<TrialRow>, BenchError> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(BenchError::Config(format!("unexpected CSV header {header:?}")));
    }
    let bad = |field: &str, v: &str| BenchError::Config(format!("bad {field} value `{v}`"));
    rdr.records()
        .map(|rec| {
            let rec = rec?;
            let get = |i: usize| rec.get(i).unwrap_or("");
            Ok(TrialRow {
                trial: get(0).parse().map_err(|_| bad("trial", get(0)))?,
                seed: get(1).parse().map_err(|_| bad("seed", get(1)))?,
                converged: get(2).parse().map_err(|_| bad("converged", get(2)))?,
                iterations: get(3).parse().map_err(|_| bad("iterations", get(3)))?,
                termination: get(4).to_string(),
                f_final: get(5).parse().map_err(|_| bad("f_final", get(5)))?,
                wall_ms: get(6).parse().map_err(|_| bad("wall_ms", get(6)))?,
            })
        })
        .collect()
}

/// `{benchmark}_{algo}_{band}.csv`, with the band as a percentage.
pub fn trials_file_name(ts: &TrialSet) -> String {
    format!(
        "{}_{}_{:02.0}.csv",
        ts.config.benchmark,
        ts.config.algorithm,
        ts.config.band * 100.0
    )
}

pub fn write_trials_file(ts: &TrialSet, dir: &Path) -> Result<std::path::PathBuf, BenchError> {
    let path = dir.join(trials_file_name(ts));
    let io_err = |source| BenchError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = std::fs::File::create(&path).map_err(io_err)?;
    write_trials_csv(ts, io::BufWriter::new(file))?;
    Ok(path)
}

const PANEL_W: f64 = 320.0;
const PANEL_H: f64 = 240.0;
const MARGIN: f64 = 48.0;

fn series_color(a: Algorithm) -> &'static str {
    match a {
        Algorithm::Sqp => "#1f77b4",
        Algorithm::Lsqp => "#ff7f0e",
        Algorithm::Slcp => "#2ca02c",
    }
}

/// Convergence-fraction curves, one panel per band and one line per
/// algorithm. The x axis runs to the largest successful iteration count.
pub fn curves_svg(sets: &[TrialSet]) -> String {
    let mut bands: Vec<f64> = Vec::new();
    for s in sets {
        if !bands.contains(&s.config.band) {
            bands.push(s.config.band);
        }
    }
    bands.sort_by(f64::total_cmp);
    let x_max = sets
        .iter()
        .flat_map(|s| s.records.iter().filter(|r| r.converged).map(|r| r.iterations))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let title = sets.first().map(|s| s.config.benchmark.as_str()).unwrap_or("");
    let width = MARGIN + bands.len().max(1) as f64 * (PANEL_W + MARGIN);
    let height = PANEL_H + 2.5 * MARGIN;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="16" text-anchor="middle" font-size="13">{title}: fraction converged vs iteration</text>"#,
        width / 2.0
    );
    for (k, band) in bands.iter().enumerate() {
        let x0 = MARGIN + k as f64 * (PANEL_W + MARGIN);
        let y0 = 1.5 * MARGIN;
        let px = |it: f64| x0 + it / x_max * PANEL_W;
        let py = |frac: f64| y0 + (1.0 - frac) * PANEL_H;
        let _ = writeln!(
            svg,
            r##"<rect x="{x0}" y="{y0}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="#444"/>"##
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">+/-{:.0}%</text>"#,
            x0 + PANEL_W / 2.0,
            y0 - 6.0,
            band * 100.0
        );
        for tick in 0..=4 {
            let f = tick as f64 / 4.0;
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="end">{f:.2}</text>"#,
                x0 - 4.0,
                py(f) + 4.0
            );
            let it = (x_max * f).round();
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" text-anchor="middle">{it}</text>"#,
                px(it),
                y0 + PANEL_H + 14.0
            );
        }
        for s in sets.iter().filter(|s| s.config.band == *band) {
            let curve = convergence_curve(s);
            if curve.is_empty() {
                continue;
            }
            let mut d = format!("M{:.2},{:.2}", px(0.0), py(0.0));
            let mut last = 0.0;
            for (it, frac) in curve.iter().take_while(|(it, _)| (*it as f64) <= x_max) {
                if *frac != last {
                    let _ = write!(d, " H{:.2} V{:.2}", px(*it as f64), py(*frac));
                    last = *frac;
                }
            }
            let _ = write!(d, " H{:.2}", px(x_max));
            let _ = writeln!(
                svg,
                r#"<path d="{d}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
                series_color(s.config.algorithm)
            );
        }
    }
    let mut algos: Vec<Algorithm> = sets.iter().map(|s| s.config.algorithm).collect();
    algos.sort();
    algos.dedup();
    for (i, a) in algos.iter().enumerate() {
        let x = MARGIN + i as f64 * 80.0;
        let y = height - 14.0;
        let _ = writeln!(
            svg,
            r#"<line x1="{x}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="2"/><text x="{}" y="{y}">{a}</text>"#,
            y - 4.0,
            x + 20.0,
            y - 4.0,
            series_color(*a),
            x + 24.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `{benchmark}_curves.svg` into `dir`.
pub fn write_curves_svg(sets: &[TrialSet], dir: &Path) -> Result<std::path::PathBuf, BenchError> {
    let name = sets.first().map(|s| s.config.benchmark.as_str()).unwrap_or("empty");
    let path = dir.join(format!("{name}_curves.svg"));
    std::fs::write(&path, curves_svg(sets)).map_err(|source| BenchError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}
