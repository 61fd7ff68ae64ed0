//! Experiment harness: runs the simulators at configurable scale, writes CSV
//! outputs and computes the summary statistics over them.
//!
//! Every command is a plain function so it can be driven from tests as well
//! as from the `critbd` binary.

use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use critbd::empirics::log_grid;
use critbd::{
    ecdf, fit_tail_slope, ks_two_sample, make_stream, simulate_hitting_direct,
    simulate_hitting_hybrid, solve_truncated, HybridConfig, KsResult, ModelParams, Outcome,
    PersistenceEstimate, SimRecord, TailFit,
};
use rayon::prelude::*;
use thiserror::Error;

pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

pub const RECORD_HEADER: &str = "repeat_index,h,x,return_time,steps,final_state,outcome";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
    #[error("malformed input {path}:{line}: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

impl HarnessError {
    /// Process exit code: 2 invalid config, 3 insufficient data, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::InsufficientData(_) => 3,
            HarnessError::Io { .. } | HarnessError::Malformed { .. } => 4,
        }
    }
}

impl From<critbd::Error> for HarnessError {
    fn from(e: critbd::Error) -> Self {
        match e {
            critbd::Error::InsufficientData(msg) => HarnessError::InsufficientData(msg),
            other => HarnessError::Config(other.to_string()),
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> HarnessError {
    let context = context.into();
    move |source| HarnessError::Io { context, source }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Direct,
    Hybrid,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Direct => "direct",
            Mode::Hybrid => "hybrid",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "direct" => Ok(Mode::Direct),
            "hybrid" => Ok(Mode::Hybrid),
            other => Err(format!("unknown mode `{other}` (expected direct or hybrid)")),
        }
    }
}

/// Which record column a statistics command reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Column {
    #[default]
    H,
    ReturnTime,
}

impl FromStr for Column {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "h" => Ok(Column::H),
            "return_time" => Ok(Column::ReturnTime),
            other => Err(format!("unknown column `{other}` (expected h or return_time)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    pub mode: Mode,
    pub p: f64,
    pub step_cap: u64,
    pub lambda: f64,
    pub repeats: u64,
    pub seed: u64,
    pub threads: usize,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Hybrid,
            p: 0.005,
            step_cap: 1_000_000,
            lambda: 1.0,
            repeats: 1_000_000,
            seed: 0,
            threads: 1,
        }
    }
}

impl SimulateConfig {
    fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(HarnessError::Config("repeats must be at least 1".into()));
        }
        if self.threads == 0 {
            return Err(HarnessError::Config("threads must be at least 1".into()));
        }
        Ok(())
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    if threads == 0 {
        return Err(HarnessError::Config("threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start thread pool: {e}")))
}

/// Runs `repeats` simulations; repeat `i` always uses stream `i` of the seed,
/// so the result is independent of the thread count.
pub fn run_simulation(cfg: &SimulateConfig) -> Result<Vec<SimRecord>> {
    cfg.validate()?;
    let params = ModelParams::new(cfg.lambda)?;
    let pool = pool(cfg.threads)?;
    match cfg.mode {
        Mode::Hybrid => {
            let hybrid = HybridConfig::for_model(cfg.p, &params)?;
            Ok(pool.install(|| {
                (0..cfg.repeats)
                    .into_par_iter()
                    .map(|i| simulate_hitting_hybrid(&hybrid, &mut make_stream(cfg.seed, i)))
                    .collect()
            }))
        }
        Mode::Direct => {
            if cfg.step_cap == 0 {
                return Err(HarnessError::Config("step cap must be at least 1".into()));
            }
            let records = pool.install(|| {
                (0..cfg.repeats)
                    .into_par_iter()
                    .map(|i| simulate_hitting_direct(&params, cfg.step_cap, &mut make_stream(cfg.seed, i)))
                    .collect::<critbd::Result<Vec<_>>>()
            })?;
            Ok(records)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OutcomeCounts {
    pub direct: u64,
    pub tail: u64,
    pub censored: u64,
}

impl OutcomeCounts {
    pub fn tally<'a>(outcomes: impl IntoIterator<Item = &'a Outcome>) -> Self {
        let mut c = Self::default();
        for o in outcomes {
            match o {
                Outcome::Direct => c.direct += 1,
                Outcome::TailDrawn => c.tail += 1,
                Outcome::Censored => c.censored += 1,
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.direct + self.tail + self.censored
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config: SimulateConfig,
    pub counts: OutcomeCounts,
    pub wall_clock_seconds: f64,
    pub software: String,
}

impl RunManifest {
    /// `key = value` lines; the wall-clock line comes last.
    pub fn render(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| s.push_str(&format!("{k} = {v}\n"));
        kv("software", self.software.clone());
        kv("subcommand", "simulate".into());
        kv("mode", c.mode.to_string());
        match c.mode {
            Mode::Hybrid => {
                kv("p", c.p.to_string());
                kv("t_min", (1.0 / c.p).to_string());
            }
            Mode::Direct => kv("step_cap", c.step_cap.to_string()),
        }
        kv("lambda", c.lambda.to_string());
        kv("repeats", c.repeats.to_string());
        kv("seed", c.seed.to_string());
        kv("threads", c.threads.to_string());
        kv("count_direct", self.counts.direct.to_string());
        kv("count_tail", self.counts.tail.to_string());
        kv("count_censored", self.counts.censored.to_string());
        kv("wall_clock_seconds", format!("{:.3}", self.wall_clock_seconds));
        s
    }
}

/// Sidecar path of the manifest for a given CSV output.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

pub fn write_records<W: Write>(mut w: W, records: &[SimRecord]) -> io::Result<()> {
    writeln!(w, "{RECORD_HEADER}")?;
    for (i, r) in records.iter().enumerate() {
        writeln!(
            w,
            "{i},{:.16e},{:.16e},{:.16e},{},{},{}",
            r.h, r.x, r.return_time, r.steps, r.final_state, r.outcome
        )?;
    }
    w.flush()
}

/// Runs the simulation, writes the record CSV to `out` and the manifest next
/// to it.
pub fn cmd_simulate(cfg: &SimulateConfig, out: &Path) -> Result<RunManifest> {
    let start = Instant::now();
    let records = run_simulation(cfg)?;
    let file = File::create(out).map_err(io_err(format!("cannot create {}", out.display())))?;
    write_records(BufWriter::new(file), &records)
        .map_err(io_err(format!("cannot write {}", out.display())))?;
    let manifest = RunManifest {
        config: cfg.clone(),
        counts: OutcomeCounts::tally(records.iter().map(|r| &r.outcome)),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        software: VERSION.to_string(),
    };
    let mpath = manifest_path(out);
    std::fs::write(&mpath, manifest.render())
        .map_err(io_err(format!("cannot write {}", mpath.display())))?;
    Ok(manifest)
}

/// One row of a record CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordRow {
    pub repeat_index: u64,
    pub record: SimRecord,
}

impl RecordRow {
    pub fn value(&self, column: Column) -> f64 {
        match column {
            Column::H => self.record.h,
            Column::ReturnTime => self.record.return_time,
        }
    }
}

pub fn read_records(path: &Path) -> Result<Vec<RecordRow>> {
    let file = File::open(path).map_err(io_err(format!("cannot open {}", path.display())))?;
    let malformed = |line: usize, reason: String| HarnessError::Malformed {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut rows = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(format!("cannot read {}", path.display())))?;
        let lineno = n + 1;
        if n == 0 {
            if line.trim() != RECORD_HEADER {
                return Err(malformed(lineno, format!("expected header `{RECORD_HEADER}`")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(malformed(lineno, format!("expected 7 fields, found {}", fields.len())));
        }
        fn parse<T: FromStr>(s: &str, what: &str, bad: impl Fn(String) -> HarnessError) -> Result<T> {
            s.trim().parse().map_err(|_| bad(format!("cannot parse {what} from `{s}`")))
        }
        let bad = |r| malformed(lineno, r);
        let outcome: Outcome = fields[6]
            .trim()
            .parse()
            .map_err(|e: critbd::Error| malformed(lineno, e.to_string()))?;
        rows.push(RecordRow {
            repeat_index: parse(fields[0], "repeat_index", bad)?,
            record: SimRecord {
                h: parse(fields[1], "h", bad)?,
                x: parse(fields[2], "x", bad)?,
                return_time: parse(fields[3], "return_time", bad)?,
                steps: parse(fields[4], "steps", bad)?,
                final_state: parse(fields[5], "final_state", bad)?,
                outcome,
            },
        });
    }
    if rows.is_empty() {
        return Err(HarnessError::InsufficientData(format!("{} has no records", path.display())));
    }
    Ok(rows)
}

/// Values used for survival and KS statistics: censored rows are dropped,
/// so a file with censoring yields a conditional sample. Returns the values
/// and whether any row was dropped.
pub fn usable_values(rows: &[RecordRow], column: Column) -> (Vec<f64>, bool) {
    let values: Vec<f64> = rows
        .iter()
        .filter(|r| r.record.outcome != Outcome::Censored)
        .map(|r| r.value(column))
        .collect();
    let conditional = values.len() < rows.len();
    (values, conditional)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRow {
    pub source: String,
    pub t: f64,
    pub survival: f64,
    pub conditional: bool,
}

impl SurvivalRow {
    pub fn log_survival(&self) -> f64 {
        self.survival.ln()
    }
}

pub const SURVIVAL_HEADER: &str = "source,t,survival,log_survival,conditional";

/// Evaluation grid: explicit points, or `points` log-spaced over a window.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    Points(Vec<f64>),
    LogSpaced { window: (f64, f64), points: usize },
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let v = match self {
            Grid::Points(v) => v.clone(),
            Grid::LogSpaced { window: (lo, hi), points } => {
                if !(*lo > 0.0 && hi > lo) || *points == 0 {
                    return Err(HarnessError::Config(format!(
                        "log grid needs 0 < lo < hi and at least one point, got ({lo}, {hi}) x {points}"
                    )));
                }
                log_grid(*lo, *hi, *points)
            }
        };
        if v.is_empty() || v.iter().any(|t| !t.is_finite()) {
            return Err(HarnessError::Config("evaluation grid must be non-empty and finite".into()));
        }
        Ok(v)
    }
}

/// Empirical survival of each input on the grid.
pub fn cmd_survival(inputs: &[PathBuf], grid: &Grid, column: Column) -> Result<Vec<SurvivalRow>> {
    if inputs.is_empty() {
        return Err(HarnessError::Config("survival needs at least one input file".into()));
    }
    let ts = grid.values()?;
    let mut out = Vec::new();
    for path in inputs {
        let rows = read_records(path)?;
        let (values, conditional) = usable_values(&rows, column);
        if values.is_empty() {
            return Err(HarnessError::InsufficientData(format!(
                "{} has no uncensored records",
                path.display()
            )));
        }
        let f = ecdf(&values)?;
        let source = path.display().to_string();
        out.extend(ts.iter().map(|&t| SurvivalRow {
            source: source.clone(),
            t,
            survival: f.survival(t),
            conditional,
        }));
    }
    Ok(out)
}

pub fn write_survival<W: Write>(mut w: W, rows: &[SurvivalRow]) -> io::Result<()> {
    writeln!(w, "{SURVIVAL_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{}",
            r.source,
            r.t,
            r.survival,
            r.log_survival(),
            r.conditional
        )?;
    }
    w.flush()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsReport {
    pub result: KsResult,
    pub n_a: usize,
    pub n_b: usize,
    pub interval: (f64, f64),
}

impl KsReport {
    pub fn render(&self) -> String {
        format!(
            "interval = ({}, {})\nn_a = {}\nn_b = {}\nd_stat = {:.16e}\np_value = {:.16e}\nn_effective = {:.16e}\n",
            self.interval.0,
            self.interval.1,
            self.n_a,
            self.n_b,
            self.result.d_stat,
            self.result.p_value,
            self.result.n_effective
        )
    }
}

fn restrict(values: &[f64], (lo, hi): (f64, f64)) -> Vec<f64> {
    values.iter().copied().filter(|&v| v > lo && v < hi).collect()
}

/// Two-sample KS test on the values of two samples inside the open interval.
pub fn ks_on_interval(a: &[f64], b: &[f64], interval: (f64, f64)) -> Result<KsReport> {
    let (lo, hi) = interval;
    if lo.is_nan() || hi.is_nan() || hi <= lo {
        return Err(HarnessError::Config(format!("invalid interval ({lo}, {hi})")));
    }
    let a = restrict(a, interval);
    let b = restrict(b, interval);
    if a.is_empty() || b.is_empty() {
        return Err(HarnessError::InsufficientData(format!(
            "interval ({lo}, {hi}) keeps {} and {} values",
            a.len(),
            b.len()
        )));
    }
    Ok(KsReport {
        result: ks_two_sample(&a, &b)?,
        n_a: a.len(),
        n_b: b.len(),
        interval,
    })
}

pub fn cmd_ks(a: &Path, b: &Path, interval: (f64, f64), column: Column) -> Result<KsReport> {
    let (va, _) = usable_values(&read_records(a)?, column);
    let (vb, _) = usable_values(&read_records(b)?, column);
    ks_on_interval(&va, &vb, interval)
}

pub fn render_tailfit(fit: &TailFit) -> String {
    format!(
        "window = ({}, {})\nn_points = {}\nslope = {:.16e}\nintercept = {:.16e}\n",
        fit.fit_window.0, fit.fit_window.1, fit.n_points, fit.slope, fit.intercept
    )
}

/// Log-log survival slope of one record file. Censored rows are kept as
/// values beyond every window point, so they count as survivors.
pub fn cmd_tailfit(input: &Path, window: (f64, f64), n_grid: usize, column: Column) -> Result<TailFit> {
    let rows = read_records(input)?;
    let values: Vec<f64> = rows
        .iter()
        .map(|r| match r.record.outcome {
            Outcome::Censored => f64::INFINITY,
            _ => r.value(column),
        })
        .collect();
    let f = ecdf(&values)?;
    Ok(fit_tail_slope(&f, window, n_grid)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingRow {
    pub ceiling: u64,
    pub h2: f64,
    /// `h2 - sum_{k=2}^{N} 1/k`.
    pub residual: f64,
}

pub const HITTING_HEADER: &str = "ceiling,h2,h2_minus_harmonic";

/// `sum_{k=2}^{n} 1/k`, smallest terms first with compensation.
pub fn harmonic_from_two(n: u64) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for k in (2..=n).rev() {
        let y = 1.0 / k as f64 - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

pub fn cmd_hitting_times(ceilings: &[u64]) -> Result<Vec<HittingRow>> {
    if ceilings.is_empty() {
        return Err(HarnessError::Config("at least one ceiling is required".into()));
    }
    ceilings
        .iter()
        .map(|&n| {
            let h2 = solve_truncated(n)?.h2();
            Ok(HittingRow {
                ceiling: n,
                h2,
                residual: h2 - harmonic_from_two(n),
            })
        })
        .collect()
}

pub fn write_hitting_times<W: Write>(mut w: W, rows: &[HittingRow]) -> io::Result<()> {
    writeln!(w, "{HITTING_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{:.16e},{:.16e}", r.ceiling, r.h2, r.residual)?;
    }
    w.flush()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DominatingConfig {
    pub lambda: f64,
    pub delta: f64,
    pub horizon: f64,
    pub reps: usize,
    pub seed: u64,
    pub threads: usize,
}

pub fn cmd_dominating(cfg: &DominatingConfig) -> Result<PersistenceEstimate> {
    let pool = pool(cfg.threads)?;
    Ok(pool.install(|| {
        critbd::estimate_persistence(cfg.lambda, cfg.delta, cfg.horizon, cfg.reps, cfg.seed)
    })?)
}

pub fn render_persistence(e: &PersistenceEstimate) -> String {
    format!(
        "lambda = {}\ndelta = {}\nhorizon = {}\nreps = {}\npersisted = {}\np_hat = {:.16e}\nstd_err = {:.16e}\nmean_field_reps = {}\n",
        e.lambda, e.delta, e.horizon_t, e.reps, e.persisted, e.p_hat, e.std_err, e.mean_field_reps
    )
}
