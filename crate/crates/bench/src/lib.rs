//! Repeated seeded runs of the SMC-based and the reference optimizer,
//! per-run CSV traces and an aggregated summary of the log-error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use smc_ei::optimizer::{ml_estimate, MlConfig, ML_MIN_DESIGN};
use smc_ei::testbed::{by_name, maximin_lhs, TestFunction};
use smc_ei::{
    split_stream, AskTell, Domain, EvaluationHistory, Execution, HyperParameters, OptimizerConfig, PriorSpec,
    ReferenceEi, ReferenceModel, ResamplePolicy, RunTrace, SmcEi,
};

/// Environment variable holding the number of concurrent runs.
pub const WORKERS_ENV: &str = "BENCH_WORKERS";

/// Log-error recorded when the known maximum has been reached to machine
/// precision.
pub const LOG_ERROR_FLOOR: f64 = -30.0;

pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    SmcEi,
    RefEi,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::SmcEi => "smc-ei",
            Algorithm::RefEi => "ref-ei",
        }
    }
}

impl FromStr for Algorithm {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smc-ei" => Ok(Algorithm::SmcEi),
            "ref-ei" => Ok(Algorithm::RefEi),
            other => bail!("unknown algorithm `{other}` (expected smc-ei or ref-ei)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkSpec {
    pub function: String,
    pub algorithm: Algorithm,
    pub particles: usize,
    pub per_particle: usize,
    pub budget: usize,
    /// Defaults to `max(4, 2d)`.
    pub n0: Option<usize>,
    pub runs: usize,
    pub seed: u64,
    pub always_resample: bool,
    /// Fixed log-ranges of the reference algorithm.
    pub theta: Option<HyperParameters>,
    pub out: PathBuf,
}

impl BenchmarkSpec {
    pub fn new(function: &str, algorithm: Algorithm, out: impl Into<PathBuf>) -> Self {
        BenchmarkSpec {
            function: function.to_string(),
            algorithm,
            particles: 100,
            per_particle: 100,
            budget: 80,
            n0: None,
            runs: 20,
            seed: 42,
            always_resample: false,
            theta: None,
            out: out.into(),
        }
    }

    pub fn test_function(&self) -> Result<TestFunction> {
        by_name(&self.function).ok_or_else(|| anyhow!("unknown function `{}`", self.function))
    }

    /// Optimizer configuration of run number `run`.
    pub fn config(&self, run: usize) -> Result<OptimizerConfig> {
        let f = self.test_function()?;
        let mut config = OptimizerConfig::for_domain(f.domain());
        config.particles = self.particles;
        config.per_particle = self.per_particle;
        config.budget = self.budget;
        if let Some(n0) = self.n0 {
            config.n0 = n0;
        }
        config.seed = self.seed + run as u64;
        if self.always_resample {
            config.resample = ResamplePolicy::Always;
        }
        config.validate(f.domain())?;
        Ok(config)
    }
}

fn optimizer(spec: &BenchmarkSpec, domain: &Domain, config: &OptimizerConfig) -> Result<Box<dyn AskTell>> {
    Ok(match spec.algorithm {
        Algorithm::SmcEi => Box::new(SmcEi::new(domain, config.clone())?),
        Algorithm::RefEi => {
            let theta = spec
                .theta
                .clone()
                .ok_or_else(|| anyhow!("ref-ei needs fixed log-ranges (run prep-ref first)"))?;
            Box::new(ReferenceEi::new(domain, config, ReferenceModel::integrated(theta))?)
        }
    })
}

/// Runs one seeded optimization. Errors name the run and the iteration.
pub fn run_once(spec: &BenchmarkSpec, run: usize) -> Result<RunTrace> {
    let f = spec.test_function()?;
    let config = spec.config(run)?;
    let mut opt = optimizer(spec, f.domain(), &config).with_context(|| format!("run {run} (seed {})", config.seed))?;
    let mut trace = RunTrace::default();
    while opt.evaluations() < config.budget {
        let n = opt.evaluations() + 1;
        let record = smc_ei::optimizer::step(opt.as_mut(), &mut |x: &[f64]| f.evaluate(x))
            .with_context(|| format!("run {run} (seed {}), evaluation {n}", config.seed))?;
        trace.records.push(record);
    }
    Ok(trace)
}

/// Result of [`run_benchmark`].
#[derive(Debug, Clone)]
pub struct BenchmarkOutput {
    pub traces: Vec<RunTrace>,
    pub summary: Vec<SummaryRow>,
}

/// Worker-slot count from [`WORKERS_ENV`], defaulting to the number of
/// available cores.
pub fn worker_count() -> Result<usize> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .with_context(|| format!("{WORKERS_ENV}={v} is not a count"))?;
            if n == 0 {
                bail!("{WORKERS_ENV} must be at least 1");
            }
            Ok(n)
        }
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Executes all runs, writes `run_XXX.csv` for each and `summary.csv` into
/// `spec.out`.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<BenchmarkOutput> {
    if spec.runs == 0 {
        bail!("runs must be at least 1");
    }
    let f = spec.test_function()?;
    spec.config(0)?;
    fs::create_dir_all(&spec.out).with_context(|| format!("creating {}", spec.out.display()))?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(worker_count()?).build()?;
    let traces: Vec<RunTrace> = pool.install(|| {
        (0..spec.runs)
            .into_par_iter()
            .map(|run| -> Result<RunTrace> {
                let trace = run_once(spec, run)?;
                let header = RunHeader {
                    function: f.name().to_string(),
                    algorithm: spec.algorithm.name().to_string(),
                    seed: spec.seed + run as u64,
                    known_max: f.known_max(),
                };
                write_atomic(&spec.out.join(run_file_name(run)), &trace_csv(&header, f.dim(), &trace))?;
                log::info!("run {run} done, final best {:?}", trace.final_best());
                Ok(trace)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let errors: Vec<Vec<f64>> = traces
        .iter()
        .map(|t| t.records.iter().map(|r| log_error(f.known_max(), r.best)).collect())
        .collect();
    let summary = summarize_errors(&errors);
    write_atomic(&spec.out.join(SUMMARY_FILE), &summary_csv(&summary))?;
    Ok(BenchmarkOutput { traces, summary })
}

pub fn run_file_name(run: usize) -> String {
    format!("run_{run:03}.csv")
}

/// ln(known_max − M_n), or [`LOG_ERROR_FLOOR`] when the gap is not
/// positive.
pub fn log_error(known_max: f64, best: f64) -> f64 {
    let gap = known_max - best;
    if gap > 0.0 {
        gap.ln().max(LOG_ERROR_FLOOR)
    } else {
        LOG_ERROR_FLOOR
    }
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}

/// Metadata carried in the comment line of a per-run CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RunHeader {
    pub function: String,
    pub algorithm: String,
    pub seed: u64,
    pub known_max: f64,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Per-run CSV. Empty ESS cells belong to the initial design; empty
/// acceptance cells mean no move happened at that iteration.
pub fn trace_csv(header: &RunHeader, dim: usize, trace: &RunTrace) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "# fn={} alg={} seed={} known_max={}; columns: evaluation count n, point coordinates, value, best value M_n, effective sample size, MH acceptance rate, wall time of the iteration in ms",
        header.function, header.algorithm, header.seed, header.known_max
    )
    .unwrap();
    let xs: Vec<String> = (1..=dim).map(|k| format!("x{k}")).collect();
    writeln!(s, "n,{},value,best,ess,acceptance,wall_ms", xs.join(",")).unwrap();
    for r in &trace.records {
        let coords: Vec<String> = r.x.iter().map(|v| v.to_string()).collect();
        writeln!(
            s,
            "{},{},{},{},{},{},{:.3}",
            r.n,
            coords.join(","),
            r.value,
            r.best,
            fmt_opt(r.ess),
            fmt_opt(r.acceptance_rate),
            r.wall_ms
        )
        .unwrap();
    }
    s
}

/// Parsed per-run CSV: header metadata and the `(n, M_n)` column pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RunCsv {
    pub header: RunHeader,
    pub n: Vec<usize>,
    pub best: Vec<f64>,
}

pub fn parse_run_csv(text: &str) -> Result<RunCsv> {
    let mut lines = text.lines();
    let comment = lines.next().ok_or_else(|| anyhow!("empty file"))?;
    let meta = comment
        .strip_prefix("# ")
        .and_then(|c| c.split(';').next())
        .ok_or_else(|| anyhow!("missing header comment"))?;
    let field = |key: &str| -> Result<String> {
        meta.split_whitespace()
            .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
            .map(str::to_string)
            .ok_or_else(|| anyhow!("header comment lacks `{key}`"))
    };
    let header = RunHeader {
        function: field("fn")?,
        algorithm: field("alg")?,
        seed: field("seed")?.parse()?,
        known_max: field("known_max")?.parse()?,
    };
    let columns: Vec<&str> = lines
        .next()
        .ok_or_else(|| anyhow!("missing column names"))?
        .split(',')
        .collect();
    let best_col = columns
        .iter()
        .position(|c| *c == "best")
        .ok_or_else(|| anyhow!("no `best` column"))?;
    let (mut n, mut best) = (Vec::new(), Vec::new());
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != columns.len() {
            bail!("row {} has {} cells, expected {}", i + 1, cells.len(), columns.len());
        }
        n.push(cells[0].parse()?);
        best.push(cells[best_col].parse()?);
    }
    Ok(RunCsv { header, n, best })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Quantile with linear interpolation between order statistics
/// (`h = (len − 1)·p`).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Row `k` aggregates the `k`-th entry (evaluation count `k + 1`) of every
/// run, up to the shortest run.
pub fn summarize_errors(errors: &[Vec<f64>]) -> Vec<SummaryRow> {
    let len = errors.iter().map(Vec::len).min().unwrap_or(0);
    (0..len)
        .map(|k| {
            let mut col: Vec<f64> = errors.iter().map(|e| e[k]).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            col.sort_by(f64::total_cmp);
            SummaryRow {
                n: k + 1,
                mean,
                median: quantile(&col, 0.5),
                q1: quantile(&col, 0.25),
                q3: quantile(&col, 0.75),
            }
        })
        .collect()
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = format!(
        "# log_error = ln(known_max - M_n) across runs, {LOG_ERROR_FLOOR} when known_max - M_n <= 0; quartiles by linear interpolation\n"
    );
    s.push_str("n,mean,median,q1,q3\n");
    for r in rows {
        writeln!(s, "{},{},{},{},{}", r.n, r.mean, r.median, r.q1, r.q3).unwrap();
    }
    s
}

/// Per-run CSV files of `dir`, sorted by name.
pub fn run_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("run_") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no run_*.csv files in {}", dir.display());
    }
    Ok(files)
}

/// Recomputes `summary.csv` of `dir` from its per-run CSVs.
pub fn summarize_dir(dir: &Path) -> Result<Vec<SummaryRow>> {
    let mut errors = Vec::new();
    for path in run_files(dir)? {
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let run = parse_run_csv(&text).with_context(|| format!("parsing {}", path.display()))?;
        errors.push(run.best.iter().map(|b| log_error(run.header.known_max, *b)).collect());
    }
    let rows = summarize_errors(&errors);
    write_atomic(&dir.join(SUMMARY_FILE), &summary_csv(&rows))?;
    Ok(rows)
}

pub fn parse_summary_csv(text: &str) -> Result<Vec<SummaryRow>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|line| {
            let c: Vec<&str> = line.split(',').collect();
            if c.len() != 5 {
                bail!("summary row `{line}` does not have 5 cells");
            }
            Ok(SummaryRow {
                n: c[0].parse()?,
                mean: c[1].parse()?,
                median: c[2].parse()?,
                q1: c[3].parse()?,
                q3: c[4].parse()?,
            })
        })
        .collect()
}

/// Evaluates `function` on a maximin LHS of `design` points and returns the
/// maximum-likelihood log-ranges.
pub fn ml_reference_prep(function: &str, design: usize, seed: u64, exec: Execution) -> Result<HyperParameters> {
    if design < ML_MIN_DESIGN {
        bail!("prep-ref needs a design of at least {ML_MIN_DESIGN} points, got {design}");
    }
    let f = by_name(function).ok_or_else(|| anyhow!("unknown function `{function}`"))?;
    let points = maximin_lhs(f.domain(), design, split_stream(seed, "prep-design"), exec);
    let values = points
        .iter()
        .map(|p| f.evaluate(p))
        .collect::<smc_ei::Result<Vec<f64>>>()?;
    let history = EvaluationHistory::new(points, values)?;
    let prior = PriorSpec::default_for(f.domain());
    Ok(ml_estimate(
        &history,
        &prior,
        &MlConfig::default(),
        split_stream(seed, "prep-ml"),
        exec,
    )?)
}

pub fn theta_text(function: &str, theta: &HyperParameters) -> String {
    let values: Vec<String> = theta.log_ranges().iter().map(|v| v.to_string()).collect();
    format!(
        "# maximum-likelihood log-ranges for {function}\nlog_ranges {}\n",
        values.join(" ")
    )
}

pub fn parse_theta(text: &str) -> Result<HyperParameters> {
    let line = text
        .lines()
        .find_map(|l| l.trim().strip_prefix("log_ranges"))
        .ok_or_else(|| anyhow!("no `log_ranges` line"))?;
    let values = line
        .split_whitespace()
        .map(f64::from_str)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(HyperParameters::new(values)?)
}

pub fn write_theta(path: &Path, function: &str, theta: &HyperParameters) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_atomic(path, &theta_text(function, theta))
}

pub fn read_theta(path: &Path) -> Result<HyperParameters> {
    parse_theta(&fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_of_small_samples() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 0.75), 3.25);
        assert_eq!(quantile(&[7.0], 0.25), 7.0);
    }

    #[test]
    fn floor_sentinel() {
        assert_eq!(log_error(1.0, 1.0), LOG_ERROR_FLOOR);
        assert_eq!(log_error(1.0, 2.0), LOG_ERROR_FLOOR);
        assert_eq!(log_error(1.0, 1.0 - 1e-20), LOG_ERROR_FLOOR);
        assert!((log_error(1.0, 0.0)).abs() < 1e-15);
    }

    #[test]
    fn theta_round_trip() {
        let th = HyperParameters::new(vec![0.1, -2.5e-3]).unwrap();
        assert_eq!(parse_theta(&theta_text("branin", &th)).unwrap(), th);
        assert!(parse_theta("nothing here").is_err());
    }

    #[test]
    fn algorithm_names() {
        assert_eq!("smc-ei".parse::<Algorithm>().unwrap(), Algorithm::SmcEi);
        assert_eq!(Algorithm::RefEi.name(), "ref-ei");
        assert!("ei".parse::<Algorithm>().is_err());
    }
}
