use std::fs;
use std::process::Command;

use smc_ei::testbed::branin;
use smc_ei::{Execution, PriorSpec};
use smc_ei_bench::{
    ml_reference_prep, parse_run_csv, parse_summary_csv, read_theta, run_benchmark, run_files, summarize_dir,
    write_theta, Algorithm, BenchmarkSpec, LOG_ERROR_FLOOR,
};

fn small_spec(alg: Algorithm, out: &std::path::Path) -> BenchmarkSpec {
    let mut spec = BenchmarkSpec::new("branin", alg, out);
    spec.particles = 8;
    spec.per_particle = 8;
    spec.budget = 12;
    spec.runs = 3;
    spec.seed = 5;
    spec.theta = Some(smc_ei::HyperParameters::new(vec![1.5, 2.5]).unwrap());
    spec
}

fn without_last_column(text: &str) -> String {
    text.lines()
        .map(|l| {
            if l.starts_with('#') {
                l.to_string()
            } else {
                l.rsplit_once(',').unwrap().0.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn repeated_benchmarks_write_identical_files() {
    for alg in [Algorithm::SmcEi, Algorithm::RefEi] {
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        run_benchmark(&small_spec(alg, a.path())).unwrap();
        run_benchmark(&small_spec(alg, b.path())).unwrap();
        let read = |d: &std::path::Path, name: &str| fs::read_to_string(d.join(name)).unwrap();
        assert_eq!(read(a.path(), "summary.csv"), read(b.path(), "summary.csv"));
        for run in 0..3 {
            let name = smc_ei_bench::run_file_name(run);
            assert_eq!(
                without_last_column(&read(a.path(), &name)),
                without_last_column(&read(b.path(), &name))
            );
        }
    }
}

#[test]
fn summary_recomputes_from_run_files() {
    let dir = tempfile::tempdir().unwrap();
    let spec = small_spec(Algorithm::SmcEi, dir.path());
    run_benchmark(&spec).unwrap();
    let written = parse_summary_csv(&fs::read_to_string(dir.path().join("summary.csv")).unwrap()).unwrap();

    // independent aggregation straight from the text cells
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for path in run_files(dir.path()).unwrap() {
        let text = fs::read_to_string(path).unwrap();
        let known_max: f64 = text
            .lines()
            .next()
            .unwrap()
            .split_whitespace()
            .find_map(|kv| kv.strip_prefix("known_max="))
            .unwrap()
            .trim_end_matches(';')
            .parse()
            .unwrap();
        for (k, line) in text.lines().skip(2).enumerate() {
            let best: f64 = line.split(',').nth(4).unwrap().parse().unwrap();
            let gap = known_max - best;
            let e = if gap > 0.0 { gap.ln() } else { -30.0 };
            if columns.len() <= k {
                columns.push(Vec::new());
            }
            columns[k].push(e);
        }
    }
    assert_eq!(written.len(), columns.len());
    for (row, col) in written.iter().zip(&columns) {
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        let mut s = col.clone();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // three runs: quartiles at positions 0.5, 1, 1.5
        let (q1, med, q3) = (0.5 * (s[0] + s[1]), s[1], 0.5 * (s[1] + s[2]));
        for (got, want) in [(row.mean, mean), (row.median, med), (row.q1, q1), (row.q3, q3)] {
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} vs {want}");
        }
    }
    let again = summarize_dir(dir.path()).unwrap();
    assert_eq!(again, written);
}

#[test]
fn budget_equal_to_n0_gives_design_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small_spec(Algorithm::SmcEi, dir.path());
    spec.runs = 1;
    spec.budget = 4;
    let out = run_benchmark(&spec).unwrap();
    assert_eq!(out.summary.len(), 4);
    let run = parse_run_csv(&fs::read_to_string(dir.path().join("run_000.csv")).unwrap()).unwrap();
    let f = branin();
    for (row, best) in out.summary.iter().zip(&run.best) {
        let e = smc_ei_bench::log_error(f.known_max(), *best);
        assert_eq!(row.mean, e);
        assert_eq!(row.median, e);
    }
    assert!(fs::read_to_string(dir.path().join("summary.csv"))
        .unwrap()
        .starts_with('#'));
    assert!(LOG_ERROR_FLOOR < -20.0);
}

#[test]
fn bad_specs_fail() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small_spec(Algorithm::SmcEi, dir.path());
    spec.function = "nope".into();
    assert!(run_benchmark(&spec).is_err());
    let mut spec = small_spec(Algorithm::RefEi, dir.path());
    spec.theta = None;
    let err = run_benchmark(&spec).unwrap_err();
    assert!(format!("{err:#}").contains("run 0"), "{err:#}");
    let mut spec = small_spec(Algorithm::SmcEi, dir.path());
    spec.runs = 0;
    assert!(run_benchmark(&spec).is_err());
}

#[test]
fn prep_ref_is_reproducible_and_sane() {
    assert!(ml_reference_prep("branin", 1, 7, Execution::Serial).is_err());
    let a = ml_reference_prep("branin", 60, 7, Execution::Parallel).unwrap();
    let b = ml_reference_prep("branin", 60, 7, Execution::Serial).unwrap();
    assert_eq!(a, b);
    let prior = PriorSpec::default_for(branin().domain());
    for (k, v) in a.log_ranges().iter().enumerate() {
        assert!(v.is_finite());
        assert!((v - prior.means()[k]).abs() <= 5.0 * prior.sds()[k], "{v}");
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("theta.txt");
    write_theta(&path, "branin", &a).unwrap();
    assert_eq!(read_theta(&path).unwrap(), a);
}

#[test]
fn cli_end_to_end() {
    let exe = env!("CARGO_BIN_EXE_bench");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("smc");
    let status = Command::new(exe)
        .args([
            "run", "--fn", "branin", "--alg", "smc-ei", "--I", "6", "--J", "6", "--budget", "8", "--runs", "2",
            "--seed", "3", "--out",
        ])
        .arg(&out)
        .env("BENCH_WORKERS", "2")
        .env("RUST_LOG", "warn")
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(run_files(&out).unwrap().len(), 2);
    let before = fs::read_to_string(out.join("summary.csv")).unwrap();
    fs::remove_file(out.join("summary.csv")).unwrap();
    assert!(Command::new(exe)
        .arg("summarize")
        .arg(&out)
        .env("RUST_LOG", "warn")
        .status()
        .unwrap()
        .success());
    assert_eq!(fs::read_to_string(out.join("summary.csv")).unwrap(), before);

    let bad = Command::new(exe)
        .args(["prep-ref", "--fn", "branin", "--design", "1", "--out"])
        .arg(dir.path().join("t.txt"))
        .env("RUST_LOG", "off")
        .status()
        .unwrap();
    assert!(!bad.success());
    let bad = Command::new(exe)
        .args(["run", "--fn", "branin", "--alg", "smc-ei", "--out"])
        .arg(&out)
        .env("BENCH_WORKERS", "0")
        .env("RUST_LOG", "off")
        .status()
        .unwrap();
    assert!(!bad.success());
}
