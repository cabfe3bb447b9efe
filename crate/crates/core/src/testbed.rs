//! Benchmark objectives (maximization convention) and maximin Latin
//! hypercube designs.

use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::exec::Execution;
use crate::gp::Domain;
use crate::rng::RandomStream;

/// Number of random Latin hypercubes compared by [`maximin_lhs`].
pub const MAXIMIN_DRAWS: usize = 50;

/// A named objective with a known global maximum.
#[derive(Debug, Clone)]
pub struct TestFunction {
    name: &'static str,
    domain: Domain,
    known_max: f64,
    f: fn(&[f64]) -> f64,
}

impl TestFunction {
    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn known_max(&self) -> f64 {
        self.known_max
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.domain.check(x)?;
        Ok((self.f)(x))
    }
}

const BRANIN_MAX: f64 = -0.397_887_357_729_738_16;

fn branin_raw(x: &[f64]) -> f64 {
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    let inner = x[1] - b * x[0] * x[0] + c * x[0] - 6.0;
    -(inner * inner + 10.0 * (1.0 - t) * x[0].cos() + 10.0)
}

// Standard Hartmann-6 constants (Dixon & Szegő test set, as tabulated in
// the usual global-optimization benchmark collections).
const HARTMANN_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const HARTMANN_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const HARTMANN_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];
/// ln 3.32236801141551
const HARTMANN6_LOG_MAX: f64 = 1.200_677_785_132_359_6;

fn hartmann6(x: &[f64]) -> f64 {
    HARTMANN_ALPHA
        .iter()
        .zip(HARTMANN_A.iter().zip(&HARTMANN_P))
        .map(|(alpha, (a, p))| {
            let e: f64 = (0..6).map(|j| a[j] * (x[j] - p[j]) * (x[j] - p[j])).sum();
            alpha * (-e).exp()
        })
        .sum()
}

fn hartmann6_log_raw(x: &[f64]) -> f64 {
    hartmann6(x).ln()
}

pub fn branin() -> TestFunction {
    TestFunction {
        name: "branin",
        domain: Domain::new(vec![-5.0, 0.0], vec![10.0, 15.0]).expect("valid"),
        known_max: BRANIN_MAX,
        f: branin_raw,
    }
}

pub fn hartmann6_log() -> TestFunction {
    TestFunction {
        name: "hartmann6-log",
        domain: Domain::unit_cube(6),
        known_max: HARTMANN6_LOG_MAX,
        f: hartmann6_log_raw,
    }
}

/// Negated Branin on [−5, 10] × [0, 15].
pub fn branin_max(x: &[f64]) -> Result<f64> {
    branin().evaluate(x)
}

/// log of the Hartmann-6 function on [0, 1]⁶.
pub fn hartmann6_logmax(x: &[f64]) -> Result<f64> {
    hartmann6_log().evaluate(x)
}

/// Every shipped objective.
pub fn registry() -> Vec<TestFunction> {
    vec![branin(), hartmann6_log()]
}

pub fn by_name(name: &str) -> Option<TestFunction> {
    registry().into_iter().find(|f| f.name == name)
}

/// One random Latin hypercube: in every dimension each of the `count`
/// strata holds exactly one point, uniformly placed within it.
pub fn latin_hypercube(domain: &Domain, count: usize, stream: RandomStream) -> Vec<Vec<f64>> {
    let mut rng = stream.rng();
    let d = domain.dim();
    let mut design = vec![vec![0.0; d]; count];
    let mut perm: Vec<usize> = (0..count).collect();
    for k in 0..d {
        perm.shuffle(&mut rng);
        let (lo, w) = (domain.lower()[k], domain.width(k));
        for (point, &stratum) in design.iter_mut().zip(&perm) {
            let u = (stratum as f64 + rng.random::<f64>()) / count as f64;
            point[k] = (lo + w * u).min(domain.upper()[k]);
        }
    }
    design
}

/// Smallest pairwise Euclidean distance after mapping the domain to the
/// unit cube. Infinite for fewer than two points.
pub fn min_pairwise_distance(points: &[Vec<f64>], domain: &Domain) -> f64 {
    let d = domain.dim();
    let mut unit: Vec<Vec<f64>> = points
        .iter()
        .map(|p| (0..d).map(|k| (p[k] - domain.lower()[k]) / domain.width(k)).collect())
        .collect();
    unit.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut best2 = f64::INFINITY;
    for i in 0..unit.len() {
        for j in i + 1..unit.len() {
            let dx = unit[j][0] - unit[i][0];
            if dx * dx >= best2 {
                break;
            }
            let d2: f64 = unit[i].iter().zip(&unit[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            best2 = best2.min(d2);
        }
    }
    best2.sqrt()
}

/// Best of [`MAXIMIN_DRAWS`] random Latin hypercubes under the maximin
/// criterion. Draw `k` uses `stream.split(k)`; ties go to the lowest `k`.
pub fn maximin_lhs(domain: &Domain, count: usize, stream: RandomStream, exec: Execution) -> Vec<Vec<f64>> {
    let scored = exec.map_range(MAXIMIN_DRAWS, |k| {
        let design = latin_hypercube(domain, count, stream.split(k));
        let score = min_pairwise_distance(&design, domain);
        (design, score)
    });
    let mut best: Option<(Vec<Vec<f64>>, f64)> = None;
    for (design, score) in scored {
        if best.as_ref().is_none_or(|(_, s)| score > *s) {
            best = Some((design, score));
        }
    }
    best.expect("at least one draw").0
}
