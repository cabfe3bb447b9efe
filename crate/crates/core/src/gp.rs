//! Gaussian-process model with a constant unknown mean and an anisotropic
//! Matérn-5/2 correlation.
//!
//! The mean (flat prior on ℝ) and the process variance (Jeffreys prior
//! 1/σ²) are integrated out in closed form. What remains is a likelihood
//! over the log-range vector only, and a Student-t predictive with `n − 1`
//! degrees of freedom.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, dot, solve_lower_in_place, solve_upper_in_place, Compensated};

const SQRT_5: f64 = 2.236_067_977_499_79;

/// Relative jitter of the first regularized factorization attempt (scaled by
/// `n` and by the mean diagonal, which is 1 for a correlation matrix).
pub const JITTER_START: f64 = 1e-10;
/// Points per block in [`ConditionedGp::predict_many`].
pub const PREDICT_BLOCK: usize = 8;
pub const JITTER_MAX: f64 = 1e-4;
/// Upper bound on iterative-refinement steps for the predictive weights.
const REFINE_STEPS: usize = 3;

/// Axis-aligned search box.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidInput(
                "domain bounds must be non-empty and of equal length".into(),
            ));
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u))
        {
            return Err(Error::InvalidInput(
                "domain needs finite lower < upper in every dimension".into(),
            ));
        }
        Ok(Domain { lower, upper })
    }

    pub fn unit_cube(dim: usize) -> Self {
        Domain::new(vec![0.0; dim], vec![1.0; dim]).expect("unit cube is valid")
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, k: usize) -> f64 {
        self.upper[k] - self.lower[k]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|k| self.width(k)).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub fn check(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::OutOfDomain { point: x.to_vec() })
        }
    }
}

/// Design points and observed values.
///
/// Points are stored row-major in one flat buffer. `best` is the running
/// maximum of the observed values.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationHistory {
    dim: usize,
    points: Vec<f64>,
    values: Vec<f64>,
    best: f64,
}

impl EvaluationHistory {
    /// Builds a history of at least two pairwise-distinct evaluations.
    pub fn new(points: Vec<Vec<f64>>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "{} points but {} values",
                points.len(),
                values.len()
            )));
        }
        if points.len() < 2 {
            return Err(Error::InvalidInput("a history needs at least two evaluations".into()));
        }
        let dim = points[0].len();
        let mut history = EvaluationHistory {
            dim,
            points: Vec::with_capacity(points.len() * dim),
            values: Vec::with_capacity(values.len()),
            best: f64::NEG_INFINITY,
        };
        for (x, y) in points.iter().zip(values) {
            history.push(x, y)?;
        }
        Ok(history)
    }

    /// Builds a history without the length and distinctness checks.
    #[doc(hidden)]
    pub fn new_unchecked(points: Vec<Vec<f64>>, values: Vec<f64>) -> Self {
        let dim = points.first().map_or(0, Vec::len);
        let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        EvaluationHistory {
            dim,
            points: points.concat(),
            values,
            best,
        }
    }

    /// Appends one evaluation.
    pub fn push(&mut self, x: &[f64], y: f64) -> Result<()> {
        if x.len() != self.dim || self.dim == 0 {
            return Err(Error::InvalidInput(format!(
                "point of dimension {} in a history of dimension {}",
                x.len(),
                self.dim
            )));
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite evaluation".into()));
        }
        if self.points().any(|p| p == x) {
            return Err(Error::InvalidInput(format!("point {x:?} was already evaluated")));
        }
        self.points.extend_from_slice(x);
        self.values.push(y);
        self.best = self.best.max(y);
        Ok(())
    }

    /// A copy with one more evaluation.
    pub fn extended(&self, x: &[f64], y: f64) -> Result<Self> {
        let mut next = self.clone();
        next.push(x, y)?;
        Ok(next)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, a: usize) -> &[f64] {
        &self.points[a * self.dim..(a + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim.max(1))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Current best observed value `M_n`.
    pub fn best(&self) -> f64 {
        self.best
    }
}

/// Log-range vector of the anisotropic Matérn correlation.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParameters {
    log_ranges: Vec<f64>,
}

impl HyperParameters {
    pub fn new(log_ranges: Vec<f64>) -> Result<Self> {
        if log_ranges.is_empty() || log_ranges.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "log-ranges must be finite and non-empty, got {log_ranges:?}"
            )));
        }
        Ok(HyperParameters { log_ranges })
    }

    pub fn from_ranges(ranges: &[f64]) -> Result<Self> {
        HyperParameters::new(ranges.iter().map(|r| r.ln()).collect())
    }

    pub fn dim(&self) -> usize {
        self.log_ranges.len()
    }

    pub fn log_ranges(&self) -> &[f64] {
        &self.log_ranges
    }

    pub fn ranges(&self) -> Vec<f64> {
        self.log_ranges.iter().map(|v| v.exp()).collect()
    }

    fn inverse_ranges(&self) -> Vec<f64> {
        self.log_ranges.iter().map(|v| (-v).exp()).collect()
    }
}

/// Student-t posterior predictive of ξ(x).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveDistribution {
    pub location: f64,
    pub scale: f64,
    pub dof: f64,
}

/// Matérn-5/2 correlation at scaled distance `h`.
pub fn matern52_correlation(h: f64) -> f64 {
    let s = SQRT_5 * h;
    (1.0 + s + s * s / 3.0) * (-s).exp()
}

/// Euclidean distance after dividing each coordinate by its range.
pub fn scaled_distance(x1: &[f64], x2: &[f64], theta: &HyperParameters) -> f64 {
    x1.iter()
        .zip(x2)
        .zip(theta.log_ranges())
        .map(|((a, b), lr)| {
            let t = (a - b) / lr.exp();
            t * t
        })
        .sum::<f64>()
        .sqrt()
}

/// Cholesky factor of a correlation matrix plus the jitter that was needed.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationFactor {
    n: usize,
    lower: Vec<f64>,
    jitter: f64,
}

impl CorrelationFactor {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Row-major lower factor.
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n).map(|i| self.lower[i * self.n + i].ln()).sum::<f64>()
    }

    pub fn solve_lower(&self, b: &mut [f64]) {
        solve_lower_in_place(&self.lower, self.n, b);
    }

    pub fn solve_upper(&self, b: &mut [f64]) {
        solve_upper_in_place(&self.lower, self.n, b);
    }
}

fn correlation_from_scaled(scaled: &[f64], n: usize, dim: usize) -> (Vec<f64>, bool) {
    let mut r = vec![0.0; n * n];
    let mut duplicate = false;
    for a in 0..n {
        r[a * n + a] = 1.0;
        let pa = &scaled[a * dim..(a + 1) * dim];
        for b in 0..a {
            let pb = &scaled[b * dim..(b + 1) * dim];
            let h = pa.iter().zip(pb).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
            duplicate |= h == 0.0;
            let k = matern52_correlation(h);
            r[a * n + b] = k;
            r[b * n + a] = k;
        }
    }
    (r, duplicate)
}

fn factor_with_escalation(r: &[f64], n: usize, exactly_singular: bool) -> Result<CorrelationFactor> {
    if exactly_singular {
        return Err(Error::FactorizationFailure { jitter: JITTER_MAX });
    }
    if let Some(lower) = cholesky(r, n, 0.0) {
        return Ok(CorrelationFactor { n, lower, jitter: 0.0 });
    }
    let mut jitter = JITTER_START * n as f64;
    while jitter <= JITTER_MAX * (1.0 + 1e-9) {
        if let Some(lower) = cholesky(r, n, jitter) {
            log::trace!("correlation matrix needed jitter {jitter:e}");
            return Ok(CorrelationFactor { n, lower, jitter });
        }
        jitter *= 10.0;
    }
    Err(Error::FactorizationFailure { jitter: jitter / 10.0 })
}

fn scale_points(history: &EvaluationHistory, inv_ranges: &[f64]) -> Vec<f64> {
    history
        .points()
        .flat_map(|p| p.iter().zip(inv_ranges).map(|(x, ir)| x * ir))
        .collect()
}

/// Correlation matrix of the design under `theta`, factorized.
///
/// An exact factorization is tried first; on failure the diagonal is
/// regularized with a jitter starting at `1e-10·n` and growing tenfold up to
/// `1e-4`. A design with two coincident points (after scaling) is exactly
/// singular and fails immediately.
pub fn correlation_matrix(history: &EvaluationHistory, theta: &HyperParameters) -> Result<CorrelationFactor> {
    check_dims(history, theta)?;
    let scaled = scale_points(history, &theta.inverse_ranges());
    let (r, duplicate) = correlation_from_scaled(&scaled, history.len(), history.dim());
    factor_with_escalation(&r, history.len(), duplicate)
}

fn check_dims(history: &EvaluationHistory, theta: &HyperParameters) -> Result<()> {
    if history.dim() != theta.dim() {
        return Err(Error::InvalidInput(format!(
            "history has dimension {} but theta has {}",
            history.dim(),
            theta.dim()
        )));
    }
    Ok(())
}

/// The model conditioned on a history for one value of θ.
///
/// Holds the factorization and the solves shared by the likelihood and all
/// predictive queries, so one instance serves any number of candidates.
#[derive(Debug, Clone)]
pub struct ConditionedGp {
    dim: usize,
    n: usize,
    inv_ranges: Vec<f64>,
    scaled: Vec<f64>,
    factor: CorrelationFactor,
    /// R⁻¹(y − m̂·1) as the unevaluated sum `alpha + alpha_lo`
    alpha: Vec<f64>,
    alpha_lo: Vec<f64>,
    /// R⁻¹1
    beta: Vec<f64>,
    one_rinv_one: f64,
    mean: f64,
    quad_form: f64,
    log_likelihood: f64,
}

/// Factorization and the quantities the likelihood needs, before the
/// back-substitutions that only prediction uses.
struct Fit {
    inv_ranges: Vec<f64>,
    scaled: Vec<f64>,
    correlation: Vec<f64>,
    factor: CorrelationFactor,
    /// L⁻¹1
    u1: Vec<f64>,
    /// L⁻¹(y − m̂·1)
    resid: Vec<f64>,
    one_rinv_one: f64,
    mean: f64,
    quad_form: f64,
    log_likelihood: f64,
}

impl Fit {
    fn new(history: &EvaluationHistory, theta: &HyperParameters) -> Result<Self> {
        check_dims(history, theta)?;
        let n = history.len();
        if n < 2 {
            return Err(Error::InvalidInput(
                "the integrated model needs at least two evaluations".into(),
            ));
        }
        let y = history.values();
        let (lo, hi) = y
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        if lo == hi {
            return Err(Error::DegenerateData);
        }

        let inv_ranges = theta.inverse_ranges();
        let scaled = scale_points(history, &inv_ranges);
        let (correlation, duplicate) = correlation_from_scaled(&scaled, n, history.dim());
        let factor = factor_with_escalation(&correlation, n, duplicate)?;

        let mut u1 = vec![1.0; n];
        factor.solve_lower(&mut u1);
        let mut uy = y.to_vec();
        factor.solve_lower(&mut uy);
        let one_rinv_one = dot(&u1, &u1);
        let mean = dot(&u1, &uy) / one_rinv_one;
        let resid: Vec<f64> = uy.iter().zip(&u1).map(|(a, b)| a - mean * b).collect();
        let quad_form = dot(&resid, &resid);
        if !(quad_form > 0.0 && quad_form.is_finite()) {
            return Err(Error::DegenerateData);
        }
        let log_likelihood =
            -0.5 * factor.log_det() - 0.5 * one_rinv_one.ln() - 0.5 * (n as f64 - 1.0) * quad_form.ln();
        Ok(Fit {
            inv_ranges,
            scaled,
            correlation,
            factor,
            u1,
            resid,
            one_rinv_one,
            mean,
            quad_form,
            log_likelihood,
        })
    }
}

/// Residual `b − (A + jitter·I)(hi + lo)` in doubled precision, and its
/// largest magnitude.
fn residual(a: &[f64], jitter: f64, b: &[f64], hi: &[f64], lo: &[f64]) -> (Vec<f64>, f64) {
    let n = b.len();
    let mut worst: f64 = 0.0;
    let r: Vec<f64> = (0..n)
        .map(|i| {
            let mut acc = Compensated::default();
            acc.add(b[i]);
            acc.add_product(-jitter, hi[i]);
            acc.add_product(-jitter, lo[i]);
            for j in 0..n {
                acc.add_product(-a[i * n + j], hi[j]);
                acc.add_product(-a[i * n + j], lo[j]);
            }
            let v = acc.value();
            worst = worst.max(v.abs());
            v
        })
        .collect();
    (r, worst)
}

/// Iterative refinement of the Cholesky solution `hi` of `(A + jitter·I)x = b`,
/// with residuals in doubled precision and the solution kept as an unevaluated
/// sum `hi + lo`. Stops as soon as a step fails to shrink the residual.
fn refine(a: &[f64], factor: &CorrelationFactor, b: &[f64], hi: &mut [f64]) -> Vec<f64> {
    let mut lo = vec![0.0; b.len()];
    let (mut r, mut size) = residual(a, factor.jitter(), b, hi, &lo);
    for _ in 0..REFINE_STEPS {
        if size == 0.0 {
            break;
        }
        factor.solve_lower(&mut r);
        factor.solve_upper(&mut r);
        let (mut h2, mut l2) = (hi.to_vec(), lo.clone());
        for k in 0..b.len() {
            let mut acc = Compensated::default();
            acc.add(hi[k]);
            acc.add(lo[k]);
            acc.add(r[k]);
            h2[k] = acc.value();
            let mut rest = Compensated::default();
            rest.add(hi[k]);
            rest.add(-h2[k]);
            rest.add(lo[k]);
            rest.add(r[k]);
            l2[k] = rest.value();
        }
        let (r2, size2) = residual(a, factor.jitter(), b, &h2, &l2);
        if !(size2 < size) {
            break;
        }
        hi.copy_from_slice(&h2);
        lo = l2;
        (r, size) = (r2, size2);
    }
    lo
}

impl ConditionedGp {
    pub fn new(history: &EvaluationHistory, theta: &HyperParameters) -> Result<Self> {
        let Fit {
            inv_ranges,
            scaled,
            correlation,
            factor,
            mut u1,
            mut resid,
            one_rinv_one,
            mean,
            quad_form,
            log_likelihood,
        } = Fit::new(history, theta)?;
        factor.solve_upper(&mut resid);
        factor.solve_upper(&mut u1);
        // predictions at design points reproduce the data only as well as
        // R·alpha reproduces y − m̂·1
        let target: Vec<f64> = history.values().iter().map(|v| v - mean).collect();
        let alpha_lo = refine(&correlation, &factor, &target, &mut resid);
        Ok(ConditionedGp {
            dim: history.dim(),
            n: history.len(),
            inv_ranges,
            scaled,
            factor,
            alpha: resid,
            alpha_lo,
            beta: u1,
            one_rinv_one,
            mean,
            quad_form,
            log_likelihood,
        })
    }

    /// θ-dependent part of the log marginal likelihood.
    pub fn log_likelihood(&self) -> f64 {
        self.log_likelihood
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn factor(&self) -> &CorrelationFactor {
        &self.factor
    }

    /// Generalized least-squares estimate of the constant mean.
    pub fn mean_estimate(&self) -> f64 {
        self.mean
    }

    /// σ̂² = Q / (n − 1).
    pub fn variance_estimate(&self) -> f64 {
        self.quad_form / (self.n as f64 - 1.0)
    }

    /// 1ᵀR⁻¹1.
    pub fn one_rinv_one(&self) -> f64 {
        self.one_rinv_one
    }

    pub fn quad_form(&self) -> f64 {
        self.quad_form
    }

    pub fn dof(&self) -> f64 {
        self.n as f64 - 1.0
    }

    pub fn predict(&self, x: &[f64]) -> PredictiveDistribution {
        let mut scratch = Vec::with_capacity(self.n);
        self.predict_with(x, &mut scratch)
    }

    /// Same as [`predict`](Self::predict) with a caller-provided buffer.
    pub fn predict_with(&self, x: &[f64], scratch: &mut Vec<f64>) -> PredictiveDistribution {
        let mut out = Vec::with_capacity(1);
        self.predict_many(std::slice::from_ref(&x), &mut out, scratch);
        out[0]
    }

    /// Predictive at every point of `xs`, appended to `out`. Points are
    /// processed in blocks sharing one pass over the Cholesky factor; each
    /// result is bit-identical to a single-point [`predict`](Self::predict).
    pub fn predict_many<P: AsRef<[f64]>>(
        &self,
        xs: &[P],
        out: &mut Vec<PredictiveDistribution>,
        scratch: &mut Vec<f64>,
    ) {
        const B: usize = PREDICT_BLOCK;
        let (n, d) = (self.n, self.dim);
        let l = self.factor.lower();
        let sigma2 = self.variance_estimate();
        scratch.clear();
        scratch.resize(n * B, 0.0);
        let mut xs_scaled = vec![0.0; d * B];
        for block in xs.chunks(B) {
            for (b, x) in block.iter().enumerate() {
                let x = x.as_ref();
                debug_assert_eq!(x.len(), d);
                for k in 0..d {
                    xs_scaled[b * d + k] = x[k] * self.inv_ranges[k];
                }
            }
            for (i, p) in self.scaled.chunks_exact(d).enumerate() {
                let row = &mut scratch[i * B..(i + 1) * B];
                for b in 0..B {
                    row[b] = if b < block.len() {
                        let xb = &xs_scaled[b * d..(b + 1) * d];
                        let h2: f64 = p.iter().zip(xb).map(|(u, v)| (u - v) * (u - v)).sum();
                        matern52_correlation(h2.sqrt())
                    } else {
                        0.0
                    };
                }
            }
            let mut loc = [Compensated::default(); B];
            let mut loc_lo = [0.0; B];
            let mut one_r = [0.0; B];
            for i in 0..n {
                let row = &scratch[i * B..(i + 1) * B];
                for b in 0..B {
                    loc[b].add_product(row[b], self.alpha[i]);
                    loc_lo[b] += row[b] * self.alpha_lo[i];
                    one_r[b] += row[b] * self.beta[i];
                }
            }
            // forward substitution, all lanes at once
            let mut explained = [0.0; B];
            for i in 0..n {
                let mut acc = [0.0; B];
                let li = &l[i * n..i * n + i];
                for (k, lik) in li.iter().enumerate() {
                    let zk = &scratch[k * B..(k + 1) * B];
                    for b in 0..B {
                        acc[b] += lik * zk[b];
                    }
                }
                let diag = l[i * n + i];
                let zi = &mut scratch[i * B..(i + 1) * B];
                for b in 0..B {
                    zi[b] = (zi[b] - acc[b]) / diag;
                    explained[b] += zi[b] * zi[b];
                }
            }
            for b in 0..block.len() {
                let correction = (1.0 - one_r[b]) * (1.0 - one_r[b]) / self.one_rinv_one;
                let var = (sigma2 * (1.0 - explained[b] + correction)).max(0.0);
                out.push(PredictiveDistribution {
                    location: self.mean + (loc[b].value() + loc_lo[b]),
                    scale: var.sqrt(),
                    dof: self.dof(),
                });
            }
        }
    }
}

/// θ-dependent log marginal likelihood with the constant mean (flat prior)
/// and the variance (Jeffreys prior) integrated out:
/// `−½ log|R| − ½ log(1ᵀR⁻¹1) − ((n−1)/2) log Q`.
pub fn integrated_log_likelihood(history: &EvaluationHistory, theta: &HyperParameters) -> Result<f64> {
    Ok(Fit::new(history, theta)?.log_likelihood)
}

/// Student-t predictive at `x` given the history and θ.
pub fn predictive(x: &[f64], history: &EvaluationHistory, theta: &HyperParameters) -> Result<PredictiveDistribution> {
    Ok(ConditionedGp::new(history, theta)?.predict(x))
}
