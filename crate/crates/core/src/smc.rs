//! Weighted particle approximation of the posterior over log-ranges:
//! importance-sampled initialization from the prior, likelihood-ratio
//! reweighting, multinomial resampling and an independent
//! Metropolis-Hastings move.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gp::{integrated_log_likelihood, Domain, EvaluationHistory, HyperParameters};
use crate::linalg::cholesky;
use crate::rng::RandomStream;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Independent Gaussian priors on the log-ranges (lognormal on the ranges).
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    log_range_means: Vec<f64>,
    log_range_sds: Vec<f64>,
}

impl PriorSpec {
    pub fn new(log_range_means: Vec<f64>, log_range_sds: Vec<f64>) -> Result<Self> {
        if log_range_means.is_empty() || log_range_means.len() != log_range_sds.len() {
            return Err(Error::InvalidInput(
                "prior means and sds must have equal, non-zero length".into(),
            ));
        }
        if log_range_sds.iter().any(|s| !(*s > 0.0 && s.is_finite())) || log_range_means.iter().any(|m| !m.is_finite())
        {
            return Err(Error::InvalidInput("prior needs finite means and positive sds".into()));
        }
        Ok(PriorSpec {
            log_range_means,
            log_range_sds,
        })
    }

    /// Median range equal to each domain side, one unit of log-sd.
    pub fn default_for(domain: &Domain) -> Self {
        let means = (0..domain.dim()).map(|k| domain.width(k).ln()).collect();
        PriorSpec::new(means, vec![1.0; domain.dim()]).expect("domain widths are positive")
    }

    pub fn dim(&self) -> usize {
        self.log_range_means.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.log_range_means
    }

    pub fn sds(&self) -> &[f64] {
        &self.log_range_sds
    }

    /// Log density in log-range coordinates.
    pub fn log_density(&self, theta: &HyperParameters) -> f64 {
        theta
            .log_ranges()
            .iter()
            .zip(self.log_range_means.iter().zip(&self.log_range_sds))
            .map(|(v, (m, s))| {
                let z = (v - m) / s;
                -0.5 * z * z - s.ln() - 0.5 * LN_2PI
            })
            .sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> HyperParameters {
        let v = self
            .log_range_means
            .iter()
            .zip(&self.log_range_sds)
            .map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal))
            .collect();
        HyperParameters::new(v).expect("prior draws are finite")
    }
}

/// Log-likelihood of θ, up to a θ-independent constant.
///
/// `-∞` marks a θ for which the model cannot be evaluated (its particle gets
/// zero weight); `Err` aborts the calling operation.
pub trait LogLikelihood: Sync {
    fn log_likelihood(&self, theta: &HyperParameters) -> Result<f64>;

    /// Identifies the data set so cached values can be reused.
    fn fingerprint(&self) -> Option<u64> {
        None
    }
}

impl LogLikelihood for EvaluationHistory {
    fn log_likelihood(&self, theta: &HyperParameters) -> Result<f64> {
        match integrated_log_likelihood(self, theta) {
            Ok(ll) => Ok(ll),
            Err(Error::FactorizationFailure { .. }) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        }
    }

    fn fingerprint(&self) -> Option<u64> {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ self.len() as u64;
        for v in self.points().flatten().chain(self.values()) {
            h ^= v.to_bits();
            h = h.wrapping_mul(0x0100_0000_01b3).rotate_left(5);
        }
        Some(h)
    }
}

/// Adapter turning a closure into a [`LogLikelihood`].
pub struct FnLikelihood<F>(pub F);

impl<F: Fn(&HyperParameters) -> f64 + Sync> LogLikelihood for FnLikelihood<F> {
    fn log_likelihood(&self, theta: &HyperParameters) -> Result<f64> {
        Ok((self.0)(theta))
    }
}

#[derive(Debug, Clone, PartialEq)]
struct LikelihoodCache {
    fingerprint: u64,
    values: Vec<f64>,
}

/// Weighted particles over log-ranges. Weights always sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    particles: Vec<HyperParameters>,
    weights: Vec<f64>,
    cache: Option<LikelihoodCache>,
}

impl ParticleSet {
    /// Normalizes non-negative `weights`.
    pub fn new(particles: Vec<HyperParameters>, weights: Vec<f64>) -> Result<Self> {
        if particles.is_empty() || particles.len() != weights.len() {
            return Err(Error::InvalidInput(
                "a particle set needs as many weights as particles, at least one".into(),
            ));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::AllWeightsZero);
        }
        Ok(ParticleSet {
            particles,
            weights: weights.iter().map(|w| w / total).collect(),
            cache: None,
        })
    }

    pub fn uniform(particles: Vec<HyperParameters>) -> Result<Self> {
        let n = particles.len();
        ParticleSet::new(particles, vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[HyperParameters] {
        &self.particles
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.particles[0].dim()
    }

    /// Weighted mean of the log-ranges.
    pub fn mean(&self) -> Vec<f64> {
        let d = self.dim();
        let mut m = vec![0.0; d];
        for (p, w) in self.particles.iter().zip(&self.weights) {
            for (acc, v) in m.iter_mut().zip(p.log_ranges()) {
                *acc += w * v;
            }
        }
        m
    }

    /// Weighted covariance of the log-ranges (row-major `d × d`).
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim();
        let m = self.mean();
        let mut c = vec![0.0; d * d];
        for (p, w) in self.particles.iter().zip(&self.weights) {
            let v = p.log_ranges();
            for a in 0..d {
                for b in 0..d {
                    c[a * d + b] += w * (v[a] - m[a]) * (v[b] - m[b]);
                }
            }
        }
        c
    }

    fn cached_for<L: LogLikelihood + ?Sized>(&self, lik: &L) -> Option<&[f64]> {
        match (&self.cache, lik.fingerprint()) {
            (Some(c), Some(f)) if c.fingerprint == f => Some(&c.values),
            _ => None,
        }
    }
}

/// Turns log-weights into normalized weights (max-subtracted).
pub fn normalize_log_weights(log_weights: &[f64]) -> Result<Vec<f64>> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::AllWeightsZero);
    }
    let w: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(w.iter().map(|v| v / total).collect())
}

fn evaluate_all<L: LogLikelihood + ?Sized>(lik: &L, thetas: &[HyperParameters], exec: Execution) -> Result<Vec<f64>> {
    exec.map_slice(thetas, |_, th| lik.log_likelihood(th))
        .into_iter()
        .map(|r| r.map(|v| if v.is_nan() { f64::NEG_INFINITY } else { v }))
        .collect()
}

/// Draws `count` particles from the prior and weights them by the
/// likelihood (importance sampling with the prior as instrumental law).
pub fn init_particles<L: LogLikelihood + ?Sized>(
    prior: &PriorSpec,
    lik: &L,
    count: usize,
    stream: RandomStream,
    exec: Execution,
) -> Result<ParticleSet> {
    if count == 0 {
        return Err(Error::InvalidInput("need at least one particle".into()));
    }
    let thetas: Vec<HyperParameters> = (0..count).map(|i| prior.sample(&mut stream.split(i).rng())).collect();
    let log_liks = evaluate_all(lik, &thetas, exec)?;
    let weights = normalize_log_weights(&log_liks)?;
    Ok(ParticleSet {
        particles: thetas,
        weights,
        cache: lik.fingerprint().map(|fingerprint| LikelihoodCache {
            fingerprint,
            values: log_liks,
        }),
    })
}

/// Multiplies each weight by the likelihood ratio between the new and the
/// old data set, then renormalizes. Prior factors cancel.
pub fn reweight<L: LogLikelihood + ?Sized>(
    particles: &ParticleSet,
    old: &L,
    new: &L,
    exec: Execution,
) -> Result<ParticleSet> {
    let old_ll = match particles.cached_for(old) {
        Some(v) => v.to_vec(),
        None => evaluate_all(old, &particles.particles, exec)?,
    };
    let new_ll = evaluate_all(new, &particles.particles, exec)?;
    let log_w: Vec<f64> = particles
        .weights
        .iter()
        .zip(old_ll.iter().zip(&new_ll))
        .map(|(w, (lo, ln))| {
            if *w == 0.0 || *ln == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else if *lo == f64::NEG_INFINITY {
                // was unusable before; keep it out
                f64::NEG_INFINITY
            } else {
                w.ln() + (ln - lo)
            }
        })
        .collect();
    let weights = normalize_log_weights(&log_w)?;
    Ok(ParticleSet {
        particles: particles.particles.clone(),
        weights,
        cache: new.fingerprint().map(|fingerprint| LikelihoodCache {
            fingerprint,
            values: new_ll,
        }),
    })
}

/// 1 / Σ wᵢ².
pub fn effective_sample_size(particles: &ParticleSet) -> f64 {
    1.0 / particles.weights.iter().map(|w| w * w).sum::<f64>()
}

/// Draws `I` particles with replacement, with probabilities equal to the
/// weights. Output weights are all `1/I`.
pub fn multinomial_resample(particles: &ParticleSet, stream: RandomStream) -> ParticleSet {
    let n = particles.len();
    let mut cumulative = Vec::with_capacity(n);
    let mut acc = 0.0;
    for w in &particles.weights {
        acc += w;
        cumulative.push(acc);
    }
    let mut rng = stream.rng();
    let picks: Vec<usize> = (0..n)
        .map(|_| {
            let u = rng.random::<f64>() * acc;
            cumulative.partition_point(|c| *c <= u).min(n - 1)
        })
        .collect();
    // never pick a zero-weight particle through roundoff at the end
    let picks: Vec<usize> = picks
        .into_iter()
        .map(|mut i| {
            while particles.weights[i] == 0.0 && i > 0 {
                i -= 1;
            }
            i
        })
        .collect();
    ParticleSet {
        particles: picks.iter().map(|&i| particles.particles[i].clone()).collect(),
        weights: vec![1.0 / n as f64; n],
        cache: particles.cache.as_ref().map(|c| LikelihoodCache {
            fingerprint: c.fingerprint,
            values: picks.iter().map(|&i| c.values[i]).collect(),
        }),
    }
}

/// Tuning of the independent Metropolis-Hastings move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveConfig {
    pub sweeps: usize,
    /// Multiplier of the cloud covariance (1.2²).
    pub inflation: f64,
    /// Added to the proposal covariance diagonal.
    pub regularization: f64,
}

impl Default for MoveConfig {
    fn default() -> Self {
        MoveConfig {
            sweeps: 2,
            inflation: 1.44,
            regularization: 1e-6,
        }
    }
}

/// Gaussian proposal in log-range space, moment-matched to a particle cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentProposal {
    mean: Vec<f64>,
    chol: Vec<f64>,
    log_norm: f64,
}

impl IndependentProposal {
    pub fn new(mean: Vec<f64>, covariance: &[f64]) -> Result<Self> {
        let d = mean.len();
        let chol = cholesky(covariance, d, 0.0).ok_or(Error::DegenerateCloud)?;
        let log_det: f64 = 2.0 * (0..d).map(|i| chol[i * d + i].ln()).sum::<f64>();
        Ok(IndependentProposal {
            mean,
            chol,
            log_norm: -0.5 * (d as f64 * LN_2PI + log_det),
        })
    }

    pub fn from_cloud(particles: &ParticleSet, config: &MoveConfig) -> Result<Self> {
        let d = particles.dim();
        let mut cov = particles.covariance();
        for v in cov.iter_mut() {
            *v *= config.inflation;
        }
        for k in 0..d {
            cov[k * d + k] += config.regularization;
        }
        IndependentProposal::new(particles.mean(), &cov)
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn log_density(&self, theta: &HyperParameters) -> f64 {
        let d = self.mean.len();
        let mut z: Vec<f64> = theta.log_ranges().iter().zip(&self.mean).map(|(v, m)| v - m).collect();
        crate::linalg::solve_lower_in_place(&self.chol, d, &mut z);
        self.log_norm - 0.5 * z.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> HyperParameters {
        let d = self.mean.len();
        let z: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let v = (0..d)
            .map(|i| self.mean[i] + (0..=i).map(|k| self.chol[i * d + k] * z[k]).sum::<f64>())
            .collect();
        HyperParameters::new(v).expect("proposal draws are finite")
    }
}

/// Log of the independent-MH acceptance probability
/// `min(1, π(θ*)·q(θ) / (π(θ)·q(θ*)))`.
pub fn mh_log_acceptance(
    log_target_current: f64,
    log_target_proposed: f64,
    log_proposal_current: f64,
    log_proposal_proposed: f64,
) -> f64 {
    if log_target_proposed == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if log_target_current == f64::NEG_INFINITY {
        return 0.0;
    }
    let r = (log_target_proposed - log_target_current) + (log_proposal_current - log_proposal_proposed);
    r.min(0.0)
}

/// Result of [`move_particles`].
#[derive(Debug, Clone, PartialEq)]
pub struct MoveOutcome {
    pub particles: ParticleSet,
    pub acceptance_rate: f64,
}

/// Applies `config.sweeps` independent Metropolis-Hastings steps to every
/// particle, targeting prior × likelihood. The proposal is fitted once to
/// the incoming cloud. Weights are left unchanged.
///
/// Particle `i` draws from `stream.split(i)`, so the result does not depend
/// on the execution policy.
pub fn move_particles<L: LogLikelihood + ?Sized>(
    particles: &ParticleSet,
    prior: &PriorSpec,
    lik: &L,
    config: &MoveConfig,
    stream: RandomStream,
    exec: Execution,
) -> Result<MoveOutcome> {
    let proposal = IndependentProposal::from_cloud(particles, config)?;
    let current_ll = match particles.cached_for(lik) {
        Some(v) => v.to_vec(),
        None => evaluate_all(lik, &particles.particles, exec)?,
    };

    let moved = exec.map_range(particles.len(), |i| -> Result<(HyperParameters, f64, usize)> {
        let mut rng = stream.split(i).rng();
        let mut theta = particles.particles[i].clone();
        let mut ll = current_ll[i];
        let mut log_target = prior.log_density(&theta) + ll;
        let mut log_q = proposal.log_density(&theta);
        let mut accepted = 0;
        for _ in 0..config.sweeps {
            let cand = proposal.sample(&mut rng);
            let cand_ll = lik.log_likelihood(&cand)?;
            let cand_ll = if cand_ll.is_nan() { f64::NEG_INFINITY } else { cand_ll };
            let cand_target = prior.log_density(&cand) + cand_ll;
            let cand_q = proposal.log_density(&cand);
            let log_alpha = mh_log_acceptance(log_target, cand_target, log_q, cand_q);
            let u: f64 = rng.random();
            if u.ln() < log_alpha {
                theta = cand;
                ll = cand_ll;
                log_target = cand_target;
                log_q = cand_q;
                accepted += 1;
            }
        }
        Ok((theta, ll, accepted))
    });

    let mut thetas = Vec::with_capacity(particles.len());
    let mut lls = Vec::with_capacity(particles.len());
    let mut accepted = 0;
    for m in moved {
        let (th, ll, a) = m?;
        thetas.push(th);
        lls.push(ll);
        accepted += a;
    }
    let proposals = (particles.len() * config.sweeps).max(1);
    Ok(MoveOutcome {
        particles: ParticleSet {
            particles: thetas,
            weights: particles.weights.clone(),
            cache: lik.fingerprint().map(|fingerprint| LikelihoodCache {
                fingerprint,
                values: lls,
            }),
        },
        acceptance_rate: accepted as f64 / proposals as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::split_stream;

    fn theta(v: &[f64]) -> HyperParameters {
        HyperParameters::new(v.to_vec()).unwrap()
    }

    fn toy_history() -> EvaluationHistory {
        EvaluationHistory::new(
            vec![vec![0.1], vec![0.3], vec![0.55], vec![0.8], vec![0.95]],
            vec![0.4, 1.0, 0.1, -0.6, 0.2],
        )
        .unwrap()
    }

    fn toy_prior() -> PriorSpec {
        PriorSpec::new(vec![(0.3f64).ln()], vec![1.0]).unwrap()
    }

    /// Grid posterior of the toy problem: (grid, normalized density, cell width).
    fn quadrature_posterior(h: &EvaluationHistory, prior: &PriorSpec) -> (Vec<f64>, Vec<f64>, f64) {
        let (m, s) = (prior.means()[0], prior.sds()[0]);
        let k = 40_001;
        let (lo, hi) = (m - 8.0 * s, m + 8.0 * s);
        let dv = (hi - lo) / (k - 1) as f64;
        let grid: Vec<f64> = (0..k).map(|i| lo + i as f64 * dv).collect();
        let logp: Vec<f64> = grid
            .iter()
            .map(|v| {
                let th = theta(&[*v]);
                prior.log_density(&th) + h.log_likelihood(&th).unwrap()
            })
            .collect();
        let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let dens: Vec<f64> = logp.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = dens.iter().sum::<f64>() * dv;
        (grid, dens.iter().map(|d| d / total).collect(), dv)
    }

    fn moments(grid: &[f64], dens: &[f64], dv: f64) -> (f64, f64) {
        let mean: f64 = grid.iter().zip(dens).map(|(v, p)| v * p).sum::<f64>() * dv;
        let var: f64 = grid.iter().zip(dens).map(|(v, p)| (v - mean).powi(2) * p).sum::<f64>() * dv;
        (mean, var)
    }

    #[test]
    fn init_with_flat_likelihood_is_uniform() {
        let prior = toy_prior();
        let ps = init_particles(
            &prior,
            &FnLikelihood(|_: &HyperParameters| 0.0),
            25,
            split_stream(1, "init"),
            Execution::Serial,
        )
        .unwrap();
        assert!(ps.weights().iter().all(|w| (w - 1.0 / 25.0).abs() < 1e-15));
        let one = init_particles(&prior, &toy_history(), 1, split_stream(1, "init"), Execution::Serial).unwrap();
        assert_eq!(one.weights(), &[1.0]);
    }

    #[test]
    fn init_all_zero_fails() {
        let r = init_particles(
            &toy_prior(),
            &FnLikelihood(|_: &HyperParameters| f64::NEG_INFINITY),
            5,
            split_stream(1, "init"),
            Execution::Serial,
        );
        assert_eq!(r, Err(Error::AllWeightsZero));
    }

    #[test]
    fn init_posterior_mean_matches_quadrature() {
        let h = toy_history();
        let prior = toy_prior();
        let (grid, dens, dv) = quadrature_posterior(&h, &prior);
        let (mean, var) = moments(&grid, &dens, dv);
        let ps = init_particles(&prior, &h, 10_000, split_stream(2, "init"), Execution::Parallel).unwrap();
        let est = ps.mean()[0];
        let se = (var / effective_sample_size(&ps)).sqrt();
        assert!((est - mean).abs() < 2.0 * se, "{est} vs {mean} (se {se})");
    }

    #[test]
    fn reweight_with_flat_increment_keeps_weights() {
        let ps = ParticleSet::new(vec![theta(&[0.0]), theta(&[1.0]), theta(&[-1.0])], vec![0.2, 0.3, 0.5]).unwrap();
        let old = FnLikelihood((|t: &HyperParameters| t.log_ranges()[0] * 2.0) as fn(&HyperParameters) -> f64);
        let new = FnLikelihood((|t: &HyperParameters| t.log_ranges()[0] * 2.0 + 3.0) as fn(&HyperParameters) -> f64);
        let out = reweight(&ps, &old, &new, Execution::Serial).unwrap();
        for (a, b) in out.weights().iter().zip(ps.weights()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn reweight_ratio_matches_likelihood_ratio() {
        let old_h = EvaluationHistory::new(vec![vec![0.0], vec![0.5], vec![1.0]], vec![0.0, 1.0, 0.3]).unwrap();
        let new_h = old_h.extended(&[0.7], 0.9).unwrap();
        let (t1, t2) = (theta(&[-1.0]), theta(&[0.2]));
        let ps = ParticleSet::new(vec![t1.clone(), t2.clone()], vec![0.4, 0.6]).unwrap();
        let out = reweight(&ps, &old_h, &new_h, Execution::Serial).unwrap();
        let dl = |t: &HyperParameters| new_h.log_likelihood(t).unwrap() - old_h.log_likelihood(t).unwrap();
        let want = (dl(&t1) - dl(&t2)).exp() * (0.4 / 0.6);
        let got = out.weights()[0] / out.weights()[1];
        assert!((got / want - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weights_stay_normalized_over_sequences() {
        let mut h = toy_history();
        let mut ps = init_particles(&toy_prior(), &h, 200, split_stream(3, "init"), Execution::Serial).unwrap();
        for k in 0..6 {
            let next = h.extended(&[0.02 + 0.13 * k as f64], (k as f64).sin()).unwrap();
            ps = reweight(&ps, &h, &next, Execution::Serial).unwrap();
            assert!((ps.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            h = next;
        }
    }

    #[test]
    fn ess_values() {
        let p = |w: Vec<f64>| ParticleSet::new(vec![theta(&[0.0]); w.len()], w).unwrap();
        assert!((effective_sample_size(&p(vec![1.0; 8])) - 8.0).abs() < 1e-12);
        assert_eq!(effective_sample_size(&p(vec![1.0, 0.0, 0.0])), 1.0);
        assert!((effective_sample_size(&p(vec![0.5, 0.25, 0.25])) - 1.0 / 0.375).abs() < 1e-12);
    }

    #[test]
    fn resample_degenerate_and_uniform_weights() {
        let ps = ParticleSet::new(vec![theta(&[0.0]), theta(&[1.0]), theta(&[2.0])], vec![0.0, 1.0, 0.0]).unwrap();
        let out = multinomial_resample(&ps, split_stream(4, "r"));
        assert!(out.particles().iter().all(|t| t.log_ranges()[0] == 1.0));
        assert!(out.weights().iter().all(|w| *w == 1.0 / 3.0));
    }

    #[test]
    fn resample_frequencies_concentrate() {
        let i = 50;
        let ps = ParticleSet::uniform((0..i).map(|k| theta(&[k as f64])).collect()).unwrap();
        let reps = 10_000;
        let mut counts = vec![0usize; i];
        let root = split_stream(5, "resample");
        for r in 0..reps {
            for t in multinomial_resample(&ps, root.split(r)).particles() {
                counts[t.log_ranges()[0] as usize] += 1;
            }
        }
        let p = 1.0 / i as f64;
        let sd = (p * (1.0 - p) / (i * reps) as f64).sqrt();
        for c in counts {
            let freq = c as f64 / (i * reps) as f64;
            assert!((freq - p).abs() < 3.0 * sd, "freq {freq}");
        }
    }

    #[test]
    fn resample_preserves_weighted_mean() {
        let thetas: Vec<HyperParameters> = (0..30)
            .map(|k| theta(&[(k as f64 * 0.37).sin(), k as f64 * 0.1]))
            .collect();
        let weights: Vec<f64> = (0..30).map(|k| 1.0 + (k as f64 * 1.3).cos()).collect();
        let ps = ParticleSet::new(thetas, weights).unwrap();
        let target = ps.mean();
        let reps: usize = 10_000;
        let root = split_stream(6, "resample");
        let means: Vec<Vec<f64>> = (0..reps)
            .map(|r| multinomial_resample(&ps, root.split(r)).mean())
            .collect();
        for k in 0..2 {
            let avg = means.iter().map(|m| m[k]).sum::<f64>() / reps as f64;
            let var = means.iter().map(|m| (m[k] - avg).powi(2)).sum::<f64>() / (reps - 1) as f64;
            let se = (var / reps as f64).sqrt();
            assert!((avg - target[k]).abs() < 4.0 * se, "coord {k}: {avg} vs {}", target[k]);
        }
    }

    #[test]
    fn acceptance_formula() {
        // π(θ)=e^-1.0, π(θ*)=e^-2.5, q(θ)=e^-0.3, q(θ*)=e^-0.1
        let got = mh_log_acceptance(-1.0, -2.5, -0.3, -0.1);
        let want = ((-2.5f64).exp() * (-0.3f64).exp() / ((-1.0f64).exp() * (-0.1f64).exp())).ln();
        assert!((got - want).abs() < 1e-12);
        assert_eq!(mh_log_acceptance(-3.0, -1.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn target_equal_to_proposal_always_accepts() {
        let prior = toy_prior();
        let ps = ParticleSet::uniform((0..40).map(|k| theta(&[-1.0 + 0.05 * k as f64])).collect()).unwrap();
        let config = MoveConfig::default();
        let proposal = IndependentProposal::from_cloud(&ps, &config).unwrap();
        let lik = FnLikelihood(|t: &HyperParameters| proposal.log_density(t) - prior.log_density(t));
        let out = move_particles(&ps, &prior, &lik, &config, split_stream(7, "move"), Execution::Serial).unwrap();
        assert_eq!(out.acceptance_rate, 1.0);
    }

    #[test]
    fn identical_cloud_without_regularization_is_degenerate() {
        let ps = ParticleSet::uniform(vec![theta(&[0.5, 0.1]); 10]).unwrap();
        let config = MoveConfig {
            regularization: 0.0,
            ..MoveConfig::default()
        };
        let r = move_particles(
            &ps,
            &PriorSpec::new(vec![0.0; 2], vec![1.0; 2]).unwrap(),
            &FnLikelihood(|_: &HyperParameters| 0.0),
            &config,
            split_stream(1, "m"),
            Execution::Serial,
        );
        assert_eq!(r, Err(Error::DegenerateCloud));
    }

    fn exact_sample(grid: &[f64], dens: &[f64], dv: f64, count: usize, stream: RandomStream) -> Vec<HyperParameters> {
        let mut cdf = Vec::with_capacity(dens.len());
        let mut acc = 0.0;
        for d in dens {
            acc += d * dv;
            cdf.push(acc);
        }
        let mut rng = stream.rng();
        (0..count)
            .map(|_| {
                let u = rng.random::<f64>() * acc;
                let k = cdf.partition_point(|c| *c < u).min(grid.len() - 1);
                let prev = if k == 0 { 0.0 } else { cdf[k - 1] };
                let frac = if cdf[k] > prev {
                    (u - prev) / (cdf[k] - prev)
                } else {
                    0.5
                };
                theta(&[grid[k] - dv + frac * dv])
            })
            .collect()
    }

    #[test]
    fn move_leaves_posterior_invariant() {
        let h = toy_history();
        let prior = toy_prior();
        let (grid, dens, dv) = quadrature_posterior(&h, &prior);
        let (mean, var) = moments(&grid, &dens, dv);
        let count = 4000;
        let mut ps = ParticleSet::uniform(exact_sample(&grid, &dens, dv, count, split_stream(8, "exact"))).unwrap();
        let root = split_stream(8, "move");
        for k in 0..50usize {
            ps = move_particles(
                &ps,
                &prior,
                &h,
                &MoveConfig::default(),
                root.split(k),
                Execution::Parallel,
            )
            .unwrap()
            .particles;
        }
        let vals: Vec<f64> = ps.particles().iter().map(|t| t.log_ranges()[0]).collect();
        let m = vals.iter().sum::<f64>() / count as f64;
        let v = vals.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (count - 1) as f64;
        let fourth: f64 = grid.iter().zip(&dens).map(|(g, p)| (g - mean).powi(4) * p).sum::<f64>() * dv;
        let se_mean = (var / count as f64).sqrt();
        let se_var = ((fourth - var * var) / count as f64).sqrt();
        assert!((m - mean).abs() < 4.0 * se_mean, "mean {m} vs {mean}");
        assert!((v - var).abs() < 4.0 * se_var, "var {v} vs {var}");

        // total variation between a 20-bin histogram and the quadrature law
        let (lo, hi) = (mean - 4.0 * var.sqrt(), mean + 4.0 * var.sqrt());
        let bins = 20;
        let width = (hi - lo) / bins as f64;
        let mut emp = vec![0.0; bins + 2];
        let mut exact = vec![0.0; bins + 2];
        let bin = |x: f64| {
            if x < lo {
                0
            } else if x >= hi {
                bins + 1
            } else {
                1 + ((x - lo) / width) as usize
            }
        };
        for x in &vals {
            emp[bin(*x)] += 1.0 / count as f64;
        }
        for (g, p) in grid.iter().zip(&dens) {
            exact[bin(*g)] += p * dv;
        }
        let tv: f64 = 0.5 * emp.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum::<f64>();
        assert!(tv < 0.1, "tv {tv}");
    }

    #[test]
    fn operations_are_reproducible_and_policy_independent() {
        let h = toy_history();
        let prior = toy_prior();
        let run = |exec: Execution| {
            let ps = init_particles(&prior, &h, 64, split_stream(9, "init"), exec).unwrap();
            let ps = multinomial_resample(&ps, split_stream(9, "res"));
            move_particles(&ps, &prior, &h, &MoveConfig::default(), split_stream(9, "mv"), exec).unwrap()
        };
        let a = run(Execution::Serial);
        assert_eq!(a, run(Execution::Serial));
        assert_eq!(a, run(Execution::Parallel));
        assert!(a.acceptance_rate > 0.0);
    }
}
