//! Demarginalization: attaching a population of candidate points to every
//! particle and weighting the joint (θ, x) sample towards
//! `g(x | θ) dx · π(dθ)`, where `g` is the exceedance probability.

use crate::criteria::{exceedance_probability, ParticleModels};
use crate::error::Result;
use crate::exec::Execution;
use crate::gp::{EvaluationHistory, HyperParameters};
use crate::histogram::TreeHistogram;
use crate::rng::RandomStream;
use crate::smc::ParticleSet;

/// Joint weighted sample of `I × J` (θ, x) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateGrid {
    thetas: Vec<HyperParameters>,
    theta_weights: Vec<f64>,
    per_particle: usize,
    dim: usize,
    /// `I·J` points, row-major by particle.
    points: Vec<Vec<f64>>,
    joint_weights: Vec<f64>,
}

impl CandidateGrid {
    pub fn particle_count(&self) -> usize {
        self.thetas.len()
    }

    pub fn per_particle(&self) -> usize {
        self.per_particle
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn thetas(&self) -> &[HyperParameters] {
        &self.thetas
    }

    pub fn theta_weights(&self) -> &[f64] {
        &self.theta_weights
    }

    pub fn point(&self, i: usize, j: usize) -> &[f64] {
        &self.points[i * self.per_particle + j]
    }

    /// All candidates, particle-major.
    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn joint_weight(&self, i: usize, j: usize) -> f64 {
        self.joint_weights[i * self.per_particle + j]
    }

    /// All joint weights, particle-major.
    pub fn joint_weights(&self) -> &[f64] {
        &self.joint_weights
    }

    pub fn row_weights(&self, i: usize) -> &[f64] {
        &self.joint_weights[i * self.per_particle..(i + 1) * self.per_particle]
    }
}

/// Self-normalized importance weights of one particle's row:
/// `w · (g_j/q_j) / Σ_j' (g_j'/q_j')`. Falls back to `w/J` when every ratio
/// is zero.
pub fn joint_weights_row(theta_weight: f64, g: &[f64], q: &[f64]) -> Vec<f64> {
    let ratios: Vec<f64> = g.iter().zip(q).map(|(g, q)| g / q).collect();
    let total: f64 = ratios.iter().sum();
    if total > 0.0 && total.is_finite() {
        ratios.iter().map(|r| theta_weight * r / total).collect()
    } else {
        vec![theta_weight / g.len() as f64; g.len()]
    }
}

/// Demarginalization with an arbitrary criterion `g(i, x)` for particle `i`.
///
/// Particle `i` samples its `J` points from `q` with `stream.split(i)`.
pub fn demarginalize_with<G>(
    particles: &ParticleSet,
    q: &TreeHistogram,
    per_particle: usize,
    stream: RandomStream,
    exec: Execution,
    g: G,
) -> Result<CandidateGrid>
where
    G: Fn(usize, &[f64]) -> f64 + Sync + Send,
{
    if per_particle == 0 {
        return Err(crate::Error::InvalidInput(
            "need at least one candidate per particle".into(),
        ));
    }
    let rows = exec.map_range(particles.len(), |i| -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let pts = q.sample(per_particle, stream.split(i));
        let mut gv = Vec::with_capacity(per_particle);
        let mut qv = Vec::with_capacity(per_particle);
        for x in &pts {
            gv.push(g(i, x));
            qv.push(q.density(x)?);
        }
        Ok((pts, joint_weights_row(particles.weights()[i], &gv, &qv)))
    });
    let mut points = Vec::with_capacity(particles.len() * per_particle);
    let mut joint_weights = Vec::with_capacity(particles.len() * per_particle);
    for row in rows {
        let (p, w) = row?;
        points.extend(p);
        joint_weights.extend(w);
    }
    Ok(CandidateGrid {
        thetas: particles.particles().to_vec(),
        theta_weights: particles.weights().to_vec(),
        per_particle,
        dim: q.domain().dim(),
        points,
        joint_weights,
    })
}

/// Demarginalization with `g` = exceedance probability of the current best,
/// reusing already conditioned models.
pub fn demarginalize_with_models(
    particles: &ParticleSet,
    models: &ParticleModels,
    q: &TreeHistogram,
    per_particle: usize,
    stream: RandomStream,
    exec: Execution,
) -> Result<CandidateGrid> {
    let best = models.best();
    demarginalize_with(particles, q, per_particle, stream, exec, |i, x| {
        models
            .model(i)
            .map_or(0.0, |m| exceedance_probability(&m.predict(x), best).value())
    })
}

/// Samples `J` candidates per particle from `q` and weights them by the
/// exceedance probability under that particle's θ.
pub fn demarginalize(
    particles: &ParticleSet,
    q: &TreeHistogram,
    history: &EvaluationHistory,
    per_particle: usize,
    stream: RandomStream,
    exec: Execution,
) -> Result<CandidateGrid> {
    let models = ParticleModels::new(particles, history, exec)?;
    demarginalize_with_models(particles, &models, q, per_particle, stream, exec)
}
