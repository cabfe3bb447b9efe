//! Sampling criteria: expected improvement and exceedance probability under
//! the Student-t predictive, and their average over a particle set.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gp::{ConditionedGp, EvaluationHistory, HyperParameters, PredictiveDistribution};
use crate::smc::ParticleSet;
use crate::special::{student_t_cdf, student_t_pdf};

/// A non-negative criterion value.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct CriterionValue(f64);

impl CriterionValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<CriterionValue> for f64 {
    fn from(v: CriterionValue) -> f64 {
        v.0
    }
}

/// E[(Z + u)₊] for a standard Student-t Z with `dof` > 1 degrees of freedom.
///
/// Only called with `u ≤ 0`, where the tail `T(u)` is computed directly and
/// the two terms cancel by at most a factor of order u².
fn standardized_ei_nonpositive(u: f64, dof: f64) -> f64 {
    let spread = if dof.is_infinite() {
        1.0
    } else {
        (dof + u * u) / (dof - 1.0)
    };
    (u * student_t_cdf(u, dof) + spread * student_t_pdf(u, dof)).max(0.0)
}

/// Expected improvement `E[(ξ − best)₊]` for a Student-t predictive.
///
/// With `u = (location − best)/scale`:
/// `EI = scale·(u·T_ν(u) + (ν + u²)/(ν − 1)·t_ν(u))`. For `u > 0` the
/// equivalent form `(location − best) + scale·EI_std(−u)` is used, which
/// keeps `EI ≥ location − best` exact in floating point.
pub fn expected_improvement(pred: &PredictiveDistribution, best: f64) -> Result<CriterionValue> {
    if !(pred.dof > 1.0) {
        return Err(Error::DofTooLow { dof: pred.dof });
    }
    let gain = pred.location - best;
    if pred.scale <= 0.0 {
        return Ok(CriterionValue(gain.max(0.0)));
    }
    let u = gain / pred.scale;
    let ei = if u > 0.0 {
        gain + pred.scale * standardized_ei_nonpositive(-u, pred.dof)
    } else {
        pred.scale * standardized_ei_nonpositive(u, pred.dof)
    };
    Ok(CriterionValue(ei))
}

/// Probability that ξ exceeds `best`.
pub fn exceedance_probability(pred: &PredictiveDistribution, best: f64) -> CriterionValue {
    if pred.scale <= 0.0 {
        return CriterionValue(if pred.location > best { 1.0 } else { 0.0 });
    }
    let z = (pred.location - best) / pred.scale;
    // P(ξ > best) = P(T > −z) = T(z)
    CriterionValue(student_t_cdf(z, pred.dof))
}

/// The model conditioned on the history for every particle, with duplicate
/// θ values merged (their weights summed).
///
/// Particles whose correlation matrix cannot be factorized contribute zero
/// and are counted in [`failures`](Self::failures).
#[derive(Debug, Clone)]
pub struct ParticleModels {
    /// For each particle, the index of its model in `models` (if any).
    slot_of: Vec<Option<usize>>,
    models: Vec<ConditionedGp>,
    model_weights: Vec<f64>,
    failures: usize,
    best: f64,
}

impl ParticleModels {
    /// Conditions the model on `history` for each distinct θ of `particles`.
    pub fn new(particles: &ParticleSet, history: &EvaluationHistory, exec: Execution) -> Result<Self> {
        Self::with_weights(particles.particles(), particles.weights(), history, exec)
    }

    /// Same as [`new`](Self::new) with arbitrary non-negative weights
    /// (not necessarily normalized).
    pub fn with_weights(
        thetas: &[HyperParameters],
        weights: &[f64],
        history: &EvaluationHistory,
        exec: Execution,
    ) -> Result<Self> {
        let mut first: HashMap<Vec<u64>, usize> = HashMap::new();
        let mut unique: Vec<usize> = Vec::new();
        let mut owner = Vec::with_capacity(thetas.len());
        for (i, th) in thetas.iter().enumerate() {
            let key: Vec<u64> = th.log_ranges().iter().map(|v| v.to_bits()).collect();
            let u = *first.entry(key).or_insert_with(|| {
                unique.push(i);
                unique.len() - 1
            });
            owner.push(u);
        }
        let built = exec.map_slice(&unique, |_, &i| ConditionedGp::new(history, &thetas[i]));

        let mut slot_for_unique = Vec::with_capacity(built.len());
        let mut models = Vec::new();
        let mut failures = 0;
        for b in built {
            match b {
                Ok(m) => {
                    slot_for_unique.push(Some(models.len()));
                    models.push(m);
                }
                Err(Error::FactorizationFailure { .. }) => slot_for_unique.push(None),
                Err(e) => return Err(e),
            }
        }
        let mut model_weights = vec![0.0; models.len()];
        let mut slot_of = Vec::with_capacity(thetas.len());
        for (i, &u) in owner.iter().enumerate() {
            let slot = slot_for_unique[u];
            match slot {
                Some(s) => model_weights[s] += weights[i],
                None => failures += 1,
            }
            slot_of.push(slot);
        }
        if failures > 0 {
            log::warn!("{failures} particle(s) skipped: correlation matrix not factorizable");
        }
        Ok(ParticleModels {
            slot_of,
            models,
            model_weights,
            failures,
            best: history.best(),
        })
    }

    /// Number of particles whose model could not be built.
    pub fn failures(&self) -> usize {
        self.failures
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    /// Number of distinct, successfully conditioned models.
    pub fn distinct(&self) -> usize {
        self.models.len()
    }

    /// Model used by particle `i`, if its factorization succeeded.
    pub fn model(&self, i: usize) -> Option<&ConditionedGp> {
        self.slot_of[i].map(|s| &self.models[s])
    }

    /// Σᵢ wᵢ · EI(x; θᵢ).
    pub fn averaged_ei(&self, x: &[f64]) -> Result<f64> {
        let mut scratch = Vec::new();
        self.averaged_ei_with(x, &mut scratch)
    }

    pub fn averaged_ei_with(&self, x: &[f64], scratch: &mut Vec<f64>) -> Result<f64> {
        let mut out = [0.0];
        self.averaged_ei_many(std::slice::from_ref(&x), &mut out, scratch)?;
        Ok(out[0])
    }

    /// Averaged EI at every point of `xs`, written to `out`. Each value is
    /// bit-identical to [`averaged_ei`](Self::averaged_ei) at that point.
    pub fn averaged_ei_many<P: AsRef<[f64]>>(&self, xs: &[P], out: &mut [f64], scratch: &mut Vec<f64>) -> Result<()> {
        debug_assert_eq!(xs.len(), out.len());
        out.fill(0.0);
        let mut preds = Vec::with_capacity(xs.len());
        for (m, w) in self.models.iter().zip(&self.model_weights) {
            if *w == 0.0 {
                continue;
            }
            preds.clear();
            m.predict_many(xs, &mut preds, scratch);
            for (total, pred) in out.iter_mut().zip(&preds) {
                *total += w * expected_improvement(pred, self.best)?.value();
            }
        }
        Ok(())
    }
}

/// Posterior-averaged expected improvement Σᵢ wᵢ·EI(x; θᵢ) at one point.
pub fn averaged_ei(x: &[f64], particles: &ParticleSet, history: &EvaluationHistory) -> Result<f64> {
    ParticleModels::new(particles, history, Execution::Serial)?.averaged_ei(x)
}
