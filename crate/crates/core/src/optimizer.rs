//! Outer loops: the SMC-based expected-improvement optimizer and the
//! fixed-θ reference, both driven through [`AskTell`].

use std::time::Instant;

use crate::candidates::{demarginalize_with_models, CandidateGrid};
use crate::criteria::{expected_improvement, ParticleModels};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gp::{ConditionedGp, Domain, EvaluationHistory, HyperParameters, PredictiveDistribution};
use crate::histogram::{TreeConfig, TreeHistogram};
use crate::rng::RandomStream;
use crate::smc::{
    effective_sample_size, init_particles, move_particles, multinomial_resample, reweight, LogLikelihood, MoveConfig,
    ParticleSet, PriorSpec,
};
use crate::testbed::maximin_lhs;

/// Candidates scored per parallel task in Step 2.
const EI_CHUNK: usize = 64;

/// When to resample and move after reweighting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ResamplePolicy {
    /// Only when the effective sample size drops below `I/2`.
    #[default]
    EssBelowHalf,
    Always,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// Number of particles `I`.
    pub particles: usize,
    /// Candidates per particle `J`.
    pub per_particle: usize,
    /// Total number of evaluations, initial design included.
    pub budget: usize,
    /// Size of the initial maximin LHS design.
    pub n0: usize,
    pub prior: PriorSpec,
    pub tree: TreeConfig,
    pub moves: MoveConfig,
    pub resample: ResamplePolicy,
    pub seed: u64,
    pub exec: Execution,
}

impl OptimizerConfig {
    /// Defaults for `domain`: `I = J = 100`, `n0 = max(4, 2d)`, budget
    /// `n0 + 50`.
    pub fn for_domain(domain: &Domain) -> Self {
        let n0 = default_n0(domain.dim());
        OptimizerConfig {
            particles: 100,
            per_particle: 100,
            budget: n0 + 50,
            n0,
            prior: PriorSpec::default_for(domain),
            tree: TreeConfig::default(),
            moves: MoveConfig::default(),
            resample: ResamplePolicy::default(),
            seed: 0,
            exec: Execution::default(),
        }
    }

    pub fn validate(&self, domain: &Domain) -> Result<()> {
        if self.particles == 0 || self.per_particle == 0 {
            return Err(Error::InvalidInput("I and J must be at least 1".into()));
        }
        if self.n0 < 3 || self.n0 > self.budget {
            return Err(Error::InvalidInput(format!(
                "need 3 ≤ n0 ≤ budget, got n0 = {} and budget = {}",
                self.n0, self.budget
            )));
        }
        if self.prior.dim() != domain.dim() {
            return Err(Error::InvalidInput("prior and domain dimensions differ".into()));
        }
        Ok(())
    }
}

pub fn default_n0(dim: usize) -> usize {
    (2 * dim).max(4)
}

/// SMC diagnostics reported by a `tell`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepInfo {
    /// Effective sample size after reweighting (before any resampling).
    pub ess: Option<f64>,
    pub resampled: bool,
    pub acceptance_rate: Option<f64>,
}

/// One evaluation of the objective.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    /// Number of evaluations so far, this one included.
    pub n: usize,
    pub x: Vec<f64>,
    pub value: f64,
    /// Best value observed so far, `M_n`.
    pub best: f64,
    pub ess: Option<f64>,
    pub resampled: bool,
    pub acceptance_rate: Option<f64>,
    pub wall_ms: f64,
}

/// Wall time is excluded: two records are equal when everything else is
/// bit-identical.
impl PartialEq for TraceRecord {
    fn eq(&self, other: &Self) -> bool {
        let opt_bits = |v: Option<f64>| v.map(f64::to_bits);
        self.n == other.n
            && self.x.len() == other.x.len()
            && self.x.iter().zip(&other.x).all(|(a, b)| a.to_bits() == b.to_bits())
            && self.value.to_bits() == other.value.to_bits()
            && self.best.to_bits() == other.best.to_bits()
            && opt_bits(self.ess) == opt_bits(other.ess)
            && self.resampled == other.resampled
            && opt_bits(self.acceptance_rate) == opt_bits(other.acceptance_rate)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
}

impl RunTrace {
    pub fn final_best(&self) -> Option<f64> {
        self.records.last().map(|r| r.best)
    }
}

/// Sequential optimizer interface for objectives evaluated elsewhere.
pub trait AskTell {
    /// Next point to evaluate. Repeated calls without a `tell` return the
    /// same point.
    fn ask(&mut self) -> Result<Vec<f64>>;

    /// Reports the objective value at `x`.
    fn tell(&mut self, x: &[f64], value: f64) -> Result<StepInfo>;

    /// Number of evaluations told so far.
    fn evaluations(&self) -> usize;

    fn best(&self) -> Option<f64>;
}

/// Evaluations gathered before a model can be conditioned.
#[derive(Debug, Clone)]
struct Observations {
    domain: Domain,
    design: Vec<Vec<f64>>,
    points: Vec<Vec<f64>>,
    values: Vec<f64>,
    history: Option<EvaluationHistory>,
}

impl Observations {
    fn new(domain: &Domain, n0: usize, stream: RandomStream, exec: Execution) -> Self {
        Observations {
            domain: domain.clone(),
            design: maximin_lhs(domain, n0, stream.split("design"), exec),
            points: Vec::new(),
            values: Vec::new(),
            history: None,
        }
    }

    fn len(&self) -> usize {
        self.values.len()
    }

    fn in_design_phase(&self) -> bool {
        self.len() < self.design.len()
    }

    fn check(&self, x: &[f64], value: f64) -> Result<()> {
        if x.len() != self.domain.dim() {
            return Err(Error::InvalidInput(format!(
                "point has {} coordinates, domain has {}",
                x.len(),
                self.domain.dim()
            )));
        }
        self.domain.check(x)?;
        if !value.is_finite() {
            return Err(Error::InvalidInput(format!("objective returned {value}")));
        }
        Ok(())
    }

    /// Records the evaluation; once the design is complete the history is
    /// available.
    fn push(&mut self, x: &[f64], value: f64) -> Result<()> {
        self.check(x, value)?;
        match &mut self.history {
            Some(h) => h.push(x, value)?,
            None => {
                self.points.push(x.to_vec());
                self.values.push(value);
                if !self.in_design_phase() {
                    self.history = Some(EvaluationHistory::new(self.points.clone(), self.values.clone())?);
                }
                return Ok(());
            }
        }
        self.points.push(x.to_vec());
        self.values.push(value);
        Ok(())
    }

    fn best(&self) -> Option<f64> {
        self.values.iter().copied().reduce(f64::max)
    }
}

#[derive(Debug, Clone)]
struct SmcState {
    particles: ParticleSet,
    q: TreeHistogram,
}

#[derive(Debug, Clone)]
struct Pending {
    x: Vec<f64>,
    grid: CandidateGrid,
}

/// The SMC-based fully Bayesian EI optimizer.
#[derive(Debug, Clone)]
pub struct SmcEi {
    config: OptimizerConfig,
    stream: RandomStream,
    obs: Observations,
    state: Option<SmcState>,
    pending: Option<Pending>,
}

impl SmcEi {
    pub fn new(domain: &Domain, config: OptimizerConfig) -> Result<Self> {
        config.validate(domain)?;
        let stream = RandomStream::new(config.seed);
        let obs = Observations::new(domain, config.n0, stream, config.exec);
        Ok(SmcEi {
            config,
            stream,
            obs,
            state: None,
            pending: None,
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn history(&self) -> Option<&EvaluationHistory> {
        self.obs.history.as_ref()
    }

    pub fn particles(&self) -> Option<&ParticleSet> {
        self.state.as_ref().map(|s| &s.particles)
    }

    pub fn proposal_density(&self) -> Option<&TreeHistogram> {
        self.state.as_ref().map(|s| &s.q)
    }

    /// Candidate grid behind the outstanding `ask`, if any.
    pub fn pending_grid(&self) -> Option<&CandidateGrid> {
        self.pending.as_ref().map(|p| &p.grid)
    }

    /// Random stream of the step that selects evaluation number `n + 1`.
    pub fn step_stream(&self, n: usize) -> RandomStream {
        self.stream.split("step").split(n)
    }
}

impl AskTell for SmcEi {
    fn ask(&mut self) -> Result<Vec<f64>> {
        if self.obs.in_design_phase() {
            return Ok(self.obs.design[self.obs.len()].clone());
        }
        if let Some(p) = &self.pending {
            return Ok(p.x.clone());
        }
        let (history, state) = match (&self.obs.history, &self.state) {
            (Some(h), Some(s)) => (h, s),
            _ => unreachable!("model state exists once the design is complete"),
        };
        let step = self.step_stream(history.len());
        let exec = self.config.exec;
        let models = ParticleModels::new(&state.particles, history, exec)?;
        let grid = demarginalize_with_models(
            &state.particles,
            &models,
            &state.q,
            self.config.per_particle,
            step.split("candidates"),
            exec,
        )?;
        let (index, _) = select_candidate(&models, grid.points(), exec)?;
        let x = grid.points()[index].clone();
        self.pending = Some(Pending { x: x.clone(), grid });
        Ok(x)
    }

    /// After the design phase this reweights the particles, resamples and
    /// moves them per the policy, and refits the candidate density on the
    /// outstanding candidate grid (if `ask` was called).
    fn tell(&mut self, x: &[f64], value: f64) -> Result<StepInfo> {
        let exec = self.config.exec;
        if self.obs.in_design_phase() {
            self.obs.push(x, value)?;
            let Some(history) = &self.obs.history else {
                return Ok(StepInfo::default());
            };
            let particles = init_particles(
                &self.config.prior,
                history,
                self.config.particles,
                self.stream.split("init"),
                exec,
            )?;
            let ess = effective_sample_size(&particles);
            self.state = Some(SmcState {
                particles,
                q: TreeHistogram::uniform(&self.obs.domain),
            });
            return Ok(StepInfo {
                ess: Some(ess),
                ..StepInfo::default()
            });
        }

        let old = self.obs.history.clone().expect("design complete");
        let step = self.step_stream(old.len());
        self.obs.push(x, value)?;
        let new = self.obs.history.as_ref().expect("design complete");
        let state = self.state.as_mut().expect("design complete");

        let mut particles = reweight(&state.particles, &old, new, exec)?;
        let ess = effective_sample_size(&particles);
        let mut info = StepInfo {
            ess: Some(ess),
            ..StepInfo::default()
        };
        let resample = match self.config.resample {
            ResamplePolicy::Always => true,
            ResamplePolicy::EssBelowHalf => ess < 0.5 * particles.len() as f64,
        };
        if resample {
            let drawn = multinomial_resample(&particles, step.split("resample"));
            let moved = move_particles(
                &drawn,
                &self.config.prior,
                new,
                &self.config.moves,
                step.split("move"),
                exec,
            )?;
            particles = moved.particles;
            info.resampled = true;
            info.acceptance_rate = Some(moved.acceptance_rate);
        }
        state.particles = particles;

        if let Some(p) = self.pending.take() {
            state.q = TreeHistogram::fit(
                p.grid.points(),
                p.grid.joint_weights(),
                &self.obs.domain,
                &self.config.tree,
            )?;
        }
        Ok(info)
    }

    fn evaluations(&self) -> usize {
        self.obs.len()
    }

    fn best(&self) -> Option<f64> {
        self.obs.best()
    }
}

/// Averaged expected improvement at every point.
pub fn averaged_ei_values(models: &ParticleModels, points: &[Vec<f64>], exec: Execution) -> Result<Vec<f64>> {
    let chunks = points.len().div_ceil(EI_CHUNK);
    let parts = exec.map_range(chunks, |c| -> Result<Vec<f64>> {
        let block = &points[c * EI_CHUNK..((c + 1) * EI_CHUNK).min(points.len())];
        let mut values = vec![0.0; block.len()];
        models.averaged_ei_many(block, &mut values, &mut Vec::new())?;
        Ok(values)
    });
    let mut values = Vec::with_capacity(points.len());
    for p in parts {
        values.extend(p?);
    }
    Ok(values)
}

/// Index of the first maximum, skipping excluded entries. NaN never wins.
fn first_argmax(values: &[f64], excluded: impl Fn(usize) -> bool) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if excluded(i) || v.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best
}

/// Step 2: the candidate maximizing the particle-averaged EI, with the
/// lowest index winning ties. Returns the index and its criterion value.
pub fn select_candidate(models: &ParticleModels, points: &[Vec<f64>], exec: Execution) -> Result<(usize, f64)> {
    let values = averaged_ei_values(models, points, exec)?;
    first_argmax(&values, |_| false).ok_or_else(|| Error::InvalidInput("no candidates to choose from".into()))
}

/// Evaluates the outstanding point of `opt` and tells the result.
pub fn step<O, F>(opt: &mut O, objective: &mut F) -> Result<TraceRecord>
where
    O: AskTell + ?Sized,
    F: FnMut(&[f64]) -> Result<f64>,
{
    let start = Instant::now();
    let x = opt.ask()?;
    let value = objective(&x)?;
    let info = opt.tell(&x, value)?;
    Ok(TraceRecord {
        n: opt.evaluations(),
        x,
        value,
        best: opt.best().expect("at least one evaluation"),
        ess: info.ess,
        resampled: info.resampled,
        acceptance_rate: info.acceptance_rate,
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// One full iteration (Steps 1 to 4) of the SMC-based optimizer.
pub fn smc_ei_step<F>(opt: &mut SmcEi, objective: &mut F) -> Result<TraceRecord>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    step(opt, objective)
}

/// Drives `opt` until `budget` evaluations have been made.
pub fn drive<O, F>(opt: &mut O, mut objective: F, budget: usize) -> Result<RunTrace>
where
    O: AskTell + ?Sized,
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut trace = RunTrace::default();
    while opt.evaluations() < budget {
        let record = step(opt, &mut objective)?;
        log::debug!(
            "n = {}, value = {:.6}, best = {:.6}",
            record.n,
            record.value,
            record.best
        );
        trace.records.push(record);
    }
    Ok(trace)
}

pub fn run_smc_ei<F>(objective: F, domain: &Domain, config: &OptimizerConfig) -> Result<RunTrace>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut opt = SmcEi::new(domain, config.clone())?;
    drive(&mut opt, objective, config.budget)
}

/// Variance treatment of the reference model. The constant mean is always
/// integrated out under a flat prior.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub enum VarianceMode {
    /// Jeffreys prior, integrated out (Student-t predictive).
    #[default]
    Integrated,
    /// Known process variance (Gaussian predictive).
    Known(f64),
}

/// Plug-in model of the reference algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceModel {
    pub theta: HyperParameters,
    pub variance: VarianceMode,
}

impl ReferenceModel {
    pub fn integrated(theta: HyperParameters) -> Self {
        ReferenceModel {
            theta,
            variance: VarianceMode::Integrated,
        }
    }

    fn predictive(&self, gp: &ConditionedGp, x: &[f64], scratch: &mut Vec<f64>) -> PredictiveDistribution {
        let pred = gp.predict_with(x, scratch);
        match self.variance {
            VarianceMode::Integrated => pred,
            VarianceMode::Known(s2) => PredictiveDistribution {
                location: pred.location,
                scale: pred.scale * (s2 / gp.variance_estimate()).sqrt(),
                dof: f64::INFINITY,
            },
        }
    }
}

/// EI with θ fixed, maximized by exhaustive search over a fixed maximin
/// LHS of `I·J` points. Evaluated candidates are excluded.
#[derive(Debug, Clone)]
pub struct ReferenceEi {
    model: ReferenceModel,
    exec: Execution,
    obs: Observations,
    candidates: Vec<Vec<f64>>,
    evaluated: Vec<bool>,
    pending: Option<usize>,
}

impl ReferenceEi {
    pub fn new(domain: &Domain, config: &OptimizerConfig, model: ReferenceModel) -> Result<Self> {
        config.validate(domain)?;
        if model.theta.dim() != domain.dim() {
            return Err(Error::InvalidInput("θ and domain dimensions differ".into()));
        }
        if let VarianceMode::Known(s2) = model.variance {
            if !(s2 > 0.0 && s2.is_finite()) {
                return Err(Error::InvalidInput("known variance must be positive".into()));
            }
        }
        let stream = RandomStream::new(config.seed);
        let size = config.particles * config.per_particle;
        Ok(ReferenceEi {
            model,
            exec: config.exec,
            obs: Observations::new(domain, config.n0, stream, config.exec),
            candidates: maximin_lhs(domain, size, stream.split("reference-design"), config.exec),
            evaluated: vec![false; size],
            pending: None,
        })
    }

    pub fn candidates(&self) -> &[Vec<f64>] {
        &self.candidates
    }

    pub fn history(&self) -> Option<&EvaluationHistory> {
        self.obs.history.as_ref()
    }
}

impl AskTell for ReferenceEi {
    fn ask(&mut self) -> Result<Vec<f64>> {
        if self.obs.in_design_phase() {
            return Ok(self.obs.design[self.obs.len()].clone());
        }
        if let Some(i) = self.pending {
            return Ok(self.candidates[i].clone());
        }
        let history = self.obs.history.as_ref().expect("design complete");
        let gp = ConditionedGp::new(history, &self.model.theta)?;
        let best = history.best();
        let chunks = self.candidates.len().div_ceil(EI_CHUNK);
        let parts = self.exec.map_range(chunks, |c| -> Result<Vec<f64>> {
            let mut scratch = Vec::new();
            (c * EI_CHUNK..((c + 1) * EI_CHUNK).min(self.candidates.len()))
                .map(|i| {
                    if self.evaluated[i] {
                        return Ok(f64::NAN);
                    }
                    let pred = self.model.predictive(&gp, &self.candidates[i], &mut scratch);
                    Ok(expected_improvement(&pred, best)?.value())
                })
                .collect()
        });
        let mut values = Vec::with_capacity(self.candidates.len());
        for p in parts {
            values.extend(p?);
        }
        let (i, _) = first_argmax(&values, |i| self.evaluated[i]).ok_or(Error::ExhaustedCandidates)?;
        self.pending = Some(i);
        Ok(self.candidates[i].clone())
    }

    fn tell(&mut self, x: &[f64], value: f64) -> Result<StepInfo> {
        self.obs.push(x, value)?;
        if let Some(i) = self.pending.take() {
            self.evaluated[i] = true;
        }
        Ok(StepInfo::default())
    }

    fn evaluations(&self) -> usize {
        self.obs.len()
    }

    fn best(&self) -> Option<f64> {
        self.obs.best()
    }
}

pub fn run_reference_ei<F>(
    objective: F,
    domain: &Domain,
    config: &OptimizerConfig,
    model: ReferenceModel,
) -> Result<RunTrace>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut opt = ReferenceEi::new(domain, config, model)?;
    drive(&mut opt, objective, config.budget)
}

/// Tuning of [`ml_estimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlConfig {
    pub starts: usize,
    /// Half-width of the golden-section bracket around the current value.
    pub bracket: f64,
    /// Golden-section evaluations per coordinate.
    pub golden_evals: usize,
    /// Coordinate sweeps given to every start.
    pub sweeps_per_start: usize,
    /// Extra sweeps for the best start, stopped early once an entire sweep
    /// gains less than `tolerance`.
    pub polish_sweeps: usize,
    pub tolerance: f64,
}

impl Default for MlConfig {
    fn default() -> Self {
        MlConfig {
            starts: 20,
            bracket: 2.0,
            golden_evals: 14,
            sweeps_per_start: 1,
            polish_sweeps: 6,
            tolerance: 1e-4,
        }
    }
}

/// Smallest design accepted by [`ml_estimate`].
pub const ML_MIN_DESIGN: usize = 50;

/// Maximum-likelihood log-ranges for a large design: multi-start
/// coordinate-wise golden-section search, starts drawn from `prior`.
///
/// A coordinate only moves when the likelihood strictly increases, so the
/// result dominates every start.
pub fn ml_estimate(
    history: &EvaluationHistory,
    prior: &PriorSpec,
    config: &MlConfig,
    stream: RandomStream,
    exec: Execution,
) -> Result<HyperParameters> {
    if history.len() < ML_MIN_DESIGN {
        return Err(Error::InvalidInput(format!(
            "maximum likelihood needs at least {ML_MIN_DESIGN} evaluations, got {}",
            history.len()
        )));
    }
    if prior.dim() != history.dim() || config.starts == 0 {
        return Err(Error::InvalidInput("bad prior dimension or zero starts".into()));
    }
    let history = &canonical_order(history);
    let starts: Vec<HyperParameters> = (0..config.starts)
        .map(|s| prior.sample(&mut stream.split(s).rng()))
        .collect();
    let refined = exec.map_slice(&starts, |_, start| -> Result<(HyperParameters, f64)> {
        let ll = history.log_likelihood(start)?;
        coordinate_search(history, start.clone(), ll, config, config.sweeps_per_start)
    });
    let mut best: Option<(HyperParameters, f64)> = None;
    for r in refined {
        let (theta, ll) = r?;
        if best.as_ref().is_none_or(|(_, b)| ll > *b) {
            best = Some((theta, ll));
        }
    }
    let (theta, ll) = best.expect("at least one start");
    let (theta, polished) = coordinate_search(history, theta, ll, config, config.polish_sweeps)?;
    log::info!("ml estimate {:?} with log-likelihood {polished:.6}", theta.log_ranges());
    Ok(theta)
}

/// The same evaluations sorted lexicographically by point, so that the
/// estimate does not depend on the order of the data.
fn canonical_order(history: &EvaluationHistory) -> EvaluationHistory {
    let mut order: Vec<usize> = (0..history.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (history.point(a), history.point(b));
        pa.iter()
            .zip(pb)
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    EvaluationHistory::new_unchecked(
        order.iter().map(|&i| history.point(i).to_vec()).collect(),
        order.iter().map(|&i| history.values()[i]).collect(),
    )
}

fn coordinate_search(
    history: &EvaluationHistory,
    mut theta: HyperParameters,
    mut ll: f64,
    config: &MlConfig,
    sweeps: usize,
) -> Result<(HyperParameters, f64)> {
    for _ in 0..sweeps {
        let before = ll;
        for k in 0..theta.dim() {
            let mut eval = |v: f64| -> Result<f64> {
                let mut lr = theta.log_ranges().to_vec();
                lr[k] = v;
                history.log_likelihood(&HyperParameters::new(lr)?)
            };
            let c = theta.log_ranges()[k];
            let (v, vll) = golden_section_max(&mut eval, c - config.bracket, c + config.bracket, config.golden_evals)?;
            if vll > ll {
                let mut lr = theta.log_ranges().to_vec();
                lr[k] = v;
                theta = HyperParameters::new(lr)?;
                ll = vll;
            }
        }
        if ll - before < config.tolerance {
            break;
        }
    }
    Ok((theta, ll))
}

fn golden_section_max(
    f: &mut impl FnMut(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    evals: usize,
) -> Result<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 2..evals.max(2) {
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 { (x1, f1) } else { (x2, f2) })
}
