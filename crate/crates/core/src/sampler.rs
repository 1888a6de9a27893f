//! Gibbs sampling for structural time-series models.
//!
//! One sweep moves each variance by a Metropolis step with the states
//! integrated out, draws the state path given the parameters, and then
//! draws each variance from its conjugate (truncated) inverse-gamma
//! conditional. For the semilocal trend it finally slice-samples the slope
//! autoregression `ρ` and draws the long-run slope `D` from its conditional
//! normal.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};

use crate::error::{Error, Result};
use crate::kalman::{blank_burn_in, draw_states, filter_values, CovariancePass};
use crate::model::{
    build, state_dimension, validate_components, ComponentSpec, Initialization, ModelParams,
    ModelSpec, SemilocalParams, StateSpace,
};
use crate::rng::{SeedTree, StreamRng};
use crate::series::Series;

/// Inverse-gamma prior on a variance, truncated above at `upper`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseGammaPrior {
    pub shape: f64,
    pub scale: f64,
    pub upper: f64,
}

impl InverseGammaPrior {
    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.shape) && ok(self.scale) && ok(self.upper) {
            Ok(())
        } else {
            Err(Error::Argument(format!(
                "inverse-gamma prior needs positive shape, scale and limit, got {self:?}"
            )))
        }
    }

    /// Log density of `log σ²` at `σ² = v` (inside the truncation limit).
    fn log_density_of_log(&self, v: f64) -> f64 {
        -self.shape * v.ln() - self.scale / v
    }

    /// Draws from the conditional given `count` squared residuals summing
    /// to `sum_sq`.
    fn draw_posterior<R: Rng + ?Sized>(
        &self,
        count: usize,
        sum_sq: f64,
        rng: &mut R,
    ) -> Result<f64> {
        let shape = self.shape + 0.5 * count as f64;
        let rate = self.scale + 0.5 * sum_sq;
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::numerical(
                None,
                "degenerate variance update: zero residual sum with zero prior scale",
            ));
        }
        Ok(truncated_inverse_gamma(shape, rate, self.upper, rng))
    }
}

/// Proposal standard deviation of the collapsed log-variance moves.
const LOG_VARIANCE_STEP: f64 = 1.0;

/// `σ² = 1/τ` with `τ ~ Gamma(shape, rate)` restricted to `σ² ≤ upper`.
fn truncated_inverse_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, upper: f64, rng: &mut R) -> f64 {
    let gamma = Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters");
    for _ in 0..64 {
        let v = 1.0 / gamma.sample(rng);
        if v <= upper {
            return v;
        }
    }
    // Most of the mass lies above the limit: invert the CDF of the
    // precision on [1/upper, ∞) instead.
    let dist = GammaDist::new(shape, rate).expect("positive gamma parameters");
    let lo = dist.cdf(1.0 / upper);
    if 1.0 - lo < 1e-12 {
        return upper;
    }
    let u: f64 = rng.random_range(lo..1.0);
    let precision = dist.inverse_cdf(u).max(1.0 / upper);
    (1.0 / precision).min(upper)
}

/// Prior overrides as written in a model spec file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<InverseGammaPrior>,
    /// One entry per variance group, or a single entry applied to all.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<Vec<InverseGammaPrior>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub long_run_slope_sd: Option<f64>,
}

/// Complete prior specification for a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub observation: InverseGammaPrior,
    /// One prior per variance group.
    pub state: Vec<InverseGammaPrior>,
    /// Standard deviation of the zero-mean normal prior on `D`.
    pub long_run_slope_sd: f64,
}

impl Priors {
    /// Data-scaled defaults.
    ///
    /// Each variance gets an inverse-gamma prior whose guess is
    /// `(0.01·sd(y))²` with a weight of 0.01 observations, truncated above
    /// at `1.5·var(y)`. `D ~ N(0, (10·|mean slope|)²)`; when the mean slope
    /// is zero the scale falls back to `sd(y)`.
    pub fn default_for(y: &Series, components: &[ComponentSpec]) -> Priors {
        let var = y.variance().unwrap_or(0.0);
        let guess = 1e-4 * var;
        let weight = 0.01;
        let prior = InverseGammaPrior {
            shape: 0.5 * weight,
            scale: 0.5 * weight * guess,
            upper: 1.5 * var,
        };
        let groups = components.iter().map(|c| c.variance_groups().len()).sum();
        let slope = mean_slope(y).abs();
        let long_run_slope_sd = if slope > 0.0 {
            10.0 * slope
        } else {
            var.sqrt()
        };
        Priors {
            observation: prior,
            state: vec![prior; groups],
            long_run_slope_sd,
        }
    }

    /// Defaults with any overrides from `config` applied.
    pub fn resolve(
        y: &Series,
        components: &[ComponentSpec],
        config: Option<&PriorConfig>,
    ) -> Result<Priors> {
        let mut priors = Priors::default_for(y, components);
        if let Some(cfg) = config {
            if let Some(obs) = cfg.observation {
                priors.observation = obs;
            }
            if let Some(state) = &cfg.state {
                priors.state = match state.len() {
                    1 => vec![state[0]; priors.state.len()],
                    n if n == priors.state.len() => state.clone(),
                    n => {
                        return Err(Error::Argument(format!(
                            "expected {} state priors, got {n}",
                            priors.state.len()
                        )))
                    }
                };
            }
            if let Some(sd) = cfg.long_run_slope_sd {
                priors.long_run_slope_sd = sd;
            }
        }
        Ok(priors)
    }

    pub fn validate(&self, components: &[ComponentSpec]) -> Result<()> {
        let groups: usize = components.iter().map(|c| c.variance_groups().len()).sum();
        if self.state.len() != groups {
            return Err(Error::Argument(format!(
                "expected {groups} state priors, got {}",
                self.state.len()
            )));
        }
        self.observation.validate()?;
        for p in &self.state {
            p.validate()?;
        }
        if !(self.long_run_slope_sd.is_finite() && self.long_run_slope_sd > 0.0) {
            return Err(Error::Argument(
                "long-run slope prior sd must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Average change per period between the first and last observations.
fn mean_slope(y: &Series) -> f64 {
    let obs: Vec<(usize, f64)> = y
        .values()
        .iter()
        .enumerate()
        .filter_map(|(t, v)| v.map(|v| (t, v)))
        .collect();
    match (obs.first(), obs.last()) {
        (Some(&(t0, v0)), Some(&(t1, v1))) if t1 > t0 => (v1 - v0) / (t1 - t0) as f64,
        _ => 0.0,
    }
}

/// Chain length settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McmcConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            iterations: 2000,
            burn_in: 500,
            thinning: 1,
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn with_seed(seed: u64) -> Self {
        McmcConfig {
            seed,
            ..McmcConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::Argument(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thinning == 0 {
            return Err(Error::Argument("thinning must be at least 1".into()));
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thinning)
    }
}

/// One retained iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Draw {
    pub params: ModelParams,
    /// Sampled state path; not persisted.
    #[serde(skip)]
    pub states: Vec<Vec<f64>>,
    /// State at the last period of the sample.
    pub final_state: Vec<f64>,
    /// One-step-ahead prediction errors at this draw's parameters, with
    /// burn-in and missing positions blank.
    pub one_step_errors: Vec<Option<f64>>,
}

/// Retained posterior draws plus everything needed to reuse them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub spec: ModelSpec,
    pub data: Series,
    pub priors: Priors,
    pub config: McmcConfig,
    /// Leading positions excluded from one-step errors.
    pub burn_in_positions: usize,
    pub draws: Vec<Draw>,
}

impl PosteriorDraws {
    pub fn label(&self) -> String {
        self.spec.label()
    }

    pub fn components(&self) -> &[ComponentSpec] {
        &self.spec.components
    }

    /// Rebuilds the state-space model of draw `i`.
    pub fn state_space(&self, i: usize) -> Result<StateSpace> {
        build(
            &self.spec.components,
            &self.draws[i].params,
            &Initialization::from_data(&self.data),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("draws serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Argument(format!("draws file: {e}")))
    }
}

/// The state of one Gibbs chain. Exposed so callers can drive sweeps
/// themselves (for instance to interleave data simulation in
/// joint-distribution tests).
pub struct GibbsChain {
    components: Vec<ComponentSpec>,
    priors: Priors,
    init: Initialization,
    params: ModelParams,
    rng: StreamRng,
}

/// Output of one sweep.
#[derive(Debug, Clone)]
pub struct Sweep {
    /// Parameters the states were drawn under.
    pub params: ModelParams,
    pub states: Vec<DVector<f64>>,
    pub one_step_errors: Vec<Option<f64>>,
}

impl GibbsChain {
    pub fn new(
        components: &[ComponentSpec],
        priors: Priors,
        init: Initialization,
        params: ModelParams,
        rng: StreamRng,
    ) -> Result<Self> {
        validate_components(components)?;
        priors.validate(components)?;
        Ok(GibbsChain {
            components: components.to_vec(),
            priors,
            init,
            params,
            rng,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn set_params(&mut self, params: ModelParams) {
        self.params = params;
    }

    pub fn rng(&mut self) -> &mut StreamRng {
        &mut self.rng
    }

    /// One full sweep over `y`; parameters advance in place.
    pub fn sweep(&mut self, y: &[Option<f64>]) -> Result<Sweep> {
        self.collapsed_variance_moves(y)?;
        let ss = build(&self.components, &self.params, &self.init)?;
        let observed: Vec<bool> = y.iter().map(Option::is_some).collect();
        let cov = CovariancePass::new(&ss, &observed)?;
        let states = draw_states(&ss, &cov, y, &mut self.rng);
        let innovations = cov.means(&ss, y, &ss.a1).innovations;
        let one_step_errors = blank_burn_in(&innovations, ss.state_dimension());
        let drawn_under = self.params.clone();
        self.update_params(&ss, y, &states)?;
        Ok(Sweep {
            params: drawn_under,
            states,
            one_step_errors,
        })
    }

    /// Random-walk Metropolis on each log variance with the states
    /// integrated out by the Kalman filter. Conjugate updates alone mix
    /// slowly when a variance is near zero, because the drawn states then
    /// carry almost no disturbance.
    fn collapsed_variance_moves(&mut self, y: &[Option<f64>]) -> Result<()> {
        let mut current = self.log_posterior(&self.params, y)?;
        for k in 0..=self.priors.state.len() {
            let mut proposal = self.params.clone();
            let (prior, value) = match k {
                0 => (self.priors.observation, &mut proposal.observation_variance),
                g => (
                    self.priors.state[g - 1],
                    &mut proposal.state_variances[g - 1],
                ),
            };
            let z: f64 = self.rng.sample(StandardNormal);
            *value *= (LOG_VARIANCE_STEP * z).exp();
            if !(*value > 0.0 && *value <= prior.upper) {
                continue;
            }
            let Ok(candidate) = self.log_posterior(&proposal, y) else {
                continue;
            };
            let u: f64 = self.rng.random();
            if u.ln() < candidate - current {
                self.params = proposal;
                current = candidate;
            }
        }
        Ok(())
    }

    /// Log of `p(y | θ) p(θ)` in log-variance coordinates, up to a constant.
    fn log_posterior(&self, params: &ModelParams, y: &[Option<f64>]) -> Result<f64> {
        let ss = build(&self.components, params, &self.init)?;
        let mut total = filter_values(&ss, y)?.log_likelihood;
        let priors = std::iter::once(&self.priors.observation).chain(&self.priors.state);
        let values = std::iter::once(&params.observation_variance).chain(&params.state_variances);
        for (prior, &v) in priors.zip(values) {
            total += prior.log_density_of_log(v);
        }
        Ok(total)
    }

    fn update_params(
        &mut self,
        ss: &StateSpace,
        y: &[Option<f64>],
        states: &[DVector<f64>],
    ) -> Result<()> {
        let (mut count, mut sum_sq) = (0usize, 0.0);
        for (obs, state) in y.iter().zip(states) {
            if let Some(v) = obs {
                count += 1;
                sum_sq += (v - ss.z.dot(state)).powi(2);
            }
        }
        self.params.observation_variance =
            self.priors
                .observation
                .draw_posterior(count, sum_sq, &mut self.rng)?;

        let groups = self.priors.state.len();
        let mut counts = vec![0usize; groups];
        let mut sums = vec![0.0; groups];
        let rows = ss.disturbance_rows();
        for pair in states.windows(2) {
            let predicted = &ss.t * &pair[0];
            for (row, group) in rows.iter().zip(&ss.disturbance_groups) {
                counts[*group] += 1;
                sums[*group] += (pair[1][*row] - predicted[*row]).powi(2);
            }
        }
        for g in 0..groups {
            self.params.state_variances[g] =
                self.priors.state[g].draw_posterior(counts[g], sums[g], &mut self.rng)?;
        }

        if let Some(trend) = ss
            .layout
            .iter()
            .find(|l| l.component == Some(ComponentSpec::SemilocalLinearTrend))
        {
            let slope_row = trend.states.start + 1;
            let slope_group = ss.disturbance_groups[trend.disturbances.start + 1];
            let slopes: Vec<f64> = states.iter().map(|s| s[slope_row]).collect();
            let current = self.params.semilocal.expect("semilocal parameters present");
            let variance = self.params.state_variances[slope_group];
            let rho = slice_sample_ar(
                &slopes,
                current.long_run_slope,
                current.slope_ar,
                variance,
                &mut self.rng,
            );
            let d = draw_long_run_slope(
                &slopes,
                rho,
                variance,
                self.priors.long_run_slope_sd,
                &mut self.rng,
            );
            self.params.semilocal = Some(SemilocalParams {
                long_run_slope: d,
                slope_ar: rho,
            });
        }
        Ok(())
    }
}

/// Slice sampler for `ρ ∈ (-1, 1)` under a uniform prior, given the slope
/// path `δ`, long-run slope `d` and slope innovation variance.
fn slice_sample_ar<R: Rng + ?Sized>(
    slopes: &[f64],
    d: f64,
    current: f64,
    variance: f64,
    rng: &mut R,
) -> f64 {
    let log_density = |rho: f64| -> f64 {
        let ss: f64 = slopes
            .windows(2)
            .map(|w| (w[1] - d - rho * (w[0] - d)).powi(2))
            .sum();
        -0.5 * ss / variance
    };
    let e: f64 = rng.sample(Exp1);
    let level = log_density(current) - e;
    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    for _ in 0..200 {
        let proposal = rng.random_range(lo..hi);
        if proposal > -1.0 && proposal < 1.0 && log_density(proposal) >= level {
            return proposal;
        }
        if proposal < current {
            lo = proposal;
        } else {
            hi = proposal;
        }
    }
    current
}

/// Conditional normal draw of `D` given the slope path and `ρ`:
/// `δ_{t+1} − ρ δ_t = (1 − ρ) D + η_t`.
fn draw_long_run_slope<R: Rng + ?Sized>(
    slopes: &[f64],
    rho: f64,
    variance: f64,
    prior_sd: f64,
    rng: &mut R,
) -> f64 {
    let w = 1.0 - rho;
    let transitions = slopes.len().saturating_sub(1) as f64;
    let precision = 1.0 / (prior_sd * prior_sd) + transitions * w * w / variance;
    let weighted: f64 = slopes.windows(2).map(|p| p[1] - rho * p[0]).sum::<f64>() * w / variance;
    let z: f64 = rng.sample(StandardNormal);
    weighted / precision + z / precision.sqrt()
}

/// Starting values: a tenth of var(y) for the observation noise, a
/// hundredth for every state disturbance, `ρ = 0` and `D` at the mean slope.
fn initial_params(y: &Series, components: &[ComponentSpec], priors: &Priors) -> ModelParams {
    let var = y.variance().filter(|v| *v > 0.0).unwrap_or(1.0);
    let clamp = |v: f64, p: &InverseGammaPrior| v.min(0.5 * p.upper);
    ModelParams {
        observation_variance: clamp(0.1 * var, &priors.observation),
        state_variances: priors.state.iter().map(|p| clamp(0.01 * var, p)).collect(),
        semilocal: components
            .contains(&ComponentSpec::SemilocalLinearTrend)
            .then(|| SemilocalParams {
                long_run_slope: mean_slope(y),
                slope_ar: 0.0,
            }),
    }
}

/// Runs the Gibbs sampler on `y` and keeps post-burn-in, thinned draws.
pub fn gibbs_fit(
    y: &Series,
    spec: &ModelSpec,
    priors: &Priors,
    cfg: &McmcConfig,
) -> Result<PosteriorDraws> {
    cfg.validate()?;
    validate_components(&spec.components)?;
    let m = state_dimension(&spec.components);
    let observed = y.observed_count();
    if observed == 0 {
        return Err(Error::Argument("series has no observed values".into()));
    }
    if observed < 2 * m {
        return Err(Error::Argument(format!(
            "need at least {} observed values for a {m}-dimensional state, found {observed}",
            2 * m
        )));
    }
    if priors.observation.scale == 0.0 && y.variance() == Some(0.0) {
        return Err(Error::numerical(
            None,
            "degenerate variance update: constant series with zero prior scale",
        ));
    }

    let rng = SeedTree::new(cfg.seed).stream("chain", 0);
    let init = Initialization::from_data(y);
    let params = initial_params(y, &spec.components, priors);
    let mut chain = GibbsChain::new(&spec.components, priors.clone(), init, params, rng)?;

    let mut draws = Vec::with_capacity(cfg.retained());
    for iteration in 0..cfg.iterations {
        let sweep = chain.sweep(y.values())?;
        if iteration >= cfg.burn_in && (iteration - cfg.burn_in) % cfg.thinning == 0 {
            let final_state = sweep
                .states
                .last()
                .expect("non-empty series")
                .as_slice()
                .to_vec();
            draws.push(Draw {
                params: sweep.params,
                states: sweep.states.iter().map(|s| s.as_slice().to_vec()).collect(),
                final_state,
                one_step_errors: sweep.one_step_errors,
            });
        }
    }
    Ok(PosteriorDraws {
        spec: spec.clone(),
        data: y.clone(),
        priors: priors.clone(),
        config: *cfg,
        burn_in_positions: m,
        draws,
    })
}

/// Fit with priors resolved from the spec (defaults plus overrides).
pub fn fit(y: &Series, spec: &ModelSpec, cfg: &McmcConfig) -> Result<PosteriorDraws> {
    let priors = Priors::resolve(y, &spec.components, spec.priors.as_ref())?;
    gibbs_fit(y, spec, &priors, cfg)
}

/// Headline fit statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    /// Square root of the posterior mean observation variance.
    pub residual_sd: f64,
    /// Standard deviation of the pooled one-step-ahead errors.
    pub prediction_sd: f64,
    /// `1 − residual_sd² / var(y)`.
    pub r_square: f64,
    pub draws: usize,
    /// Leading positions excluded from the one-step errors.
    pub burn_in_positions: usize,
}

/// JSON layout of a [`FitSummary`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    #[serde(rename = "residual.sd")]
    pub residual_sd: f64,
    #[serde(rename = "prediction.sd")]
    pub prediction_sd: f64,
    #[serde(rename = "r.square")]
    pub r_square: f64,
}

impl FitSummary {
    pub fn report(&self) -> SummaryReport {
        SummaryReport {
            residual_sd: self.residual_sd,
            prediction_sd: self.prediction_sd,
            r_square: self.r_square,
        }
    }
}

pub fn summarize(draws: &PosteriorDraws) -> Result<FitSummary> {
    if draws.draws.is_empty() {
        return Err(Error::Argument("no retained draws to summarize".into()));
    }
    let n = draws.draws.len() as f64;
    let mean_var = draws
        .draws
        .iter()
        .map(|d| d.params.observation_variance)
        .sum::<f64>()
        / n;
    let residual_sd = mean_var.sqrt();

    let pooled: Vec<f64> = draws
        .draws
        .iter()
        .flat_map(|d| d.one_step_errors.iter().filter_map(|e| *e))
        .collect();
    let prediction_sd = if pooled.len() < 2 {
        0.0
    } else {
        let mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
        (pooled.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (pooled.len() - 1) as f64).sqrt()
    };
    let var_y = draws.data.variance().unwrap_or(f64::NAN);
    Ok(FitSummary {
        residual_sd,
        prediction_sd,
        r_square: 1.0 - residual_sd * residual_sd / var_y,
        draws: draws.draws.len(),
        burn_in_positions: draws.burn_in_positions,
    })
}
