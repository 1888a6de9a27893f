//! Posterior-predictive forecasts and one-step-error model comparison.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::quantile_sorted;
use crate::model::StateSpace;
use crate::rng::SeedTree;
use crate::sampler::PosteriorDraws;
use crate::series::TimeIndex;

/// Equal-tailed 95% band plus the median.
pub const DEFAULT_LEVELS: [f64; 3] = [0.025, 0.5, 0.975];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    /// Periods being forecast.
    pub index: TimeIndex,
    pub mean: Vec<f64>,
    /// Quantile levels, ascending.
    pub levels: Vec<f64>,
    /// `quantiles[i][h]` is the `levels[i]` quantile at step `h`.
    pub quantiles: Vec<Vec<f64>>,
    /// One simulated path per row.
    #[serde(skip)]
    pub trajectories: Vec<Vec<f64>>,
}

impl ForecastResult {
    pub fn horizon(&self) -> usize {
        self.mean.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.quantiles[0]
    }

    pub fn upper(&self) -> &[f64] {
        &self.quantiles[self.quantiles.len() - 1]
    }

    pub fn median(&self) -> Option<&[f64]> {
        self.levels
            .iter()
            .position(|l| *l == 0.5)
            .map(|i| self.quantiles[i].as_slice())
    }

    /// Tidy plot data: `period,mean,lo,hi`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("period,mean,lo,hi\n");
        for (h, period) in self.index.periods().enumerate() {
            out.push_str(&format!(
                "{period},{},{},{}\n",
                self.mean[h],
                self.lower()[h],
                self.upper()[h]
            ));
        }
        out
    }
}

/// Continues a state path for `horizon` periods. Per step the state noise is
/// drawn before the observation noise, so a longer horizon extends a shorter
/// one draw-for-draw.
pub(crate) fn simulate_ahead<R: Rng + ?Sized>(
    ss: &StateSpace,
    last_state: &[f64],
    horizon: usize,
    rng: &mut R,
) -> Vec<f64> {
    let obs_sd = ss.h.sqrt();
    let mut state = nalgebra::DVector::from_column_slice(last_state);
    (0..horizon)
        .map(|_| {
            state = ss.step(&state, rng);
            let eps: f64 = rng.sample(StandardNormal);
            ss.z.dot(&state) + obs_sd * eps
        })
        .collect()
}

/// Simulates `trajectories_per_draw` future paths from every retained draw.
/// Trajectory `k` of draw `i` uses its own random stream, so the result is
/// independent of scheduling.
pub fn predict(
    draws: &PosteriorDraws,
    horizon: usize,
    trajectories_per_draw: usize,
    seed: u64,
) -> Result<ForecastResult> {
    predict_with_levels(draws, horizon, trajectories_per_draw, seed, &DEFAULT_LEVELS)
}

pub fn predict_with_levels(
    draws: &PosteriorDraws,
    horizon: usize,
    trajectories_per_draw: usize,
    seed: u64,
    levels: &[f64],
) -> Result<ForecastResult> {
    if horizon == 0 {
        return Err(Error::Argument(
            "forecast horizon must be at least 1".into(),
        ));
    }
    if trajectories_per_draw == 0 {
        return Err(Error::Argument(
            "need at least one trajectory per draw".into(),
        ));
    }
    if draws.draws.is_empty() {
        return Err(Error::Argument(
            "no posterior draws to forecast from".into(),
        ));
    }
    if levels.is_empty()
        || levels.windows(2).any(|w| w[0] > w[1])
        || levels.iter().any(|l| !(0.0..=1.0).contains(l))
    {
        return Err(Error::Argument(
            "quantile levels must be ascending within [0, 1]".into(),
        ));
    }
    let tree = SeedTree::new(seed);
    let trajectories: Vec<Vec<f64>> = (0..draws.draws.len())
        .into_par_iter()
        .map(|i| -> Result<Vec<Vec<f64>>> {
            let ss = draws.state_space(i)?;
            let last = &draws.draws[i].final_state;
            Ok((0..trajectories_per_draw)
                .map(|k| {
                    let mut rng = tree.stream("trajectory", (i * trajectories_per_draw + k) as u64);
                    simulate_ahead(&ss, last, horizon, &mut rng)
                })
                .collect())
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let start = draws.data.index().end().next();
    let n = trajectories.len() as f64;
    let mut mean = Vec::with_capacity(horizon);
    let mut quantiles = vec![Vec::with_capacity(horizon); levels.len()];
    let mut column = Vec::with_capacity(trajectories.len());
    for h in 0..horizon {
        column.clear();
        column.extend(trajectories.iter().map(|t| t[h]));
        mean.push(column.iter().sum::<f64>() / n);
        column.sort_by(f64::total_cmp);
        for (q, level) in quantiles.iter_mut().zip(levels) {
            q.push(quantile_sorted(&column, *level));
        }
    }
    Ok(ForecastResult {
        index: TimeIndex::new(start, horizon)?,
        mean,
        levels: levels.to_vec(),
        quantiles,
        trajectories,
    })
}

/// Variance of `y_{n+h}` given the state at `n`, for `h = 1..=horizon`.
pub fn analytic_predictive_variance(ss: &StateSpace, horizon: usize) -> Vec<f64> {
    let m = ss.state_dimension();
    let noise = ss.state_noise_covariance();
    let mut p = DMatrix::<f64>::zeros(m, m);
    (0..horizon)
        .map(|_| {
            p = &ss.t * &p * ss.t.transpose() + &noise;
            ss.z.dot(&(&p * &ss.z)) + ss.h
        })
        .collect()
}

/// Cumulative absolute one-step-ahead error of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub label: String,
    pub index: TimeIndex,
    pub values: Vec<f64>,
}

impl ErrorCurve {
    pub fn final_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }
}

/// Averages |error| across draws at each period, then accumulates. Burn-in
/// and missing positions contribute zero.
pub fn error_curve(draws: &PosteriorDraws) -> Result<ErrorCurve> {
    let n = draws.data.len();
    if draws.draws.is_empty() {
        return Err(Error::Argument("no posterior draws".into()));
    }
    if draws.draws.iter().any(|d| d.one_step_errors.len() != n) {
        return Err(Error::Argument(
            "one-step error sequences do not match the data length".into(),
        ));
    }
    let count = draws.draws.len() as f64;
    let mut total = 0.0;
    let values = (0..n)
        .map(|t| {
            let mean_abs = draws
                .draws
                .iter()
                .map(|d| d.one_step_errors[t].map_or(0.0, f64::abs))
                .sum::<f64>()
                / count;
            total += mean_abs;
            total
        })
        .collect();
    Ok(ErrorCurve {
        label: draws.label(),
        index: *draws.data.index(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub label: String,
    pub final_cumulative_error: f64,
    /// Final error minus the winner's.
    pub gap: f64,
    /// Per-period difference from the winner's curve.
    pub differences: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub winner: String,
    pub models: Vec<ModelComparison>,
}

/// Ranks curves by final cumulative error; ties go to the smaller label.
pub fn compare_models(curves: &[ErrorCurve]) -> Result<ComparisonReport> {
    let first = curves
        .first()
        .ok_or_else(|| Error::Argument("nothing to compare".into()))?;
    if curves.iter().any(|c| c.values.len() != first.values.len()) {
        return Err(Error::Argument(
            "error curves have different lengths".into(),
        ));
    }
    let best = curves
        .iter()
        .min_by(|a, b| {
            a.final_value()
                .total_cmp(&b.final_value())
                .then_with(|| a.label.cmp(&b.label))
        })
        .expect("non-empty");
    let models = curves
        .iter()
        .map(|c| ModelComparison {
            label: c.label.clone(),
            final_cumulative_error: c.final_value(),
            gap: c.final_value() - best.final_value(),
            differences: c
                .values
                .iter()
                .zip(&best.values)
                .map(|(a, b)| a - b)
                .collect(),
        })
        .collect();
    Ok(ComparisonReport {
        winner: best.label.clone(),
        models,
    })
}

/// Tidy plot data for several curves: `period,model,cumerr`.
pub fn curves_to_csv(curves: &[ErrorCurve]) -> String {
    let mut out = String::from("period,model,cumerr\n");
    for curve in curves {
        for (period, v) in curve.index.periods().zip(&curve.values) {
            let label = if curve.label.contains([',', '"']) {
                format!("\"{}\"", curve.label.replace('"', "\"\""))
            } else {
                curve.label.clone()
            };
            out.push_str(&format!("{period},{label},{v}\n"));
        }
    }
    out
}
