//! Counterfactual impact of an intervention.
//!
//! The model is fitted on the pre-period only and its posterior-predictive
//! trajectories over the post-period stand in for what would have happened
//! without the intervention. Effects are summarized per trajectory, so every
//! interval is an equal-tailed posterior interval.

use std::fmt::Write as _;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forecast::predict_with_levels;
use crate::linalg::quantile_sorted;
use crate::model::{state_dimension, ModelSpec};
use crate::rng::SeedTree;
use crate::sampler::{fit, McmcConfig};
use crate::series::{Period, Series};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactConfig {
    /// Positions used for fitting.
    pub pre: Range<usize>,
    /// Positions after the intervention.
    pub post: Range<usize>,
    /// Credibility of the reported intervals.
    pub level: f64,
    pub model: ModelSpec,
    pub mcmc: McmcConfig,
    pub trajectories_per_draw: usize,
}

impl ImpactConfig {
    pub fn new(pre: Range<usize>, post: Range<usize>, model: ModelSpec, mcmc: McmcConfig) -> Self {
        ImpactConfig {
            pre,
            post,
            level: 0.95,
            model,
            mcmc,
            trajectories_per_draw: 1,
        }
    }

    fn validate(&self, series_len: usize) -> Result<()> {
        let m = state_dimension(&self.model.components);
        if self.pre.is_empty() || self.post.is_empty() {
            return Err(Error::Argument(
                "pre- and post-periods must be non-empty".into(),
            ));
        }
        if self.post.start < self.pre.end {
            return Err(Error::Argument(
                "post-period must start after the pre-period ends".into(),
            ));
        }
        if self.post.end > series_len {
            return Err(Error::Argument(format!(
                "post-period ends at {} but the series has {series_len} periods",
                self.post.end
            )));
        }
        if self.pre.len() < 3 * m {
            return Err(Error::Argument(format!(
                "pre-period needs at least {} periods for a {m}-dimensional state",
                3 * m
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Argument(
                "credibility level must lie in (0, 1)".into(),
            ));
        }
        if self.trajectories_per_draw == 0 {
            return Err(Error::Argument(
                "need at least one trajectory per draw".into(),
            ));
        }
        Ok(())
    }
}

/// Point estimate with posterior spread.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Estimate {
    fn excludes_zero(&self) -> bool {
        self.lower > 0.0 || self.upper < 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointImpact {
    pub period: Period,
    pub actual: Option<f64>,
    pub predicted: Estimate,
    /// Actual minus counterfactual; absent where the actual is missing.
    pub effect: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactReport {
    pub level: f64,
    pub pre_period: [Period; 2],
    pub post_period: [Period; 2],
    pub trajectories: usize,
    pub pointwise: Vec<PointImpact>,
    /// Sum and mean of the observed post-period values.
    pub actual_total: f64,
    pub actual_average: f64,
    pub predicted_total: Estimate,
    pub predicted_average: Estimate,
    pub absolute_effect_total: Estimate,
    pub absolute_effect_average: Estimate,
    /// `(Σ actual − Σ counterfactual) / Σ counterfactual`, as a fraction.
    pub relative_effect: Option<Estimate>,
    /// Posterior probability of a cumulative outcome at least as extreme
    /// as the one observed.
    pub tail_area_probability: f64,
    /// Whether the effect interval excludes zero.
    pub significant: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn summarize(values: &mut [f64], estimate: f64, alpha: f64) -> Estimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    values.sort_by(f64::total_cmp);
    Estimate {
        estimate,
        sd,
        lower: quantile_sorted(values, alpha / 2.0),
        upper: quantile_sorted(values, 1.0 - alpha / 2.0),
    }
}

/// `(1 + #{trajectories at least as extreme as the actual total}) / (1 + N)`,
/// taking the tail on the side the actual total falls.
pub fn tail_area_probability(actual_total: f64, counterfactual_totals: &[f64]) -> f64 {
    let below = counterfactual_totals
        .iter()
        .filter(|s| **s <= actual_total)
        .count();
    let above = counterfactual_totals
        .iter()
        .filter(|s| **s >= actual_total)
        .count();
    (1 + below.min(above)) as f64 / (1 + counterfactual_totals.len()) as f64
}

/// Fits on `cfg.pre`, forecasts across `cfg.post` and compares.
pub fn causal_impact(y: &Series, cfg: &ImpactConfig) -> Result<ImpactReport> {
    cfg.validate(y.len())?;
    let pre = y.slice(cfg.pre.clone())?;
    let draws = fit(&pre, &cfg.model, &cfg.mcmc)?;
    let alpha = 1.0 - cfg.level;
    let horizon = cfg.post.end - cfg.pre.end;
    let offset = cfg.post.start - cfg.pre.end;
    let seed = SeedTree::new(cfg.mcmc.seed).child("impact", 0).0;
    let forecast = predict_with_levels(
        &draws,
        horizon,
        cfg.trajectories_per_draw,
        seed,
        &[alpha / 2.0, 1.0 - alpha / 2.0],
    )?;
    let paths: Vec<&[f64]> = forecast.trajectories.iter().map(|t| &t[offset..]).collect();
    let actual: Vec<Option<f64>> = y.values()[cfg.post.clone()].to_vec();
    let observed: Vec<usize> = (0..actual.len()).filter(|&i| actual[i].is_some()).collect();
    if observed.is_empty() {
        return Err(Error::Argument("post-period has no observed values".into()));
    }

    let pointwise = (0..actual.len())
        .map(|i| {
            let mut column: Vec<f64> = paths.iter().map(|p| p[i]).collect();
            let mean = column.iter().sum::<f64>() / column.len() as f64;
            let predicted = summarize(&mut column, mean, alpha);
            let effect = actual[i].map(|a| {
                let mut effects: Vec<f64> = paths.iter().map(|p| a - p[i]).collect();
                summarize(&mut effects, a - mean, alpha)
            });
            PointImpact {
                period: y.index().period(cfg.post.start + i),
                actual: actual[i],
                predicted,
                effect,
            }
        })
        .collect();

    let n_obs = observed.len() as f64;
    let actual_total: f64 = observed.iter().map(|&i| actual[i].expect("observed")).sum();
    let totals: Vec<f64> = paths
        .iter()
        .map(|p| observed.iter().map(|&i| p[i]).sum())
        .collect();
    let mean_total = totals.iter().sum::<f64>() / totals.len() as f64;

    let predicted_total = summarize(&mut totals.clone(), mean_total, alpha);
    let predicted_average = summarize(
        &mut totals.iter().map(|s| s / n_obs).collect::<Vec<_>>(),
        mean_total / n_obs,
        alpha,
    );
    let absolute_effect_total = summarize(
        &mut totals.iter().map(|s| actual_total - s).collect::<Vec<_>>(),
        actual_total - mean_total,
        alpha,
    );
    let absolute_effect_average = summarize(
        &mut totals
            .iter()
            .map(|s| (actual_total - s) / n_obs)
            .collect::<Vec<_>>(),
        (actual_total - mean_total) / n_obs,
        alpha,
    );

    let mut warnings = Vec::new();
    let relative_effect = if mean_total > 0.0 {
        let mut ratios: Vec<f64> = totals
            .iter()
            .filter(|s| **s > 0.0)
            .map(|s| (actual_total - s) / s)
            .collect();
        if ratios.len() < totals.len() {
            warnings.push(format!(
                "{} trajectories with a non-positive counterfactual total were left out of the relative effect",
                totals.len() - ratios.len()
            ));
        }
        Some(summarize(
            &mut ratios,
            (actual_total - mean_total) / mean_total,
            alpha,
        ))
    } else {
        warnings.push("counterfactual total is not positive; relative effect is undefined".into());
        None
    };
    let significant = relative_effect
        .as_ref()
        .unwrap_or(&absolute_effect_total)
        .excludes_zero();

    Ok(ImpactReport {
        level: cfg.level,
        pre_period: [
            y.index().period(cfg.pre.start),
            y.index().period(cfg.pre.end - 1),
        ],
        post_period: [
            y.index().period(cfg.post.start),
            y.index().period(cfg.post.end - 1),
        ],
        trajectories: totals.len(),
        pointwise,
        actual_total,
        actual_average: actual_total / n_obs,
        predicted_total,
        predicted_average,
        absolute_effect_total,
        absolute_effect_average,
        relative_effect,
        tail_area_probability: tail_area_probability(actual_total, &totals),
        significant,
        warnings,
    })
}

impl ImpactReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One-page plain-text summary.
    pub fn to_text(&self) -> String {
        let pct = self.level * 100.0;
        let row = |name: &str, avg: String, cum: String| format!("{name:<26}{avg:<22}{cum}\n");
        let est = |e: &Estimate| format!("{:.4} ({:.4})", e.estimate, e.sd);
        let ci = |e: &Estimate| format!("[{:.4}, {:.4}]", e.lower, e.upper);
        let mut out = String::new();
        let _ = writeln!(out, "Posterior inference: causal impact");
        let _ = writeln!(
            out,
            "Pre-period {} to {}, post-period {} to {}\n",
            self.pre_period[0], self.pre_period[1], self.post_period[0], self.post_period[1]
        );
        out.push_str(&row("", "Average".into(), "Cumulative".into()));
        out.push_str(&row(
            "Actual",
            format!("{:.4}", self.actual_average),
            format!("{:.4}", self.actual_total),
        ));
        out.push_str(&row(
            "Prediction (s.d.)",
            est(&self.predicted_average),
            est(&self.predicted_total),
        ));
        out.push_str(&row(
            &format!("{pct:.0}% CI"),
            ci(&self.predicted_average),
            ci(&self.predicted_total),
        ));
        out.push('\n');
        out.push_str(&row(
            "Absolute effect (s.d.)",
            est(&self.absolute_effect_average),
            est(&self.absolute_effect_total),
        ));
        out.push_str(&row(
            &format!("{pct:.0}% CI"),
            ci(&self.absolute_effect_average),
            ci(&self.absolute_effect_total),
        ));
        out.push('\n');
        match &self.relative_effect {
            Some(r) => {
                let rel = format!("{:.1}% ({:.1}%)", 100.0 * r.estimate, 100.0 * r.sd);
                let rel_ci = format!("[{:.1}%, {:.1}%]", 100.0 * r.lower, 100.0 * r.upper);
                out.push_str(&row("Relative effect (s.d.)", rel.clone(), rel));
                out.push_str(&row(&format!("{pct:.0}% CI"), rel_ci.clone(), rel_ci));
            }
            None => out.push_str(&row(
                "Relative effect",
                "undefined".into(),
                "undefined".into(),
            )),
        }
        let _ = writeln!(
            out,
            "\nPosterior tail-area probability p: {:.5}",
            self.tail_area_probability
        );
        let _ = writeln!(
            out,
            "Posterior prob. of a causal effect: {:.2}%",
            100.0 * (1.0 - self.tail_area_probability)
        );
        let _ = writeln!(
            out,
            "Effect interval excludes zero: {}",
            if self.significant { "yes" } else { "no" }
        );
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}
