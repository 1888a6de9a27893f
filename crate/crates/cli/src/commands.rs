use std::ops::Range;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::Serialize;
use trendcast_core::forecast::curves_to_csv;
use trendcast_core::series::{
    align, emit_series_csv, emit_trends_csv, ingest_trends_csv, ingest_trends_csv_with,
    parse_series_csv, trim_to_whole_years, IngestOptions,
};
use trendcast_core::{
    causal_impact, compare_models, error_curve, fit as fit_model, pearson_correlation, predict,
    simple_average, summarize, to_annual, AnnualAggregate, ComponentSpec, Frequency, ImpactConfig,
    McmcConfig, ModelSpec, Period, PosteriorDraws, QueryPanel, Series,
};

use crate::config::{resolve, FileConfig};
use crate::output::Outputs;
use crate::{Failure, GlobalArgs, McmcArgs};

fn read_text(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::argument)
}

/// Core errors keep their own exit code; the file name is added for context.
fn in_file<T>(path: &Path, result: trendcast_core::Result<T>) -> Result<T, Failure> {
    result.map_err(|e| {
        let mut f = Failure::from(e);
        f.error = f.error.context(format!("in {}", path.display()));
        f
    })
}

fn read_series(path: &Path) -> Result<Series, Failure> {
    in_file(path, parse_series_csv(&read_text(path)?))
}

fn read_draws(path: &Path) -> Result<PosteriorDraws, Failure> {
    in_file(path, PosteriorDraws::from_json(&read_text(path)?))
}

fn read_model(path: Option<&Path>) -> Result<ModelSpec, Failure> {
    match path {
        Some(p) => in_file(p, ModelSpec::from_json(&read_text(p)?)),
        None => Ok(ModelSpec::new(vec![ComponentSpec::LocalLinearTrend])),
    }
}

fn json(value: &impl Serialize) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

fn mcmc_config(args: &McmcArgs, file: &FileConfig, seed: u64) -> McmcConfig {
    let defaults = McmcConfig::default();
    McmcConfig {
        iterations: args
            .iterations
            .or(file.iterations)
            .unwrap_or(defaults.iterations),
        burn_in: args.burnin.or(file.burnin).unwrap_or(defaults.burn_in),
        thinning: args.thin.or(file.thin).unwrap_or(defaults.thinning),
        seed,
    }
}

fn display(paths: &[PathBuf]) -> Vec<String> {
    paths.iter().map(|p| p.display().to_string()).collect()
}

pub fn ingest(
    global: &GlobalArgs,
    paths: &[PathBuf],
    lt_half: Option<bool>,
) -> Result<(), Failure> {
    let settings = resolve(global)?;
    let lt_half = lt_half.or(settings.file.lt_half).unwrap_or(true);
    let opts = IngestOptions {
        less_than_one: if lt_half { 0.5 } else { 0.0 },
    };
    let mut names = Vec::new();
    let mut series = Vec::new();
    for path in paths {
        let panel = in_file(path, ingest_trends_csv_with(&read_text(path)?, &opts))?;
        for (name, s) in panel.iter() {
            if names.iter().any(|n| n == name) {
                return Err(Failure::data(anyhow!(
                    "query '{name}' appears in more than one input"
                )));
            }
            names.push(name.to_owned());
            series.push(s.clone());
        }
    }
    let panel = QueryPanel::new(names, series)?;

    #[derive(Serialize)]
    struct Resolved {
        inputs: Vec<String>,
        lt_half: bool,
    }
    let mut out = Outputs::create(&settings.out)?;
    out.write("panel.csv", &emit_trends_csv(&panel))?;
    out.finish(
        "ingest",
        &Resolved {
            inputs: display(paths),
            lt_half,
        },
    )
}

pub fn average(global: &GlobalArgs, panel_path: &Path) -> Result<(), Failure> {
    let settings = resolve(global)?;
    let panel = in_file(panel_path, ingest_trends_csv(&read_text(panel_path)?))?;
    let series = simple_average(&panel)?;

    #[derive(Serialize)]
    struct Resolved {
        panel: String,
        queries: Vec<String>,
    }
    let mut out = Outputs::create(&settings.out)?;
    out.write("series.csv", &emit_series_csv(&series))?;
    out.finish(
        "average",
        &Resolved {
            panel: panel_path.display().to_string(),
            queries: panel.names().to_vec(),
        },
    )
}

pub fn fit(
    global: &GlobalArgs,
    series_path: &Path,
    model: Option<&Path>,
    mcmc: &McmcArgs,
) -> Result<(), Failure> {
    let settings = resolve(global)?;
    let model_path = model.map(Path::to_path_buf).or(settings.file.model.clone());
    let spec = read_model(model_path.as_deref())?;
    let y = read_series(series_path)?;
    let cfg = mcmc_config(mcmc, &settings.file, settings.seed);
    let draws = fit_model(&y, &spec, &cfg)?;
    let summary = summarize(&draws)?;

    #[derive(Serialize)]
    struct Resolved<'a> {
        series: String,
        model: &'a ModelSpec,
        mcmc: McmcConfig,
        draws: usize,
        burn_in_positions: usize,
    }
    let mut out = Outputs::create(&settings.out)?;
    out.write("draws.json", &draws.to_json())?;
    out.write("summary.json", &json(&summary.report()))?;
    out.finish(
        "fit",
        &Resolved {
            series: series_path.display().to_string(),
            model: &spec,
            mcmc: cfg,
            draws: summary.draws,
            burn_in_positions: summary.burn_in_positions,
        },
    )
}

pub fn forecast(
    global: &GlobalArgs,
    draws_path: &Path,
    horizon: Option<usize>,
    trajectories: Option<usize>,
) -> Result<(), Failure> {
    let settings = resolve(global)?;
    let horizon = horizon.or(settings.file.horizon).unwrap_or(12);
    let trajectories = trajectories.or(settings.file.trajectories).unwrap_or(1);
    let draws = read_draws(draws_path)?;
    let result = predict(&draws, horizon, trajectories, settings.seed)?;

    #[derive(Serialize)]
    struct Resolved {
        draws: String,
        horizon: usize,
        trajectories_per_draw: usize,
        seed: u64,
    }
    let mut out = Outputs::create(&settings.out)?;
    out.write("forecast.csv", &result.to_csv())?;
    out.write("forecast.json", &json(&result))?;
    out.finish(
        "forecast",
        &Resolved {
            draws: draws_path.display().to_string(),
            horizon,
            trajectories_per_draw: trajectories,
            seed: settings.seed,
        },
    )
}

pub fn compare(global: &GlobalArgs, paths: &[PathBuf]) -> Result<(), Failure> {
    let settings = resolve(global)?;
    let mut curves = paths
        .iter()
        .map(|p| Ok(error_curve(&read_draws(p)?)?))
        .collect::<Result<Vec<_>, Failure>>()?;
    let clash = curves
        .iter()
        .enumerate()
        .any(|(i, c)| curves[..i].iter().any(|d| d.label == c.label));
    if clash {
        for (curve, path) in curves.iter_mut().zip(paths) {
            curve.label = format!("{} [{}]", curve.label, path.display());
        }
    }
    let report = compare_models(&curves)?;

    #[derive(Serialize)]
    struct Resolved {
        draws: Vec<String>,
        labels: Vec<String>,
    }
    let mut out = Outputs::create(&settings.out)?;
    out.write("comparison.json", &json(&report))?;
    out.write("curves.csv", &curves_to_csv(&curves))?;
    out.finish(
        "compare",
        &Resolved {
            draws: display(paths),
            labels: curves.iter().map(|c| c.label.clone()).collect(),
        },
    )
}

fn annual(series: &Series) -> trendcast_core::Result<Series> {
    match series.index().frequency() {
        Frequency::Annual => Ok(series.clone()),
        _ => to_annual(&trim_to_whole_years(series)?, AnnualAggregate::Mean),
    }
}

pub fn correlate(
    global: &GlobalArgs,
    a_path: &Path,
    b_path: &Path,
    annualize: bool,
) -> Result<(), Failure> {
    let settings = resolve(global)?;
    let annualize = annualize || settings.file.annualize.unwrap_or(false);
    let (mut a, mut b) = (read_series(a_path)?, read_series(b_path)?);
    if annualize {
        a = annual(&a)?;
        b = annual(&b)?;
    }
    let (a, b) = align(&a, &b)?;
    let r = pearson_correlation(&a, &b)?;

    #[derive(Serialize)]
    struct Report {
        correlation: f64,
    }
    #[derive(Serialize)]
    struct Resolved {
        a: String,
        b: String,
        annualize: bool,
        periods: [Period; 2],
    }
    let mut out = Outputs::create(&settings.out)?;
    out.write("correlation.json", &json(&Report { correlation: r }))?;
    out.finish(
        "correlate",
        &Resolved {
            a: a_path.display().to_string(),
            b: b_path.display().to_string(),
            annualize,
            periods: [a.index().start(), a.index().end()],
        },
    )
}

pub struct ImpactArgs {
    pub pre: Option<String>,
    pub post: Option<String>,
    pub model: Option<PathBuf>,
    pub mcmc: McmcArgs,
    pub trajectories: Option<usize>,
    pub level: Option<f64>,
}

/// Parses an inclusive `A..B` range whose ends are periods of the series or
/// 0-based positions.
pub fn parse_range(text: &str, series: &Series) -> Result<Range<usize>, Failure> {
    let (a, b) = text
        .split_once("..")
        .ok_or_else(|| Failure::argument(anyhow!("range '{text}' must look like A..B")))?;
    let position = |end: &str| -> Result<usize, Failure> {
        let end = end.trim();
        if let Ok(i) = end.parse::<usize>() {
            return Ok(i);
        }
        let period: Period = end.parse()?;
        series
            .index()
            .position(period)
            .ok_or_else(|| Failure::argument(anyhow!("period {end} is outside the series")))
    };
    let (a, b) = (position(a)?, position(b)?);
    if b < a {
        return Err(Failure::argument(anyhow!(
            "range '{text}' ends before it starts"
        )));
    }
    if b >= series.len() {
        return Err(Failure::argument(anyhow!(
            "range '{text}' runs past the end of the series"
        )));
    }
    Ok(a..b + 1)
}

pub fn impact(global: &GlobalArgs, series_path: &Path, args: ImpactArgs) -> Result<(), Failure> {
    let settings = resolve(global)?;
    let y = read_series(series_path)?;
    let required = |flag: Option<String>, file: Option<String>, name: &str| {
        flag.or(file)
            .ok_or_else(|| Failure::argument(anyhow!("--{name} is required")))
    };
    let pre_text = required(args.pre, settings.file.pre.clone(), "pre")?;
    let post_text = required(args.post, settings.file.post.clone(), "post")?;
    let pre = parse_range(&pre_text, &y)?;
    let post = parse_range(&post_text, &y)?;
    let model_path = args.model.or(settings.file.model.clone());
    let spec = read_model(model_path.as_deref())?;
    let mut cfg = ImpactConfig::new(
        pre,
        post,
        spec,
        mcmc_config(&args.mcmc, &settings.file, settings.seed),
    );
    if let Some(level) = args.level.or(settings.file.level) {
        cfg.level = level;
    }
    if let Some(k) = args.trajectories.or(settings.file.trajectories) {
        cfg.trajectories_per_draw = k;
    }
    let report = causal_impact(&y, &cfg)?;

    #[derive(Serialize)]
    struct Resolved<'a> {
        series: String,
        pre: String,
        post: String,
        #[serde(flatten)]
        config: &'a ImpactConfig,
    }
    let mut out = Outputs::create(&settings.out)?;
    out.write("impact.json", &(report.to_json() + "\n"))?;
    out.write("impact.txt", &report.to_text())?;
    out.finish(
        "impact",
        &Resolved {
            series: series_path.display().to_string(),
            pre: pre_text,
            post: post_text,
            config: &cfg,
        },
    )
}
