use trendcast_core::sampler::Draw;
use trendcast_core::*;

fn fixed_draws(
    components: &[ComponentSpec],
    params: &ModelParams,
    final_state: Vec<f64>,
    copies: usize,
) -> PosteriorDraws {
    let data = Series::synthetic(&[3.0, 1.0, 4.0, 1.0, 5.0, 9.0, 2.0, 6.0]).unwrap();
    PosteriorDraws {
        priors: Priors::default_for(&data, components),
        spec: ModelSpec::new(components.to_vec()),
        data,
        config: McmcConfig::default(),
        burn_in_positions: final_state.len(),
        draws: (0..copies)
            .map(|_| Draw {
                params: params.clone(),
                states: vec![],
                final_state: final_state.clone(),
                one_step_errors: vec![None; 8],
            })
            .collect(),
    }
}

fn llt_params() -> ModelParams {
    ModelParams {
        observation_variance: 0.5,
        state_variances: vec![0.2, 0.02],
        semilocal: None,
    }
}

#[test]
fn longer_horizon_extends_shorter_one_exactly() {
    let draws = fixed_draws(
        &[ComponentSpec::LocalLinearTrend],
        &llt_params(),
        vec![5.0, 0.3],
        40,
    );
    let short = predict(&draws, 8, 3, 21).unwrap();
    let long = predict(&draws, 20, 3, 21).unwrap();
    assert_eq!(short.trajectories.len(), 120);
    for (s, l) in short.trajectories.iter().zip(&long.trajectories) {
        assert_eq!(s[..], l[..8]);
    }
    assert_eq!(short.mean[..], long.mean[..8]);
    assert_eq!(short.quantiles[0][..], long.quantiles[0][..8]);
}

#[test]
fn empirical_variance_follows_closed_form() {
    let params = llt_params();
    let components = [ComponentSpec::LocalLinearTrend];
    let draws = fixed_draws(&components, &params, vec![5.0, 0.3], 4000);
    let h = 18;
    let fc = predict(&draws, h, 1, 8).unwrap();
    let ss = draws.state_space(0).unwrap();
    let analytic = analytic_predictive_variance(&ss, h);
    assert!(analytic.windows(2).all(|w| w[1] >= w[0]));
    let n = fc.trajectories.len() as f64;
    for step in 0..h {
        let column: Vec<f64> = fc.trajectories.iter().map(|t| t[step]).collect();
        let mean = column.iter().sum::<f64>() / n;
        let var = column.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // sd of a Gaussian sample variance is σ²·sqrt(2/(n−1))
        let tol = 4.0 * analytic[step] * (2.0 / (n - 1.0)).sqrt();
        assert!(
            (var - analytic[step]).abs() < tol,
            "h={step}: {var} vs {}",
            analytic[step]
        );
    }
}

#[test]
fn semilocal_band_is_narrower_at_matched_variances() {
    let local = llt_params();
    let semi = ModelParams {
        semilocal: Some(SemilocalParams {
            long_run_slope: 0.3,
            slope_ar: 0.5,
        }),
        ..local.clone()
    };
    let fl = predict(
        &fixed_draws(
            &[ComponentSpec::LocalLinearTrend],
            &local,
            vec![5.0, 0.3],
            3000,
        ),
        24,
        1,
        2,
    )
    .unwrap();
    let fs = predict(
        &fixed_draws(
            &[ComponentSpec::SemilocalLinearTrend],
            &semi,
            vec![5.0, 0.3, 0.3],
            3000,
        ),
        24,
        1,
        2,
    )
    .unwrap();
    for step in 4..24 {
        assert!(fs.upper()[step] - fs.lower()[step] < fl.upper()[step] - fl.lower()[step]);
    }
}

#[test]
fn quantiles_are_ordered_at_every_step() {
    let draws = fixed_draws(
        &[ComponentSpec::LocalLinearTrend],
        &llt_params(),
        vec![5.0, 0.3],
        200,
    );
    let fc = predict(&draws, 12, 2, 0).unwrap();
    let median = fc.median().unwrap();
    for step in 0..12 {
        assert!(fc.lower()[step] <= median[step] && median[step] <= fc.upper()[step]);
    }
    assert_eq!(fc.index.start().to_string(), "2000-09");
    assert!(fc.to_csv().starts_with("period,mean,lo,hi\n2000-09,"));
}

#[test]
fn seasonal_model_wins_on_seasonal_data() {
    let n = 120;
    let values: Vec<f64> = (0..n)
        .map(|t| {
            let season = 15.0 * (2.0 * std::f64::consts::PI * t as f64 / 12.0).sin();
            let wiggle = ((t * 2654435761usize) % 1000) as f64 / 1000.0 - 0.5;
            60.0 + 0.1 * t as f64 + season + 2.0 * wiggle
        })
        .collect();
    let y = Series::synthetic(&values).unwrap();
    let cfg = McmcConfig {
        iterations: 600,
        burn_in: 200,
        thinning: 1,
        seed: 5,
    };
    let specs = [
        vec![ComponentSpec::LocalLinearTrend],
        vec![ComponentSpec::SemilocalLinearTrend],
        vec![
            ComponentSpec::LocalLinearTrend,
            ComponentSpec::SeasonalTrig {
                seasons: 12,
                harmonics: Some(2),
            },
        ],
    ];
    let curves: Vec<ErrorCurve> = specs
        .iter()
        .map(|c| error_curve(&fit(&y, &ModelSpec::new(c.clone()), &cfg).unwrap()).unwrap())
        .collect();
    for c in &curves {
        assert!(c.values.windows(2).all(|w| w[1] >= w[0]));
    }
    let report = compare_models(&curves).unwrap();
    assert_eq!(
        report.winner, "local_linear_trend+seasonal_trig(12,2)",
        "{report:?}"
    );
}
