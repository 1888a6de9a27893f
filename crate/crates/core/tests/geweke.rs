//! Joint-distribution check of the sampler: alternating posterior sweeps
//! with fresh data simulated from the current parameters must leave the
//! prior invariant.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use trendcast_core::model::simulate_with;
use trendcast_core::rng::StreamRng;
use trendcast_core::sampler::{GibbsChain, InverseGammaPrior};
use trendcast_core::{
    build, ComponentSpec, Initialization, ModelParams, Priors, SeedTree, SemilocalParams,
};

const N: usize = 12;
const PRIOR: InverseGammaPrior = InverseGammaPrior {
    shape: 3.0,
    scale: 2.0,
    upper: 4.0,
};
const SLOPE_SD: f64 = 0.5;

fn prior_variance(rng: &mut StreamRng) -> f64 {
    let gamma = Gamma::new(PRIOR.shape, 1.0 / PRIOR.scale).unwrap();
    loop {
        let v = 1.0 / gamma.sample(rng);
        if v <= PRIOR.upper {
            return v;
        }
    }
}

fn prior_draw(semilocal: bool, rng: &mut StreamRng) -> ModelParams {
    ModelParams {
        observation_variance: prior_variance(rng),
        state_variances: vec![prior_variance(rng), prior_variance(rng)],
        semilocal: semilocal.then(|| SemilocalParams {
            long_run_slope: Normal::new(0.0, SLOPE_SD).unwrap().sample(rng),
            slope_ar: rng.random_range(-1.0..1.0),
        }),
    }
}

fn features(p: &ModelParams) -> Vec<f64> {
    let mut f = vec![
        p.observation_variance,
        p.state_variances[0],
        p.state_variances[1],
    ];
    f.extend(f.clone().iter().map(|v| v * v));
    if let Some(s) = p.semilocal {
        f.extend([
            s.long_run_slope,
            s.slope_ar,
            s.long_run_slope.powi(2),
            s.slope_ar.powi(2),
        ]);
    }
    f
}

/// Mean and batch-means standard error.
fn mean_se(xs: &[f64], batches: usize) -> (f64, f64) {
    let size = xs.len() / batches;
    let means: Vec<f64> = xs
        .chunks(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    let mean = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}

fn run(component: ComponentSpec, seed: u64) {
    let semilocal = component == ComponentSpec::SemilocalLinearTrend;
    let components = [component];
    let m = component.state_dimension();
    let init = Initialization::Exact {
        mean: DVector::zeros(m),
        cov: DMatrix::identity(m, m),
    };
    let priors = Priors {
        observation: PRIOR,
        state: vec![PRIOR; 2],
        long_run_slope_sd: SLOPE_SD,
    };
    let seeds = SeedTree::new(seed);
    let iterations = 40_000;

    let mut forward_rng = seeds.stream("forward", 0);
    let forward: Vec<Vec<f64>> = (0..iterations)
        .map(|_| features(&prior_draw(semilocal, &mut forward_rng)))
        .collect();

    let mut data_rng = seeds.stream("data", 0);
    let start = prior_draw(semilocal, &mut data_rng);
    let mut chain = GibbsChain::new(
        &components,
        priors,
        init.clone(),
        start,
        seeds.stream("chain", 0),
    )
    .unwrap();
    let mut successive = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        let ss = build(&components, chain.params(), &init).unwrap();
        let y: Vec<Option<f64>> = simulate_with(&ss, N, &mut data_rng)
            .observations
            .into_iter()
            .map(Some)
            .collect();
        chain.sweep(&y).unwrap();
        successive.push(features(chain.params()));
    }

    for k in 0..forward[0].len() {
        let a: Vec<f64> = forward.iter().map(|f| f[k]).collect();
        let b: Vec<f64> = successive.iter().map(|f| f[k]).collect();
        let (ma, sa) = mean_se(&a, 50);
        let (mb, sb) = mean_se(&b, 50);
        let z = (ma - mb) / (sa * sa + sb * sb).sqrt();
        assert!(
            z.abs() < 4.0,
            "{component:?} feature {k}: prior {ma:.4} vs chain {mb:.4} (z = {z:.2})"
        );
    }
}

#[test]
fn local_linear_trend_leaves_prior_invariant() {
    run(ComponentSpec::LocalLinearTrend, 1);
}

#[test]
fn semilocal_trend_leaves_prior_invariant() {
    run(ComponentSpec::SemilocalLinearTrend, 2);
}
