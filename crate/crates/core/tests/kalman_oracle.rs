mod common;

use common::{dense, random_model, rel_err_vec};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trendcast_core::{filter, kalman, sample_states, smooth, SeedTree, Series, TimeIndex};

fn random_data(seed: u64, n: usize, with_gaps: bool) -> Series {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdead_beef);
    let mut values: Vec<Option<f64>> = (0..n).map(|_| Some(rng.random_range(-5.0..5.0))).collect();
    if with_gaps && n > 2 {
        let i = rng.random_range(0..n);
        values[i] = None;
    }
    Series::new(TimeIndex::monthly(2000, 1, n).unwrap(), values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn filter_and_smoother_match_dense_gaussian(seed in any::<u64>(), m in 1usize..=4, n in 1usize..=8, gaps in any::<bool>()) {
        let ss = random_model(seed, m);
        let y = random_data(seed, n, gaps);
        let oracle = dense(&ss, n);

        let f = filter(&ss, &y).unwrap();
        let want = oracle.log_likelihood(y.values());
        prop_assert!(rel_err_vec(&[f.log_likelihood], &[want]) < 1e-8, "loglik {} vs {}", f.log_likelihood, want);

        let s = smooth(&ss, &y).unwrap();
        let (means, covs) = oracle.smoothed(y.values());
        for t in 0..n {
            prop_assert!(rel_err_vec(s.means[t].as_slice(), means[t].as_slice()) < 1e-8, "mean t={}", t);
            prop_assert!(rel_err_vec(s.covariances[t].as_slice(), covs[t].as_slice()) < 1e-8, "cov t={}", t);
            prop_assert_eq!(&s.covariances[t], &s.covariances[t].transpose());
        }
    }
}

#[test]
fn burn_in_likelihood_is_conditional_density() {
    // log p(y_{d+1..n} | y_{1..d}) = log p(y) - log p(y_{1..d})
    let ss = random_model(11, 2);
    let y = random_data(11, 7, false);
    let f = filter(&ss, &y).unwrap();
    let head: Vec<Option<f64>> = y
        .values()
        .iter()
        .enumerate()
        .map(|(t, v)| if t < 2 { *v } else { None })
        .collect();
    let oracle = dense(&ss, 7);
    let want = oracle.log_likelihood(y.values()) - oracle.log_likelihood(&head);
    assert!((f.log_likelihood_after_burn_in() - want).abs() < 1e-9 * want.abs());
    assert_eq!(f.one_step_errors()[..2], [None, None]);
}

#[test]
fn simulation_smoother_matches_smoothed_moments() {
    let ss = random_model(5, 3);
    let y = random_data(5, 6, true);
    let smoothed = smooth(&ss, &y).unwrap();
    let draws = 10_000;
    let mut rng = SeedTree::new(17).stream("ffbs", 0);
    let paths: Vec<_> = (0..draws)
        .map(|_| sample_states(&ss, &y, &mut rng).unwrap())
        .collect();

    for t in 0..y.len() {
        for i in 0..3 {
            let xs: Vec<f64> = paths.iter().map(|p| p[t][i]).collect();
            let mean = xs.iter().sum::<f64>() / draws as f64;
            let var = smoothed.covariances[t][(i, i)];
            let se = (var / draws as f64).sqrt();
            assert!(
                (mean - smoothed.means[t][i]).abs() < 4.0 * se,
                "t={t} i={i}: {mean} vs {} (se {se})",
                smoothed.means[t][i]
            );
            for j in 0..3 {
                let ys: Vec<f64> = paths.iter().map(|p| p[t][j]).collect();
                let my = ys.iter().sum::<f64>() / draws as f64;
                let cov = xs
                    .iter()
                    .zip(&ys)
                    .map(|(a, b)| (a - mean) * (b - my))
                    .sum::<f64>()
                    / (draws - 1) as f64;
                let want = smoothed.covariances[t][(i, j)];
                // sd of a sample covariance is about sqrt((σ_ii σ_jj + σ_ij²)/N)
                let sd =
                    ((var * smoothed.covariances[t][(j, j)] + want * want) / draws as f64).sqrt();
                assert!(
                    (cov - want).abs() < 5.0 * sd + 1e-12,
                    "t={t} ({i},{j}): {cov} vs {want}"
                );
            }
        }
    }
}

#[test]
fn covariance_pass_reused_for_means() {
    let ss = random_model(3, 2);
    let y = random_data(3, 8, true);
    let mask: Vec<bool> = y.values().iter().map(Option::is_some).collect();
    let pass = kalman::CovariancePass::new(&ss, &mask).unwrap();
    let means = pass.means(&ss, y.values(), &ss.a1);
    let f = filter(&ss, &y).unwrap();
    assert_eq!(means.innovations, f.innovations);
}
