//! Exact inference for a [`StateSpace`]: Kalman filtering, fixed-interval
//! smoothing, and posterior state-path simulation.
//!
//! The covariance recursion depends only on the model and on which
//! positions are observed, so it is computed once ([`CovariancePass`]) and
//! reused by the cheap O(m²)-per-step mean recursions. The sampler relies on
//! this to draw states and compute one-step errors from a single pass.
//!
//! Positions `0..d` (d = state dimension) are treated as burn-in of the
//! approximately diffuse start: they are filtered normally but excluded
//! from [`FilterResult::one_step_errors`] and
//! [`FilterResult::log_likelihood_after_burn_in`].

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::symmetrize;
use crate::model::{simulate_with, StateSpace};
use crate::series::Series;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Variance recursion of the filter for one model and missing pattern.
#[derive(Debug, Clone)]
pub struct CovariancePass {
    /// `P_t`: covariance of α_t given observations before t.
    pub predicted: Vec<DMatrix<f64>>,
    /// `P_{t|t}`.
    pub filtered: Vec<DMatrix<f64>>,
    /// `F_t = Zᵀ P_t Z + H`, recorded at every observed position.
    pub innovation_variances: Vec<Option<f64>>,
    /// `P_t Z / F_t` where an update took place, `None` otherwise.
    gains: Vec<Option<DVector<f64>>>,
    /// `P_{n+1}`, the one-step-ahead covariance past the sample.
    pub next: DMatrix<f64>,
}

impl CovariancePass {
    /// Runs the covariance recursion. `observed[t]` says whether y_t exists.
    pub fn new(ss: &StateSpace, observed: &[bool]) -> Result<Self> {
        let n = observed.len();
        let noise = ss.state_noise_covariance();
        let scale = ss.p1.diagonal().amax().max(ss.h.abs()).max(1.0);
        let tolerance = 1e-14 * scale;

        let mut predicted = Vec::with_capacity(n);
        let mut filtered = Vec::with_capacity(n);
        let mut variances = Vec::with_capacity(n);
        let mut gains = Vec::with_capacity(n);
        let mut p = ss.p1.clone();
        symmetrize(&mut p);
        for (t, &obs) in observed.iter().enumerate() {
            let mut pf = p.clone();
            let mut gain = None;
            let mut variance = None;
            if obs {
                let pz = &p * &ss.z;
                let f = ss.z.dot(&pz) + ss.h;
                if !f.is_finite() || f < -tolerance {
                    return Err(Error::numerical(
                        Some(t),
                        format!("innovation variance {f} is not positive"),
                    ));
                }
                variance = Some(f.max(0.0));
                // a vanishing F means y_t is fully determined by the past:
                // there is nothing to learn from it
                if f > tolerance {
                    let k = pz / f;
                    pf -= &k * k.transpose() * f;
                    symmetrize(&mut pf);
                    gain = Some(k);
                }
            }
            let mut next = &ss.t * &pf * ss.t.transpose() + &noise;
            symmetrize(&mut next);
            predicted.push(std::mem::replace(&mut p, next));
            filtered.push(pf);
            variances.push(variance);
            gains.push(gain);
        }
        Ok(CovariancePass {
            predicted,
            filtered,
            innovation_variances: variances,
            gains,
            next: p,
        })
    }

    pub fn len(&self) -> usize {
        self.predicted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicted.is_empty()
    }

    /// Mean recursion: predicted means `a_t` and innovations for data `y`
    /// started from `a1`.
    pub fn means(&self, ss: &StateSpace, y: &[Option<f64>], a1: &DVector<f64>) -> MeanPass {
        let n = self.len();
        let mut predicted = Vec::with_capacity(n);
        let mut filtered = Vec::with_capacity(n);
        let mut innovations = Vec::with_capacity(n);
        let mut a = a1.clone();
        for t in 0..n {
            let v = y[t].map(|obs| obs - ss.z.dot(&a));
            let af = match (&self.gains[t], v) {
                (Some(k), Some(v)) => &a + k * v,
                _ => a.clone(),
            };
            let next = &ss.t * &af;
            predicted.push(std::mem::replace(&mut a, next));
            filtered.push(af);
            innovations.push(v);
        }
        MeanPass {
            predicted,
            filtered,
            innovations,
            next: a,
        }
    }

    /// Smoothed means `E[α_t | y]` via the backward `r` recursion.
    pub fn smoothed_means(
        &self,
        ss: &StateSpace,
        y: &[Option<f64>],
        a1: &DVector<f64>,
    ) -> Vec<DVector<f64>> {
        let pass = self.means(ss, y, a1);
        let m = ss.state_dimension();
        let mut r = DVector::zeros(m);
        let mut out = vec![DVector::zeros(m); self.len()];
        for t in (0..self.len()).rev() {
            let tr = ss.t.tr_mul(&r);
            r = match (
                &self.gains[t],
                pass.innovations[t],
                self.innovation_variances[t],
            ) {
                (Some(k), Some(v), Some(f)) => {
                    // r_{t-1} = Z v/F + (I - K Zᵀ)ᵀ Tᵀ r_t
                    let coef = v / f - k.dot(&tr);
                    tr + &ss.z * coef
                }
                _ => tr,
            };
            out[t] = &pass.predicted[t] + &self.predicted[t] * &r;
        }
        out
    }

    /// Smoothed means and covariances.
    pub fn smooth(&self, ss: &StateSpace, y: &[Option<f64>], a1: &DVector<f64>) -> Smoothed {
        let means = self.smoothed_means(ss, y, a1);
        let m = ss.state_dimension();
        let mut big_n = DMatrix::zeros(m, m);
        let mut covs = vec![DMatrix::zeros(m, m); self.len()];
        for t in (0..self.len()).rev() {
            let tnt = ss.t.transpose() * &big_n * &ss.t;
            big_n = match (&self.gains[t], self.innovation_variances[t]) {
                (Some(k), Some(f)) => {
                    // (I - Z Kᵀ) M (I - K Zᵀ) + Z Zᵀ / F
                    let mk = &tnt * k;
                    let kmk = k.dot(&mk);
                    let zz = &ss.z * ss.z.transpose();
                    &tnt - &ss.z * mk.transpose() - &mk * ss.z.transpose() + zz * (kmk + 1.0 / f)
                }
                _ => tnt,
            };
            symmetrize(&mut big_n);
            let p = &self.predicted[t];
            let mut v = p - p * &big_n * p;
            symmetrize(&mut v);
            covs[t] = v;
        }
        Smoothed {
            means,
            covariances: covs,
        }
    }
}

/// Output of the mean recursion.
#[derive(Debug, Clone)]
pub struct MeanPass {
    pub predicted: Vec<DVector<f64>>,
    pub filtered: Vec<DVector<f64>>,
    pub innovations: Vec<Option<f64>>,
    /// `a_{n+1}`.
    pub next: DVector<f64>,
}

/// Full filter output.
#[derive(Debug, Clone)]
pub struct FilterResult {
    pub predicted_means: Vec<DVector<f64>>,
    pub predicted_covariances: Vec<DMatrix<f64>>,
    pub filtered_means: Vec<DVector<f64>>,
    pub filtered_covariances: Vec<DMatrix<f64>>,
    /// `v_t`; `None` where y_t is missing.
    pub innovations: Vec<Option<f64>>,
    /// `F_t`; `None` where y_t is missing.
    pub innovation_variances: Vec<Option<f64>>,
    /// Gaussian log-likelihood over every informative observed position.
    pub log_likelihood: f64,
    /// Number of leading positions treated as diffuse burn-in.
    pub burn_in: usize,
    contributions: Vec<f64>,
}

impl FilterResult {
    /// Log-likelihood over positions `t >= burn_in`.
    pub fn log_likelihood_after_burn_in(&self) -> f64 {
        self.contributions.iter().skip(self.burn_in).sum()
    }

    /// One-step-ahead prediction errors with burn-in and missing positions
    /// blanked out.
    pub fn one_step_errors(&self) -> Vec<Option<f64>> {
        blank_burn_in(&self.innovations, self.burn_in)
    }
}

pub(crate) fn blank_burn_in(innovations: &[Option<f64>], burn_in: usize) -> Vec<Option<f64>> {
    innovations
        .iter()
        .enumerate()
        .map(|(t, v)| if t < burn_in { None } else { *v })
        .collect()
}

/// Smoothed state moments.
#[derive(Debug, Clone)]
pub struct Smoothed {
    pub means: Vec<DVector<f64>>,
    pub covariances: Vec<DMatrix<f64>>,
}

fn observed_mask(y: &[Option<f64>]) -> Vec<bool> {
    y.iter().map(Option::is_some).collect()
}

fn check_len(y: &Series) -> Result<()> {
    if y.is_empty() {
        return Err(Error::Argument(
            "series must contain at least one period".into(),
        ));
    }
    Ok(())
}

/// Kalman filter over `y`; missing positions only predict.
pub fn filter(ss: &StateSpace, y: &Series) -> Result<FilterResult> {
    check_len(y)?;
    filter_values(ss, y.values())
}

pub fn filter_values(ss: &StateSpace, y: &[Option<f64>]) -> Result<FilterResult> {
    let cov = CovariancePass::new(ss, &observed_mask(y))?;
    let means = cov.means(ss, y, &ss.a1);
    let contributions: Vec<f64> = means
        .innovations
        .iter()
        .zip(&cov.gains)
        .zip(&cov.innovation_variances)
        .map(|((v, g), f)| match (v, g, f) {
            (Some(v), Some(_), Some(f)) => -0.5 * (LN_2PI + f.ln() + v * v / f),
            _ => 0.0,
        })
        .collect();
    Ok(FilterResult {
        predicted_means: means.predicted,
        predicted_covariances: cov.predicted,
        filtered_means: means.filtered,
        filtered_covariances: cov.filtered,
        innovations: means.innovations,
        innovation_variances: cov.innovation_variances,
        log_likelihood: contributions.iter().sum(),
        burn_in: ss.state_dimension(),
        contributions,
    })
}

/// Fixed-interval smoother.
pub fn smooth(ss: &StateSpace, y: &Series) -> Result<Smoothed> {
    check_len(y)?;
    let cov = CovariancePass::new(ss, &observed_mask(y.values()))?;
    Ok(cov.smooth(ss, y.values(), &ss.a1))
}

/// Draws one state path from `p(α | y)`.
pub fn sample_states<R: Rng + ?Sized>(
    ss: &StateSpace,
    y: &Series,
    rng: &mut R,
) -> Result<Vec<DVector<f64>>> {
    check_len(y)?;
    let cov = CovariancePass::new(ss, &observed_mask(y.values()))?;
    Ok(draw_states(ss, &cov, y.values(), rng))
}

/// Simulation smoother by mean correction: simulate (α⁺, y⁺) from the
/// model, then `α̃ = α⁺ + E[α | y − y⁺]` with a zero initial mean is an exact
/// draw from the conditional distribution of the states.
pub(crate) fn draw_states<R: Rng + ?Sized>(
    ss: &StateSpace,
    cov: &CovariancePass,
    y: &[Option<f64>],
    rng: &mut R,
) -> Vec<DVector<f64>> {
    let sim = simulate_with(ss, y.len(), rng);
    let residual: Vec<Option<f64>> = y
        .iter()
        .zip(&sim.observations)
        .map(|(obs, plus)| obs.map(|v| v - plus))
        .collect();
    let zero = DVector::zeros(ss.state_dimension());
    cov.smoothed_means(ss, &residual, &zero)
        .into_iter()
        .zip(sim.states)
        .map(|(correction, plus)| plus + correction)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build, ComponentSpec, Initialization, ModelParams};
    use crate::rng::SeedTree;

    fn local_level(h: f64, q: f64, p1: f64) -> StateSpace {
        StateSpace::new(
            DVector::from_element(1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DVector::from_element(1, q),
            h,
            DVector::zeros(1),
            DMatrix::from_element(1, 1, p1),
        )
        .unwrap()
    }

    fn line_model() -> StateSpace {
        build(
            &[ComponentSpec::LocalLinearTrend],
            &ModelParams {
                observation_variance: 0.0,
                state_variances: vec![0.0, 0.0],
                semilocal: None,
            },
            &Initialization::Exact {
                mean: DVector::from_row_slice(&[1.0, 2.0]),
                cov: DMatrix::zeros(2, 2),
            },
        )
        .unwrap()
    }

    #[test]
    fn deterministic_line_has_zero_innovations() {
        let ss = line_model();
        let y = Series::synthetic(&[1.0, 3.0, 5.0, 7.0, 9.0]).unwrap();
        let res = filter(&ss, &y).unwrap();
        assert!(res.innovations.iter().all(|v| *v == Some(0.0)));
        let sm = smooth(&ss, &y).unwrap();
        for (t, (s, f)) in sm.means.iter().zip(&res.filtered_means).enumerate() {
            assert_eq!(s, f);
            assert_eq!(s.as_slice(), [1.0 + 2.0 * t as f64, 2.0]);
        }
    }

    #[test]
    fn local_level_likelihood_by_hand() {
        // y ~ N(0, Σ), Σ_ij = P1 + Q·min(i,j) + H·δ_ij for a local level
        let (h, q, p1) = (1.0, 1.0, 1e6);
        let y = [0.0, 2.0, 4.0];
        let sigma = DMatrix::from_fn(3, 3, |i, j| {
            p1 + q * i.min(j) as f64 + if i == j { h } else { 0.0 }
        });
        let x = DVector::from_row_slice(&y);
        let chol = sigma.clone().cholesky().unwrap();
        let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let quad = x.dot(&chol.solve(&x));
        let dense = -0.5 * (3.0 * LN_2PI + logdet + quad);

        let res = filter(&local_level(h, q, p1), &Series::synthetic(&y).unwrap()).unwrap();
        assert!(
            (res.log_likelihood - dense).abs() < 1e-8 * dense.abs(),
            "{} vs {dense}",
            res.log_likelihood
        );
    }

    #[test]
    fn missing_value_inflates_prediction_covariance() {
        let ss = local_level(1.0, 0.5, 10.0);
        let full = Series::synthetic(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        let gappy =
            Series::new(*full.index(), vec![Some(1.0), None, Some(3.0), Some(4.0)]).unwrap();
        let a = filter(&ss, &full).unwrap();
        let b = filter(&ss, &gappy).unwrap();
        assert!(b.predicted_covariances[2].trace() > a.predicted_covariances[2].trace());
        assert_eq!(b.innovations[1], None);
    }

    #[test]
    fn trailing_missing_values_leave_likelihood_unchanged() {
        let ss = local_level(0.7, 0.2, 5.0);
        let y = Series::synthetic(&[0.3, -0.1, 0.8]).unwrap();
        let mut padded: Vec<Option<f64>> = y.values().to_vec();
        padded.extend([None, None]);
        let a = filter_values(&ss, y.values()).unwrap();
        let b = filter_values(&ss, &padded).unwrap();
        assert_eq!(a.log_likelihood, b.log_likelihood);
    }

    #[test]
    fn last_smoothed_moments_equal_filtered() {
        let ss = local_level(0.7, 0.2, 5.0);
        let y = Series::synthetic(&[0.3, -0.1, 0.8, 1.1]).unwrap();
        let f = filter(&ss, &y).unwrap();
        let s = smooth(&ss, &y).unwrap();
        assert!((s.means[3][0] - f.filtered_means[3][0]).abs() < 1e-14);
        assert!((s.covariances[3][(0, 0)] - f.filtered_covariances[3][(0, 0)]).abs() < 1e-14);
    }

    #[test]
    fn covariances_are_exactly_symmetric() {
        let ss = build(
            &[
                ComponentSpec::LocalLinearTrend,
                ComponentSpec::SeasonalTrig {
                    seasons: 4,
                    harmonics: None,
                },
            ],
            &ModelParams {
                observation_variance: 0.3,
                state_variances: vec![0.1, 0.01, 0.05],
                semilocal: None,
            },
            &Initialization::Diffuse {
                level: 0.0,
                kappa: 1e4,
            },
        )
        .unwrap();
        let y = Series::synthetic(&[1.0, 2.5, 0.3, 4.0, 3.3, 2.1, 6.0]).unwrap();
        let f = filter(&ss, &y).unwrap();
        for p in f
            .predicted_covariances
            .iter()
            .chain(&f.filtered_covariances)
        {
            assert_eq!(p, &p.transpose());
        }
    }

    #[test]
    fn degenerate_innovation_variance_is_rejected_when_negative() {
        let ss = local_level(-0.0, 0.0, 0.0);
        assert!(filter(&ss, &Series::synthetic(&[1.0]).unwrap()).is_ok());
        let mut bad = local_level(0.0, 0.0, 1.0);
        bad.p1[(0, 0)] = -1.0;
        let err = filter(&bad, &Series::synthetic(&[1.0]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Numerical { at: Some(0), .. }));
    }

    #[test]
    fn zero_state_noise_gives_deterministic_draws() {
        let mut ss = line_model();
        ss.h = 0.5;
        let y = Series::synthetic(&[1.0, 2.0, 6.0, 7.0]).unwrap();
        for seed in 0..3 {
            let path = sample_states(&ss, &y, &mut SeedTree::new(seed).stream("s", 0)).unwrap();
            for (t, state) in path.iter().enumerate() {
                assert!((state[0] - (1.0 + 2.0 * t as f64)).abs() < 1e-12);
                assert!((state[1] - 2.0).abs() < 1e-12);
            }
        }
    }
}
