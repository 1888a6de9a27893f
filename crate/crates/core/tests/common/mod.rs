//! Test-only reference implementations, independent of the library's
//! recursive algorithms.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trendcast_core::StateSpace;

/// Joint Gaussian moments of (α_1..α_n, y_1..y_n) built by brute force.
pub struct DenseModel {
    pub m: usize,
    pub n: usize,
    pub state_mean: DVector<f64>,
    pub state_cov: DMatrix<f64>,
    pub obs_mean: DVector<f64>,
    pub obs_cov: DMatrix<f64>,
    /// Cov(α, y).
    pub cross_cov: DMatrix<f64>,
}

pub fn dense(ss: &StateSpace, n: usize) -> DenseModel {
    let m = ss.z.len();
    let noise = &ss.r * DMatrix::from_diagonal(&ss.q) * ss.r.transpose();
    // unconditional state moments
    let mut means = vec![ss.a1.clone()];
    let mut marg = vec![ss.p1.clone()];
    for t in 1..n {
        means.push(&ss.t * &means[t - 1]);
        marg.push(&ss.t * &marg[t - 1] * ss.t.transpose() + &noise);
    }
    let mut state_cov = DMatrix::zeros(n * m, n * m);
    for t in 0..n {
        let mut block = marg[t].clone();
        for s in t..n {
            // Cov(α_s, α_t) = T^{s-t} P_t
            if s > t {
                block = &ss.t * block;
            }
            state_cov.view_mut((s * m, t * m), (m, m)).copy_from(&block);
            state_cov
                .view_mut((t * m, s * m), (m, m))
                .copy_from(&block.transpose());
        }
    }
    let mut g = DMatrix::zeros(n, n * m);
    for t in 0..n {
        for j in 0..m {
            g[(t, t * m + j)] = ss.z[j];
        }
    }
    let state_mean = DVector::from_iterator(n * m, means.iter().flat_map(|v| v.iter().copied()));
    let obs_mean = &g * &state_mean;
    let cross_cov = &state_cov * g.transpose();
    let obs_cov = &g * &cross_cov + DMatrix::identity(n, n) * ss.h;
    DenseModel {
        m,
        n,
        state_mean,
        state_cov,
        obs_mean,
        obs_cov,
        cross_cov,
    }
}

impl DenseModel {
    fn observed_rows(y: &[Option<f64>]) -> Vec<usize> {
        (0..y.len()).filter(|&i| y[i].is_some()).collect()
    }

    /// Log density of the observed entries of y.
    pub fn log_likelihood(&self, y: &[Option<f64>]) -> f64 {
        let rows = Self::observed_rows(y);
        if rows.is_empty() {
            return 0.0;
        }
        let k = rows.len();
        let cov = DMatrix::from_fn(k, k, |i, j| self.obs_cov[(rows[i], rows[j])]);
        let resid =
            DVector::from_iterator(k, rows.iter().map(|&r| y[r].unwrap() - self.obs_mean[r]));
        let chol = cov
            .cholesky()
            .expect("observation covariance positive definite");
        let logdet = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        -0.5 * (k as f64 * (2.0 * std::f64::consts::PI).ln()
            + logdet
            + resid.dot(&chol.solve(&resid)))
    }

    /// Conditional mean and covariance of each α_t given the observed y.
    pub fn smoothed(&self, y: &[Option<f64>]) -> (Vec<DVector<f64>>, Vec<DMatrix<f64>>) {
        let rows = Self::observed_rows(y);
        let (mean, cov) = if rows.is_empty() {
            (self.state_mean.clone(), self.state_cov.clone())
        } else {
            let k = rows.len();
            let syy = DMatrix::from_fn(k, k, |i, j| self.obs_cov[(rows[i], rows[j])]);
            let sxy = DMatrix::from_fn(self.n * self.m, k, |i, j| self.cross_cov[(i, rows[j])]);
            let resid =
                DVector::from_iterator(k, rows.iter().map(|&r| y[r].unwrap() - self.obs_mean[r]));
            let chol = syy.cholesky().expect("positive definite");
            let mean = &self.state_mean + &sxy * chol.solve(&resid);
            let cov = &self.state_cov - &sxy * chol.solve(&sxy.transpose());
            (mean, cov)
        };
        let m = self.m;
        let means = (0..self.n)
            .map(|t| mean.rows(t * m, m).into_owned())
            .collect();
        let covs = (0..self.n)
            .map(|t| cov.view((t * m, t * m), (m, m)).into_owned())
            .collect();
        (means, covs)
    }
}

/// A random model with state dimension `m`, selection-matrix `R` and
/// well-conditioned noise.
pub fn random_model(seed: u64, m: usize) -> StateSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let t = DMatrix::from_fn(m, m, |_, _| u(-0.8, 0.8));
    let z = DVector::from_fn(m, |_, _| u(-1.5, 1.5));
    let k = 1 + (u(0.0, m as f64) as usize).min(m - 1);
    let mut r = DMatrix::zeros(m, k);
    for j in 0..k {
        r[(j, j)] = 1.0;
    }
    let q = DVector::from_fn(k, |_, _| u(0.05, 2.0));
    let h = u(0.1, 2.0);
    let a1 = DVector::from_fn(m, |_, _| u(-3.0, 3.0));
    let a = DMatrix::from_fn(m, m, |_, _| u(-1.5, 1.5));
    let p1 = &a * a.transpose() + DMatrix::identity(m, m) * 0.1;
    StateSpace::new(z, t, r, q, h, a1, p1).expect("valid random model")
}

pub fn rel_err_vec(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0_f64, |s, v| s.max(v.abs())).max(1e-300);
    a.iter()
        .zip(b)
        .fold(0.0_f64, |e, (x, y)| e.max((x - y).abs()))
        / scale
}
