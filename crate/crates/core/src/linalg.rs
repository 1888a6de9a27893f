use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Lower-triangular factor `L` with `L Lᵀ = cov` for a positive
/// semidefinite matrix. Pivots that vanish (up to rounding) produce zero
/// columns instead of failing, so singular covariances are fine.
pub(crate) fn psd_cholesky(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let m = cov.nrows();
    let scale = cov.diagonal().iter().fold(0.0_f64, |a, &d| a.max(d.abs()));
    let tol = scale * 1e-13;
    let mut l = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        let mut d = cov[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d <= tol {
            continue;
        }
        let pivot = d.sqrt();
        l[(j, j)] = pivot;
        for i in j + 1..m {
            let mut s = cov[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / pivot;
        }
    }
    l
}

/// One draw from N(mean, L Lᵀ).
pub(crate) fn draw_normal<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    chol: &DMatrix<f64>,
    rng: &mut R,
) -> DVector<f64> {
    let z = DVector::from_iterator(
        mean.len(),
        (0..mean.len()).map(|_| rng.sample::<f64, _>(StandardNormal)),
    );
    mean + chol * z
}

/// Replaces `p` with `(p + pᵀ) / 2`, which is exactly symmetric.
pub(crate) fn symmetrize(p: &mut DMatrix<f64>) {
    let m = p.nrows();
    for i in 0..m {
        for j in i + 1..m {
            let v = 0.5 * (p[(i, j)] + p[(j, i)]);
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
}

/// Empirical quantile with linear interpolation between order statistics
/// (the common "type 7" definition). `sorted` must be ascending.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_of_singular_matrix_reconstructs_it() {
        let v = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, -1.0]);
        let cov =
            &v * v.transpose() + DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.0, 0.0]));
        let l = psd_cholesky(&cov);
        assert!((&l * l.transpose() - &cov).amax() < 1e-12);

        let zero = DMatrix::<f64>::zeros(2, 2);
        assert_eq!(psd_cholesky(&zero), zero);
    }

    #[test]
    fn quantiles_interpolate() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&xs, 0.0), 1.0);
        assert_eq!(quantile_sorted(&xs, 1.0), 4.0);
        assert_eq!(quantile_sorted(&xs, 0.5), 2.5);
    }
}
