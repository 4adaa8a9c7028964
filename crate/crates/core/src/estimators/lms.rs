//! Least median of squares.
//!
//! The "median" is the `h = floor((n + p* + 1) / 2)`-th smallest squared
//! residual, which keeps the maximal breakdown point for every `n`.

use super::search::{elemental_fits, SubsetSearchConfig};
use super::zero_tolerance;
use crate::data::{raw_residuals, residuals_into, Coefficients, Dataset, MethodId, RegressionFit};
use crate::error::Result;
use crate::linalg::kth_smallest_in_place;

pub fn lms_coverage(n: usize, n_coef: usize) -> usize {
    (n + n_coef + 1) / 2
}

pub fn lms_objective(d: &Dataset, b: &Coefficients) -> Result<f64> {
    let r = crate::data::residuals(d, b)?;
    let mut sq: Vec<f64> = r.iter().map(|v| v * v).collect();
    kth_smallest_in_place(&mut sq, lms_coverage(d.n(), d.n_coef()))
}

pub fn fit_lms(d: &Dataset, cfg: &SubsetSearchConfig) -> Result<RegressionFit> {
    let fits = elemental_fits(d, cfg)?;
    let h = lms_coverage(d.n(), d.n_coef());
    let mut r = Vec::with_capacity(d.n());
    let mut best = (f64::INFINITY, 0usize);
    for (k, beta) in fits.iter().enumerate() {
        residuals_into(d, beta, &mut r);
        r.iter_mut().for_each(|v| *v *= *v);
        let obj = kth_smallest_in_place(&mut r, h)?;
        if obj < best.0 {
            best = (obj, k);
        }
    }
    let beta = fits[best.1].clone();
    let n = d.n() as f64;
    let p = d.n_coef() as f64;
    let tol = zero_tolerance(d);
    let scale = if best.0.sqrt() <= tol {
        0.0
    } else {
        1.4826 * (1.0 + 5.0 / (n - p)) * best.0.sqrt()
    };
    let res = raw_residuals(d, &beta);
    let cutoff = best.0.sqrt().max(tol);
    let weights = res
        .iter()
        .map(|v| if v.abs() <= cutoff { 1.0 } else { 0.0 })
        .collect();
    RegressionFit::assemble(d, MethodId::Lms, beta, scale, weights, fits.len(), true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn objective_examples() {
        let d = Dataset::from_rows(&[[0.0], [1.0], [2.0], [3.0], [4.0]], vec![1.0, 3.0, 5.0, 7.0, 9.0], true)
            .unwrap();
        let b = Coefficients::new(vec![1.0, 2.0]).unwrap();
        assert_eq!(lms_objective(&d, &b).unwrap(), 0.0);

        // n = 5, p* = 2 -> h = 4
        let d = Dataset::from_rows(&[[0.0], [1.0], [2.0], [3.0], [4.0]], vec![0.5, -2.0, 3.0, 0.1, 7.0], true)
            .unwrap();
        let b = Coefficients::new(vec![0.0, 0.5]).unwrap();
        let mut sq: Vec<f64> = crate::data::residuals(&d, &b).unwrap().iter().map(|v| v * v).collect();
        sq.sort_by(f64::total_cmp);
        assert_eq!(lms_coverage(5, 2), 4);
        assert_eq!(lms_objective(&d, &b).unwrap(), sq[3]);

        let k = 3.0;
        let dk = d.with_response(d.y().iter().map(|v| v * k).collect()).unwrap();
        let bk = Coefficients::new(vec![0.0, 0.5 * k]).unwrap();
        let o = lms_objective(&d, &b).unwrap();
        assert!((lms_objective(&dk, &bk).unwrap() - k * k * o).abs() < 1e-12 * o.max(1.0));
    }

    #[test]
    fn majority_line_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..20 {
            let x = i as f64 * 0.3;
            rows.push([x]);
            y.push(-1.0 + 0.5 * x);
        }
        for _ in 0..8 {
            rows.push([rng.random_range(-5.0..5.0)]);
            y.push(rng.random_range(-50.0..50.0));
        }
        let d = Dataset::new(Matrix::from_rows(&rows).unwrap(), y, true).unwrap();
        let fit = fit_lms(&d, &SubsetSearchConfig::default()).unwrap();
        assert!((fit.beta()[0] + 1.0).abs() < 1e-6 && (fit.beta()[1] - 0.5).abs() < 1e-6);
        assert!(fit.exact_fit);
    }
}
