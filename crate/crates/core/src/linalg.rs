//! Dense least squares and order statistics shared by every estimator.
//!
//! Least squares goes through a Householder QR factorization of the
//! (row-scaled) design. Rank deficiency is reported when a diagonal entry of
//! `R` falls below `1e-12 * max |R_kk|`.

use serde::{Deserialize, Serialize};

use crate::data::{Coefficients, Dataset};
use crate::error::{Error, Result};

const RANK_RTOL: f64 = 1e-12;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows. An empty slice gives a 0x0 matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Copies the listed rows, in order, into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: idx.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Compact Householder QR of an `n x p` matrix with `n >= p`.
#[derive(Debug, Clone)]
pub struct Qr {
    qr: Matrix,
    rdiag: Vec<f64>,
}

impl Qr {
    pub fn new(a: &Matrix) -> Result<Self> {
        let (n, p) = (a.rows(), a.cols());
        if n < p {
            return Err(Error::Singular { column: n });
        }
        let mut qr = a.clone();
        let mut rdiag = vec![0.0; p];
        for k in 0..p {
            let mut nrm = 0.0_f64;
            for i in k..n {
                nrm = nrm.hypot(qr.get(i, k));
            }
            if nrm != 0.0 {
                if qr.get(k, k) < 0.0 {
                    nrm = -nrm;
                }
                for i in k..n {
                    let v = qr.get(i, k) / nrm;
                    qr.set(i, k, v);
                }
                qr.set(k, k, qr.get(k, k) + 1.0);
                for j in k + 1..p {
                    let mut s = 0.0;
                    for i in k..n {
                        s += qr.get(i, k) * qr.get(i, j);
                    }
                    s = -s / qr.get(k, k);
                    for i in k..n {
                        let v = qr.get(i, j) + s * qr.get(i, k);
                        qr.set(i, j, v);
                    }
                }
            }
            rdiag[k] = -nrm;
        }
        let max = rdiag.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
        if let Some(column) = rdiag
            .iter()
            .position(|r| r.abs() <= RANK_RTOL * max || max == 0.0)
        {
            return Err(Error::Singular { column });
        }
        Ok(Self { qr, rdiag })
    }

    /// Overwrites `b` with `Q^T b`.
    fn apply_qt(&self, b: &mut [f64]) {
        let (n, p) = (self.qr.rows(), self.qr.cols());
        for k in 0..p {
            let vkk = self.qr.get(k, k);
            if vkk == 0.0 {
                continue;
            }
            let mut s = 0.0;
            for i in k..n {
                s += self.qr.get(i, k) * b[i];
            }
            s = -s / vkk;
            for i in k..n {
                b[i] += s * self.qr.get(i, k);
            }
        }
    }

    /// Least-squares solution of `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let p = self.qr.cols();
        let mut qtb = b.to_vec();
        self.apply_qt(&mut qtb);
        let mut x = vec![0.0; p];
        for k in (0..p).rev() {
            let mut s = qtb[k];
            for j in k + 1..p {
                s -= self.qr.get(k, j) * x[j];
            }
            x[k] = s / self.rdiag[k];
        }
        x
    }

    /// Leverages `h_i` together with `1 - h_i`, each computed from its own
    /// block of `Q^T e_i` so that `1 - h_i` keeps full relative accuracy when
    /// `h_i` is close to one.
    pub fn leverages(&self) -> (Vec<f64>, Vec<f64>) {
        let (n, p) = (self.qr.rows(), self.qr.cols());
        let mut h = Vec::with_capacity(n);
        let mut comp = Vec::with_capacity(n);
        let mut e = vec![0.0; n];
        for i in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[i] = 1.0;
            self.apply_qt(&mut e);
            h.push(e[..p].iter().map(|v| v * v).sum());
            comp.push(e[p..].iter().map(|v| v * v).sum());
        }
        (h, comp)
    }
}

/// Least-squares solve of `a x = b` via QR.
pub fn lstsq(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if a.rows() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.rows(),
            found: b.len(),
        });
    }
    Ok(Qr::new(a)?.solve(b))
}

/// Solves the square system `a x = b` (row-major `p x p`) by Gaussian
/// elimination with partial pivoting. `None` when a pivot falls below
/// `1e-12` times the largest entry of `a`.
pub(crate) fn solve_square(a: &mut [f64], b: &mut [f64]) -> Option<()> {
    let p = b.len();
    debug_assert_eq!(a.len(), p * p);
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return None;
    }
    for k in 0..p {
        let piv = (k..p)
            .max_by(|&i, &j| a[i * p + k].abs().total_cmp(&a[j * p + k].abs()))
            .expect("nonempty range");
        if a[piv * p + k].abs() <= RANK_RTOL * scale {
            return None;
        }
        if piv != k {
            for j in 0..p {
                a.swap(k * p + j, piv * p + j);
            }
            b.swap(k, piv);
        }
        let d = a[k * p + k];
        for i in k + 1..p {
            let f = a[i * p + k] / d;
            if f != 0.0 {
                for j in k..p {
                    a[i * p + j] -= f * a[k * p + j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    for k in (0..p).rev() {
        let mut s = b[k];
        for j in k + 1..p {
            s -= a[k * p + j] * b[j];
        }
        b[k] = s / a[k * p + k];
    }
    Some(())
}

/// Least squares on the rows `idx` through the normal equations. Cheaper
/// than QR for the many small refits of a subset search, at the price of
/// squaring the condition number.
pub(crate) fn subset_normal_lstsq(design: &Matrix, y: &[f64], idx: &[usize]) -> Option<Vec<f64>> {
    let p = design.cols();
    let mut xtx = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    for &i in idx {
        let x = design.row(i);
        for a in 0..p {
            xty[a] += x[a] * y[i];
            for b in a..p {
                xtx[a * p + b] += x[a] * x[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            xtx[a * p + b] = xtx[b * p + a];
        }
    }
    solve_square(&mut xtx, &mut xty)?;
    Some(xty)
}

/// Nonnegative observation weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some(bad) = w.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "weight {bad} is negative or not finite"
            )));
        }
        Ok(Self(w))
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Weighted least squares on the dataset's design (intercept applied).
pub fn wls_solve(d: &Dataset, w: &WeightVector) -> Result<Coefficients> {
    Coefficients::new(wls_raw(d.design(), d.y(), w.as_slice())?)
}

/// Weighted least squares on an explicit design: scales each row by `sqrt(w_i)`.
pub(crate) fn wls_raw(design: &Matrix, y: &[f64], w: &[f64]) -> Result<Vec<f64>> {
    let n = design.rows();
    if w.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: w.len(),
        });
    }
    let mut a = design.clone();
    let mut b = y.to_vec();
    for i in 0..n {
        let s = w[i].sqrt();
        a.row_mut(i).iter_mut().for_each(|v| *v *= s);
        b[i] *= s;
    }
    lstsq(&a, &b)
}

/// Diagonal of the hat matrix of the dataset's design.
pub fn hat_diagonals(d: &Dataset) -> Result<Vec<f64>> {
    Ok(Qr::new(d.design())?.leverages().0)
}

/// `1 - h_i` for every observation, accurate even for extreme leverage.
pub fn hat_complements(d: &Dataset) -> Result<Vec<f64>> {
    Ok(Qr::new(d.design())?.leverages().1)
}

/// The `k`-th smallest value (1-based). Expected linear time.
pub fn kth_smallest(values: &[f64], k: usize) -> Result<f64> {
    let mut buf = values.to_vec();
    kth_smallest_in_place(&mut buf, k)
}

pub(crate) fn kth_smallest_in_place(buf: &mut [f64], k: usize) -> Result<f64> {
    if k == 0 || k > buf.len() {
        return Err(Error::IndexOutOfRange { k, len: buf.len() });
    }
    let (_, v, _) = buf.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*v)
}

/// Median with the midpoint convention for even lengths.
pub fn median(values: &[f64]) -> Result<f64> {
    let mut buf = values.to_vec();
    median_in_place(&mut buf)
}

pub(crate) fn median_in_place(buf: &mut [f64]) -> Result<f64> {
    let n = buf.len();
    if n == 0 {
        return Err(Error::Empty);
    }
    let (lo, mid, _) = buf.select_nth_unstable_by(n / 2, f64::total_cmp);
    let mid = *mid;
    if n % 2 == 1 {
        Ok(mid)
    } else {
        let below = lo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(0.5 * (below + mid))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Gaussian elimination with partial pivoting on the normal equations.
    fn normal_equation_oracle(x: &Matrix, y: &[f64], w: &[f64]) -> Vec<f64> {
        let p = x.cols();
        let mut a = vec![vec![0.0; p + 1]; p];
        for i in 0..x.rows() {
            for r in 0..p {
                for c in 0..p {
                    a[r][c] += w[i] * x.get(i, r) * x.get(i, c);
                }
                a[r][p] += w[i] * x.get(i, r) * y[i];
            }
        }
        for col in 0..p {
            let piv = (col..p)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, piv);
            for r in col + 1..p {
                let f = a[r][col] / a[col][col];
                for c in col..=p {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
        let mut b = vec![0.0; p];
        for r in (0..p).rev() {
            let s: f64 = (r + 1..p).map(|c| a[r][c] * b[c]).sum();
            b[r] = (a[r][p] - s) / a[r][r];
        }
        b
    }

    fn random_dataset(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Dataset {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let y = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        Dataset::new(Matrix::from_rows(&rows).unwrap(), y, true).unwrap()
    }

    #[test]
    fn two_point_line() {
        let d = Dataset::new(Matrix::from_rows(&[[0.0], [1.0]]).unwrap(), vec![0.0, 1.0], true);
        // two points with intercept + slope violate n >= p* + 1
        assert!(d.is_err());
        let x = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0]]).unwrap();
        let b = wls_raw(&x, &[0.0, 1.0], &[1.0, 1.0]).unwrap();
        assert!((b[0]).abs() < 1e-14 && (b[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_weights_interpolate() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [3.0]]).unwrap();
        let d = Dataset::new(x, vec![5.0, 1.0, 9.0, -4.0], true).unwrap();
        let w = WeightVector::new(vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let b = wls_solve(&d, &w).unwrap();
        // line through (1, 1) and (3, -4)
        assert!((b.as_slice()[1] + 2.5).abs() < 1e-12);
        assert!((b.as_slice()[0] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn wls_matches_normal_equations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let d = random_dataset(&mut rng, 8, 3);
            let w: Vec<f64> = (0..8).map(|_| rng.random_range(0.1..2.0)).collect();
            let got = wls_solve(&d, &WeightVector::new(w.clone()).unwrap()).unwrap();
            let want = normal_equation_oracle(d.design(), d.y(), &w);
            for (g, o) in got.as_slice().iter().zip(&want) {
                assert!((g - o).abs() < 1e-8, "{g} vs {o}");
            }
            let ones = wls_solve(&d, &WeightVector::ones(8)).unwrap();
            let ols = normal_equation_oracle(d.design(), d.y(), &[1.0; 8]);
            for (g, o) in ones.as_slice().iter().zip(&ols) {
                assert!((g - o).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn rank_deficiency_names_column() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [4.0, 8.0]]).unwrap();
        let d = Dataset::new(x, vec![1.0, 2.0, 3.0, 5.0], true).unwrap();
        match wls_solve(&d, &WeightVector::ones(4)) {
            Err(Error::Singular { column }) => assert_eq!(column, 2),
            other => panic!("expected singular error, got {other:?}"),
        }
    }

    #[test]
    fn hat_saturated_and_symmetric() {
        // two points, intercept + slope: a Dataset would be too small, so go through Qr
        let a = Matrix::from_rows(&[[1.0, 0.0], [1.0, 1.0]]).unwrap();
        let (h, c) = Qr::new(&a).unwrap().leverages();
        assert!((h[0] - 1.0).abs() < 1e-12 && (h[1] - 1.0).abs() < 1e-12);
        assert!(c[0].abs() < 1e-12);

        let d = Dataset::new(Matrix::zeros(5, 0), vec![1.0, 2.0, 3.0, 4.0, 5.0], true).unwrap();
        for h in hat_diagonals(&d).unwrap() {
            assert!((h - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn hat_matches_projection_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = random_dataset(&mut rng, 10, 2);
        let h = hat_diagonals(&d).unwrap();
        let comp = hat_complements(&d).unwrap();
        // explicit X (X'X)^{-1} X' via solving X'X z = x_i
        let x = d.design();
        let p = x.cols();
        let mut xtx = Matrix::zeros(p, p);
        for i in 0..x.rows() {
            for r in 0..p {
                for c in 0..p {
                    xtx.set(r, c, xtx.get(r, c) + x.get(i, r) * x.get(i, c));
                }
            }
        }
        let mut trace = 0.0;
        for i in 0..x.rows() {
            let z = lstsq(&xtx, x.row(i)).unwrap();
            let hi = dot(x.row(i), &z);
            assert!((hi - h[i]).abs() < 1e-10);
            assert!((1.0 - hi - comp[i]).abs() < 1e-10);
            assert!(h[i] > 0.0 && h[i] <= 1.0 + 1e-12);
            trace += h[i];
        }
        assert!((trace - 3.0).abs() < 1e-8);
    }

    #[test]
    fn order_statistics() {
        assert_eq!(kth_smallest(&[3.0, 1.0, 2.0], 2).unwrap(), 2.0);
        assert_eq!(kth_smallest(&[5.0], 1).unwrap(), 5.0);
        assert!(matches!(
            kth_smallest(&[1.0], 2),
            Err(Error::IndexOutOfRange { k: 2, len: 1 })
        ));
        assert!(kth_smallest(&[1.0], 0).is_err());
        assert_eq!(median(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
        assert_eq!(median(&[1.0, 2.0, 3.0, 4.0]).unwrap(), 2.5);
        assert!(matches!(median(&[]), Err(Error::Empty)));

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        for k in [1, 250, 999] {
            assert_eq!(kth_smallest(&v, k).unwrap(), sorted[k - 1]);
        }
        let w: Vec<f64> = (0..101).map(|_| rng.random::<f64>()).collect();
        let mut ws = w.clone();
        ws.sort_by(f64::total_cmp);
        assert_eq!(median(&w).unwrap(), ws[50]);
    }
}
