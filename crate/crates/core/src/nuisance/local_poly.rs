//! Local polynomial regression.
//!
//! The basis spans every monomial in `(X_i − q)/h` of total degree at most
//! `⌊d/2⌋ + 1` (the smallest integer strictly above `d/2`), in graded
//! lexicographic order. The prediction is the intercept of the kernel
//! weighted least-squares fit at `q`; when the local Gram matrix is
//! numerically singular the prediction is `0`.

use nalgebra::{DMatrix, DVector};

use crate::data::Covariates;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::nuisance::bandwidth::Tuning;
use crate::nuisance::neighbors::NeighborIndex;

/// Ratio `σ_min / σ_max` below which the Gram matrix counts as singular.
pub const SINGULAR_TOLERANCE: f64 = 1e-10;

/// Degree of the local basis in dimension `d`.
pub fn basis_degree(d: usize) -> usize {
    d / 2 + 1
}

/// Exponent vectors of all monomials of total degree `<= degree`, graded
/// lexicographically (`1, u1, u2, u1², u1u2, u2², ...`).
pub fn monomial_exponents(d: usize, degree: usize) -> Vec<Vec<usize>> {
    fn rec(d: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == d - 1 {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for e in (0..=left).rev() {
            cur.push(e);
            rec(d, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for deg in 0..=degree {
        rec(d, deg, &mut Vec::with_capacity(d), &mut out);
    }
    out
}

/// Per-query bandwidth mode.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Window {
    Fixed(f64),
    NearestNeighbor(usize),
}

#[derive(Debug, Clone)]
pub struct LocalPolyRegressor {
    index: NeighborIndex,
    /// Responses in sorted-slot order.
    response: Vec<f64>,
    kernel: KernelSpec,
    window: Window,
    exponents: Vec<Vec<usize>>,
}

/// Fit with a resolved tuning parameter (a bandwidth or an adaptive
/// neighbour count).
pub fn fit_local_poly(
    x: &Covariates,
    response: &[f64],
    tuning: Tuning,
    kernel: KernelSpec,
) -> Result<LocalPolyRegressor> {
    let n = x.len();
    if response.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: response.len() });
    }
    if kernel.dimension != x.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), got: kernel.dimension });
    }
    let window = match tuning {
        Tuning::Bandwidth(h) if h > 0.0 && h.is_finite() => Window::Fixed(h),
        Tuning::Bandwidth(h) => return Err(Error::invalid(format!("bandwidth must be positive, got {h}"))),
        Tuning::AdaptiveNeighbors(k) if k >= 1 && k <= n => Window::NearestNeighbor(k),
        Tuning::AdaptiveNeighbors(k) => {
            return Err(Error::invalid(format!("adaptive bandwidth needs {k} training points, have {n}")))
        }
        Tuning::Neighbors(_) => {
            return Err(Error::invalid("local polynomial regression needs a bandwidth rule"))
        }
    };
    let index = NeighborIndex::new(x);
    let response = index.permutation().iter().map(|&i| response[i]).collect();
    let exponents = monomial_exponents(x.dim(), basis_degree(x.dim()));
    Ok(LocalPolyRegressor { index, response, kernel, window, exponents })
}

/// Local Gram matrix at a query point.
#[derive(Debug, Clone)]
pub struct LocalGram {
    /// `(1/(n h^d)) Σ b K bᵀ`.
    pub matrix: DMatrix<f64>,
    pub bandwidth: f64,
    pub singular: bool,
}

impl LocalPolyRegressor {
    pub fn n_train(&self) -> usize {
        self.response.len()
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn basis_len(&self) -> usize {
        self.exponents.len()
    }

    pub fn fixed_bandwidth(&self) -> Option<f64> {
        match self.window {
            Window::Fixed(h) => Some(h),
            Window::NearestNeighbor(_) => None,
        }
    }

    pub fn adaptive_k(&self) -> Option<usize> {
        match self.window {
            Window::NearestNeighbor(k) => Some(k),
            Window::Fixed(_) => None,
        }
    }

    /// Bandwidth in force at `q`.
    pub fn bandwidth_at(&self, q: &[f64]) -> f64 {
        match self.window {
            Window::Fixed(h) => h,
            Window::NearestNeighbor(k) => self.index.kth_distance(q, k),
        }
    }

    fn basis(&self, u: &[f64], out: &mut [f64]) {
        for (b, e) in out.iter_mut().zip(&self.exponents) {
            *b = u.iter().zip(e).map(|(v, &p)| v.powi(p as i32)).product();
        }
    }

    /// Unnormalised local moments `(Σ K b bᵀ, Σ K b y)`.
    fn local_system(&self, q: &[f64], h: f64) -> (DMatrix<f64>, DVector<f64>) {
        let p = self.exponents.len();
        let d = q.len();
        let mut gram = DMatrix::zeros(p, p);
        let mut rhs = DVector::zeros(p);
        let mut u = vec![0.0; d];
        let mut b = vec![0.0; p];
        if h > 0.0 && h.is_finite() {
            for slot in self.index.slab(q[0], h) {
                let x = self.index.point(slot);
                for j in 0..d {
                    u[j] = (x[j] - q[j]) / h;
                }
                let w = self.kernel.eval_unchecked(&u);
                if w == 0.0 {
                    continue;
                }
                self.basis(&u, &mut b);
                let y = self.response[slot];
                for r in 0..p {
                    let wb = w * b[r];
                    rhs[r] += wb * y;
                    for c in r..p {
                        gram[(r, c)] += wb * b[c];
                    }
                }
            }
        }
        for r in 0..p {
            for c in 0..r {
                gram[(r, c)] = gram[(c, r)];
            }
        }
        (gram, rhs)
    }

    /// Local Gram matrix and its singularity flag at `q`.
    pub fn gram_at(&self, q: &[f64]) -> LocalGram {
        let h = self.bandwidth_at(q);
        let (gram, _) = self.local_system(q, h);
        let singular = is_singular(&gram);
        let scale = 1.0 / (self.n_train() as f64 * h.powi(q.len() as i32));
        LocalGram { matrix: gram * scale, bandwidth: h, singular }
    }

    pub fn predict(&self, q: &[f64]) -> f64 {
        let h = self.bandwidth_at(q);
        if self.exponents.len() == 2 {
            return self.predict_linear_1d(q[0], h);
        }
        let (gram, rhs) = self.local_system(q, h);
        if is_singular(&gram) {
            return 0.0;
        }
        match gram.svd(true, true).solve(&rhs, 0.0) {
            Ok(beta) => beta[0],
            Err(_) => 0.0,
        }
    }

    /// Local linear fit for `d = 1` with a closed-form 2×2 solve.
    fn predict_linear_1d(&self, q: f64, h: f64) -> f64 {
        if !(h > 0.0 && h.is_finite()) {
            return 0.0;
        }
        let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for slot in self.index.slab(q, h) {
            let u = (self.index.point(slot)[0] - q) / h;
            let w = self.kernel.eval_unchecked(&[u]);
            if w == 0.0 {
                continue;
            }
            let y = self.response[slot];
            s0 += w;
            s1 += w * u;
            s2 += w * u * u;
            t0 += w * y;
            t1 += w * u * y;
        }
        // symmetric 2×2: singular values are |eigenvalues|
        let mean = 0.5 * (s0 + s2);
        let rad = (0.25 * (s0 - s2) * (s0 - s2) + s1 * s1).sqrt();
        let (l1, l2) = ((mean + rad).abs(), (mean - rad).abs());
        let (smax, smin) = (l1.max(l2), l1.min(l2));
        if smax == 0.0 || smin < SINGULAR_TOLERANCE * smax {
            return 0.0;
        }
        let det = s0 * s2 - s1 * s1;
        (s2 * t0 - s1 * t1) / det
    }
}

/// Singular-value ratio test.
pub fn is_singular(gram: &DMatrix<f64>) -> bool {
    let sv = gram.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    !(smax > 0.0 && smax.is_finite()) || smin < SINGULAR_TOLERANCE * smax
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{box_indicator, epanechnikov};
    use crate::rng;
    use rand::Rng;

    fn uniform(n: usize, d: usize, seed: u64) -> Covariates {
        let mut r = rng::seeded(seed);
        Covariates::new(d, (0..n * d).map(|_| r.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn basis_layout() {
        assert_eq!(basis_degree(1), 1);
        assert_eq!(basis_degree(2), 2);
        assert_eq!(basis_degree(4), 3);
        let e = monomial_exponents(2, 2);
        assert_eq!(e, vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
        assert_eq!(monomial_exponents(4, 3).len(), 35);
    }

    #[test]
    fn constant_response_reproduced() {
        let x = uniform(200, 2, 1);
        let y = vec![4.25; 200];
        let f = fit_local_poly(&x, &y, Tuning::Bandwidth(0.3), epanechnikov(2)).unwrap();
        assert!((f.predict(&[0.5, 0.4]) - 4.25).abs() < 1e-10);
    }

    // Oracle: weighted least squares solved by explicit normal equations.
    #[test]
    fn linear_response_reproduced_in_one_dimension() {
        let x = uniform(300, 1, 2);
        let y: Vec<f64> = x.rows().map(|r| 3.0 * r[0]).collect();
        let f = fit_local_poly(&x, &y, Tuning::Bandwidth(0.1), epanechnikov(1)).unwrap();
        for q in [0.2, 0.5, 0.77] {
            assert!((f.predict(&[q]) - 3.0 * q).abs() < 1e-8);
        }
        let a = fit_local_poly(&x, &y, Tuning::AdaptiveNeighbors(10), box_indicator(1)).unwrap();
        assert!((a.predict(&[0.31]) - 0.93).abs() < 1e-8);
    }

    #[test]
    fn general_path_agrees_with_closed_form() {
        let x = uniform(150, 1, 3);
        let y: Vec<f64> = x.rows().map(|r| (7.0 * r[0]).sin()).collect();
        let f = fit_local_poly(&x, &y, Tuning::Bandwidth(0.15), epanechnikov(1)).unwrap();
        let q = [0.43];
        let (gram, rhs) = f.local_system(&q, 0.15);
        let beta = gram.lu().solve(&rhs).unwrap();
        assert!((f.predict(&q) - beta[0]).abs() < 1e-10);
    }

    #[test]
    fn empty_window_predicts_zero() {
        let x = Covariates::from_column(vec![0.1, 0.2, 0.9]);
        let f = fit_local_poly(&x, &[1.0, 1.0, 1.0], Tuning::Bandwidth(0.01), epanechnikov(1)).unwrap();
        assert_eq!(f.predict(&[0.5]), 0.0);
        assert!(f.gram_at(&[0.5]).singular);
        let g = fit_local_poly(&uniform(50, 2, 4), &[1.0; 50], Tuning::Bandwidth(1e-4), epanechnikov(2)).unwrap();
        assert_eq!(g.predict(&[0.5, 0.5]), 0.0);
    }

    #[test]
    fn invalid_tuning() {
        let x = Covariates::from_column(vec![0.1, 0.2, 0.9]);
        assert!(fit_local_poly(&x, &[1.0; 3], Tuning::Bandwidth(0.0), epanechnikov(1)).is_err());
        assert!(fit_local_poly(&x, &[1.0; 3], Tuning::AdaptiveNeighbors(10), epanechnikov(1)).is_err());
        assert!(fit_local_poly(&x, &[1.0; 3], Tuning::Bandwidth(0.1), epanechnikov(2)).is_err());
    }
}
