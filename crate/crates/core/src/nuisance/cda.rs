//! Covariate-density-adapted kernel regression.
//!
//! `η̂(q) = Σ_i K((X_i − q)/h) R_i / (n h^d f(X_i))` with a known covariate
//! density `f`. This is not a weighted average: the weights need not sum to
//! one and are signed for higher-order kernels.

use std::sync::Arc;

use crate::data::Covariates;
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::nuisance::neighbors::NeighborIndex;

/// Known covariate density.
pub type DensityFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Uniform density on the unit cube.
pub fn uniform_density() -> DensityFn {
    Arc::new(|_: &[f64]| 1.0)
}

#[derive(Clone)]
pub struct CdaRegressor {
    index: NeighborIndex,
    /// `R_i / f(X_i)` in sorted-slot order.
    scaled: Vec<f64>,
    kernel: KernelSpec,
    bandwidth: f64,
    norm: f64,
}

impl std::fmt::Debug for CdaRegressor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CdaRegressor")
            .field("n", &self.scaled.len())
            .field("bandwidth", &self.bandwidth)
            .field("kernel", &self.kernel.label())
            .finish()
    }
}

pub fn fit_cda_kernel(
    x: &Covariates,
    response: &[f64],
    bandwidth: f64,
    kernel: KernelSpec,
    density: &DensityFn,
) -> Result<CdaRegressor> {
    let n = x.len();
    if response.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: response.len() });
    }
    if kernel.dimension != x.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), got: kernel.dimension });
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let index = NeighborIndex::new(x);
    let mut scaled = Vec::with_capacity(n);
    for slot in 0..n {
        let i = index.original_index(slot);
        let f = density(x.row(i));
        if !(f > 0.0 && f.is_finite()) {
            return Err(Error::Domain(format!("density is {f} at training point {i}")));
        }
        scaled.push(response[i] / f);
    }
    let norm = 1.0 / (n as f64 * bandwidth.powi(x.dim() as i32));
    Ok(CdaRegressor { index, scaled, kernel, bandwidth, norm })
}

impl CdaRegressor {
    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn n_train(&self) -> usize {
        self.scaled.len()
    }

    pub fn predict(&self, q: &[f64]) -> f64 {
        let h = self.bandwidth;
        let d = q.len();
        let mut u = vec![0.0; d];
        let mut acc = 0.0;
        for slot in self.index.slab(q[0], h) {
            let x = self.index.point(slot);
            let mut inside = true;
            for j in 0..d {
                u[j] = (x[j] - q[j]) / h;
                inside &= u[j].abs() <= 1.0;
            }
            if inside {
                acc += self.kernel.eval_unchecked(&u) * self.scaled[slot];
            }
        }
        acc * self.norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{box_indicator, build_higher_order_kernel};
    use crate::rng;
    use rand::Rng;

    #[test]
    fn box_kernel_direct_sum() {
        let mut r = rng::seeded(11);
        let x: Vec<f64> = (0..50).map(|_| r.random()).collect();
        let y: Vec<f64> = (0..50).map(|_| r.random::<f64>() - 0.3).collect();
        let cx = Covariates::from_column(x.clone());
        let f = fit_cda_kernel(&cx, &y, 1.0, box_indicator(1), &uniform_density()).unwrap();
        // every |x_i − 0.5| ≤ 1, so the formula is Σ 0.5 y_i / n
        let oracle: f64 = x.iter().zip(&y).filter(|(xi, _)| (*xi - 0.5f64).abs() <= 1.0).map(|(_, yi)| 0.5 * yi).sum::<f64>() / 50.0;
        assert!((f.predict(&[0.5]) - oracle).abs() < 1e-14);
        let g = fit_cda_kernel(&cx, &y, 0.2, box_indicator(1), &uniform_density()).unwrap();
        let oracle: f64 = x.iter().zip(&y).filter(|(xi, _)| (*xi - 0.3f64).abs() <= 0.2).map(|(_, yi)| 0.5 * yi).sum::<f64>() / (50.0 * 0.2);
        assert!((g.predict(&[0.3]) - oracle).abs() < 1e-13);
    }

    #[test]
    fn zero_response_gives_zero() {
        let cx = Covariates::from_column(vec![0.2, 0.4, 0.6]);
        let k = build_higher_order_kernel(4, 1).unwrap();
        let f = fit_cda_kernel(&cx, &[0.0; 3], 0.5, k, &uniform_density()).unwrap();
        assert_eq!(f.predict(&[0.4]), 0.0);
    }

    #[test]
    fn density_is_divided_out() {
        let cx = Covariates::from_column(vec![0.5]);
        let dens: DensityFn = Arc::new(|x: &[f64]| 2.0 * x[0] + 0.5);
        let f = fit_cda_kernel(&cx, &[3.0], 1.0, box_indicator(1), &dens).unwrap();
        assert!((f.predict(&[0.5]) - 0.5 * 3.0 / 1.5).abs() < 1e-15);
        let bad: DensityFn = Arc::new(|_: &[f64]| 0.0);
        assert!(matches!(fit_cda_kernel(&cx, &[3.0], 1.0, box_indicator(1), &bad), Err(Error::Domain(_))));
        assert!(fit_cda_kernel(&cx, &[3.0], 0.0, box_indicator(1), &dens).is_err());
    }
}
