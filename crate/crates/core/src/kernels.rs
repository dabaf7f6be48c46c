//! Compactly supported smoothing kernels on `[-1, 1]^d`.
//!
//! Three families are provided:
//!
//! * [`epanechnikov`]: `c_d (1 − ‖u‖²)` on the Euclidean unit ball, order 2,
//!   continuous.
//! * [`build_higher_order_kernel`]: per-coordinate product of the Legendre
//!   reproducing kernel `k(u) = Σ_{m<ℓ} φ_m(0) φ_m(u)` with
//!   `φ_m = √((2m+1)/2) P_m`. Because `∫ k p = p(0)` for every polynomial of
//!   degree `< ℓ`, moments `1..ℓ−1` vanish exactly.
//! * [`box_indicator`]: the uniform kernel `2^{-d}` on the cube.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;

/// Orders above this produce kernels with large `L²` norm.
pub const LARGE_ORDER_WARNING: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum KernelForm {
    Epanechnikov {
        normalizer: f64,
    },
    /// Coefficients of the univariate factor in ascending powers of `u`.
    HigherOrderProduct {
        coefficients: Vec<f64>,
    },
    BoxIndicator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub order: usize,
    pub dimension: usize,
    pub support_radius: f64,
    #[serde(flatten)]
    pub form: KernelForm,
    pub continuous: bool,
    /// Upper bound on `|K|`.
    pub bound: f64,
}

/// Volume of the Euclidean unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    // V_d = V_{d-2} · 2π / d
    let mut v = if d.is_multiple_of(2) { 1.0 } else { 2.0 };
    for k in (d % 2 + 2..=d).step_by(2) {
        v *= 2.0 * PI / k as f64;
    }
    v
}

/// Epanechnikov kernel in dimension `d`.
pub fn epanechnikov(d: usize) -> KernelSpec {
    assert!(d >= 1, "kernel dimension must be at least 1");
    // ∫_{ball} (1 − ‖u‖²) du = 2 V_d / (d + 2)
    let c = (d as f64 + 2.0) / (2.0 * unit_ball_volume(d));
    KernelSpec {
        order: 2,
        dimension: d,
        support_radius: 1.0,
        form: KernelForm::Epanechnikov { normalizer: c },
        continuous: true,
        bound: c,
    }
}

/// Uniform kernel `2^{-d}` on `[-1, 1]^d`.
pub fn box_indicator(d: usize) -> KernelSpec {
    assert!(d >= 1, "kernel dimension must be at least 1");
    KernelSpec {
        order: 2,
        dimension: d,
        support_radius: 1.0,
        form: KernelForm::BoxIndicator,
        continuous: false,
        bound: 0.5f64.powi(d as i32),
    }
}

/// Monomial coefficients of the Legendre polynomial `P_n`.
fn legendre_coefficients(n: usize) -> Vec<f64> {
    let mut p0 = vec![1.0];
    if n == 0 {
        return p0;
    }
    let mut p1 = vec![0.0, 1.0];
    for k in 2..=n {
        let kf = k as f64;
        let mut p2 = vec![0.0; k + 1];
        for (i, c) in p1.iter().enumerate() {
            p2[i + 1] += (2.0 * kf - 1.0) / kf * c;
        }
        for (i, c) in p0.iter().enumerate() {
            p2[i] -= (kf - 1.0) / kf * c;
        }
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// Product Legendre kernel with vanishing moments `1..order−1`.
///
/// Symmetric kernels have all odd moments equal to zero, so an odd `order`
/// cannot have a nonzero moment of that order; it is promoted to the next
/// even order.
pub fn build_higher_order_kernel(order: usize, d: usize) -> Result<KernelSpec> {
    if order < 2 {
        return Err(Error::invalid(format!("kernel order must be at least 2, got {order}")));
    }
    if d == 0 {
        return Err(Error::invalid("kernel dimension must be at least 1"));
    }
    let order = order + order % 2;
    if order > LARGE_ORDER_WARNING {
        log::warn!("kernel order {order} exceeds {LARGE_ORDER_WARNING}; its L2 norm is large");
    }
    let mut coefficients = vec![0.0; order - 1];
    let mut bound1 = 0.0;
    for m in (0..order).step_by(2) {
        let p = legendre_coefficients(m);
        let norm2 = (2.0 * m as f64 + 1.0) / 2.0;
        let p0 = p[0];
        for (i, c) in p.iter().enumerate() {
            coefficients[i] += norm2 * p0 * c;
        }
        // |P_m| ≤ 1 on [-1, 1]
        bound1 += norm2 * p0.abs();
    }
    Ok(KernelSpec {
        order,
        dimension: d,
        support_radius: 1.0,
        form: KernelForm::HigherOrderProduct { coefficients },
        continuous: false,
        bound: bound1.powi(d as i32),
    })
}

#[inline]
fn horner(c: &[f64], u: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * u + a)
}

impl KernelSpec {
    pub fn eval(&self, u: &[f64]) -> Result<f64> {
        if u.len() != self.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, got: u.len() });
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("kernel argument must be finite".into()));
        }
        Ok(self.eval_unchecked(u))
    }

    /// `K(u)` without argument validation.
    #[inline]
    pub fn eval_unchecked(&self, u: &[f64]) -> f64 {
        match &self.form {
            KernelForm::Epanechnikov { normalizer } => {
                let r2: f64 = u.iter().map(|v| v * v).sum();
                if r2 > 1.0 {
                    0.0
                } else {
                    normalizer * (1.0 - r2)
                }
            }
            KernelForm::HigherOrderProduct { coefficients } => {
                let mut p = 1.0;
                for &v in u {
                    if v.abs() > 1.0 {
                        return 0.0;
                    }
                    p *= horner(coefficients, v);
                }
                p
            }
            KernelForm::BoxIndicator => {
                if u.iter().all(|v| v.abs() <= 1.0) {
                    self.bound
                } else {
                    0.0
                }
            }
        }
    }

    /// Integral of `f · K` over the support, by 64-node Gauss–Legendre.
    ///
    /// Product kernels use a tensor rule on the cube; the Epanechnikov
    /// kernel uses iterated rules in sine coordinates over the ball so the
    /// curved boundary does not spoil convergence.
    pub fn integrate_against<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        let rule = GaussLegendre::kernel_rule();
        match &self.form {
            KernelForm::Epanechnikov { .. } => {
                integrate_ball(rule, self.dimension, &|u| f(u) * self.eval_unchecked(u))
            }
            _ => rule.integrate_cube(self.dimension, |u| f(u) * self.eval_unchecked(u)),
        }
    }

    /// `∫ u^α K(u) du` for a multi-index `α`.
    pub fn moment(&self, alpha: &[usize]) -> Result<f64> {
        if alpha.len() != self.dimension {
            return Err(Error::DimensionMismatch { expected: self.dimension, got: alpha.len() });
        }
        match &self.form {
            KernelForm::Epanechnikov { .. } => Ok(self.integrate_against(|u| {
                u.iter().zip(alpha).map(|(v, &a)| v.powi(a as i32)).product()
            })),
            _ => {
                // product form: factorise to exact one-dimensional rules
                let k1 = self.marginal_factor();
                let rule = GaussLegendre::kernel_rule();
                Ok(alpha
                    .iter()
                    .map(|&a| rule.integrate(|v| v.powi(a as i32) * k1(v)))
                    .product())
            }
        }
    }

    /// Moment of order `j` along a single coordinate.
    pub fn coordinate_moment(&self, j: usize) -> f64 {
        let mut alpha = vec![0; self.dimension];
        alpha[0] = j;
        self.moment(&alpha).expect("alpha matches dimension")
    }

    fn marginal_factor(&self) -> Box<dyn Fn(f64) -> f64 + '_> {
        match &self.form {
            KernelForm::HigherOrderProduct { coefficients } => Box::new(move |v| horner(coefficients, v)),
            KernelForm::BoxIndicator => Box::new(|_| 0.5),
            KernelForm::Epanechnikov { .. } => unreachable!("not a product kernel"),
        }
    }

    /// `∫ K(u)² du`.
    pub fn l2_norm_sq(&self) -> f64 {
        let d = self.dimension;
        match &self.form {
            KernelForm::Epanechnikov { normalizer } => {
                let df = d as f64;
                normalizer * normalizer * unit_ball_volume(d) * 8.0 / ((df + 2.0) * (df + 4.0))
            }
            _ => {
                let k1 = self.marginal_factor();
                GaussLegendre::kernel_rule().integrate(|v| k1(v) * k1(v)).powi(d as i32)
            }
        }
    }

    /// `∫ ‖u‖^p |K(u)| du`, finite for every kernel built here.
    pub fn abs_moment(&self, p: f64) -> f64 {
        let rule = GaussLegendre::kernel_rule();
        let f = |u: &[f64]| u.iter().map(|v| v * v).sum::<f64>().powf(p / 2.0) * self.eval_unchecked(u).abs();
        match &self.form {
            KernelForm::Epanechnikov { .. } => integrate_ball(rule, self.dimension, &f),
            _ => rule.integrate_cube(self.dimension, f),
        }
    }

    pub fn label(&self) -> String {
        match &self.form {
            KernelForm::Epanechnikov { .. } => "epanechnikov".into(),
            KernelForm::HigherOrderProduct { .. } => format!("legendre{}", self.order),
            KernelForm::BoxIndicator => "box".into(),
        }
    }
}

/// `∫_{‖u‖ ≤ 1} f(u) du` in iterated sine coordinates.
fn integrate_ball(rule: &GaussLegendre, d: usize, f: &dyn Fn(&[f64]) -> f64) -> f64 {
    fn rec(rule: &GaussLegendre, u: &mut Vec<f64>, d: usize, radius: f64, f: &dyn Fn(&[f64]) -> f64) -> f64 {
        if u.len() == d {
            return f(u);
        }
        let half = PI / 2.0;
        let mut total = 0.0;
        for (&t, &w) in rule.nodes().iter().zip(rule.weights()) {
            let theta = half * t;
            let (s, c) = theta.sin_cos();
            u.push(radius * s);
            total += w * half * radius * c * rec(rule, u, d, radius * c, f);
            u.pop();
        }
        total
    }
    let mut u = Vec::with_capacity(d);
    rec(rule, &mut u, d, 1.0, f)
}

/// Kernel family named in configuration; resolved against a dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelChoice {
    #[default]
    Epanechnikov,
    Box,
    HigherOrder {
        order: usize,
    },
}

impl KernelChoice {
    pub fn build(&self, d: usize) -> Result<KernelSpec> {
        if d == 0 {
            return Err(Error::invalid("kernel dimension must be at least 1"));
        }
        match self {
            KernelChoice::Epanechnikov => Ok(epanechnikov(d)),
            KernelChoice::Box => Ok(box_indicator(d)),
            KernelChoice::HigherOrder { order } => build_higher_order_kernel(*order, d),
        }
    }
}
