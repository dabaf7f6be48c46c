//! Gauss–Legendre quadrature on `[-1, 1]` and tensor products of it.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Number of nodes used for every kernel integral.
pub const KERNEL_NODES: usize = 64;

#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Rule with `n` nodes; exact for polynomials of degree `2n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "need at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess, then Newton on P_n.
            let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[n - 1 - i] = z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Shared 64-node rule.
    pub fn kernel_rule() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(KERNEL_NODES))
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.integrate_on(f, -1.0, 1.0)
    }

    pub fn integrate_on<F: Fn(f64) -> f64>(&self, f: F, a: f64, b: f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        let s: f64 = self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(mid + half * t))
            .sum();
        half * s
    }

    /// Tensor-product integral of `f` over `[-1, 1]^d`.
    pub fn integrate_cube<F: Fn(&[f64]) -> f64>(&self, d: usize, f: F) -> f64 {
        let n = self.nodes.len();
        let mut idx = vec![0usize; d];
        let mut point = vec![0.0; d];
        let mut total = 0.0;
        loop {
            let mut w = 1.0;
            for (j, &k) in idx.iter().enumerate() {
                point[j] = self.nodes[k];
                w *= self.weights[k];
            }
            total += w * f(&point);
            // odometer increment
            let mut j = 0;
            loop {
                if j == d {
                    return total;
                }
                idx[j] += 1;
                if idx[j] < n {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
        }
    }
}

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
pub fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = if (1.0 - x * x).abs() < 1e-300 {
        // P_n'(±1) = ±n(n+1)/2
        let s = if x > 0.0 || n % 2 == 1 { 1.0 } else { -1.0 };
        s * (n * (n + 1)) as f64 / 2.0
    } else {
        n as f64 * (x * p1 - p0) / (x * x - 1.0)
    };
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 17, 64] {
            let r = GaussLegendre::new(n);
            let s: f64 = r.weights().iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n}: {s}");
        }
    }

    #[test]
    fn two_point_rule_nodes() {
        let r = GaussLegendre::new(2);
        assert!((r.nodes()[1] - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn exact_for_high_degree_polynomials() {
        let r = GaussLegendre::kernel_rule();
        // ∫ x^126 over [-1,1] = 2/127
        let v = r.integrate(|x| x.powi(126));
        assert!((v - 2.0 / 127.0).abs() < 1e-14);
        assert!(r.integrate(|x| x.powi(77)).abs() < 1e-14);
    }

    #[test]
    fn smooth_integrand_and_interval_map() {
        let r = GaussLegendre::kernel_rule();
        let v = r.integrate_on(f64::exp, 0.0, 1.0);
        assert!((v - (std::f64::consts::E - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn cube_integral_of_product() {
        let r = GaussLegendre::new(8);
        let v = r.integrate_cube(3, |u| u[0] * u[0] * u[1] * u[1] * (1.0 + u[2]));
        assert!((v - (2.0 / 3.0) * (2.0 / 3.0) * 2.0).abs() < 1e-13);
    }
}
