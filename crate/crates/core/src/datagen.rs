//! Synthetic data-generating processes with a known ECC.
//!
//! Both built-in designs set `A = Y = g(X) + ε` with `ε ~ N(0, σ²)` and
//! `X` uniform on the unit cube, so the target `E{cov(A, Y | X)}` equals the
//! noise variance `σ²` exactly.
//!
//! * Doppler: `g(x) = √(x(1−x)) sin(2.1π / (x + 0.05))`, `d = 1`.
//! * Hölder: a sum of sign-randomised `C^∞` bumps on an `m`-cell grid per
//!   coordinate, each scaled by `amplitude · m^{-s}` with
//!   `m = ⌈n_ref^{1/(2s+1)}⌉`. For `d > 1` the function is the sum of `d`
//!   independent univariate such functions.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{Covariates, Dataset, DatasetMetadata, HolderMetadata};
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::rng::{self, RNG_NAME};

/// Deterministic real function on `[0, 1]^d`.
pub type TruthFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// The Doppler function; errors outside `[0, 1]`.
pub fn doppler(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("doppler is defined on [0, 1], got {x}")));
    }
    Ok(doppler_unchecked(x))
}

#[inline]
pub(crate) fn doppler_unchecked(x: f64) -> f64 {
    (x * (1.0 - x)).sqrt() * (2.1 * PI / (x + 0.05)).sin()
}

fn check_size(n: usize, noise_variance: f64) -> Result<()> {
    if n < 3 {
        return Err(Error::invalid(format!("need n >= 3 to form three folds, got {n}")));
    }
    if !(noise_variance > 0.0 && noise_variance.is_finite()) {
        return Err(Error::invalid(format!("noise_variance must be positive, got {noise_variance}")));
    }
    Ok(())
}

/// Draw `X ~ U[0,1]^d` and `A = Y = g(X) + ε`.
fn generate_equal_response<F: Fn(&[f64]) -> f64>(
    g: F,
    d: usize,
    n: usize,
    noise_variance: f64,
    seed: u64,
) -> Result<Dataset> {
    let mut xr = rng::stream(seed, &[0]);
    let mut er = rng::stream(seed, &[1]);
    let x: Vec<f64> = (0..n * d).map(|_| xr.random::<f64>()).collect();
    let noise = Normal::new(0.0, noise_variance.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    let x = Covariates::new(d, x)?;
    let y: Vec<f64> = x.rows().map(|row| g(row) + noise.sample(&mut er)).collect();
    Dataset::new(x, y.clone(), y)
}

/// Doppler design with uniform `X`.
pub fn gen_doppler_dataset(n: usize, noise_variance: f64, seed: u64) -> Result<Dataset> {
    check_size(n, noise_variance)?;
    generate_equal_response(|x| doppler_unchecked(x[0]), 1, n, noise_variance, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderFunctionSpec {
    pub s: f64,
    pub d: usize,
    pub n_ref: usize,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_amplitude() -> f64 {
    1.0
}

impl HolderFunctionSpec {
    pub fn new(s: f64, d: usize, n_ref: usize) -> Self {
        Self { s, d, n_ref, amplitude: 1.0, seed: 0 }
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(Error::invalid(format!("smoothness s must be positive, got {}", self.s)));
        }
        if self.d == 0 {
            return Err(Error::invalid("dimension d must be at least 1"));
        }
        if self.n_ref == 0 {
            return Err(Error::invalid("n_ref must be at least 1"));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::invalid("amplitude must be nonnegative"));
        }
        Ok(())
    }

    /// Bump count per coordinate.
    pub fn bumps(&self) -> usize {
        let m = (self.n_ref as f64).powf(1.0 / (2.0 * self.s + 1.0)).ceil();
        (m as usize).max(1)
    }
}

/// Realised Hölder-smooth function with its attached Hölder constant.
#[derive(Debug, Clone)]
pub struct HolderFunction {
    spec: HolderFunctionSpec,
    m: usize,
    scale: f64,
    signs: Vec<Vec<f64>>,
    holder_constant: f64,
}

/// Integer part used in the Hölder condition: largest integer strictly below `s`.
pub fn holder_floor(s: f64) -> usize {
    let f = s.floor();
    if f == s {
        (f as usize).saturating_sub(1)
    } else {
        f as usize
    }
}

pub fn build_holder_function(spec: HolderFunctionSpec) -> Result<HolderFunction> {
    spec.validate()?;
    let m = spec.bumps();
    let scale = spec.amplitude * (m as f64).powf(-spec.s);
    let signs = (0..spec.d)
        .map(|j| {
            let mut r = rng::stream(spec.seed, &[rng::label("holder-signs"), j as u64]);
            (0..m).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect()
        })
        .collect();

    let r = holder_floor(spec.s);
    let t = spec.s - r as f64;
    let mr = bump_derivative_sup(r);
    let mr1 = bump_derivative_sup(r + 1);
    let mut l = spec.amplitude
        * 2f64.powf(spec.s)
        * 2f64.powf(1.0 - t)
        * mr.powf(1.0 - t)
        * mr1.powf(t);
    if r == 0 {
        l *= (spec.d as f64).powf(1.0 - t / 2.0);
    }
    Ok(HolderFunction { spec, m, scale, signs, holder_constant: l })
}

impl HolderFunction {
    pub fn spec(&self) -> &HolderFunctionSpec {
        &self.spec
    }

    pub fn bumps(&self) -> usize {
        self.m
    }

    /// Constant `L` in `|D^r g(x) − D^r g(x')| ≤ L‖x − x'‖^{s−r}`, `r = ⌊s⌋`.
    pub fn holder_constant(&self) -> f64 {
        self.holder_constant
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (0..self.spec.d).map(|j| self.component_derivative(j, x[j], 0)).sum()
    }

    /// `r`-th derivative of the `j`-th univariate component at `t`.
    pub fn component_derivative(&self, j: usize, t: f64, r: usize) -> f64 {
        let m = self.m as f64;
        let cell = ((t * m).floor().max(0.0) as usize).min(self.m - 1);
        let center = (cell as f64 + 0.5) / m;
        let u = 2.0 * m * (t - center);
        if self.scale == 0.0 {
            return 0.0;
        }
        self.scale * self.signs[j][cell] * (2.0 * m).powi(r as i32) * bump_derivative(r, u)
    }

    /// `∫_0^1 g_j(t) dt` for component `j`.
    pub fn component_integral(&self, j: usize) -> f64 {
        let (i1, _) = bump_integrals();
        let total: f64 = self.signs[j].iter().sum();
        self.scale * total * i1 / (2.0 * self.m as f64)
    }

    /// `∫_{[0,1]^d} g(x)² dx`.
    pub fn integral_sq(&self) -> f64 {
        let (_, i2) = bump_integrals();
        let d = self.spec.d;
        // each component: m cells × scale² · ∫ψ̃² / (2m)
        let own = self.scale * self.scale * i2 / 2.0;
        let means: Vec<f64> = (0..d).map(|j| self.component_integral(j)).collect();
        let total: f64 = means.iter().sum();
        let cross = total * total - means.iter().map(|m| m * m).sum::<f64>();
        d as f64 * own + cross
    }

    pub fn as_truth(&self) -> TruthFn {
        let f = self.clone();
        Arc::new(move |x: &[f64]| f.eval(x))
    }
}

/// Holder design `A = Y = g(X) + ε`, `X ~ U[0,1]^d`.
pub fn gen_holder_dataset(
    spec: HolderFunctionSpec,
    n: usize,
    noise_variance: f64,
    seed: u64,
) -> Result<Dataset> {
    check_size(n, noise_variance)?;
    let g = build_holder_function(spec)?;
    generate_equal_response(|x| g.eval(x), spec.d, n, noise_variance, seed)
}

// Bump profile e·exp(−1/(1−u²)) on (−1, 1), peak 1 at u = 0.
// Derivatives have the form Q_r(u) (1−u²)^{−2r} ψ(u) with
// Q_{r+1} = Q_r'·w² + 4r·u·w·Q_r − 2u·Q_r, w = 1 − u².

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, y) in b.iter().enumerate() {
        out[i] += y;
    }
    out
}

fn poly_eval(p: &[f64], u: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, c| acc * u + c)
}

fn bump_poly(r: usize) -> Vec<f64> {
    let w = [1.0, 0.0, -1.0];
    let w2 = poly_mul(&w, &w);
    let mut q = vec![1.0];
    for k in 0..r {
        let dq: Vec<f64> = if q.len() > 1 {
            q.iter().enumerate().skip(1).map(|(i, c)| i as f64 * c).collect()
        } else {
            vec![0.0]
        };
        let t1 = poly_mul(&dq, &w2);
        let t2 = poly_mul(&poly_mul(&[0.0, 4.0 * k as f64], &w), &q);
        let t3 = poly_mul(&[0.0, -2.0], &q);
        q = poly_add(&poly_add(&t1, &t2), &t3);
    }
    q
}

/// `(∫ψ̃, ∫ψ̃²)` over `(−1, 1)`.
fn bump_integrals() -> (f64, f64) {
    static CACHE: OnceLock<(f64, f64)> = OnceLock::new();
    *CACHE.get_or_init(|| {
        let rule = GaussLegendre::kernel_rule();
        // composite rule: the bump is flat to all orders at ±1
        let pieces = 16;
        let (mut a, mut b) = (0.0, 0.0);
        for p in 0..pieces {
            let lo = -1.0 + 2.0 * p as f64 / pieces as f64;
            let hi = lo + 2.0 / pieces as f64;
            a += rule.integrate_on(|u| bump_derivative(0, u), lo, hi);
            b += rule.integrate_on(|u| bump_derivative(0, u).powi(2), lo, hi);
        }
        (a, b)
    })
}

/// `∫_0^1 doppler(x)² dx`.
pub fn doppler_integral_sq() -> f64 {
    static CACHE: OnceLock<f64> = OnceLock::new();
    *CACHE.get_or_init(|| {
        let rule = GaussLegendre::kernel_rule();
        // geometric panels resolve the oscillation near 0
        let mut total = 0.0;
        let mut hi = 1.0;
        while hi > 1e-12 {
            let lo = hi * 0.8;
            total += rule.integrate_on(|x| doppler_unchecked(x).powi(2), lo, hi);
            hi = lo;
        }
        total
    })
}

/// `r`-th derivative of the normalised bump at `u`.
pub fn bump_derivative(r: usize, u: f64) -> f64 {
    if u.abs() >= 1.0 {
        return 0.0;
    }
    let w = 1.0 - u * u;
    let log_part = 1.0 - 1.0 / w - 2.0 * r as f64 * w.ln();
    poly_eval(&bump_poly(r), u) * log_part.exp()
}

/// Numerical sup-norm of the `r`-th bump derivative (dense grid, 0.1% margin).
fn bump_derivative_sup(r: usize) -> f64 {
    if r == 0 {
        return 1.0;
    }
    let q = bump_poly(r);
    let n = 200_000;
    let mut best: f64 = 0.0;
    for i in 1..n {
        let u = -1.0 + 2.0 * i as f64 / n as f64;
        let w = 1.0 - u * u;
        let v = poly_eval(&q, u) * (1.0 - 1.0 / w - 2.0 * r as f64 * w.ln()).exp();
        best = best.max(v.abs());
    }
    best * 1.001
}

/// Kind of data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DgpKind {
    Doppler,
    HolderSmooth(HolderFunctionSpec),
    /// User-supplied data; no ground truth.
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub kind: DgpKind,
    pub noise_variance: f64,
    #[serde(default)]
    pub seed: u64,
}

impl DgpSpec {
    pub fn doppler(noise_variance: f64) -> Self {
        Self { kind: DgpKind::Doppler, noise_variance, seed: 0 }
    }

    pub fn holder(spec: HolderFunctionSpec, noise_variance: f64) -> Self {
        Self { kind: DgpKind::HolderSmooth(spec), noise_variance, seed: 0 }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            DgpKind::Doppler => 1,
            DgpKind::HolderSmooth(h) => h.d,
            DgpKind::External => 0,
        }
    }

    /// True ECC of the design.
    pub fn psi_true(&self) -> Option<f64> {
        match self.kind {
            DgpKind::External => None,
            _ => Some(self.noise_variance),
        }
    }

    pub fn build(&self) -> Result<Dgp> {
        if !(self.noise_variance > 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::invalid("noise_variance must be positive"));
        }
        match &self.kind {
            DgpKind::Doppler => Ok(Dgp {
                spec: self.clone(),
                truth: Arc::new(|x: &[f64]| doppler_unchecked(x[0])),
                holder: None,
            }),
            DgpKind::HolderSmooth(h) => {
                let g = build_holder_function(*h)?;
                Ok(Dgp { spec: self.clone(), truth: g.as_truth(), holder: Some(g) })
            }
            DgpKind::External => {
                Err(Error::Unsupported("external data has no generating process".into()))
            }
        }
    }
}

/// A built design that can generate datasets.
#[derive(Clone)]
pub struct Dgp {
    spec: DgpSpec,
    truth: TruthFn,
    holder: Option<HolderFunction>,
}

impl std::fmt::Debug for Dgp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dgp").field("spec", &self.spec).finish_non_exhaustive()
    }
}

impl Dgp {
    pub fn spec(&self) -> &DgpSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// `π = μ = g`.
    pub fn truth(&self) -> TruthFn {
        self.truth.clone()
    }

    pub fn holder(&self) -> Option<&HolderFunction> {
        self.holder.as_ref()
    }

    pub fn psi_true(&self) -> f64 {
        self.spec.noise_variance
    }

    pub fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        check_size(n, self.spec.noise_variance)?;
        let g = &self.truth;
        generate_equal_response(|x| g(x), self.dim(), n, self.spec.noise_variance, seed)
    }

    pub fn metadata(&self, n: usize, seed: u64) -> DatasetMetadata {
        let (dgp, holder) = match &self.spec.kind {
            DgpKind::Doppler => ("doppler".to_string(), None),
            DgpKind::HolderSmooth(h) => {
                let g = self.holder.as_ref().expect("holder function built");
                (
                    "holder".to_string(),
                    Some(HolderMetadata {
                        s: h.s,
                        n_ref: h.n_ref,
                        amplitude: h.amplitude,
                        function_seed: h.seed,
                        bumps: g.bumps(),
                        holder_constant: g.holder_constant(),
                    }),
                )
            }
            DgpKind::External => ("external".to_string(), None),
        };
        DatasetMetadata {
            dgp,
            n,
            d: self.dim(),
            seed,
            noise_variance: self.spec.noise_variance,
            psi_true: self.psi_true(),
            holder,
            rng: RNG_NAME.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    // sqrt(0.25) * sin(2.1π / 0.55), evaluated with 30-digit arithmetic.
    const DOPPLER_HALF: f64 = -0.270_320_408_727_798_8;

    #[test]
    fn doppler_closed_form_values() {
        assert_eq!(doppler(0.0).unwrap(), 0.0);
        assert!(doppler(1.0).unwrap().abs() < 1e-300);
        assert!((doppler(0.5).unwrap() - DOPPLER_HALF).abs() < 1e-15);
        assert!(matches!(doppler(1.5), Err(Error::Domain(_))));
        assert!(doppler(-0.01).is_err());
    }

    #[test]
    fn doppler_dataset_matches_contract() {
        let ds = gen_doppler_dataset(500, 0.1, 7).unwrap();
        assert_eq!(ds.a, ds.y);
        let resid: Vec<f64> = (0..ds.len()).map(|i| ds.y[i] - doppler(ds.x.row(i)[0]).unwrap()).collect();
        let v = stats::sample_variance(&resid);
        assert!((v - 0.1).abs() <= 3.0 * (2.0 / 500.0f64).sqrt() * 0.1, "variance {v}");
        assert!(ds.x.as_slice().iter().all(|x| (0.0..=1.0).contains(x)));
    }

    #[test]
    fn doppler_dataset_boundary_and_errors() {
        let ds = gen_doppler_dataset(3, 0.1, 0).unwrap();
        assert_eq!(ds.len(), 3);
        assert!(gen_doppler_dataset(2, 0.1, 0).is_err());
        assert!(gen_doppler_dataset(10, 0.0, 0).is_err());
        assert!(gen_doppler_dataset(10, -1.0, 0).is_err());
    }

    #[test]
    fn generation_is_bit_identical_per_seed() {
        let a = gen_doppler_dataset(200, 0.1, 42).unwrap();
        let b = gen_doppler_dataset(200, 0.1, 42).unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = gen_doppler_dataset(200, 0.1, 43).unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn bump_count_grows_with_reference_size() {
        let small = HolderFunctionSpec::new(0.35, 1, 100).bumps();
        let large = HolderFunctionSpec::new(0.35, 1, 5000).bumps();
        assert!(small < large, "{small} vs {large}");
        let mut last = 0;
        for n in [1, 10, 100, 1000, 5000, 20000] {
            let m = HolderFunctionSpec::new(0.6, 1, n).bumps();
            assert!(m >= last);
            last = m;
        }
    }

    #[test]
    fn zero_amplitude_is_identically_zero() {
        let g = build_holder_function(HolderFunctionSpec::new(0.6, 2, 1000).with_amplitude(0.0)).unwrap();
        for i in 0..100 {
            let t = i as f64 / 99.0;
            assert_eq!(g.eval(&[t, 1.0 - t]), 0.0);
        }
        assert_eq!(g.holder_constant(), 0.0);
    }

    #[test]
    fn invalid_smoothness_rejected() {
        assert!(build_holder_function(HolderFunctionSpec::new(0.0, 1, 10)).is_err());
        assert!(build_holder_function(HolderFunctionSpec::new(-1.0, 1, 10)).is_err());
    }

    #[test]
    fn bump_derivatives_match_finite_differences() {
        for r in 0..3 {
            for &u in &[-0.7, -0.2, 0.0, 0.33, 0.8] {
                let h = 1e-5;
                let fd = (bump_derivative(r, u + h) - bump_derivative(r, u - h)) / (2.0 * h);
                let exact = bump_derivative(r + 1, u);
                assert!((fd - exact).abs() < 1e-5 * (1.0 + exact.abs()), "r={r} u={u}: {fd} vs {exact}");
            }
        }
        assert!((bump_derivative(0, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn holder_integrals_match_quadrature() {
        let g = build_holder_function(HolderFunctionSpec::new(0.35, 2, 200).with_seed(4)).unwrap();
        let rule = GaussLegendre::new(32);
        let m = g.bumps();
        // cell-aligned tensor rule over [0,1]^2
        let mut sq = 0.0;
        for a in 0..m {
            for b in 0..m {
                let (xa, xb) = (a as f64 / m as f64, b as f64 / m as f64);
                let h = 1.0 / m as f64;
                sq += rule.integrate_on(
                    |x| rule.integrate_on(|y| g.eval(&[x, y]).powi(2), xb, xb + h),
                    xa,
                    xa + h,
                );
            }
        }
        assert!((g.integral_sq() - sq).abs() < 1e-9 * sq.max(1.0), "{} vs {sq}", g.integral_sq());
    }

    #[test]
    fn doppler_square_integral() {
        // midpoint rule on a fine grid as an independent check
        let n = 2_000_000;
        let mid: f64 = (0..n).map(|i| doppler_unchecked((i as f64 + 0.5) / n as f64).powi(2)).sum::<f64>() / n as f64;
        assert!((doppler_integral_sq() - mid).abs() < 1e-6, "{} vs {mid}", doppler_integral_sq());
    }

    #[test]
    fn holder_floor_is_strict() {
        assert_eq!(holder_floor(0.6), 0);
        assert_eq!(holder_floor(1.0), 0);
        assert_eq!(holder_floor(1.5), 1);
        assert_eq!(holder_floor(2.0), 1);
        assert_eq!(holder_floor(2.5), 2);
    }

    #[test]
    fn holder_dataset_has_requested_shape() {
        let spec = HolderFunctionSpec::new(2.5, 4, 300);
        let ds = gen_holder_dataset(spec, 50, 10.0, 3).unwrap();
        assert_eq!(ds.dim(), 4);
        assert_eq!(ds.len(), 50);
        let dgp = DgpSpec::holder(HolderFunctionSpec::new(0.35, 1, 700), 10.0);
        assert_eq!(dgp.psi_true(), Some(10.0));
    }

    #[test]
    fn dgp_matches_direct_generators() {
        let dgp = DgpSpec::doppler(0.1).build().unwrap();
        assert_eq!(dgp.generate(64, 5).unwrap(), gen_doppler_dataset(64, 0.1, 5).unwrap());
        let spec = HolderFunctionSpec::new(0.6, 1, 400).with_seed(9);
        let dgp = DgpSpec::holder(spec, 10.0).build().unwrap();
        assert_eq!(dgp.generate(64, 5).unwrap(), gen_holder_dataset(spec, 64, 10.0, 5).unwrap());
        let meta = dgp.metadata(64, 5);
        assert_eq!(meta.psi_true, 10.0);
        assert_eq!(meta.holder.unwrap().bumps, spec.bumps());
    }
}
