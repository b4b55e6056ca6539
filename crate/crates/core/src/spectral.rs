//! Principal eigenpair `(R1, phi1)` of the weighted Neumann problem
//! `d_I Δφ − γφ + (1/R1) βφ = 0`, its inverse in `d_I`, and closed-form
//! Neumann Laplacian modes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::domain::{Field, Grid};
use crate::error::{AtlasError, Result};
use crate::tridiag::TridiagonalLu;

/// How the total population is specified; the other quantity follows from
/// `N = R0 · l* · |Ω|` once `l*` is known.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Population {
    TotalMass(f64),
    R0(f64),
}

impl Population {
    pub fn r0(&self, l_star: f64, length: f64) -> f64 {
        match *self {
            Population::R0(r0) => r0,
            Population::TotalMass(n) => n / (l_star * length),
        }
    }

    pub fn total_mass(&self, l_star: f64, length: f64) -> f64 {
        match *self {
            Population::R0(r0) => r0 * l_star * length,
            Population::TotalMass(n) => n,
        }
    }
}

/// A model instance: sampled transmission and recovery rates plus the
/// diffusion rates.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSet {
    pub grid: Grid,
    pub beta: Field,
    pub gamma: Field,
    pub d_i: f64,
    /// Susceptible diffusion rate; zero is allowed for limit curves only.
    pub d_s: f64,
    pub population: Option<Population>,
}

impl CoefficientSet {
    pub fn new(grid: Grid, beta: Field, gamma: Field, d_i: f64) -> Result<Self> {
        if beta.len() != grid.len() || gamma.len() != grid.len() {
            return Err(AtlasError::config(
                "coefficient fields do not match the grid",
            ));
        }
        if let Some(i) = beta.iter().position(|b| !(*b > 0.0) || !b.is_finite()) {
            return Err(AtlasError::config(format!(
                "beta must be positive, got {} at node {i}",
                beta[i]
            )));
        }
        if let Some(i) = gamma.iter().position(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(AtlasError::config(format!(
                "gamma must be positive, got {} at node {i}",
                gamma[i]
            )));
        }
        if !(d_i > 0.0) || !d_i.is_finite() {
            return Err(AtlasError::config(format!(
                "d_I must be positive, got {d_i}"
            )));
        }
        Ok(CoefficientSet {
            grid,
            beta,
            gamma,
            d_i,
            d_s: 0.0,
            population: None,
        })
    }

    /// Constant coefficients `β ≡ beta`, `γ ≡ gamma`.
    pub fn constant(grid: Grid, beta: f64, gamma: f64, d_i: f64) -> Result<Self> {
        let b = grid.constant(beta);
        let g = grid.constant(gamma);
        Self::new(grid, b, g, d_i)
    }

    pub fn with_d_s(mut self, d_s: f64) -> Result<Self> {
        if !(d_s >= 0.0) || !d_s.is_finite() {
            return Err(AtlasError::config(format!(
                "d_S must be nonnegative, got {d_s}"
            )));
        }
        self.d_s = d_s;
        Ok(self)
    }

    pub fn with_population(mut self, population: Population) -> Result<Self> {
        let value = match population {
            Population::TotalMass(v) | Population::R0(v) => v,
        };
        if !(value > 0.0) || !value.is_finite() {
            return Err(AtlasError::config(format!(
                "population parameter must be positive, got {value}"
            )));
        }
        self.population = Some(population);
        Ok(self)
    }

    /// Same rates with a different `d_I`.
    pub fn with_d_i(&self, d_i: f64) -> Result<Self> {
        if !(d_i > 0.0) || !d_i.is_finite() {
            return Err(AtlasError::config(format!(
                "d_I must be positive, got {d_i}"
            )));
        }
        let mut c = self.clone();
        c.d_i = d_i;
        Ok(c)
    }

    pub fn length(&self) -> f64 {
        self.grid.length()
    }

    pub fn beta_over_gamma(&self) -> Field {
        self.beta.zip_map(&self.gamma, |b, g| b / g)
    }

    pub fn gamma_over_beta(&self) -> Field {
        self.gamma.zip_map(&self.beta, |g, b| g / b)
    }

    /// Assumption (A): `β/γ` is not constant (relative variation above 1e-10).
    pub fn ratio_is_nonconstant(&self) -> bool {
        let r = self.beta_over_gamma();
        let (lo, hi) = (r.min(), r.max());
        hi - lo > 1e-10 * hi.abs()
    }
}

/// Principal eigenpair, `φ1 > 0` with `∫φ1² = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub r1: f64,
    pub l_star: f64,
    pub phi1: Field,
    pub iterations: usize,
}

impl EigenPair {
    /// `‖d_I Δφ − γφ + βφ/R1‖∞`.
    pub fn residual(&self, coeffs: &CoefficientSet) -> f64 {
        let lap = coeffs.grid.laplacian().apply(&self.phi1);
        let mut r = 0.0_f64;
        for i in 0..lap.len() {
            let phi = self.phi1[i];
            let v = coeffs.d_i * lap[i] - coeffs.gamma[i] * phi + coeffs.beta[i] * phi / self.r1;
            r = r.max(v.abs());
        }
        r
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenOptions {
    pub max_iter: usize,
    /// Relative Rayleigh-quotient stagnation threshold.
    pub rq_tol: f64,
    /// Relative max-norm change of the iterate.
    pub vec_tol: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            max_iter: 50_000,
            rq_tol: 1e-12,
            vec_tol: 1e-13,
        }
    }
}

pub fn principal_pair(coeffs: &CoefficientSet) -> Result<EigenPair> {
    principal_pair_with(coeffs, &EigenOptions::default())
}

/// Inverse power iteration (shift 0) on
/// `(d_I K + diag(γ) M) φ = μ diag(β) M φ`, with the lumped mass matrix
/// equal to the quadrature weights. After dividing out the weights the
/// left-hand operator is the tridiagonal `−d_I Δ + diag(γ)`.
pub fn principal_pair_with(coeffs: &CoefficientSet, opts: &EigenOptions) -> Result<EigenPair> {
    let grid = &coeffs.grid;
    let n = grid.len();
    let lap = grid.laplacian();
    let op = lap.shifted(-coeffs.d_i, &coeffs.gamma);
    let lu = TridiagonalLu::new(&op)?;

    let weighted_norm = |x: &[f64]| grid.inner(x, x).sqrt();
    let mut x = vec![1.0; n];
    let s = weighted_norm(&x);
    x.iter_mut().for_each(|v| *v /= s);

    let mut rhs = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut mu_prev = f64::NAN;
    for iter in 1..=opts.max_iter {
        for i in 0..n {
            rhs[i] = coeffs.beta[i] * x[i];
        }
        lu.solve_into(&rhs, &mut y);
        let s = weighted_norm(&y);
        if !(s > 0.0) || !s.is_finite() {
            return Err(AtlasError::solver(
                "inverse iteration produced a degenerate iterate",
            ));
        }
        y.iter_mut().for_each(|v| *v /= s);

        // Rayleigh quotient  ∫ y (−d_I Δ + γ) y / ∫ β y²
        let ky = op.matvec(&y);
        let num = grid.inner(&y, &ky);
        let den: f64 = (0..n)
            .map(|i| grid.weights()[i] * coeffs.beta[i] * y[i] * y[i])
            .sum();
        let mu = num / den;

        let change = y
            .iter()
            .zip(&x)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        let ymax = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        std::mem::swap(&mut x, &mut y);

        let rq_ok = (mu - mu_prev).abs() <= opts.rq_tol * mu.abs();
        if rq_ok && change <= opts.vec_tol * ymax {
            return finish_pair(x, mu, iter);
        }
        mu_prev = mu;
    }
    Err(AtlasError::solver(format!(
        "principal eigenpair: no convergence after {} inverse iterations",
        opts.max_iter
    )))
}

fn finish_pair(mut phi: Vec<f64>, mu: f64, iterations: usize) -> Result<EigenPair> {
    if !(mu > 0.0) {
        return Err(AtlasError::solver(format!(
            "principal eigenvalue must be positive, got {mu}"
        )));
    }
    if phi.iter().sum::<f64>() < 0.0 {
        phi.iter_mut().for_each(|v| *v = -*v);
    }
    if let Some(i) = phi.iter().position(|v| *v <= 0.0) {
        return Err(AtlasError::solver(format!(
            "principal eigenfunction changes sign at node {i}"
        )));
    }
    Ok(EigenPair {
        r1: 1.0 / mu,
        l_star: mu,
        phi1: Field(phi),
        iterations,
    })
}

/// `(max β/γ, β̄/γ̄)`: the limits of `R1` as `d_I → 0` and `d_I → ∞`.
pub fn r1_limits(coeffs: &CoefficientSet) -> (f64, f64) {
    let max_ratio = coeffs.beta_over_gamma().max();
    let mean_ratio = coeffs.grid.average(&coeffs.beta) / coeffs.grid.average(&coeffs.gamma);
    (max_ratio, mean_ratio)
}

/// Solves `R1(d_I) = target` by bisection in `log d_I` on a bracket
/// `(lo, hi)` with `R1(lo) > target > R1(hi)`.
pub fn r1_inverse(coeffs: &CoefficientSet, target: f64, bracket: (f64, f64)) -> Result<f64> {
    if !coeffs.ratio_is_nonconstant() {
        return Err(AtlasError::domain(
            "beta/gamma is constant: R1 does not depend on d_I and cannot be inverted",
        ));
    }
    let (upper_limit, lower_limit) = r1_limits(coeffs);
    if !(target > lower_limit && target < upper_limit) {
        return Err(AtlasError::domain(format!(
            "target {target} outside the open range ({lower_limit}, {upper_limit}) of R1"
        )));
    }
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(AtlasError::config(format!(
            "invalid d_I bracket ({lo}, {hi})"
        )));
    }
    let r1_at = |d: f64| -> Result<f64> { Ok(principal_pair(&coeffs.with_d_i(d)?)?.r1) };
    let f_lo = r1_at(lo)? - target;
    let f_hi = r1_at(hi)? - target;
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(AtlasError::config(format!(
            "bracket ({lo}, {hi}) does not straddle R1 = {target}"
        )));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        let f_mid = r1_at(mid)? - target;
        if f_mid.abs() <= 1e-8 {
            return Ok(mid);
        }
        if f_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi / lo - 1.0) < 1e-15 {
            break;
        }
    }
    Err(AtlasError::solver(format!(
        "R1 inverse: bisection stalled at bracket ({lo}, {hi})"
    )))
}

/// Neumann Laplacian eigenmode on `(0, L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceMode {
    pub m: usize,
    pub lambda: f64,
    pub phi: Field,
}

/// `λ_m = (mπ/L)²`, `φ_0 = 1/√L`, `φ_m = √(2/L) cos(mπx/L)`.
pub fn laplace_mode(grid: &Grid, m: usize) -> LaplaceMode {
    let l = grid.length();
    let k = m as f64 * PI / l;
    let phi = if m == 0 {
        grid.constant(1.0 / l.sqrt())
    } else {
        let a = (2.0 / l).sqrt();
        grid.sample(|x| a * (k * x).cos())
    };
    LaplaceMode {
        m,
        lambda: k * k,
        phi,
    }
}

/// Largest `|φ_m|` over the closed interval.
pub fn mode_sup_norm(length: f64, m: usize) -> f64 {
    if m == 0 {
        1.0 / length.sqrt()
    } else {
        (2.0 / length).sqrt()
    }
}
