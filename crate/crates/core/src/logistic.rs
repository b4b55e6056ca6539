//! The logistic family `d_I Δu + (lβ(1 − d_I u) − γ)u = 0` for `l > l*`,
//! its parameter derivative `v = ∂_l u`, and the near-threshold expansion.

use serde::{Deserialize, Serialize};

use crate::domain::{Field, Grid};
use crate::error::{AtlasError, Result};
use crate::spectral::{CoefficientSet, EigenPair};
use crate::tridiag::Tridiagonal;

/// One member of the family with the scalars the curves are built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticPoint {
    pub l: f64,
    pub u: Field,
    pub v: Field,
    /// `∫u`.
    pub int_u: f64,
    /// `∫ l v`.
    pub int_lv: f64,
    /// `l(1 − d_I u)`.
    pub z: Field,
}

impl LogisticPoint {
    fn assemble(grid: &Grid, d_i: f64, l: f64, u: Field, v: Field) -> Self {
        let int_u = grid.integrate(&u);
        let int_lv = l * grid.integrate(&v);
        let z = u.map(|x| l * (1.0 - d_i * x));
        LogisticPoint {
            l,
            u,
            v,
            int_u,
            int_lv,
            z,
        }
    }
}

/// Leading-order data at `l = l*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdExpansion {
    /// `u^l ≈ (l − l*) c* φ1` as `l ↓ l*`.
    pub c_star: f64,
    /// Slope of the `d_S = 0` curve at `l*`.
    pub slope_at_l_star: f64,
    /// `lim_{l↓l*} ∫(u + l v) = (∫φ1)(∫βφ1²)/(d_I ∫βφ1³)`.
    pub i0: f64,
}

impl ThresholdExpansion {
    /// Slope at `l*` of the curve with susceptible diffusion `d_s`.
    pub fn slope_with(&self, coeffs: &CoefficientSet, eig: &EigenPair, d_s: f64) -> f64 {
        let len = coeffs.length();
        (len + (d_s - coeffs.d_i) * self.i0) / (eig.l_star * len)
    }
}

pub fn threshold_expansion(coeffs: &CoefficientSet, eig: &EigenPair) -> ThresholdExpansion {
    let g = &coeffs.grid;
    let phi = &eig.phi1;
    let b_phi2: Vec<f64> = (0..g.len())
        .map(|i| coeffs.beta[i] * phi[i] * phi[i])
        .collect();
    let int_b_phi2 = g.integrate(&b_phi2);
    let int_b_phi3 = g.inner(&b_phi2, phi);
    let int_phi = g.integrate(phi);
    let c_star = eig.r1 * int_b_phi2 / (coeffs.d_i * int_b_phi3);
    let i0 = int_phi * int_b_phi2 / (coeffs.d_i * int_b_phi3);
    let len = coeffs.length();
    let slope_at_l_star =
        (1.0 - (int_phi / len) * (int_b_phi2 / len) / (int_b_phi3 / len)) / eig.l_star;
    ThresholdExpansion {
        c_star,
        slope_at_l_star,
        i0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonOptions {
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Residual target `‖F‖∞ ≤ residual_tol · max(1, l)`, raised to the
    /// rounding floor of the discrete Laplacian when that is larger.
    pub residual_tol: f64,
    /// Iterates are projected into `[clip, 1/d_I − clip]`.
    pub clip: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iter: 200,
            max_halvings: 30,
            residual_tol: 1e-11,
            clip: 1e-14,
        }
    }
}

struct Problem<'a> {
    coeffs: &'a CoefficientSet,
    l: f64,
    lap: Tridiagonal,
}

impl<'a> Problem<'a> {
    fn new(coeffs: &'a CoefficientSet, l: f64) -> Self {
        Problem {
            coeffs,
            l,
            lap: coeffs.grid.laplacian().matrix().clone(),
        }
    }

    fn residual(&self, u: &[f64], out: &mut [f64]) {
        let c = self.coeffs;
        self.lap.matvec_into(u, out);
        for i in 0..u.len() {
            out[i] =
                c.d_i * out[i] + (self.l * c.beta[i] * (1.0 - c.d_i * u[i]) - c.gamma[i]) * u[i];
        }
    }

    fn jacobian(&self, u: &[f64]) -> Tridiagonal {
        let c = self.coeffs;
        let shift: Vec<f64> = (0..u.len())
            .map(|i| self.l * c.beta[i] * (1.0 - 2.0 * c.d_i * u[i]) - c.gamma[i])
            .collect();
        self.lap.scaled_plus_diag(c.d_i, &shift)
    }

    /// Rounding level of `‖F(u)‖∞` for a field of size `u_max`.
    fn floor(&self, u_max: f64) -> f64 {
        let c = self.coeffs;
        let h = c.grid.spacing();
        let stiff = 4.0 * c.d_i / (h * h);
        let react = self.l * c.beta.max() + c.gamma.max();
        64.0 * f64::EPSILON * (stiff + react) * u_max.max(1e-300)
    }
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Damped Newton from one starting guess. Returns the converged field, which
/// is not yet checked for positivity or stability.
fn newton(p: &Problem, mut u: Vec<f64>, opts: &NewtonOptions) -> Result<Vec<f64>> {
    let c = p.coeffs;
    let n = u.len();
    let hi = 1.0 / c.d_i - opts.clip;
    let project = |x: f64| x.clamp(opts.clip, hi);
    u.iter_mut().for_each(|x| *x = project(*x));
    let target = opts.residual_tol * p.l.max(1.0);

    let mut f = vec![0.0; n];
    let mut trial = vec![0.0; n];
    let mut f_trial = vec![0.0; n];
    p.residual(&u, &mut f);
    let mut norm = max_abs(&f);
    for _ in 0..opts.max_iter {
        let tol = target + p.floor(max_abs(&u));
        if norm <= tol {
            return Ok(polish(p, u, norm, &project));
        }
        let jac = p.jacobian(&u);
        let step = jac.solve(&f)?.x;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            for i in 0..n {
                trial[i] = project(u[i] - alpha * step[i]);
            }
            p.residual(&trial, &mut f_trial);
            let trial_norm = max_abs(&f_trial);
            if trial_norm < norm || trial_norm <= tol {
                accepted = true;
                let moved = max_abs(&step) * alpha;
                std::mem::swap(&mut u, &mut trial);
                std::mem::swap(&mut f, &mut f_trial);
                norm = trial_norm;
                // A step at the rounding level of u ends the iteration.
                if moved <= 4.0 * f64::EPSILON * max_abs(&u) && norm <= 1e3 * tol {
                    return Ok(u);
                }
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            if norm <= 1e3 * (target + p.floor(max_abs(&u))) {
                return Ok(u);
            }
            return Err(AtlasError::solver(format!(
                "logistic Newton at l = {}: line search failed with residual {norm:e}",
                p.l
            )));
        }
    }
    Err(AtlasError::solver(format!(
        "logistic Newton at l = {}: no convergence in {} iterations (residual {norm:e})",
        p.l, opts.max_iter
    )))
}

/// One extra full Newton step once the tolerance is met; kept only if it
/// does not increase the residual.
fn polish(p: &Problem, u: Vec<f64>, norm: f64, project: &impl Fn(f64) -> f64) -> Vec<f64> {
    let mut f = vec![0.0; u.len()];
    p.residual(&u, &mut f);
    let Ok(step) = p.jacobian(&u).solve(&f) else {
        return u;
    };
    let trial: Vec<f64> = u.iter().zip(&step.x).map(|(a, d)| project(a - d)).collect();
    p.residual(&trial, &mut f);
    if max_abs(&f) <= norm {
        trial
    } else {
        u
    }
}

/// Accepts `u` only if it is interior and the linearisation is negative
/// definite, which singles out the positive solution over `u = 0`.
fn accept(p: &Problem, u: &[f64]) -> Result<()> {
    let hi = 1.0 / p.coeffs.d_i;
    if let Some(i) = u.iter().position(|x| !(*x > 0.0 && *x < hi)) {
        return Err(AtlasError::solver(format!(
            "logistic solution at l = {} leaves (0, 1/d_I) at node {i}",
            p.l
        )));
    }
    // W J is symmetric with W the positive quadrature weights, so the pivot
    // signs of J give its inertia.
    if p.jacobian(u).positive_pivot_count()? > 0 {
        return Err(AtlasError::solver(format!(
            "logistic Newton at l = {} converged to an unstable (trivial) solution",
            p.l
        )));
    }
    Ok(())
}

pub fn solve_u(
    coeffs: &CoefficientSet,
    eig: &EigenPair,
    l: f64,
    warm: Option<&[f64]>,
) -> Result<Field> {
    solve_u_with(coeffs, eig, l, warm, &NewtonOptions::default())
}

pub fn solve_u_with(
    coeffs: &CoefficientSet,
    eig: &EigenPair,
    l: f64,
    warm: Option<&[f64]>,
    opts: &NewtonOptions,
) -> Result<Field> {
    // l* carries rounding error; a relative margin keeps l = l* itself out.
    if !(l > eig.l_star * (1.0 + 1e-12)) {
        return Err(AtlasError::domain(format!(
            "no positive logistic solution for l = {l} <= l* = {}",
            eig.l_star
        )));
    }
    let p = Problem::new(coeffs, l);
    let n = coeffs.grid.len();
    let mut guesses: Vec<Vec<f64>> = Vec::new();
    if let Some(w) = warm {
        if w.len() != n {
            return Err(AtlasError::config("warm start does not match the grid"));
        }
        guesses.push(w.to_vec());
    }
    let ex = threshold_expansion(coeffs, eig);
    guesses.push(
        eig.phi1
            .iter()
            .map(|p| (l - eig.l_star) * ex.c_star * p)
            .collect(),
    );
    guesses.push(
        (0..n)
            .map(|i| {
                ((1.0 - coeffs.gamma[i] / (l * coeffs.beta[i])) / coeffs.d_i)
                    .max(0.5 / coeffs.d_i * 1e-3)
            })
            .collect(),
    );
    guesses.push(vec![0.5 / coeffs.d_i; n]);

    let mut last = None;
    for g in guesses {
        match newton(&p, g, opts).and_then(|u| accept(&p, &u).map(|_| u)) {
            Ok(u) => return Ok(Field(u)),
            Err(e) => last = Some(e),
        }
    }
    // Walk in from the threshold where the expansion guess is reliable.
    match walk_from_threshold(coeffs, eig, l, opts) {
        Ok(u) => Ok(u),
        Err(_) => Err(last.unwrap_or_else(|| AtlasError::solver("logistic solve failed"))),
    }
}

fn walk_from_threshold(
    coeffs: &CoefficientSet,
    eig: &EigenPair,
    l: f64,
    opts: &NewtonOptions,
) -> Result<Field> {
    let ls = eig.l_star;
    let ex = threshold_expansion(coeffs, eig);
    let start = (l / ls - 1.0).min(1e-3);
    let mut offset = start;
    let lk = ls * (1.0 + offset);
    let p = Problem::new(coeffs, lk);
    let mut u = newton(
        &p,
        eig.phi1.iter().map(|f| (lk - ls) * ex.c_star * f).collect(),
        opts,
    )?;
    accept(&p, &u)?;
    let end = l / ls - 1.0;
    while offset < end {
        let next = (offset * 1.25).min(end);
        let (l0, l1) = (ls * (1.0 + offset), ls * (1.0 + next));
        let v = solve_v(coeffs, l0, &u)?;
        let guess: Vec<f64> = u
            .iter()
            .zip(v.iter())
            .map(|(a, b)| a + (l1 - l0) * b)
            .collect();
        let p = Problem::new(coeffs, l1);
        u = newton(&p, guess, opts)?;
        accept(&p, &u)?;
        offset = next;
    }
    Ok(Field(u))
}

/// `v = ∂_l u^l` from `J v = −β(1 − d_I u)u`.
pub fn solve_v(coeffs: &CoefficientSet, l: f64, u: &[f64]) -> Result<Field> {
    let p = Problem::new(coeffs, l);
    let jac = p.jacobian(u);
    let rhs: Vec<f64> = (0..u.len())
        .map(|i| -coeffs.beta[i] * (1.0 - coeffs.d_i * u[i]) * u[i])
        .collect();
    let v = jac.solve(&rhs)?.x;
    if let Some(i) = v.iter().position(|x| !(*x > 0.0)) {
        return Err(AtlasError::solver(format!(
            "derivative of the logistic family is not positive at node {i} (l = {l})"
        )));
    }
    Ok(Field(v))
}

/// `‖F(u)‖∞` for the family at `l`.
pub fn residual_norm(coeffs: &CoefficientSet, l: f64, u: &[f64]) -> f64 {
    let p = Problem::new(coeffs, l);
    let mut f = vec![0.0; u.len()];
    p.residual(u, &mut f);
    max_abs(&f)
}

pub fn logistic_point(
    coeffs: &CoefficientSet,
    eig: &EigenPair,
    l: f64,
    warm: Option<&[f64]>,
) -> Result<LogisticPoint> {
    let u = solve_u(coeffs, eig, l, warm)?;
    let v = solve_v(coeffs, l, &u)?;
    Ok(LogisticPoint::assemble(&coeffs.grid, coeffs.d_i, l, u, v))
}

/// Point from a tangent-predicted warm start taken from `prev`.
pub fn next_point(
    coeffs: &CoefficientSet,
    eig: &EigenPair,
    prev: &LogisticPoint,
    l: f64,
) -> Result<LogisticPoint> {
    let dl = l - prev.l;
    let hi = 1.0 / coeffs.d_i;
    let guess: Vec<f64> = prev
        .u
        .iter()
        .zip(prev.v.iter())
        .map(|(a, b)| {
            let g = a + dl * b;
            if g > 0.0 && g < hi {
                g
            } else {
                *a
            }
        })
        .collect();
    logistic_point(coeffs, eig, l, Some(&guess))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub points: Vec<LogisticPoint>,
    /// `u` strictly increases nodewise between consecutive points.
    pub monotone: bool,
}

pub fn continuation_sweep(
    coeffs: &CoefficientSet,
    eig: &EigenPair,
    l_values: &[f64],
) -> Result<Sweep> {
    if l_values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(AtlasError::config(
            "continuation values must be strictly ascending",
        ));
    }
    let mut points: Vec<LogisticPoint> = Vec::with_capacity(l_values.len());
    for &l in l_values {
        let pt = match points.last() {
            Some(prev) => next_point(coeffs, eig, prev, l),
            None => logistic_point(coeffs, eig, l, None),
        }
        .map_err(|e| match e {
            AtlasError::Solver(m) => AtlasError::solver(format!("sweep failed at l = {l}: {m}")),
            other => other,
        })?;
        points.push(pt);
    }
    let monotone = points
        .windows(2)
        .all(|w| w[1].u.iter().zip(w[0].u.iter()).all(|(b, a)| b > a));
    Ok(Sweep { points, monotone })
}
