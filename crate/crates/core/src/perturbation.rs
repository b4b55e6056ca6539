//! Near-constant test models `β = k + εh`, `h = c_m φ_m`, `γ = β²`, with
//! the closed-form small-ε expansion of `l*` and the sign dichotomies that
//! decide between backward and forward (S-shaped) bifurcation.

use serde::{Deserialize, Serialize};

use crate::domain::{Field, Grid};
use crate::error::{AtlasError, Result};
use crate::logistic::threshold_expansion;
use crate::spectral::{laplace_mode, mode_sup_norm, principal_pair, CoefficientSet, EigenPair};

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedModel {
    pub k: f64,
    pub m: usize,
    pub c_m: f64,
    pub eps: f64,
    pub lambda: f64,
    pub h: Field,
    pub coeffs: CoefficientSet,
}

/// `ε_{k,h} = k / ‖h‖∞`.
pub fn eps_bound(k: f64, m: usize, c_m: f64, length: f64) -> f64 {
    k / (c_m.abs() * mode_sup_norm(length, m))
}

pub fn build_model(
    k: f64,
    m: usize,
    c_m: f64,
    eps: f64,
    d_i: f64,
    grid: &Grid,
) -> Result<PerturbedModel> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(AtlasError::config(format!("k must be positive, got {k}")));
    }
    if m == 0 {
        return Err(AtlasError::config("perturbation mode must be m >= 1"));
    }
    if c_m == 0.0 || !c_m.is_finite() {
        return Err(AtlasError::config(
            "perturbation amplitude c_m must be nonzero",
        ));
    }
    let bound = eps_bound(k, m, c_m, grid.length());
    if !(eps > 0.0 && eps < bound) {
        return Err(AtlasError::config(format!(
            "eps = {eps} outside (0, {bound}) where beta stays positive"
        )));
    }
    let mode = laplace_mode(grid, m);
    let h = mode.phi.map(|p| c_m * p);
    let beta = h.map(|v| k + eps * v);
    let gamma = beta.map(|b| b * b);
    let coeffs = CoefficientSet::new(grid.clone(), beta, gamma, d_i)?;
    Ok(PerturbedModel {
        k,
        m,
        c_m,
        eps,
        lambda: mode.lambda,
        h,
        coeffs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExpansionCoefficients {
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
    /// First-order correction of `φ1/∫φ1`.
    pub phi1_tilde: Field,
}

/// `l0 = k`, `l1 = avg(h) = 0`, `l2 = (1 − k²/(d_I λ_m)) avg(h²)/k`,
/// `φ̃1 = −k h/(|Ω| d_I λ_m)`.
pub fn closed_form_expansion(model: &PerturbedModel) -> ExpansionCoefficients {
    let len = model.coeffs.length();
    let d_i = model.coeffs.d_i;
    let k = model.k;
    let mean_h2 = model.c_m * model.c_m / len;
    let l2 = (1.0 - k * k / (d_i * model.lambda)) * mean_h2 / k;
    let phi1_tilde = model.h.map(|h| -k * h / (len * d_i * model.lambda));
    ExpansionCoefficients {
        l0: k,
        l1: 0.0,
        l2,
        phi1_tilde,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExpansionReport {
    pub eps: Vec<f64>,
    pub l_star: Vec<f64>,
    /// `(l*(ε) − l0 − ε l1 − ε² l2)/ε³`.
    pub remainder: Vec<f64>,
    /// `max|r| / min|r|`.
    pub ratio: f64,
    pub bounded: bool,
    /// `|l*(ε) − k| ≤ 2|l2|ε²` at every ε.
    pub second_order: bool,
    pub l2: f64,
}

pub fn expansion_consistency(
    k: f64,
    m: usize,
    c_m: f64,
    d_i: f64,
    grid: &Grid,
    eps: &[f64],
) -> Result<ExpansionReport> {
    if eps.is_empty() {
        return Err(AtlasError::config("empty eps sequence"));
    }
    let mut l_star = Vec::with_capacity(eps.len());
    let mut remainder = Vec::with_capacity(eps.len());
    let mut l2 = 0.0;
    let mut second_order = true;
    for &e in eps {
        let model = build_model(k, m, c_m, e, d_i, grid)?;
        let ex = closed_form_expansion(&model);
        let ls = principal_pair(&model.coeffs)?.l_star;
        l2 = ex.l2;
        second_order &= (ls - ex.l0).abs() <= 2.0 * ex.l2.abs() * e * e;
        remainder.push((ls - ex.l0 - e * ex.l1 - e * e * ex.l2) / (e * e * e));
        l_star.push(ls);
    }
    let mags: Vec<f64> = remainder.iter().map(|r| r.abs()).collect();
    let hi = mags.iter().copied().fold(0.0, f64::max);
    let lo = mags.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = hi / lo;
    Ok(ExpansionReport {
        eps: eps.to_vec(),
        l_star,
        remainder,
        ratio,
        bounded: ratio.is_finite() && ratio <= 10.0,
        second_order,
        l2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Regime {
    /// `k² < d_I λ_m < 2k²`.
    Forward,
    /// `d_I λ_m > 2k²`.
    Backward,
    /// Neither strict inequality pair holds.
    Boundary,
}

pub fn regime_of(k: f64, d_i_lambda: f64) -> Regime {
    let k2 = k * k;
    if d_i_lambda > k2 && d_i_lambda < 2.0 * k2 {
        Regime::Forward
    } else if d_i_lambda > 2.0 * k2 {
        Regime::Backward
    } else {
        Regime::Boundary
    }
}

/// Sign conditions on the coefficients that select the bifurcation picture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Hypotheses {
    /// `β/γ` is not constant.
    pub ratio_nonconstant: bool,
    /// `avg(γ/β) < γ̄/β̄`, which forces the low threshold below 1.
    pub mean_ratio: bool,
    /// `avg(βφ1³) < avg(φ1) avg(βφ1²)`: the curve leaves `l*` downward.
    pub backward: bool,
    /// `avg(γ/β) R1 < 1` and `avg(βφ1³) > avg(φ1) avg(βφ1²)`.
    pub forward: bool,
}

/// `(1/R1 − avg(γ/β), avg(βφ1³) − avg(φ1) avg(βφ1²))`.
pub fn sign_gaps(coeffs: &CoefficientSet, eig: &EigenPair) -> (f64, f64) {
    let g = &coeffs.grid;
    let phi = &eig.phi1;
    let b_phi2: Vec<f64> = (0..g.len())
        .map(|i| coeffs.beta[i] * phi[i] * phi[i])
        .collect();
    let tail_gap = eig.l_star - g.average(&coeffs.gamma_over_beta());
    let cubic_gap = g.inner(&b_phi2, phi) / g.length() - g.average(phi) * g.average(&b_phi2);
    (tail_gap, cubic_gap)
}

pub fn check_hypotheses(coeffs: &CoefficientSet, eig: &EigenPair) -> Hypotheses {
    let g = &coeffs.grid;
    let ratio_nonconstant = coeffs.ratio_is_nonconstant();
    let mean_gb = g.average(&coeffs.gamma_over_beta());
    let mean_ratio =
        ratio_nonconstant && mean_gb < g.average(&coeffs.gamma) / g.average(&coeffs.beta);
    let (_, cubic) = sign_gaps(coeffs, eig);
    // Both cubic conditions are degenerate (zero) for constant ratios.
    let backward = ratio_nonconstant && cubic < 0.0;
    let forward = ratio_nonconstant && mean_gb * eig.r1 < 1.0 && cubic > 0.0;
    Hypotheses {
        ratio_nonconstant,
        mean_ratio,
        backward,
        forward,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegimeReport {
    pub k: f64,
    pub m: usize,
    pub d_i: f64,
    pub eps: f64,
    pub d_i_lambda: f64,
    pub regime: Regime,
    pub tail_gap: f64,
    pub cubic_gap: f64,
    /// Predicted sign (+1/−1) of `tail_gap`; `None` on the boundary.
    pub predicted_tail_sign: Option<i8>,
    pub predicted_cubic_sign: Option<i8>,
    pub tail_sign_matches: Option<bool>,
    pub cubic_sign_matches: Option<bool>,
    pub slope_at_l_star: f64,
    pub hypotheses: Hypotheses,
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

pub fn regime_report(
    k: f64,
    m: usize,
    c_m: f64,
    d_i: f64,
    grid: &Grid,
    eps: f64,
) -> Result<RegimeReport> {
    let model = build_model(k, m, c_m, eps, d_i, grid)?;
    let eig = principal_pair(&model.coeffs)?;
    let d_i_lambda = d_i * model.lambda;
    let k2 = k * k;
    let (tail_gap, cubic_gap) = sign_gaps(&model.coeffs, &eig);
    let predicted_tail_sign = if d_i_lambda > k2 {
        Some(1)
    } else if d_i_lambda < k2 {
        Some(-1)
    } else {
        None
    };
    let predicted_cubic_sign = if d_i_lambda < 2.0 * k2 {
        Some(1)
    } else if d_i_lambda > 2.0 * k2 {
        Some(-1)
    } else {
        None
    };
    Ok(RegimeReport {
        k,
        m,
        d_i,
        eps,
        d_i_lambda,
        regime: regime_of(k, d_i_lambda),
        tail_gap,
        cubic_gap,
        predicted_tail_sign,
        predicted_cubic_sign,
        tail_sign_matches: predicted_tail_sign.map(|s| s == sign(tail_gap)),
        cubic_sign_matches: predicted_cubic_sign.map(|s| s == sign(cubic_gap)),
        slope_at_l_star: threshold_expansion(&model.coeffs, &eig).slope_at_l_star,
        hypotheses: check_hypotheses(&model.coeffs, &eig),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EpsChoice {
    pub eps: f64,
    pub halvings: usize,
    /// `(tail, cubic)` signs at the chosen ε.
    pub signs: (i8, i8),
}

/// Halves ε from `start_fraction · ε_{k,h}` until both gap signs agree at
/// three consecutive values (two halvings); returns the largest such ε.
pub fn stabilize_eps(
    k: f64,
    m: usize,
    c_m: f64,
    d_i: f64,
    grid: &Grid,
    start_fraction: f64,
) -> Result<EpsChoice> {
    if !(start_fraction > 0.0 && start_fraction < 1.0) {
        return Err(AtlasError::config("start fraction must lie in (0, 1)"));
    }
    let signs_at = |e: f64| -> Result<(i8, i8)> {
        let model = build_model(k, m, c_m, e, d_i, grid)?;
        let eig = principal_pair(&model.coeffs)?;
        let (a, b) = sign_gaps(&model.coeffs, &eig);
        Ok((sign(a), sign(b)))
    };
    let e0 = start_fraction * eps_bound(k, m, c_m, grid.length());
    let mut seq = vec![signs_at(e0)?, signs_at(0.5 * e0)?];
    for j in 0..40 {
        seq.push(signs_at(e0 * 0.5f64.powi(j as i32 + 2))?);
        if seq[j] == seq[j + 1] && seq[j + 1] == seq[j + 2] {
            return Ok(EpsChoice {
                eps: e0 * 0.5f64.powi(j as i32),
                halvings: j,
                signs: seq[j],
            });
        }
    }
    Err(AtlasError::solver(
        "gap signs did not stabilise under 40 halvings of eps",
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn bound_and_rejection() {
        let g = Grid::new(1.0, 101).unwrap();
        assert!((eps_bound(1.0, 1, 1.0, 1.0) - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!(build_model(1.0, 1, 1.0, 0.8, 0.15, &g)
            .unwrap_err()
            .is_config());
        assert!(build_model(1.0, 1, 0.0, 0.1, 0.15, &g)
            .unwrap_err()
            .is_config());
        let m = build_model(1.0, 1, 1.0, 0.3, 0.15, &g).unwrap();
        let want = (1.0 + 0.3 * 2f64.sqrt()).powi(2);
        assert!((m.coeffs.gamma[0] - want).abs() < 1e-14);
    }

    #[test]
    fn regimes() {
        assert_eq!(regime_of(1.0, 0.15 * PI * PI), Regime::Forward);
        assert_eq!(regime_of(1.0, 0.25 * PI * PI), Regime::Backward);
        assert_eq!(regime_of(1.0, 2.0), Regime::Boundary);
        assert_eq!(regime_of(1.0, 1.0), Regime::Boundary);
    }

    #[test]
    fn l2_vanishes_at_resonance() {
        let g = Grid::new(1.0, 51).unwrap();
        let m = build_model(1.0, 1, 1.0, 0.1, 1.0 / (PI * PI), &g).unwrap();
        assert!(closed_form_expansion(&m).l2.abs() < 1e-15);
    }

    #[test]
    fn constant_model_has_no_hypotheses() {
        let c = CoefficientSet::constant(Grid::new(1.0, 51).unwrap(), 2.0, 1.0, 1.0).unwrap();
        let e = principal_pair(&c).unwrap();
        let h = check_hypotheses(&c, &e);
        assert!(!h.ratio_nonconstant && !h.mean_ratio && !h.backward && !h.forward);
    }
}
