//! Limits of the endemic equilibria as `d_S → 0`: the nonlocal limit
//! problem
//!
//! `d_I Δu + ((R0/R1) β (1 − d_I u)/avg(1 − d_I u) − γ) u = 0`,
//!
//! the constant-`I` limit of the maximal branch, and the `O(d_S)` scaling of
//! the minimal branch.
//!
//! With `a = avg(1 − d_I u)` the limit problem is the logistic family at
//! `l = r0 l*/a`, and consistency of `a` is exactly `N_dI(l) = r0`. Its
//! solutions are therefore the logistic profiles at the roots of the
//! `d_S = 0` curve.

use serde::{Deserialize, Serialize};

use crate::curves::{classify, curve_sample, LogisticScan};
use crate::domain::Field;
use crate::error::{AtlasError, Result};
use crate::logistic::solve_u;
use crate::spectral::{CoefficientSet, EigenPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Branch {
    Low,
    High,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LimitProfile {
    pub branch: Branch,
    pub r0: f64,
    /// Root `l°` of `N_dI(l°) = r0`; absent for the constant-`I` limit.
    pub l: Option<f64>,
    pub u_star: Option<Field>,
    pub s_star: Field,
    /// Constant infected limit of the maximal branch.
    pub i_star: Option<Field>,
    /// `‖·‖∞` residual of the nonlocal problem at `u_star`.
    pub residual: Option<f64>,
    /// `‖u_fixed_point − u_star‖∞` from the frozen-normalisation iteration.
    pub cross_check: Option<f64>,
}

/// `‖d_I Δu + (r0 l* β(1 − d_I u)/avg(1 − d_I u) − γ)u‖∞`.
pub fn nonlocal_residual(coeffs: &CoefficientSet, eig: &EigenPair, r0: f64, u: &[f64]) -> f64 {
    let g = &coeffs.grid;
    let one_minus: Vec<f64> = u.iter().map(|x| 1.0 - coeffs.d_i * x).collect();
    let a = g.average(&one_minus);
    let lap = g.laplacian().apply(u);
    (0..u.len())
        .map(|i| {
            let reac = r0 * eig.l_star * coeffs.beta[i] * one_minus[i] / a - coeffs.gamma[i];
            (coeffs.d_i * lap[i] + reac * u[i]).abs()
        })
        .fold(0.0, f64::max)
}

/// `min(1, scan minimum, tail limit)` of `N_dI`, without the refinement done
/// by the full threshold computation.
fn coarse_low(scan: &LogisticScan) -> f64 {
    let scan_min = scan.samples(0.0).iter().map(|s| s.n_di).fold(1.0, f64::min);
    scan_min.min(scan.tail_limit())
}

/// All roots of `N_dI(l) = r0` on the scan, refined, in increasing `l`.
pub fn d_s_zero_roots(scan: &mut LogisticScan, r0: f64) -> Result<Vec<f64>> {
    scan.ensure_tail()?;
    let mut nodes = vec![(scan.eig().l_star, 1.0)];
    nodes.extend(scan.samples(0.0).iter().map(|s| (s.l, s.n_di)));
    let mut roots = Vec::new();
    for (k, w) in nodes.windows(2).enumerate() {
        let ((la, fa), (lb, fb)) = ((w[0].0, w[0].1 - r0), (w[1].0, w[1].1 - r0));
        if k == 0 && fa == 0.0 {
            continue;
        }
        if fb == 0.0 {
            roots.push(lb);
        } else if fa != 0.0 && (fa > 0.0) != (fb > 0.0) {
            roots.push(bisect_n_di(scan, r0, la, fa, lb)?);
        }
    }
    Ok(roots)
}

fn bisect_n_di(scan: &LogisticScan, r0: f64, mut a: f64, fa: f64, mut b: f64) -> Result<f64> {
    let mut best = (f64::INFINITY, 0.5 * (a + b));
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = scan.curve_at(m, 0.0)?.n_di - r0;
        if fm.abs() < best.0 {
            best = (fm.abs(), m);
        }
        if fm == 0.0 || (b - a) <= 4.0 * f64::EPSILON * b {
            break;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    if best.0 > 1e-9 {
        return Err(AtlasError::solver(format!(
            "root of N_dI = {r0} not resolved (residual {:e})",
            best.0
        )));
    }
    Ok(best.1)
}

/// Frozen-normalisation fixed point `a ↦ avg(1 − d_I u^{r0 l*/a})`,
/// accelerated by Steffensen's method, started from `a0`.
pub fn frozen_fixed_point(
    coeffs: &CoefficientSet,
    eig: &EigenPair,
    r0: f64,
    a0: f64,
) -> Result<Field> {
    let g = &coeffs.grid;
    let map = |a: f64, warm: Option<&[f64]>| -> Result<(f64, Field)> {
        let l = r0 * eig.l_star / a;
        let u = solve_u(coeffs, eig, l, warm)?;
        let avg = 1.0 - coeffs.d_i * g.average(&u);
        Ok((avg, u))
    };
    let mut a = a0;
    let (mut ga, mut u) = map(a, None)?;
    for _ in 0..100 {
        let (gga, u2) = map(ga, Some(&u))?;
        let denom = gga - 2.0 * ga + a;
        let next = if denom.abs() > 1e-300 {
            a - (ga - a) * (ga - a) / denom
        } else {
            gga
        };
        if !(next > 0.0 && next < 1.0 && next.is_finite()) {
            return Err(AtlasError::solver(
                "frozen-normalisation iteration left (0, 1)",
            ));
        }
        let (g_next, u_next) = map(next, Some(&u2))?;
        let change = u_next.dist_inf(&u);
        a = next;
        ga = g_next;
        u = u_next;
        if change <= 1e-10 && (ga - a).abs() <= 1e-13 {
            return Ok(u);
        }
    }
    Err(AtlasError::solver(
        "frozen-normalisation iteration did not stagnate",
    ))
}

pub fn solve_nonlocal(scan: &mut LogisticScan, r0: f64, branch: Branch) -> Result<LimitProfile> {
    if !(r0 > 0.0) || !r0.is_finite() {
        return Err(AtlasError::config(format!("R0 must be positive, got {r0}")));
    }
    if r0 == 1.0 {
        return Err(AtlasError::domain("the limit problem requires R0 != 1"));
    }
    let low = coarse_low(scan);
    if r0 <= low {
        return Err(AtlasError::domain(format!(
            "R0 = {r0} does not exceed the low threshold {low}"
        )));
    }
    let tail = scan.tail_limit();
    if branch == Branch::High && r0 >= tail {
        return Err(AtlasError::domain(format!(
            "high branch of the limit problem needs R0 < avg(gamma/beta) R1 = {tail}, got {r0}"
        )));
    }
    let roots = d_s_zero_roots(scan, r0)?;
    let l = match branch {
        Branch::Low => roots.first(),
        Branch::High => roots.last(),
    }
    .copied()
    .ok_or_else(|| {
        AtlasError::domain(format!(
            "N_dI never equals R0 = {r0}: no solution of the limit problem"
        ))
    })?;

    let coeffs = scan.coeffs().clone();
    let eig = scan.eig().clone();
    let p = scan.point_at(l)?;
    let u = p.u;
    let residual = nonlocal_residual(&coeffs, &eig, r0, &u);

    // Independent start: the normalisation at the nearest scan sample.
    let k = scan
        .points()
        .partition_point(|q| q.l <= l)
        .saturating_sub(1);
    let a0 = 1.0 - coeffs.d_i * scan.points()[k].int_u / coeffs.length();
    let cross_check = frozen_fixed_point(&coeffs, &eig, r0, a0)
        .ok()
        .map(|w| w.dist_inf(&u));

    let s_star = u.map(|x| l * (1.0 - coeffs.d_i * x));
    Ok(LimitProfile {
        branch,
        r0,
        l: Some(l),
        u_star: Some(u),
        s_star,
        i_star: None,
        residual: Some(residual),
        cross_check,
    })
}

/// `S → γ/β`, `I → r0 l* − avg(γ/β)` for `r0 > avg(γ/β) R1`.
pub fn predict_high_profile(
    coeffs: &CoefficientSet,
    eig: &EigenPair,
    r0: f64,
) -> Result<LimitProfile> {
    let g = &coeffs.grid;
    let gb = coeffs.gamma_over_beta();
    let mean = g.average(&gb);
    let level = r0 * eig.l_star - mean;
    if !(level > 0.0) {
        return Err(AtlasError::domain(format!(
            "constant-I limit needs R0 > avg(gamma/beta) R1 = {}, got {r0}",
            mean * eig.r1
        )));
    }
    Ok(LimitProfile {
        branch: Branch::High,
        r0,
        l: None,
        u_star: None,
        s_star: gb,
        i_star: Some(g.constant(level)),
        residual: None,
        cross_check: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ScalingRegime {
    /// `R0_low < R0 < min(1, avg(γ/β) R1)`: both branches solve the limit problem.
    BothNonlocal,
    /// `avg(γ/β) R1 < R0 < 1`: the maximal branch has constant `I` in the limit.
    HighConstant,
    /// `R0 > 1`.
    AboveOne,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScalingRow {
    pub d_s: f64,
    pub roots: usize,
    pub l_low: f64,
    pub l_high: f64,
    /// `‖I_low‖∞ / d_S`.
    pub max_ratio: f64,
    /// `min I_low / d_S`.
    pub min_ratio: f64,
    pub s_low_error: f64,
    pub s_high_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScalingReport {
    pub regime: ScalingRegime,
    pub branch: Branch,
    pub r0: f64,
    pub rows: Vec<ScalingRow>,
    /// Largest over smallest of all ratios in the table.
    pub band: f64,
    pub band_ok: bool,
    pub s_low_decreasing: bool,
    pub s_high_decreasing: bool,
    /// `l_low` increases and `l_high` decreases with `d_S`.
    pub monotone_roots: bool,
    pub pass: bool,
}

fn strictly_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] < w[0])
}

/// `d_s_values` must be decreasing.
pub fn verify_scaling(
    scan: &mut LogisticScan,
    r0: f64,
    d_s_values: &[f64],
) -> Result<ScalingReport> {
    if d_s_values.len() < 2 || d_s_values.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(AtlasError::config(
            "d_S values must be strictly decreasing, at least two",
        ));
    }
    let tail = scan.tail_limit();
    let regime = if r0 > 1.0 {
        ScalingRegime::AboveOne
    } else if r0 < tail {
        ScalingRegime::BothNonlocal
    } else {
        ScalingRegime::HighConstant
    };
    let low = solve_nonlocal(scan, r0, Branch::Low)?;
    let high_target = match regime {
        ScalingRegime::BothNonlocal => solve_nonlocal(scan, r0, Branch::High)?.s_star,
        _ => predict_high_profile(scan.coeffs(), scan.eig(), r0)?.s_star,
    };
    let mut rows = Vec::with_capacity(d_s_values.len());
    for &d_s in d_s_values {
        let set = classify(scan, r0, d_s)?;
        let (first, last) = match (set.roots.first(), set.roots.last()) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(AtlasError::domain(format!(
                    "no equilibrium at R0 = {r0}, d_S = {d_s}"
                )))
            }
        };
        rows.push(ScalingRow {
            d_s,
            roots: set.count,
            l_low: first.l,
            l_high: last.l,
            max_ratio: first.i.max() / d_s,
            min_ratio: first.i.min() / d_s,
            s_low_error: first.s.dist_inf(&low.s_star),
            s_high_error: last.s.dist_inf(&high_target),
        });
    }
    let ratios: Vec<f64> = rows
        .iter()
        .flat_map(|r| [r.max_ratio, r.min_ratio])
        .collect();
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let band = hi / lo;
    let band_ok = lo > 0.0 && band <= 50.0;
    let s_low: Vec<f64> = rows.iter().map(|r| r.s_low_error).collect();
    let s_high: Vec<f64> = rows.iter().map(|r| r.s_high_error).collect();
    let s_low_decreasing = strictly_decreasing(&s_low);
    let s_high_decreasing = strictly_decreasing(&s_high);
    // Rows run with decreasing d_S.
    let monotone_roots = rows
        .windows(2)
        .all(|w| w[1].l_low <= w[0].l_low && w[1].l_high >= w[0].l_high);
    Ok(ScalingReport {
        regime,
        branch: Branch::Low,
        r0,
        rows,
        band,
        band_ok,
        s_low_decreasing,
        s_high_decreasing,
        monotone_roots,
        pass: band_ok && s_low_decreasing && s_high_decreasing,
    })
}

/// Curve values at a profile's root, for consistency checks.
pub fn limit_curve_value(scan: &LogisticScan, profile: &LimitProfile) -> Result<Option<f64>> {
    match profile.l {
        Some(l) => {
            let p = scan.point_at(l)?;
            Ok(Some(
                curve_sample(scan.coeffs(), scan.eig(), 0.0, l, p.int_u, p.int_lv).n_di,
            ))
        }
        None => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curves::ScanOptions;
    use crate::domain::Grid;
    use crate::spectral::principal_pair;

    fn constant_scan() -> LogisticScan {
        let c = CoefficientSet::constant(Grid::new(1.0, 51).unwrap(), 2.0, 1.0, 1.0).unwrap();
        let e = principal_pair(&c).unwrap();
        let opts = ScanOptions {
            points_per_decade: 20,
            ..ScanOptions::default()
        };
        LogisticScan::new(&c, &e, opts).unwrap()
    }

    #[test]
    fn constants_have_no_limit_branch() {
        let mut s = constant_scan();
        for r0 in [0.5, 0.99, 1.5] {
            let e = solve_nonlocal(&mut s, r0, Branch::Low).unwrap_err();
            assert!(matches!(e, AtlasError::Domain(_)), "{e}");
        }
    }

    #[test]
    fn constant_high_profile() {
        let s = constant_scan();
        let p = predict_high_profile(s.coeffs(), s.eig(), 2.0).unwrap();
        assert!(p.s_star.iter().all(|v| (v - 0.5).abs() < 1e-14));
        assert!(p.i_star.unwrap().iter().all(|v| (v - 0.5).abs() < 1e-12));
        assert!(matches!(
            predict_high_profile(s.coeffs(), s.eig(), 0.9),
            Err(AtlasError::Domain(_))
        ));
    }
}
