//! The curves `N_dI(l)` and `N_dI,dS(l)` whose level sets are the endemic
//! equilibria, their critical thresholds, and equilibrium classification.
//!
//! Everything here is driven by one [`LogisticScan`]: the logistic family
//! does not depend on `d_S`, so a single sweep serves every `d_S`.

use serde::{Deserialize, Serialize};

use crate::domain::Field;
use crate::error::{AtlasError, Result};
use crate::logistic::{
    logistic_point, next_point, solve_v, threshold_expansion, LogisticPoint, ThresholdExpansion,
};
use crate::spectral::{CoefficientSet, EigenPair};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CurveSample {
    pub l: f64,
    #[serde(rename = "nDI")]
    pub n_di: f64,
    #[serde(rename = "nDIDS")]
    pub n_dids: f64,
    pub slope: f64,
    pub int_u: f64,
    #[serde(rename = "intLV")]
    pub int_lv: f64,
}

/// Curve values from the two integrals of a logistic point.
pub fn curve_sample(
    coeffs: &CoefficientSet,
    eig: &EigenPair,
    d_s: f64,
    l: f64,
    int_u: f64,
    int_lv: f64,
) -> CurveSample {
    let len = coeffs.length();
    let n_di = l * (1.0 - coeffs.d_i * int_u / len) * eig.r1;
    let n_dids = n_di + d_s * l * int_u / (eig.l_star * len);
    let slope = (len + (d_s - coeffs.d_i) * (int_u + int_lv)) / (eig.l_star * len);
    CurveSample {
        l,
        n_di,
        n_dids,
        slope,
        int_u,
        int_lv,
    }
}

/// Limit values at `l = l*`.
pub fn threshold_sample(
    coeffs: &CoefficientSet,
    eig: &EigenPair,
    ex: &ThresholdExpansion,
    d_s: f64,
) -> CurveSample {
    CurveSample {
        l: eig.l_star,
        n_di: 1.0,
        n_dids: 1.0,
        slope: ex.slope_with(coeffs, eig, d_s),
        int_u: 0.0,
        int_lv: ex.i0,
    }
}

pub fn eval_curve(
    coeffs: &CoefficientSet,
    eig: &EigenPair,
    d_s: f64,
    l: f64,
) -> Result<CurveSample> {
    if l == eig.l_star {
        return Ok(threshold_sample(
            coeffs,
            eig,
            &threshold_expansion(coeffs, eig),
            d_s,
        ));
    }
    let p = logistic_point(coeffs, eig, l, None)?;
    Ok(curve_sample(coeffs, eig, d_s, l, p.int_u, p.int_lv))
}

/// `lim_{l→∞} dN_dI,dS/dl = d_S / (d_I l*)`.
pub fn slope_limit_check(d_s: f64, d_i: f64, l_star: f64) -> f64 {
    d_s / (d_i * l_star)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScanOptions {
    pub points_per_decade: usize,
    /// Smallest sampled `l/l* − 1`.
    pub offset_min: f64,
    /// Initial largest `l/l* − 1`; the scan grows by decades beyond it.
    pub offset_max: f64,
    /// Hard cap on `l/l* − 1`.
    pub offset_limit: f64,
    /// Required `|N_dI(l_max) − avg(γ/β) R1|`.
    pub tail_tol: f64,
    /// Re-check slope sign changes at interval midpoints.
    pub check_refinement: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            points_per_decade: 400,
            offset_min: 1e-6,
            offset_max: 1e4,
            offset_limit: 1e12,
            tail_tol: 1e-3,
            check_refinement: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub l: f64,
    pub u: Field,
    pub int_u: f64,
    pub int_lv: f64,
}

/// Sweep of the logistic family over `l/l* − 1` log-spaced.
#[derive(Debug, Clone)]
pub struct LogisticScan {
    coeffs: CoefficientSet,
    eig: EigenPair,
    expansion: ThresholdExpansion,
    opts: ScanOptions,
    points: Vec<ScanPoint>,
    /// Largest offset exponent sampled so far, in units of 1/points_per_decade.
    last_step: i64,
    // Tangent of the last point, for extending the sweep.
    last_v: Field,
}

impl LogisticScan {
    pub fn new(coeffs: &CoefficientSet, eig: &EigenPair, opts: ScanOptions) -> Result<Self> {
        if opts.points_per_decade == 0
            || !(opts.offset_min > 0.0)
            || !(opts.offset_max > opts.offset_min)
        {
            return Err(AtlasError::config("invalid scan range"));
        }
        let ppd = opts.points_per_decade as f64;
        let first = (opts.offset_min.log10() * ppd).round() as i64;
        let last = (opts.offset_max.log10() * ppd).round() as i64;
        let mut scan = LogisticScan {
            coeffs: coeffs.clone(),
            eig: eig.clone(),
            expansion: threshold_expansion(coeffs, eig),
            opts,
            points: Vec::new(),
            last_step: first - 1,
            last_v: Field(Vec::new()),
        };
        scan.sweep_to(last)?;
        Ok(scan)
    }

    fn l_of_step(&self, k: i64) -> f64 {
        let offset = 10f64.powf(k as f64 / self.opts.points_per_decade as f64);
        self.eig.l_star * (1.0 + offset)
    }

    fn sweep_to(&mut self, last: i64) -> Result<()> {
        let mut prev: Option<LogisticPoint> = self.points.last().map(|p| LogisticPoint {
            l: p.l,
            u: p.u.clone(),
            v: self.last_v.clone(),
            int_u: p.int_u,
            int_lv: p.int_lv,
            z: Field(Vec::new()),
        });
        for k in self.last_step + 1..=last {
            let l = self.l_of_step(k);
            let pt = match &prev {
                Some(p) => next_point(&self.coeffs, &self.eig, p, l),
                None => logistic_point(&self.coeffs, &self.eig, l, None),
            }
            .map_err(|e| match e {
                AtlasError::Solver(m) => AtlasError::solver(format!("scan failed at l = {l}: {m}")),
                other => other,
            })?;
            self.points.push(ScanPoint {
                l,
                u: pt.u.clone(),
                int_u: pt.int_u,
                int_lv: pt.int_lv,
            });
            self.last_v = pt.v.clone();
            prev = Some(pt);
        }
        self.last_step = last;
        Ok(())
    }

    /// Appends one decade; fails past `offset_limit`.
    pub fn extend_decade(&mut self) -> Result<()> {
        let next = self.last_step + self.opts.points_per_decade as i64;
        if self.l_of_step(next) / self.eig.l_star - 1.0 > self.opts.offset_limit * (1.0 + 1e-12) {
            return Err(AtlasError::solver(format!(
                "scan exhausted at l/l* - 1 = {:e}",
                self.opts.offset_limit
            )));
        }
        self.sweep_to(next)
    }

    pub fn coeffs(&self) -> &CoefficientSet {
        &self.coeffs
    }

    pub fn eig(&self) -> &EigenPair {
        &self.eig
    }

    pub fn expansion(&self) -> &ThresholdExpansion {
        &self.expansion
    }

    pub fn options(&self) -> &ScanOptions {
        &self.opts
    }

    pub fn points(&self) -> &[ScanPoint] {
        &self.points
    }

    pub fn l_max(&self) -> f64 {
        self.points.last().map(|p| p.l).unwrap_or(self.eig.l_star)
    }

    pub fn sample(&self, k: usize, d_s: f64) -> CurveSample {
        let p = &self.points[k];
        curve_sample(&self.coeffs, &self.eig, d_s, p.l, p.int_u, p.int_lv)
    }

    pub fn samples(&self, d_s: f64) -> Vec<CurveSample> {
        (0..self.points.len())
            .map(|k| self.sample(k, d_s))
            .collect()
    }

    /// Logistic point at any `l > l*`, warm-started from the nearest scan
    /// point at or below `l`.
    pub fn point_at(&self, l: f64) -> Result<LogisticPoint> {
        let k = self.points.partition_point(|p| p.l <= l);
        let base = &self.points[k.saturating_sub(1)];
        if base.l == l {
            let v = solve_v(&self.coeffs, l, &base.u)?;
            return Ok(LogisticPoint {
                l,
                u: base.u.clone(),
                z: base.u.map(|x| l * (1.0 - self.coeffs.d_i * x)),
                v,
                int_u: base.int_u,
                int_lv: base.int_lv,
            });
        }
        let v = solve_v(&self.coeffs, base.l, &base.u)?;
        let prev = LogisticPoint {
            l: base.l,
            u: base.u.clone(),
            v,
            int_u: base.int_u,
            int_lv: base.int_lv,
            z: Field(Vec::new()),
        };
        next_point(&self.coeffs, &self.eig, &prev, l)
    }

    pub fn curve_at(&self, l: f64, d_s: f64) -> Result<CurveSample> {
        if l <= self.eig.l_star {
            return Ok(threshold_sample(
                &self.coeffs,
                &self.eig,
                &self.expansion,
                d_s,
            ));
        }
        let p = self.point_at(l)?;
        Ok(curve_sample(
            &self.coeffs,
            &self.eig,
            d_s,
            l,
            p.int_u,
            p.int_lv,
        ))
    }

    /// `avg(γ/β) R1`, the `l → ∞` limit of `N_dI`.
    pub fn tail_limit(&self) -> f64 {
        self.coeffs.grid.average(&self.coeffs.gamma_over_beta()) * self.eig.r1
    }

    /// Grows the scan until `N_dI` at its end is within `tail_tol` of the
    /// analytic limit.
    pub fn ensure_tail(&mut self) -> Result<()> {
        let tail = self.tail_limit();
        loop {
            let last = self.sample(self.points.len() - 1, 0.0).n_di;
            if (last - tail).abs() <= self.opts.tail_tol {
                return Ok(());
            }
            self.extend_decade().map_err(|_| {
                AtlasError::solver(format!(
                    "N_dI did not reach its tail limit {tail} (last value {last}) by l/l* - 1 = {:e}",
                    self.opts.offset_limit
                ))
            })?;
        }
    }

    /// Refines a sign change of the slope inside `(a, b)` by bisection.
    fn refine_critical(&self, mut a: f64, mut b: f64, d_s: f64) -> Result<CurveSample> {
        let sa = self.curve_at(a, d_s)?.slope;
        let mut mid = self.curve_at(0.5 * (a + b), d_s)?;
        for _ in 0..200 {
            if (b - a) <= 1e-13 * b {
                break;
            }
            let m = 0.5 * (a + b);
            mid = self.curve_at(m, d_s)?;
            if mid.slope == 0.0 {
                break;
            }
            if (mid.slope > 0.0) == (sa > 0.0) {
                a = m;
            } else {
                b = m;
            }
        }
        Ok(mid)
    }

    /// Critical points of `N_dI,dS` bracketed on the scan, in increasing `l`.
    pub fn critical_points(&self, d_s: f64) -> Result<Vec<CurveSample>> {
        let mut nodes = vec![threshold_sample(
            &self.coeffs,
            &self.eig,
            &self.expansion,
            d_s,
        )];
        nodes.extend(self.samples(d_s));
        let mut out = Vec::new();
        for w in nodes.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if a.slope != 0.0 && b.slope != 0.0 && (a.slope > 0.0) != (b.slope > 0.0) {
                out.push(self.refine_critical(a.l, b.l, d_s)?);
            } else if b.slope == 0.0 {
                out.push(*b);
            }
        }
        Ok(out)
    }

    /// Number of slope sign changes seen when every scan interval is split
    /// at its midpoint.
    pub fn refined_sign_changes(&self, d_s: f64) -> Result<usize> {
        let mut slopes = vec![self.expansion.slope_with(&self.coeffs, &self.eig, d_s)];
        for w in self.points.windows(2) {
            slopes.push(self.curve_at(w[0].l, d_s)?.slope);
            slopes.push(self.curve_at(0.5 * (w[0].l + w[1].l), d_s)?.slope);
        }
        slopes.push(self.sample(self.points.len() - 1, d_s).slope);
        Ok(count_sign_changes(&slopes))
    }
}

fn count_sign_changes(xs: &[f64]) -> usize {
    let signs: Vec<bool> = xs.iter().filter(|x| **x != 0.0).map(|x| *x > 0.0).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum LowSource {
    /// Attained on the sampled range (including `N_dI(l*) = 1`).
    Scan,
    /// The `l → ∞` limit is below every sample.
    Tail,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct R0Thresholds {
    pub r01: f64,
    pub r02: f64,
    pub r03: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Thresholds {
    pub r0_low: f64,
    pub r0_low_scan: f64,
    /// Location of the scan candidate (`l*` when the curve never dips below 1).
    pub r0_low_scan_l: f64,
    pub r0_low_tail: f64,
    pub r0_low_source: LowSource,
    /// `(d_I/|Ω|) sup_l ∫(u + l v)`.
    pub m_star_sup: f64,
    pub d_low: f64,
    /// `d_I − |Ω|/I0` when positive: below it the curve leaves `l*` downward.
    pub d2_star: f64,
    pub slope_at_l_star: f64,
    pub d_s: Option<f64>,
    pub r0_thresh: Option<R0Thresholds>,
    pub segment_breaks: Vec<f64>,
    pub critical_values: Vec<f64>,
    /// Sign changes found on the scan and on the midpoint-refined scan agree.
    pub segments_stable: Option<bool>,
}

/// `d_I − |Ω|/I0`, clipped at zero.
pub fn d2_star(coeffs: &CoefficientSet, ex: &ThresholdExpansion) -> f64 {
    (coeffs.d_i - coeffs.length() / ex.i0).max(0.0)
}

/// Golden-section minimisation of `N_dI` on `[a, b]`.
fn golden_min(scan: &LogisticScan, mut a: f64, mut b: f64) -> Result<(f64, f64)> {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let f = |l: f64| scan.curve_at(l, 0.0).map(|s| s.n_di);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..200 {
        if (b - a) <= 1e-10 * b {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

pub fn compute_thresholds(scan: &mut LogisticScan, d_s: Option<f64>) -> Result<Thresholds> {
    if let Some(d) = d_s {
        if !(d >= 0.0) || !d.is_finite() {
            return Err(AtlasError::config(format!(
                "d_S must be nonnegative, got {d}"
            )));
        }
    }
    scan.ensure_tail()?;
    let coeffs = scan.coeffs().clone();
    let eig = scan.eig().clone();
    let ex = *scan.expansion();
    let len = coeffs.length();
    let base = scan.samples(0.0);

    let (mut j, mut lowest) = (usize::MAX, 1.0);
    for (k, s) in base.iter().enumerate() {
        if s.n_di < lowest {
            lowest = s.n_di;
            j = k;
        }
    }
    let (mut scan_l, mut scan_min) = (eig.l_star, 1.0);
    if j != usize::MAX {
        scan_l = base[j].l;
        scan_min = base[j].n_di;
        if j + 1 < base.len() {
            let a = if j == 0 {
                eig.l_star * (1.0 + 1e-12)
            } else {
                base[j - 1].l
            };
            let (lm, fm) = golden_min(scan, a, base[j + 1].l)?;
            if fm < scan_min {
                scan_l = lm;
                scan_min = fm;
            }
        }
    }
    let tail = scan.tail_limit();
    let (r0_low, source) = if tail < scan_min {
        (tail, LowSource::Tail)
    } else {
        (scan_min, LowSource::Scan)
    };

    let sup = scan
        .points()
        .iter()
        .map(|p| p.int_u + p.int_lv)
        .fold(ex.i0.max(len / coeffs.d_i), f64::max);
    let m_star_sup = coeffs.d_i * sup / len;
    let d_low = ((1.0 - 1.0 / m_star_sup) * coeffs.d_i).max(0.0);

    let d_eff = d_s.unwrap_or(0.0);
    let crit = scan.critical_points(d_eff)?;
    let segment_breaks: Vec<f64> = crit.iter().map(|c| c.l).collect();
    let critical_values: Vec<f64> = crit.iter().map(|c| c.n_dids).collect();
    let slope0 = ex.slope_with(&coeffs, &eig, d_eff);
    let r0_thresh = match d_s {
        Some(_) if crit.len() >= 2 && slope0 > 0.0 => {
            let r02 = critical_values[0];
            let r01 = critical_values
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            let r03 = critical_values.iter().copied().fold(1.0, f64::max);
            Some(R0Thresholds { r01, r02, r03 })
        }
        _ => None,
    };
    let segments_stable = if scan.options().check_refinement {
        Some(scan.refined_sign_changes(d_eff)? == crit.len())
    } else {
        None
    };

    Ok(Thresholds {
        r0_low,
        r0_low_scan: scan_min,
        r0_low_scan_l: scan_l,
        r0_low_tail: tail,
        r0_low_source: source,
        m_star_sup,
        d_low,
        d2_star: d2_star(&coeffs, &ex),
        slope_at_l_star: ex.slope_at_l_star,
        d_s,
        r0_thresh,
        segment_breaks,
        critical_values,
        segments_stable,
    })
}

/// Largest `d_S` for which `N_dI,dS` is certified to dip below `r0`:
/// `max_l (r0 − N_dI(l)) |Ω| l* / (l ∫u^l)` over scan points with
/// `N_dI(l) < r0`. Zero when no sample lies below `r0`.
pub fn d1_star(scan: &LogisticScan, r0: f64) -> f64 {
    let len = scan.coeffs().length();
    let ls = scan.eig().l_star;
    (0..scan.points().len())
        .map(|k| (scan.sample(k, 0.0), &scan.points()[k]))
        .filter(|(s, _)| s.n_di < r0)
        .map(|(s, p)| (r0 - s.n_di) * len * ls / (p.l * p.int_u))
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Equilibrium {
    pub l: f64,
    pub s: Field,
    pub i: Field,
    pub slope: f64,
    /// `|slope| < 1e-7`: a fold of the curve touches `r0`.
    pub degenerate: bool,
    pub minimal: bool,
    pub maximal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EquilibriumSet {
    pub r0: f64,
    pub d_s: f64,
    pub roots: Vec<Equilibrium>,
    pub count: usize,
}

const DEGENERATE_SLOPE: f64 = 1e-7;
const ROOT_TOL: f64 = 1e-9;

/// Illinois-modified regula falsi for `N_dI,dS(l) = r0` on a bracket.
fn refine_root(
    scan: &LogisticScan,
    r0: f64,
    d_s: f64,
    mut a: f64,
    mut fa: f64,
    mut b: f64,
    mut fb: f64,
) -> Result<(LogisticPoint, CurveSample)> {
    let mut side = 0i8;
    let mut best: Option<(LogisticPoint, CurveSample)> = None;
    for it in 0..300 {
        // Interleave bisection so a stalled end cannot stall the bracket.
        let m = if it % 4 == 3 {
            0.5 * (a + b)
        } else {
            let x = (a * fb - b * fa) / (fb - fa);
            if x > a && x < b {
                x
            } else {
                0.5 * (a + b)
            }
        };
        let p = scan.point_at(m)?;
        let s = curve_sample(scan.coeffs(), scan.eig(), d_s, m, p.int_u, p.int_lv);
        let fm = s.n_dids - r0;
        let better = best
            .as_ref()
            .is_none_or(|(_, bs)| (bs.n_dids - r0).abs() > fm.abs());
        if better {
            best = Some((p, s));
        }
        if fm.abs() <= 1e-13 * r0.max(1.0) || (b - a) <= 4.0 * f64::EPSILON * b {
            break;
        }
        if (fm > 0.0) == (fb > 0.0) {
            b = m;
            fb = fm;
            if side == 1 {
                fa *= 0.5;
            }
            side = 1;
        } else {
            a = m;
            fa = fm;
            if side == -1 {
                fb *= 0.5;
            }
            side = -1;
        }
    }
    let (p, s) = best.expect("at least one evaluation");
    if (s.n_dids - r0).abs() > ROOT_TOL {
        return Err(AtlasError::solver(format!(
            "root refinement stalled at l = {} with residual {:e}",
            s.l,
            s.n_dids - r0
        )));
    }
    Ok((p, s))
}

pub fn classify(scan: &mut LogisticScan, r0: f64, d_s: f64) -> Result<EquilibriumSet> {
    if !(r0 > 0.0) || !r0.is_finite() {
        return Err(AtlasError::config(format!("R0 must be positive, got {r0}")));
    }
    if !(d_s > 0.0) || !d_s.is_finite() {
        return Err(AtlasError::config(format!(
            "d_S must be positive, got {d_s}"
        )));
    }
    // Past the last sample the curve must be above r0 and increasing.
    loop {
        let n = scan.points().len();
        let ppd = scan.options().points_per_decade;
        let last = scan.sample(n - 1, d_s);
        let tail_ok = (n.saturating_sub(ppd)..n).all(|k| scan.sample(k, d_s).slope > 0.0);
        if last.n_dids > r0 && tail_ok {
            break;
        }
        scan.extend_decade()?;
    }

    let coeffs = scan.coeffs().clone();
    let eig = scan.eig().clone();
    let mut nodes = vec![threshold_sample(&coeffs, &eig, scan.expansion(), d_s)];
    nodes.extend(scan.samples(d_s));

    let mut found: Vec<(LogisticPoint, CurveSample)> = Vec::new();
    for k in 0..nodes.len() - 1 {
        let (a, b) = (&nodes[k], &nodes[k + 1]);
        let (fa, fb) = (a.n_dids - r0, b.n_dids - r0);
        if k == 0 && fa == 0.0 {
            // l* carries no equilibrium.
            continue;
        }
        if fb == 0.0 {
            let p = scan.point_at(b.l)?;
            found.push((p, *b));
        } else if fa != 0.0 && (fa > 0.0) != (fb > 0.0) {
            found.push(refine_root(scan, r0, d_s, a.l, fa, b.l, fb)?);
        }
    }
    // Tangential contacts at local extrema without a sign change.
    for k in 1..nodes.len() - 1 {
        let (a, c, b) = (&nodes[k - 1], &nodes[k], &nodes[k + 1]);
        let extremum = (c.slope > 0.0) != (b.slope > 0.0) || (a.slope > 0.0) != (c.slope > 0.0);
        if !extremum || (c.n_dids - r0).abs() > 1e-6 {
            continue;
        }
        let lo = if (a.slope > 0.0) != (c.slope > 0.0) {
            a.l
        } else {
            c.l
        };
        let hi = if lo == a.l { c.l } else { b.l };
        let crit = scan.refine_critical(lo, hi, d_s)?;
        let g = crit.n_dids - r0;
        let near_existing = found
            .iter()
            .any(|(_, s)| (s.l - crit.l).abs() <= 1e-6 * crit.l);
        if g.abs() <= ROOT_TOL && !near_existing {
            let p = scan.point_at(crit.l)?;
            found.push((p, crit));
        }
    }
    found.sort_by(|x, y| x.1.l.total_cmp(&y.1.l));
    found.dedup_by(|x, y| (x.1.l - y.1.l).abs() <= 1e-12 * y.1.l);

    let count = found.len();
    let roots = found
        .into_iter()
        .enumerate()
        .map(|(idx, (p, s))| Equilibrium {
            l: s.l,
            s: p.z.clone(),
            i: p.u.map(|x| d_s * s.l * x),
            slope: s.slope,
            degenerate: s.slope.abs() < DEGENERATE_SLOPE,
            minimal: idx == 0,
            maximal: idx + 1 == count,
        })
        .collect();
    Ok(EquilibriumSet {
        r0,
        d_s,
        roots,
        count,
    })
}

/// One point `(N_dI,dS(l), ∫I, l)` of the equilibrium branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DiagramPoint {
    pub r0: f64,
    pub i_norm: f64,
    pub l: f64,
}

pub fn bifurcation_diagram(
    coeffs: &CoefficientSet,
    eig: &EigenPair,
    d_s: f64,
    l_grid: &[f64],
) -> Result<Vec<DiagramPoint>> {
    let sweep = crate::logistic::continuation_sweep(coeffs, eig, l_grid)?;
    Ok(sweep
        .points
        .iter()
        .map(|p| {
            let s = curve_sample(coeffs, eig, d_s, p.l, p.int_u, p.int_lv);
            DiagramPoint {
                r0: s.n_dids,
                i_norm: d_s * p.l * p.int_u,
                l: p.l,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Grid;
    use crate::spectral::principal_pair;

    fn constants() -> (CoefficientSet, EigenPair) {
        let c = CoefficientSet::constant(Grid::new(1.0, 101).unwrap(), 2.0, 1.0, 1.0).unwrap();
        let e = principal_pair(&c).unwrap();
        (c, e)
    }

    fn small_scan(c: &CoefficientSet, e: &EigenPair) -> LogisticScan {
        let opts = ScanOptions {
            points_per_decade: 20,
            ..ScanOptions::default()
        };
        LogisticScan::new(c, e, opts).unwrap()
    }

    #[test]
    fn constant_curves() {
        let (c, e) = constants();
        let s = eval_curve(&c, &e, 1.0, 1.0).unwrap();
        assert!((s.n_di - 1.0).abs() < 1e-12);
        assert!((s.n_dids - 2.0).abs() < 1e-12);
        assert!((s.slope - 2.0).abs() < 1e-10);
        assert_eq!(slope_limit_check(1.0, 1.0, 0.5), 2.0);
        assert_eq!(slope_limit_check(0.0, 1.0, 0.5), 0.0);
    }

    #[test]
    fn constant_thresholds_and_roots() {
        let (c, e) = constants();
        let mut scan = small_scan(&c, &e);
        let t = compute_thresholds(&mut scan, Some(1.0)).unwrap();
        assert!((t.r0_low - 1.0).abs() < 1e-9);
        // v is ill-conditioned within ~1e-6 of l*, which bounds d_low from below.
        assert!(t.d_low.abs() < 1e-5, "{t:?}");
        let set = classify(&mut scan, 2.0, 1.0).unwrap();
        assert_eq!(set.count, 1);
        let r = &set.roots[0];
        assert!((r.l - 1.0).abs() < 1e-9);
        assert!(r.s.iter().all(|x| (x - 0.5).abs() < 1e-9));
        assert!(r.i.iter().all(|x| (x - 0.5).abs() < 1e-9));
        assert_eq!(classify(&mut scan, 0.9, 1.0).unwrap().count, 0);
        assert!(classify(&mut scan, -1.0, 1.0).unwrap_err().is_config());
    }

    #[test]
    fn constant_diagram_is_a_line() {
        let (c, e) = constants();
        let d = bifurcation_diagram(&c, &e, 1.0, &[0.6, 1.0, 3.0]).unwrap();
        for p in d {
            assert!((p.r0 - (1.0 + 2.0 * (p.l - 0.5))).abs() < 1e-10);
            assert!((p.i_norm - (p.l - 0.5)).abs() < 1e-10);
        }
    }
}
