//! Independent references: a dense symmetric eigensolver for `R1` and a
//! monotone Picard iteration for the logistic profile. Frozen values were
//! produced by the oracles below.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use sis_atlas::logistic::solve_u;
use sis_atlas::spectral::principal_pair;
use sis_atlas::{CoefficientSet, Grid};

fn nodes(n: usize) -> (f64, Vec<f64>) {
    let h = 1.0 / (n - 1) as f64;
    (h, (0..n).map(|i| i as f64 * h).collect())
}

/// Smallest `μ` of `(-d_I Δ + γ)φ = μ βφ` via the weighted symmetric form.
fn dense_r1(n: usize, beta: &[f64], gamma: &[f64], d_i: f64) -> f64 {
    let (h, _) = nodes(n);
    let w: Vec<f64> = (0..n)
        .map(|i| if i == 0 || i == n - 1 { h / 2.0 } else { h })
        .collect();
    // W(-Δ) is symmetric with off-diagonal -1/h.
    let mut c = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        let diag = if i == 0 || i == n - 1 {
            1.0 / h
        } else {
            2.0 / h
        };
        c[(i, i)] = d_i * diag + w[i] * gamma[i];
        if i + 1 < n {
            c[(i, i + 1)] = -d_i / h;
            c[(i + 1, i)] = -d_i / h;
        }
    }
    let scale: Vec<f64> = (0..n).map(|i| 1.0 / (w[i] * beta[i]).sqrt()).collect();
    for i in 0..n {
        for j in 0..n {
            c[(i, j)] *= scale[i] * scale[j];
        }
    }
    let mu = SymmetricEigen::new(c)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    1.0 / mu
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let (mut c, mut d) = (vec![0.0; n], vec![0.0; n]);
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i - 1] * c[i - 1];
        if i < n - 1 {
            c[i] = upper[i] / m;
        }
        d[i] = (rhs[i] - lower[i - 1] * d[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    d
}

/// Monotone iteration from the supersolution `1/d_I`.
fn picard_u(n: usize, beta: &[f64], gamma: &[f64], d_i: f64, l: f64) -> Vec<f64> {
    let (h, _) = nodes(n);
    let sigma = l * beta.iter().copied().fold(0.0, f64::max);
    let k = d_i / (h * h);
    let lower: Vec<f64> = (0..n - 1)
        .map(|i| if i == n - 2 { -2.0 * k } else { -k })
        .collect();
    let upper: Vec<f64> = (0..n - 1)
        .map(|i| if i == 0 { -2.0 * k } else { -k })
        .collect();
    let diag: Vec<f64> = (0..n).map(|i| 2.0 * k + gamma[i] + sigma).collect();
    let mut u = vec![1.0 / d_i; n];
    for _ in 0..200_000 {
        let rhs: Vec<f64> = (0..n)
            .map(|i| (l * beta[i] * (1.0 - d_i * u[i]) + sigma) * u[i])
            .collect();
        let next = thomas(&lower, &diag, &upper, &rhs);
        let change = next
            .iter()
            .zip(&u)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        u = next;
        if change < 1e-14 {
            break;
        }
    }
    u
}

fn cosine_model(n: usize) -> CoefficientSet {
    let g = Grid::new(1.0, n).unwrap();
    let beta = g.sample(|x| 1.0 + 0.5 * (PI * x).cos());
    CoefficientSet::new(g.clone(), beta, g.constant(1.0), 1.0).unwrap()
}

#[test]
fn principal_pair_matches_dense_eigensolver() {
    // Dense roundoff grows like cond ~ 4/h^2, hence the looser fine-grid bound.
    for (n, frozen, tol) in [
        (201, 1.0124954315924044, 1e-10),
        (2001, 1.0124951808993357, 1e-9),
    ] {
        let c = cosine_model(n);
        let oracle = dense_r1(n, &c.beta, &c.gamma, 1.0);
        assert!(
            (oracle - frozen).abs() <= tol * frozen,
            "oracle drifted: {oracle}"
        );
        let r1 = principal_pair(&c).unwrap().r1;
        assert!(
            (r1 - frozen).abs() <= tol * frozen,
            "n = {n}: {r1} vs {frozen}"
        );
    }
}

#[test]
fn logistic_profile_matches_monotone_iteration() {
    let n = 2001;
    let c = cosine_model(n);
    let e = principal_pair(&c).unwrap();
    let l = 2.0 * e.l_star;
    let p = picard_u(n, &c.beta, &c.gamma, 1.0, l);
    assert!((p[0] - 0.5161025761276824).abs() < 1e-9);
    assert!((p[n - 1] - 0.470642205865321).abs() < 1e-9);
    let u = solve_u(&c, &e, l, None).unwrap();
    let d = u
        .iter()
        .zip(&p)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(d < 1e-9, "{d:e}");
}
