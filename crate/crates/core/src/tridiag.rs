//! Tridiagonal matrices and the Thomas algorithm.
//!
//! Every linear solve in the crate (inverse iteration, Newton steps for the
//! logistic family, the derivative equation, implicit diffusion) is
//! tridiagonal because the mesh is one dimensional.

use crate::error::{AtlasError, Result};

/// Square tridiagonal matrix stored by diagonals.
///
/// `lower[i]` multiplies `x[i]` in row `i + 1`, `upper[i]` multiplies
/// `x[i + 1]` in row `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Result of a Thomas factorisation: the solution together with the
/// elimination pivots (their signs give the inertia of symmetrisable
/// matrices).
#[derive(Debug, Clone)]
pub struct ThomasSolution {
    pub x: Vec<f64>,
    pub pivots: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Self {
        let n = diag.len();
        assert!(n >= 1, "empty tridiagonal matrix");
        assert_eq!(lower.len(), n - 1, "lower diagonal length");
        assert_eq!(upper.len(), n - 1, "upper diagonal length");
        Tridiagonal { lower, diag, upper }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `alpha * self + diag(shift)`.
    pub fn scaled_plus_diag(&self, alpha: f64, shift: &[f64]) -> Tridiagonal {
        assert_eq!(shift.len(), self.len());
        Tridiagonal {
            lower: self.lower.iter().map(|a| alpha * a).collect(),
            diag: self
                .diag
                .iter()
                .zip(shift)
                .map(|(d, s)| alpha * d + s)
                .collect(),
            upper: self.upper.iter().map(|a| alpha * a).collect(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.len()];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        assert_eq!(x.len(), n);
        assert_eq!(y.len(), n);
        if n == 1 {
            y[0] = self.diag[0] * x[0];
            return;
        }
        y[0] = self.diag[0] * x[0] + self.upper[0] * x[1];
        for i in 1..n - 1 {
            y[i] = self.lower[i - 1] * x[i - 1] + self.diag[i] * x[i] + self.upper[i] * x[i + 1];
        }
        y[n - 1] = self.lower[n - 2] * x[n - 2] + self.diag[n - 1] * x[n - 1];
    }

    /// Thomas algorithm without pivoting.
    ///
    /// Fails when a pivot is (relatively) zero, which for the operators in
    /// this crate signals a fold of the discrete problem.
    pub fn solve(&self, rhs: &[f64]) -> Result<ThomasSolution> {
        let n = self.len();
        if rhs.len() != n {
            return Err(AtlasError::solver(format!(
                "tridiagonal solve: rhs length {} != {}",
                rhs.len(),
                n
            )));
        }
        let scale = self
            .diag
            .iter()
            .chain(&self.lower)
            .chain(&self.upper)
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        let tiny = scale * 1e-15 * n as f64;

        let mut c_prime = vec![0.0; n];
        let mut d_prime = vec![0.0; n];
        let mut pivots = vec![0.0; n];

        let mut pivot = self.diag[0];
        if pivot.abs() <= tiny || !pivot.is_finite() {
            return Err(AtlasError::solver(
                "tridiagonal solve: singular pivot at row 0",
            ));
        }
        pivots[0] = pivot;
        if n > 1 {
            c_prime[0] = self.upper[0] / pivot;
        }
        d_prime[0] = rhs[0] / pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.lower[i - 1] * c_prime[i - 1];
            if pivot.abs() <= tiny || !pivot.is_finite() {
                return Err(AtlasError::solver(format!(
                    "tridiagonal solve: singular pivot at row {i}"
                )));
            }
            pivots[i] = pivot;
            if i < n - 1 {
                c_prime[i] = self.upper[i] / pivot;
            }
            d_prime[i] = (rhs[i] - self.lower[i - 1] * d_prime[i - 1]) / pivot;
        }

        let mut x = d_prime;
        for i in (0..n - 1).rev() {
            x[i] -= c_prime[i] * x[i + 1];
        }
        Ok(ThomasSolution { x, pivots })
    }

    /// Number of positive pivots of the LU factorisation (no pivoting).
    ///
    /// For a matrix that becomes symmetric after a positive diagonal row
    /// scaling this is the number of positive eigenvalues (Sylvester).
    pub fn positive_pivot_count(&self) -> Result<usize> {
        let zeros = vec![0.0; self.len()];
        Ok(self
            .solve(&zeros)?
            .pivots
            .iter()
            .filter(|p| **p > 0.0)
            .count())
    }
}

/// Thomas factorisation kept around for repeated solves with one matrix.
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    lower: Vec<f64>,
    c_prime: Vec<f64>,
    pivots: Vec<f64>,
}

impl TridiagonalLu {
    pub fn new(m: &Tridiagonal) -> Result<Self> {
        let n = m.len();
        let zeros = vec![0.0; n];
        let sol = m.solve(&zeros)?;
        let mut c_prime: Vec<f64> = m
            .upper
            .iter()
            .zip(&sol.pivots)
            .map(|(u, p)| u / p)
            .collect();
        c_prime.resize(n, 0.0);
        Ok(TridiagonalLu {
            lower: m.lower.clone(),
            c_prime,
            pivots: sol.pivots,
        })
    }

    pub fn pivots(&self) -> &[f64] {
        &self.pivots
    }

    pub fn solve_into(&self, rhs: &[f64], x: &mut [f64]) {
        let n = self.pivots.len();
        assert_eq!(rhs.len(), n);
        assert_eq!(x.len(), n);
        x[0] = rhs[0] / self.pivots[0];
        for i in 1..n {
            x[i] = (rhs[i] - self.lower[i - 1] * x[i - 1]) / self.pivots[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.c_prime[i] * x[i + 1];
        }
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; rhs.len()];
        self.solve_into(rhs, &mut x);
        x
    }
}
