//! Uniform mesh on `(0, L)`, trapezoid quadrature and the ghost-point
//! Neumann Laplacian.

use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{AtlasError, Result};
use crate::tridiag::Tridiagonal;

/// Uniform grid including both endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    length: f64,
    n: usize,
    h: f64,
    weights: Vec<f64>,
}

impl Grid {
    pub fn new(length: f64, n: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(AtlasError::config(format!(
                "domain length must be positive, got {length}"
            )));
        }
        if n < 3 {
            return Err(AtlasError::config(format!(
                "grid needs at least 3 nodes, got {n}"
            )));
        }
        let h = length / (n - 1) as f64;
        let mut weights = vec![h; n];
        weights[0] = 0.5 * h;
        weights[n - 1] = 0.5 * h;
        Ok(Grid {
            length,
            n,
            h,
            weights,
        })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Coordinate of node `i`. The last node is pinned to `L` exactly.
    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.length
        } else {
            i as f64 * self.h
        }
    }

    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field((0..self.n).map(|i| f(self.x(i))).collect())
    }

    pub fn constant(&self, value: f64) -> Field {
        Field(vec![value; self.n])
    }

    /// Wraps raw values, checking that they live on this grid.
    pub fn field(&self, values: Vec<f64>) -> Result<Field> {
        if values.len() != self.n {
            return Err(AtlasError::config(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                self.n
            )));
        }
        Ok(Field(values))
    }

    /// Trapezoid quadrature `w^T f`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.n);
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    pub fn average(&self, f: &[f64]) -> f64 {
        self.integrate(f) / self.length
    }

    /// `∫ f g` without allocating the product.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(f.iter().zip(g))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    pub fn laplacian(&self) -> NeumannLaplacian {
        NeumannLaplacian::new(self)
    }
}

/// Nodal values of a function on a [`Grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Field(pub Vec<f64>);

impl Field {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field(self.0.iter().map(|v| f(*v)).collect())
    }

    pub fn zip_map(&self, other: &[f64], f: impl Fn(f64, f64) -> f64) -> Field {
        assert_eq!(self.0.len(), other.len());
        Field(self.0.iter().zip(other).map(|(a, b)| f(*a, *b)).collect())
    }

    /// `max_i |self_i - other_i|`.
    pub fn dist_inf(&self, other: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(other)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl Deref for Field {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for Field {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Second-order Neumann Laplacian with ghost-point reflection.
///
/// Interior rows are `(u[i-1] - 2u[i] + u[i+1]) / h^2`; the boundary rows
/// read `2(u[1] - u[0]) / h^2` and `2(u[n-2] - u[n-1]) / h^2`. The
/// trapezoid weight vector is an exact left null vector.
#[derive(Debug, Clone, PartialEq)]
pub struct NeumannLaplacian {
    matrix: Tridiagonal,
}

impl NeumannLaplacian {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.len();
        let inv_h2 = 1.0 / (grid.spacing() * grid.spacing());
        let mut lower = vec![inv_h2; n - 1];
        let mut upper = vec![inv_h2; n - 1];
        let diag = vec![-2.0 * inv_h2; n];
        upper[0] = 2.0 * inv_h2;
        lower[n - 2] = 2.0 * inv_h2;
        NeumannLaplacian {
            matrix: Tridiagonal::new(lower, diag, upper),
        }
    }

    pub fn matrix(&self) -> &Tridiagonal {
        &self.matrix
    }

    pub fn apply(&self, f: &[f64]) -> Field {
        Field(self.matrix.matvec(f))
    }

    pub fn apply_into(&self, f: &[f64], out: &mut [f64]) {
        self.matrix.matvec_into(f, out);
    }

    /// `coef * Δ + diag(shift)`.
    pub fn shifted(&self, coef: f64, shift: &[f64]) -> Tridiagonal {
        self.matrix.scaled_plus_diag(coef, shift)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_grid_spacing_and_weights() {
        let g = Grid::new(1.0, 101).unwrap();
        assert!((g.spacing() - 0.01).abs() < 1e-15);
        assert!((g.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn five_node_weights() {
        let g = Grid::new(2.0, 5).unwrap();
        assert_eq!(g.weights(), &[0.25, 0.5, 0.5, 0.5, 0.25]);
    }

    #[test]
    fn rejects_degenerate_grids() {
        assert!(Grid::new(1.0, 2).unwrap_err().is_config());
        assert!(Grid::new(0.0, 10).unwrap_err().is_config());
        assert!(Grid::new(-1.0, 10).unwrap_err().is_config());
    }

    #[test]
    fn quadrature_examples() {
        let g = Grid::new(2.0, 41).unwrap();
        assert!((g.integrate(&g.constant(3.0)) - 6.0).abs() < 1e-12);

        let g = Grid::new(1.0, 101).unwrap();
        assert!((g.integrate(&g.sample(|x| x)) - 0.5).abs() < 1e-12);
        assert!(g.integrate(&g.sample(|x| (PI * x).cos())).abs() < 1e-4);
    }

    #[test]
    fn laplacian_kernel_and_conservation() {
        let g = Grid::new(1.0, 51).unwrap();
        let a = g.laplacian();
        let zero = a.apply(&g.constant(2.5));
        assert!(zero.max_abs() < 1e-9);
        let f = g.sample(|x| (3.0 * x).sin() + x * x);
        let af = a.apply(&f);
        assert!(g.integrate(&af).abs() <= 1e-12 * f.max_abs() * g.len() as f64);
    }

    #[test]
    fn laplacian_of_cosine_is_second_order() {
        let err = |n: usize| {
            let g = Grid::new(1.0, n).unwrap();
            let f = g.sample(|x| (PI * x).cos());
            let af = g.laplacian().apply(&f);
            af.zip_map(&f, |a, v| a + PI * PI * v).max_abs()
        };
        let e1 = err(51);
        let e2 = err(101);
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }
}
