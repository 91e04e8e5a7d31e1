//! Uniform 1D grids, sampled fields, differentiation, and quadrature.

use std::sync::Arc;

use crate::error::Error;
use crate::fourier;
use crate::Result;

/// Boundary treatment of a grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum BoundaryKind {
    /// Points cover [-L/2, L/2), spacing L/n, spectral differentiation.
    Periodic,
    /// Points cover the open interval (0, L), spacing L/(n+1), finite
    /// differences with one-sided closures.
    BoxDirichlet,
}

/// Uniform spatial discretization shared by fields and operators.
#[derive(Debug, Clone)]
pub struct Grid {
    n: usize,
    length: f64,
    spacing: f64,
    kind: BoundaryKind,
    points: Vec<f64>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.length == other.length && self.kind == other.kind
    }
}

impl Grid {
    /// Build a uniform grid. Periodic grids require an even n; every grid
    /// requires n ≥ 8 and a positive extent.
    pub fn new(n: usize, length: f64, kind: BoundaryKind) -> Result<Arc<Grid>> {
        if n < 8 {
            return Err(Error::InvalidGrid(format!("n = {n} is below the minimum of 8")));
        }
        if kind == BoundaryKind::Periodic && !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "periodic grids require even n, got {n}"
            )));
        }
        if length <= 0.0 || !length.is_finite() {
            return Err(Error::InvalidGrid(format!("length must be positive, got {length}")));
        }
        let (spacing, points) = match kind {
            BoundaryKind::Periodic => {
                let h = length / n as f64;
                let q0 = -0.5 * length;
                (h, (0..n).map(|i| q0 + i as f64 * h).collect::<Vec<_>>())
            }
            BoundaryKind::BoxDirichlet => {
                let h = length / (n + 1) as f64;
                (h, (1..=n).map(|i| i as f64 * h).collect::<Vec<_>>())
            }
        };
        Ok(Arc::new(Grid {
            n,
            length,
            spacing,
            kind,
            points,
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn kind(&self) -> BoundaryKind {
        self.kind
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

/// Real-valued samples of a function over a grid.
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl Field {
    /// Wrap raw samples, rejecting length mismatches and non-finite entries.
    pub fn from_values(grid: &Arc<Grid>, values: Vec<f64>) -> Result<Field> {
        if values.len() != grid.n() {
            return Err(Error::GridMismatch(format!(
                "expected {} samples, got {}",
                grid.n(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!(
                "sample {i} at q = {} is {}",
                grid.points()[i],
                values[i]
            )));
        }
        Ok(Field {
            grid: Arc::clone(grid),
            values,
        })
    }

    /// Sample a scalar function at the grid points.
    pub fn sample<F: Fn(f64) -> f64>(grid: &Arc<Grid>, f: F) -> Result<Field> {
        Field::from_values(grid, grid.points().iter().map(|&q| f(q)).collect())
    }

    /// The all-zero field.
    pub fn zero(grid: &Arc<Grid>) -> Field {
        Field {
            grid: Arc::clone(grid),
            values: vec![0.0; grid.n()],
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Spatial derivative of the stated order (1, 2, or 3).
    ///
    /// Periodic grids use spectral differentiation; box grids use finite
    /// differences with at least 4th-order interior accuracy and one-sided
    /// closures at the edges.
    pub fn differentiate(&self, order: u8) -> Result<Field> {
        if !(1..=3).contains(&order) {
            return Err(Error::InvalidParameter(format!(
                "derivative order must be 1, 2, or 3, got {order}"
            )));
        }
        let grid = &self.grid;
        let values = match grid.kind() {
            BoundaryKind::Periodic => {
                let spectral = fourier::Spectral::new(grid.n());
                let mut spectrum = spectral.analyze(&self.values);
                let symbol = fourier::derivative_symbol(grid.n(), grid.length(), order);
                for (z, s) in spectrum.iter_mut().zip(symbol.iter()) {
                    *z *= s;
                }
                spectral.synthesize_real(spectrum)
            }
            BoundaryKind::BoxDirichlet => {
                finite_difference(&self.values, grid.spacing(), order as usize)
            }
        };
        Field::from_values(grid, values)
    }

    pub fn norm_sup(&self) -> f64 {
        self.values.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn norm_l2(&self) -> f64 {
        inner_product(self, self).expect("field shares its own grid").sqrt()
    }

    /// Pointwise linear combination a·self + b·other.
    pub fn linear_combination(&self, a: f64, b: f64, other: &Field) -> Result<Field> {
        ensure_same_grid(self, other)?;
        let values = self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(x, y)| a * x + b * y)
            .collect();
        Field::from_values(&self.grid, values)
    }
}

/// Grid quadrature pairing: spacing · Σ f_i g_i.
pub fn inner_product(f: &Field, g: &Field) -> Result<f64> {
    ensure_same_grid(f, g)?;
    let sum: f64 = f
        .values()
        .iter()
        .zip(g.values().iter())
        .map(|(a, b)| a * b)
        .sum();
    Ok(f.grid().spacing() * sum)
}

pub(crate) fn ensure_same_grid(f: &Field, g: &Field) -> Result<()> {
    if Arc::ptr_eq(f.grid(), g.grid()) || f.grid().as_ref() == g.grid().as_ref() {
        Ok(())
    } else {
        Err(Error::GridMismatch(format!(
            "fields live on different grids ({} vs {} points)",
            f.grid().n(),
            g.grid().n()
        )))
    }
}

/// Finite-difference derivative of `order` with one-sided closures, built
/// from Fornberg weights on a stencil wide enough for 4th-order interior
/// accuracy.
fn finite_difference(values: &[f64], h: f64, order: usize) -> Vec<f64> {
    let n = values.len();
    let width = match order {
        1 => 5,
        _ => 7,
    };
    debug_assert!(n >= width);
    let mut out = vec![0.0; n];
    for (i, slot) in out.iter_mut().enumerate() {
        let start = i.saturating_sub(width / 2).min(n - width);
        let nodes: Vec<f64> = (0..width).map(|j| (start + j) as f64 * h).collect();
        let w = fd_weights(i as f64 * h, &nodes, order);
        *slot = (0..width).map(|j| w[j] * values[start + j]).sum();
    }
    out
}

/// Fornberg's algorithm for finite-difference weights of the m-th
/// derivative at x0 on arbitrary nodes.
pub(crate) fn fd_weights(x0: f64, nodes: &[f64], m: usize) -> Vec<f64> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}
