//! Dense Hamiltonians -d²/dq² + V and their spectra.
//!
//! Periodic grids get the exact spectral differentiation matrices (built as
//! circulants with their parity enforced, so symmetry is exact, not a
//! roundoff accident). Dirichlet boxes get a 4th-order five-point stencil
//! closed by odd reflection through the walls, which keeps the matrix
//! symmetric.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::sync::Arc;

use crate::error::Error;
use crate::fourier::{self, Spectral};
use crate::grid::{BoundaryKind, Field, Grid};
use crate::kdv::FlowTrajectory;
use crate::Result;

/// Dense operator over a grid, with the Hermitian-symmetrization defect
/// recorded at construction.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    grid: Arc<Grid>,
    matrix: DMatrix<Complex64>,
    hermitian_defect: f64,
}

/// Relative departure from self-adjointness, ||M - M*|| / ||M||.
pub fn symmetrization_defect(matrix: &DMatrix<Complex64>) -> f64 {
    let norm = matrix.norm();
    if norm > 0.0 {
        (matrix - matrix.adjoint()).norm() / norm
    } else {
        0.0
    }
}

impl OperatorMatrix {
    /// Declare an operator self-adjoint: the Hermitian part (M + M*)/2 is
    /// stored. Callers that care how non-Hermitian the input was measure it
    /// beforehand with [`symmetrization_defect`].
    pub fn hermitian(grid: &Arc<Grid>, matrix: DMatrix<Complex64>) -> OperatorMatrix {
        let adj = matrix.adjoint();
        let symmetrized = (matrix + adj) * Complex64::new(0.5, 0.0);
        let defect = symmetrization_defect(&symmetrized);
        OperatorMatrix {
            grid: Arc::clone(grid),
            matrix: symmetrized,
            hermitian_defect: defect,
        }
    }

    /// Wrap a matrix with no symmetry expectation (e.g. a unitary).
    pub fn general(grid: &Arc<Grid>, matrix: DMatrix<Complex64>) -> OperatorMatrix {
        let defect = symmetrization_defect(&matrix);
        OperatorMatrix {
            grid: Arc::clone(grid),
            matrix,
            hermitian_defect: defect,
        }
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.hermitian_defect
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.norm()
    }

    /// True when every entry has zero imaginary part.
    fn is_real(&self) -> bool {
        self.matrix.iter().all(|z| z.im == 0.0)
    }
}

/// Real circulant kernel of the periodic spectral derivative of the given
/// order, with even/odd parity enforced exactly.
fn circulant_kernel(n: usize, length: f64, order: u8) -> Vec<f64> {
    let spectral = Spectral::new(n);
    let mut spectrum = fourier::derivative_symbol(n, length, order);
    spectral.inverse_inplace(&mut spectrum);
    let mut kernel: Vec<f64> = spectrum.into_iter().map(|z| z.re).collect();
    let odd = !order.is_multiple_of(2);
    for r in 1..=(n - 1) / 2 {
        let (a, b) = (kernel[r], kernel[n - r]);
        let (sa, sb) = if odd {
            ((a - b) / 2.0, (b - a) / 2.0)
        } else {
            ((a + b) / 2.0, (a + b) / 2.0)
        };
        kernel[r] = sa;
        kernel[n - r] = sb;
    }
    if odd {
        kernel[0] = 0.0;
        if n.is_multiple_of(2) {
            kernel[n / 2] = 0.0;
        }
    }
    kernel
}

/// Dense matrix of the spectral derivative on a periodic grid. Odd orders
/// give exactly antisymmetric matrices, even orders exactly symmetric ones.
pub fn derivative_matrix(grid: &Arc<Grid>, order: u8) -> Result<DMatrix<f64>> {
    if grid.kind() != BoundaryKind::Periodic {
        return Err(Error::PeriodicRequired("derivative_matrix"));
    }
    if !(1..=3).contains(&order) {
        return Err(Error::InvalidParameter(format!(
            "derivative order must be 1, 2, or 3, got {order}"
        )));
    }
    let n = grid.n();
    let kernel = circulant_kernel(n, grid.length(), order);
    Ok(DMatrix::from_fn(n, n, |j, l| kernel[(n + j - l) % n]))
}

/// Second-derivative matrix for either boundary kind.
pub fn second_derivative_matrix(grid: &Arc<Grid>) -> DMatrix<f64> {
    match grid.kind() {
        BoundaryKind::Periodic => {
            derivative_matrix(grid, 2).expect("periodic grid accepts order 2")
        }
        BoundaryKind::BoxDirichlet => {
            let n = grid.n();
            let scale = 1.0 / (12.0 * grid.spacing() * grid.spacing());
            let mut m = DMatrix::zeros(n, n);
            for i in 0..n {
                let stencil: [(i64, f64); 5] =
                    [(-2, -1.0), (-1, 16.0), (0, -30.0), (1, 16.0), (2, -1.0)];
                for (off, w) in stencil {
                    let j = i as i64 + off;
                    if (0..n as i64).contains(&j) {
                        m[(i, j as usize)] += w * scale;
                    } else if j == -2 {
                        // Odd reflection through the wall: psi(-h) = -psi(h).
                        m[(i, 0)] -= w * scale;
                    } else if j == n as i64 + 1 {
                        m[(i, n - 1)] -= w * scale;
                    }
                    // j = -1 and j = n hit the wall itself where psi = 0.
                }
            }
            m
        }
    }
}

fn complexify(m: DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Hamiltonian -D² + diag(V) for the field's grid.
pub fn build_hamiltonian(v: &Field) -> OperatorMatrix {
    let grid = v.grid();
    let mut h = -second_derivative_matrix(grid);
    for (i, &vi) in v.values().iter().enumerate() {
        h[(i, i)] += vi;
    }
    OperatorMatrix::hermitian(grid, complexify(h))
}

/// Multiplication by the coordinate. On periodic grids this is the sawtooth
/// coordinate, meaningful for states supported away from the seam.
pub fn position_operator(grid: &Arc<Grid>) -> OperatorMatrix {
    let n = grid.n();
    let mut m = DMatrix::zeros(n, n);
    for (i, &q) in grid.points().iter().enumerate() {
        m[(i, i)] = Complex64::new(q, 0.0);
    }
    OperatorMatrix::hermitian(grid, m)
}

/// Momentum -i d/dq on a periodic grid.
pub fn momentum_operator(grid: &Arc<Grid>) -> Result<OperatorMatrix> {
    let d1 = derivative_matrix(grid, 1)?;
    let m = complexify(d1) * Complex64::new(0.0, -1.0);
    Ok(OperatorMatrix::hermitian(grid, m))
}

/// How many eigenpairs to return.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenCount {
    All,
    Lowest(usize),
}

/// Sorted eigenvalues with optional eigenvectors and the worst residual
/// ||Mv - λv|| over the returned pairs.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Option<DMatrix<Complex64>>,
    pub residual: f64,
}

const RESIDUAL_BOUND: f64 = 1e-8;

/// Full Hermitian eigendecomposition with ascending eigenvalues. Real
/// symmetric matrices take a real-arithmetic fast path.
pub fn eigen(op: &OperatorMatrix, count: EigenCount) -> Result<Spectrum> {
    if op.hermitian_defect() > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "eigen requires a Hermitian operator; defect {:.3e}",
            op.hermitian_defect()
        )));
    }
    let n = op.n();
    let (values, vectors): (Vec<f64>, DMatrix<Complex64>) = if op.is_real() {
        let real = op.matrix.map(|z| z.re);
        let decomp = nalgebra::SymmetricEigen::new(real);
        (
            decomp.eigenvalues.iter().copied().collect(),
            complexify(decomp.eigenvectors),
        )
    } else {
        let decomp = nalgebra::SymmetricEigen::new(op.matrix.clone());
        (
            decomp.eigenvalues.iter().copied().collect(),
            decomp.eigenvectors,
        )
    };

    // Ascending order, vectors permuted alongside.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite eigenvalues"));
    let mut sorted_values: Vec<f64> = order.iter().map(|&i| values[i]).collect();
    let mut sorted_vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        sorted_vectors.set_column(dst, &vectors.column(src));
    }

    let keep = match count {
        EigenCount::All => n,
        EigenCount::Lowest(k) => k.min(n),
    };
    sorted_values.truncate(keep);
    let kept_vectors = sorted_vectors.columns(0, keep).into_owned();

    let mut residual = 0.0f64;
    let product = &op.matrix * &kept_vectors;
    for (i, &lambda) in sorted_values.iter().enumerate() {
        let r = (product.column(i) - kept_vectors.column(i) * Complex64::new(lambda, 0.0)).norm();
        residual = residual.max(r);
    }
    let bound = RESIDUAL_BOUND * op.frobenius_norm().max(f64::MIN_POSITIVE);
    if residual > bound {
        return Err(Error::EigenFailure { residual, bound });
    }

    Ok(Spectrum {
        eigenvalues: sorted_values,
        eigenvectors: Some(kept_vectors),
        residual,
    })
}

/// Ascending eigenvalues only (no residual certificate); much faster for
/// large operators.
pub fn eigenvalues(op: &OperatorMatrix) -> Result<Vec<f64>> {
    if op.hermitian_defect() > 1e-10 {
        return Err(Error::InvalidParameter(format!(
            "eigenvalues requires a Hermitian operator; defect {:.3e}",
            op.hermitian_defect()
        )));
    }
    let mut vals: Vec<f64> = if op.is_real() {
        op.matrix
            .map(|z| z.re)
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect()
    } else {
        op.matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect()
    };
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(vals)
}

/// Lowest-eigenvalue drift of the Hamiltonians along a KdV trajectory.
#[derive(Debug, Clone, serde::Serialize)]
pub struct IsospectralityReport {
    pub s_values: Vec<f64>,
    /// k lowest eigenvalues per snapshot.
    pub eigenvalues: Vec<Vec<f64>>,
    /// max_j |λ_i(s_j) - λ_i(s_0)| per tracked eigenvalue.
    pub drift: Vec<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

/// Track the k lowest eigenvalues of build_hamiltonian along the trajectory
/// and compare the drift against `tolerance`.
pub fn isospectrality_report(
    traj: &FlowTrajectory,
    k_bound_states: usize,
    tolerance: f64,
) -> Result<IsospectralityReport> {
    let mut per_snapshot = Vec::with_capacity(traj.len());
    for (_, field) in traj.samples() {
        let h = build_hamiltonian(field);
        let mut vals = eigenvalues(&h)?;
        vals.truncate(k_bound_states);
        per_snapshot.push(vals);
    }
    let base = &per_snapshot[0];
    let mut drift = vec![0.0f64; base.len()];
    for snap in per_snapshot.iter().skip(1) {
        for (i, d) in drift.iter_mut().enumerate() {
            *d = d.max((snap[i] - base[i]).abs());
        }
    }
    let pass = drift.iter().all(|d| *d < tolerance);
    Ok(IsospectralityReport {
        s_values: traj.s_values(),
        eigenvalues: per_snapshot,
        drift,
        tolerance,
        pass,
    })
}

/// Deterministic pseudo-random stream for test matrices.
#[cfg(test)]
pub(crate) struct SplitMix(pub u64);

#[cfg(test)]
impl SplitMix {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }
}
