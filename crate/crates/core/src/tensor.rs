//! Two-axis composition: one Hamiltonian, an s-family of rotated coordinate
//! pairs, and the witness that the factorization into subsystems moves with
//! s even though the composed operator does not.

use nalgebra::DMatrix;

use crate::error::Error;
use crate::fourier::FourierInterpolant;
use crate::grid::{Field, Grid};
use crate::kdv::FlowTrajectory;
use crate::lax::UnitaryFlow;
use crate::schrodinger::{build_hamiltonian, position_operator};
use crate::Result;
use std::sync::Arc;

/// Largest per-axis grid accepted for dense 2D work (n² ≤ 4096).
const MAX_AXIS_POINTS: usize = 64;

/// A fixed x-axis potential V(·, 0) and a flowed y-axis family V(·, s),
/// both starting from the same initial potential on one shared 1D grid.
#[derive(Debug, Clone)]
pub struct TensorModel {
    vx: Field,
    vy_of_s: FlowTrajectory,
}

impl TensorModel {
    /// The x-axis potential is the trajectory's s = 0 snapshot, so both
    /// axes start from identical data by construction.
    pub fn new(vy_of_s: FlowTrajectory) -> Result<TensorModel> {
        let grid = vy_of_s.grid();
        if grid.n() > MAX_AXIS_POINTS {
            return Err(Error::InvalidParameter(format!(
                "tensor models need n ≤ {MAX_AXIS_POINTS} per axis, got {}",
                grid.n()
            )));
        }
        Ok(TensorModel {
            vx: vy_of_s.field(0).clone(),
            vy_of_s,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.vx.grid()
    }

    pub fn vx(&self) -> &Field {
        &self.vx
    }

    pub fn vy(&self, j: usize) -> &Field {
        self.vy_of_s.field(j)
    }

    pub fn trajectory(&self) -> &FlowTrajectory {
        &self.vy_of_s
    }

    pub fn s_values(&self) -> Vec<f64> {
        self.vy_of_s.s_values()
    }
}

/// Dense 2D Hamiltonian Hx ⊗ I + I ⊗ Hy(s_j) on the n²-dimensional product
/// space, as a real symmetric matrix.
pub fn build_2d_hamiltonian(model: &TensorModel, j: usize) -> Result<DMatrix<f64>> {
    let n = model.grid().n();
    if n * n > MAX_AXIS_POINTS * MAX_AXIS_POINTS {
        return Err(Error::InvalidParameter(format!(
            "2D dimension {} exceeds the dense-feasibility guard",
            n * n
        )));
    }
    let hx = build_hamiltonian(model.vx()).matrix().map(|z| z.re);
    let hy = build_hamiltonian(model.vy(j)).matrix().map(|z| z.re);
    let eye = DMatrix::<f64>::identity(n, n);
    Ok(hx.kronecker(&eye) + eye.kronecker(&hy))
}

/// Ascending eigenvalues of a real symmetric matrix (no eigenvectors).
pub fn symmetric_spectrum(m: &DMatrix<f64>) -> Vec<f64> {
    let mut vals: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    vals
}

/// All pairwise sums of two 1D spectra, sorted ascending: the exact
/// spectrum of the Kronecker sum.
pub fn pairwise_sums(ex: &[f64], ey: &[f64]) -> Vec<f64> {
    let mut sums = Vec::with_capacity(ex.len() * ey.len());
    for &a in ex {
        for &b in ey {
            sums.push(a + b);
        }
    }
    sums.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    sums
}

/// The composed potential in the rotated coordinates
/// q1 = (x + y)/√2, q2 = (x - y)/√2: evaluates
/// V(q̂x, 0) + V(q̂y, s_j) at x = (q1+q2)/√2, y = (q1-q2)/√2 by band-limited
/// interpolation of the two 1D fields.
pub fn rotated_potential(model: &TensorModel, j: usize, q1: f64, q2: f64) -> Result<f64> {
    let eval = RotatedPotential::new(model, j)?;
    eval.eval(q1, q2)
}

/// Reusable interpolants for probing the rotated potential on a lattice.
pub struct RotatedPotential {
    x_interp: FourierInterpolant,
    y_interp: FourierInterpolant,
    lo: f64,
    hi: f64,
}

impl RotatedPotential {
    pub fn new(model: &TensorModel, j: usize) -> Result<RotatedPotential> {
        let grid = model.grid();
        let points = grid.points();
        Ok(RotatedPotential {
            x_interp: FourierInterpolant::new(model.vx())?,
            y_interp: FourierInterpolant::new(model.vy(j))?,
            lo: points[0],
            hi: points[0] + grid.length(),
        })
    }

    pub fn eval(&self, q1: f64, q2: f64) -> Result<f64> {
        let x = (q1 + q2) / std::f64::consts::SQRT_2;
        let y = (q1 - q2) / std::f64::consts::SQRT_2;
        for c in [x, y] {
            if c < self.lo || c >= self.hi {
                return Err(Error::OutOfWindow {
                    q: c,
                    lo: self.lo,
                    hi: self.hi,
                });
            }
        }
        Ok(self.x_interp.eval(x) + self.y_interp.eval(y))
    }
}

/// Largest mixed second difference |Δ²V/(Δq1 Δq2)| of the rotated potential
/// over an m×m probe lattice on [-extent, extent]²: nonzero means the
/// potential does not split additively in (q1, q2).
pub fn coupling_witness(
    model: &TensorModel,
    j: usize,
    extent: f64,
    m: usize,
    step: f64,
) -> Result<f64> {
    let eval = RotatedPotential::new(model, j)?;
    let mut worst = 0.0f64;
    for i1 in 0..m {
        for i2 in 0..m {
            let q1 = -extent + 2.0 * extent * i1 as f64 / (m - 1) as f64;
            let q2 = -extent + 2.0 * extent * i2 as f64 / (m - 1) as f64;
            let pp = eval.eval(q1 + step, q2 + step)?;
            let pm = eval.eval(q1 + step, q2 - step)?;
            let mp = eval.eval(q1 - step, q2 + step)?;
            let mm = eval.eval(q1 - step, q2 - step)?;
            let mixed = (pp - pm - mp + mm) / (4.0 * step * step);
            worst = worst.max(mixed.abs());
        }
    }
    Ok(worst)
}

/// ||[U(s_j)* q̂ U(s_j), q̂]||_F / ||q̂||_F².
///
/// The rotated coordinate pair at flow time s mixes the x axis with the
/// transported y coordinate; a nonzero commutator between the transported
/// and original coordinate certifies that the rotated coordinate cannot be
/// any function of the original pair on its factor, since the partner
/// coordinate commutes with both.
pub fn nonfactorizability_witness(flow: &UnitaryFlow, j: usize) -> Result<f64> {
    let grid = flow.grid();
    let q = position_operator(grid);
    let u = flow.u(j).matrix();
    let q_s = u.adjoint() * q.matrix() * u;
    let comm = &q_s * q.matrix() - q.matrix() * &q_s;
    let qn = q.matrix().norm();
    Ok(comm.norm() / (qn * qn))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoundaryKind;
    use crate::kdv::{self, KdvParams, SolitonParams};
    use crate::lax;
    use crate::schrodinger::eigenvalues;

    fn soliton_model(n: usize, length: f64, s_target: f64, snapshots: usize) -> TensorModel {
        let grid = Grid::new(n, length, BoundaryKind::Periodic).unwrap();
        let p = SolitonParams::new(4.0, 0.0).unwrap();
        let v0 = kdv::soliton_potential(&grid, &p, 0.0).unwrap();
        let params = KdvParams::new(1e-4).unwrap();
        TensorModel::new(kdv::evolve(&v0, s_target, &params, snapshots).unwrap()).unwrap()
    }

    fn zero_model(n: usize) -> TensorModel {
        let grid = Grid::new(n, 20.0, BoundaryKind::Periodic).unwrap();
        let params = KdvParams::new(1e-3).unwrap();
        TensorModel::new(kdv::evolve(&Field::zero(&grid), 0.02, &params, 2).unwrap()).unwrap()
    }

    #[test]
    fn kronecker_sum_spectrum_identity() {
        let model = soliton_model(16, 20.0, 0.01, 1);
        let h2 = build_2d_hamiltonian(&model, 1).unwrap();
        let spectrum_2d = symmetric_spectrum(&h2);
        let ex = eigenvalues(&build_hamiltonian(model.vx())).unwrap();
        let ey = eigenvalues(&build_hamiltonian(model.vy(1))).unwrap();
        let predicted = pairwise_sums(&ex, &ey);
        let scale = spectrum_2d.last().unwrap().abs().max(1.0);
        for (a, b) in spectrum_2d.iter().zip(predicted.iter()) {
            assert!((a - b).abs() < 1e-10 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn free_2d_spectrum_is_pairwise_free_sums() {
        let model = zero_model(16);
        let h2 = build_2d_hamiltonian(&model, 0).unwrap();
        let spectrum_2d = symmetric_spectrum(&h2);
        let e1 = eigenvalues(&build_hamiltonian(model.vx())).unwrap();
        let predicted = pairwise_sums(&e1, &e1);
        for (a, b) in spectrum_2d.iter().zip(predicted.iter()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn ground_state_sum_is_flow_invariant() {
        let model = soliton_model(48, 20.0, 0.05, 2);
        let mut ground = Vec::new();
        for j in 0..model.trajectory().len() {
            let ex = eigenvalues(&build_hamiltonian(model.vx())).unwrap();
            let ey = eigenvalues(&build_hamiltonian(model.vy(j))).unwrap();
            ground.push(ex[0] + ey[0]);
        }
        for g in &ground[1..] {
            assert!((g - ground[0]).abs() < 2e-3, "sum drift {}", (g - ground[0]).abs());
        }
        // The bound-state pair sits near -λ/4 - λ/4 = -2.
        assert!((ground[0] + 2.0).abs() < 1e-2, "ground sum {}", ground[0]);
    }

    #[test]
    fn rotated_potential_zero_and_center_values() {
        let zero = zero_model(32);
        assert_eq!(rotated_potential(&zero, 0, 0.3, -0.2).unwrap(), 0.0);

        let model = soliton_model(64, 20.0, 0.01, 1);
        // Both rotated arguments hit the soliton centre: depth doubles.
        // Exact against the model's own samples (q = 0 is a grid point),
        // and against the closed form up to the 2/3-rule truncation of the
        // initial data at this resolution.
        let v = rotated_potential(&model, 0, 0.0, 0.0).unwrap();
        let center = model.grid().n() / 2;
        let sampled = 2.0 * model.vx().values()[center];
        assert!((v - sampled).abs() < 1e-9, "{v} vs sampled {sampled}");
        assert!((v + 4.0).abs() < 2e-2, "central value {v}");
    }

    #[test]
    fn rotated_potential_rejects_out_of_window() {
        let model = soliton_model(32, 20.0, 0.01, 1);
        // q1 = q2 = 8 puts x = 16/√2 ≈ 11.3 outside [-10, 10).
        assert!(matches!(
            rotated_potential(&model, 0, 8.0, 8.0),
            Err(Error::OutOfWindow { .. })
        ));
    }

    #[test]
    fn soliton_coupling_witness_is_strong() {
        let model = soliton_model(64, 20.0, 0.01, 1);
        let witness = coupling_witness(&model, 1, 2.0, 41, 0.05).unwrap();
        assert!(witness > 0.1, "coupling witness {witness:.3}");
        // Additively separable data has none.
        let zero = zero_model(32);
        let none = coupling_witness(&zero, 0, 2.0, 21, 0.05).unwrap();
        assert_eq!(none, 0.0);
    }

    #[test]
    fn witness_zero_at_s_zero_and_positive_later() {
        let model = soliton_model(64, 20.0, 0.05, 2);
        let flow = lax::evolve_unitary(model.trajectory(), 25).unwrap();
        assert_eq!(nonfactorizability_witness(&flow, 0).unwrap(), 0.0);
        let w = nonfactorizability_witness(&flow, 2).unwrap();
        assert!(w > 1e-3, "witness at s = 0.05: {w:.3e}");
    }

    #[test]
    fn free_flow_witness_matches_closed_form_unitary() {
        // V ≡ 0: U(s) = exp(-i·s·A) with the constant free generator; the
        // transported coordinate already fails to commute with q̂.
        let grid = Grid::new(128, 40.0, BoundaryKind::Periodic).unwrap();
        let a = lax::build_generator(&Field::zero(&grid)).unwrap();
        let u = lax::unitary_exp(&a, 0.05);
        let q = position_operator(&grid);
        let q_s = u.adjoint() * q.matrix() * &u;
        let comm = &q_s * q.matrix() - q.matrix() * &q_s;
        let qn = q.matrix().norm();
        let w = comm.norm() / (qn * qn);
        assert!(w > 1e-3, "free witness {w:.3e}");

        // And the stepped flow reproduces the same number.
        let params = KdvParams::new(1e-3).unwrap();
        let traj = kdv::evolve(&Field::zero(&grid), 0.05, &params, 2).unwrap();
        let flow = lax::evolve_unitary(&traj, 5).unwrap();
        let w_flow = nonfactorizability_witness(&flow, 2).unwrap();
        assert!((w_flow - w).abs() < 1e-8, "{w_flow} vs {w}");
    }

    #[test]
    fn oversized_grid_rejected() {
        let grid = Grid::new(128, 20.0, BoundaryKind::Periodic).unwrap();
        let params = KdvParams::new(1e-3).unwrap();
        let traj = kdv::evolve(&Field::zero(&grid), 0.02, &params, 1).unwrap();
        assert!(TensorModel::new(traj).is_err());
    }
}
