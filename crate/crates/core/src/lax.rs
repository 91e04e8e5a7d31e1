//! Operator-level verification that the flow is a unitary conjugation:
//! the commutator equation i·dH/ds = [A, H], the propagated unitary U(s),
//! and the s-dependent canonical pair it generates.
//!
//! Residuals and defects in this module are Frobenius norms measured on the
//! resolved band |mode| ≤ n/3 (the 2/3-rule band the dealiased flow lives
//! on). The collocation matrices violate the Leibniz rule at unresolved
//! wavenumbers, so full-space norms of commutator identities are dominated
//! by modes the time integrator explicitly discards; on the resolved band
//! the identities hold to spectral accuracy.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::sync::Arc;

use crate::error::Error;
use crate::fourier::{self, Spectral};
use crate::grid::{BoundaryKind, Field, Grid};
use crate::kdv::{self, FlowTrajectory};
use crate::schrodinger::{
    build_hamiltonian, derivative_matrix, momentum_operator, position_operator, OperatorMatrix,
};
use crate::Result;

/// Frobenius norm of the mode-space block {|mode(row)|, |mode(col)| ≤ n/3}.
pub(crate) fn band_frobenius(m: &DMatrix<Complex64>) -> f64 {
    let n = m.nrows();
    let keep = n / 3;
    let spectral = Spectral::new(n);
    // Unitary conjugation to mode space: forward FFT on columns, inverse on
    // rows; the 1/√n scales cancel in pairs against the inverse's 1/n.
    let mut tilde = m.clone();
    let mut buf = vec![Complex64::ZERO; n];
    for c in 0..n {
        for r in 0..n {
            buf[r] = tilde[(r, c)];
        }
        spectral.forward_inplace(&mut buf);
        for r in 0..n {
            tilde[(r, c)] = buf[r];
        }
    }
    let mut sum = 0.0f64;
    for r in 0..n {
        if fourier::mode_number(r, n).unsigned_abs() as usize > keep {
            continue;
        }
        for c in 0..n {
            buf[c] = tilde[(r, c)];
        }
        spectral.inverse_inplace(&mut buf);
        for (c, z) in buf.iter().enumerate() {
            if fourier::mode_number(c, n).unsigned_abs() as usize <= keep {
                sum += z.norm_sqr();
            }
        }
    }
    sum.sqrt()
}

/// Hamiltonian and flow generator over one grid, with the generator's
/// pre-symmetrization defect.
#[derive(Debug, Clone)]
pub struct LaxPair {
    pub hamiltonian: OperatorMatrix,
    pub generator: OperatorMatrix,
    /// ||M - M*||/||M|| of the raw generator before symmetrization; pure
    /// truncation noise for resolved potentials.
    pub asymmetry: f64,
}

fn raw_generator(v: &Field) -> Result<DMatrix<Complex64>> {
    let grid = v.grid();
    if grid.kind() != BoundaryKind::Periodic {
        return Err(Error::PeriodicRequired("build_generator"));
    }
    let d1 = derivative_matrix(grid, 1)?;
    let d3 = derivative_matrix(grid, 3)?;
    let dv = v.differentiate(1)?;
    let n = grid.n();
    // -4 D³ + 6 diag(V) D + 3 diag(V'), then multiplied by i.
    let mut real = -4.0 * d3;
    for i in 0..n {
        let vi = v.values()[i];
        for j in 0..n {
            real[(i, j)] += 6.0 * vi * d1[(i, j)];
        }
        real[(i, i)] += 3.0 * dv.values()[i];
    }
    Ok(real.map(|x| Complex64::new(0.0, x)))
}

/// The flow generator i(-4D³ + 6VD + 3V'), Hermitian-symmetrized.
pub fn build_generator(v: &Field) -> Result<OperatorMatrix> {
    Ok(OperatorMatrix::hermitian(v.grid(), raw_generator(v)?))
}

/// Build the Hamiltonian and symmetrized generator together, recording how
/// non-Hermitian the raw generator was on the resolved band.
pub fn lax_pair(v: &Field) -> Result<LaxPair> {
    let raw = raw_generator(v)?;
    let raw_norm = band_frobenius(&raw);
    let asymmetry = if raw_norm > 0.0 {
        band_frobenius(&(&raw - raw.adjoint())) / raw_norm
    } else {
        0.0
    };
    Ok(LaxPair {
        hamiltonian: build_hamiltonian(v),
        generator: OperatorMatrix::hermitian(v.grid(), raw),
        asymmetry,
    })
}

/// exp(-i·scale·A) for a Hermitian operator, via eigendecomposition; the
/// result is unitary to roundoff regardless of scale.
pub fn unitary_exp(a: &OperatorMatrix, scale: f64) -> DMatrix<Complex64> {
    let eig = nalgebra::SymmetricEigen::new(a.matrix().clone());
    let n = a.n();
    let mut scaled = eig.eigenvectors.clone();
    for (c, &lambda) in eig.eigenvalues.iter().enumerate().take(n) {
        let phase = Complex64::from_polar(1.0, -scale * lambda);
        for r in 0..n {
            scaled[(r, c)] *= phase;
        }
    }
    scaled * eig.eigenvectors.adjoint()
}

/// Relative residual of i·dH/ds = [A, H] at snapshot j, with dH/ds from a
/// central difference of re-evolved neighbours at distance `delta`.
///
/// Measured with resolved-band Frobenius norms. When the commutator is at
/// roundoff level (e.g. V ≡ 0, where A and H are commuting circulants) the
/// residual is 0 by convention.
pub fn lax_residual(traj: &FlowTrajectory, j: usize, delta: f64) -> Result<f64> {
    if delta <= 0.0 || !delta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let v = traj.field(j);
    let plus = kdv::step_by(v, delta, traj.params())?;
    let minus = kdv::step_by(v, -delta, traj.params())?;
    let h_plus = build_hamiltonian(&plus);
    let h_minus = build_hamiltonian(&minus);
    let pair = lax_pair(v)?;

    let a = pair.generator.matrix();
    let h = pair.hamiltonian.matrix();
    let commutator = a * h - h * a;
    let comm_norm = band_frobenius(&commutator);
    if comm_norm < 1e-14 * band_frobenius(a) * band_frobenius(h) {
        return Ok(0.0);
    }
    let factor = Complex64::new(0.0, 1.0 / (2.0 * delta));
    let derivative = (h_plus.matrix() - h_minus.matrix()) * factor;
    Ok(band_frobenius(&(derivative - commutator)) / comm_norm)
}

/// U(s) at each trajectory snapshot, with the worst unitarity defect seen.
#[derive(Debug, Clone)]
pub struct UnitaryFlow {
    s_values: Vec<f64>,
    u: Vec<OperatorMatrix>,
    unitarity_defect: f64,
}

impl UnitaryFlow {
    pub fn s_values(&self) -> &[f64] {
        &self.s_values
    }

    pub fn u(&self, j: usize) -> &OperatorMatrix {
        &self.u[j]
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.unitarity_defect
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.u[0].grid()
    }
}

const UNITARITY_ABORT: f64 = 1e-6;

/// Propagate U through i·dU/ds = A(s)·U, U(0) = 1, with the exponential
/// midpoint rule: each snapshot interval is split into `substeps` steps and
/// the generator is evaluated on the linearly interpolated potential at
/// each sub-interval midpoint. U is stored at the trajectory snapshots.
pub fn evolve_unitary(traj: &FlowTrajectory, substeps: usize) -> Result<UnitaryFlow> {
    if substeps == 0 {
        return Err(Error::InvalidParameter("substeps must be at least 1".into()));
    }
    let grid = traj.grid();
    if grid.kind() != BoundaryKind::Periodic {
        return Err(Error::PeriodicRequired("evolve_unitary"));
    }
    let n = grid.n();
    let identity = DMatrix::<Complex64>::identity(n, n);
    let mut u = identity.clone();
    let mut stored = vec![OperatorMatrix::general(grid, u.clone())];
    let mut worst_defect = 0.0f64;

    for j in 0..traj.len() - 1 {
        let (s0, ref v0) = traj.samples()[j];
        let (s1, ref v1) = traj.samples()[j + 1];
        let delta = (s1 - s0) / substeps as f64;
        for sub in 0..substeps {
            let theta = (sub as f64 + 0.5) / substeps as f64;
            let v_mid = v0.linear_combination(1.0 - theta, theta, v1)?;
            let generator = build_generator(&v_mid)?;
            u = unitary_exp(&generator, delta) * u;
        }
        let defect = (u.adjoint() * &u - &identity).norm();
        worst_defect = worst_defect.max(defect);
        if defect > UNITARITY_ABORT {
            return Err(Error::UnitarityLoss { s: s1, defect });
        }
        stored.push(OperatorMatrix::general(grid, u.clone()));
    }

    Ok(UnitaryFlow {
        s_values: traj.s_values(),
        u: stored,
        unitarity_defect: worst_defect,
    })
}

/// ||U(s_j)·H(0)·U(s_j)* - H(s_j)|| / ||H(s_j)|| in the resolved-band
/// Frobenius norm: the matrix-level witness that the flow conjugates the
/// Hamiltonian.
pub fn conjugation_residual(flow: &UnitaryFlow, traj: &FlowTrajectory, j: usize) -> Result<f64> {
    if flow.len() != traj.len() {
        return Err(Error::InvalidParameter(format!(
            "flow has {} snapshots but trajectory has {}",
            flow.len(),
            traj.len()
        )));
    }
    let h0 = build_hamiltonian(traj.field(0));
    let hj = build_hamiltonian(traj.field(j));
    let u = flow.u(j).matrix();
    let conjugated = u * h0.matrix() * u.adjoint();
    Ok(band_frobenius(&(conjugated - hj.matrix())) / band_frobenius(hj.matrix()))
}

/// The s-dependent canonical pair q(s) = U*·q·U, p(s) = U*·p·U.
pub fn transformed_canonicals(
    flow: &UnitaryFlow,
    j: usize,
) -> Result<(OperatorMatrix, OperatorMatrix)> {
    let grid = flow.grid();
    let q = position_operator(grid);
    let p = momentum_operator(grid)?;
    let u = flow.u(j).matrix();
    let q_s = u.adjoint() * q.matrix() * u;
    let p_s = u.adjoint() * p.matrix() * u;
    Ok((
        OperatorMatrix::hermitian(grid, q_s),
        OperatorMatrix::hermitian(grid, p_s),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kdv::{evolve, soliton_potential, KdvParams, SolitonParams};
    use crate::schrodinger::eigenvalues;

    fn periodic(n: usize, length: f64) -> Arc<Grid> {
        Grid::new(n, length, BoundaryKind::Periodic).unwrap()
    }

    fn zero_trajectory(n: usize, s_target: f64, snapshots: usize) -> FlowTrajectory {
        let grid = periodic(n, 40.0);
        let params = KdvParams::new(1e-3).unwrap();
        evolve(&Field::zero(&grid), s_target, &params, snapshots).unwrap()
    }

    #[test]
    fn free_generator_is_exactly_hermitian() {
        let grid = periodic(64, 40.0);
        let pair = lax_pair(&Field::zero(&grid)).unwrap();
        assert_eq!(pair.asymmetry, 0.0);
        assert_eq!(pair.generator.hermitian_defect(), 0.0);
    }

    #[test]
    fn generator_asymmetry_decays_spectrally() {
        let p = SolitonParams::new(4.0, 0.0).unwrap();
        let asym = |n: usize| -> f64 {
            let grid = periodic(n, 40.0);
            let v = soliton_potential(&grid, &p, 0.0).unwrap();
            lax_pair(&v).unwrap().asymmetry
        };
        let coarse = asym(64);
        let mid = asym(128);
        let fine = asym(256);
        assert!(coarse > mid && mid > fine, "{coarse:.3e} {mid:.3e} {fine:.3e}");
        assert!(fine < 1e-10, "n=256 asymmetry {fine:.3e}");
    }

    #[test]
    fn generator_is_deterministic() {
        let grid = periodic(128, 40.0);
        let p = SolitonParams::new(4.0, 0.0).unwrap();
        let v = soliton_potential(&grid, &p, 0.0).unwrap();
        let a1 = build_generator(&v).unwrap();
        let a2 = build_generator(&v).unwrap();
        assert_eq!((a1.matrix() - a2.matrix()).norm(), 0.0);
        assert!(a1.frobenius_norm().is_finite());
    }

    #[test]
    fn lax_residual_zero_potential_by_convention() {
        let traj = zero_trajectory(64, 0.01, 2);
        assert_eq!(lax_residual(&traj, 1, 1e-3).unwrap(), 0.0);
    }

    #[test]
    fn lax_residual_small_on_soliton_trajectory() {
        let grid = periodic(256, 40.0);
        let p = SolitonParams::new(4.0, -5.0).unwrap();
        let v0 = soliton_potential(&grid, &p, 0.0).unwrap();
        let params = KdvParams::new(1e-4).unwrap();
        let traj = evolve(&v0, 0.02, &params, 2).unwrap();
        let residual = lax_residual(&traj, 1, 1e-4).unwrap();
        assert!(residual < 1e-3, "residual {residual:.3e}");
    }

    #[test]
    fn lax_residual_second_order_in_delta() {
        // Deltas large enough that the O(δ²) central-difference error sits
        // well above the spectral truncation floor (~9e-6 at n = 256).
        let grid = periodic(256, 40.0);
        let p = SolitonParams::new(4.0, -5.0).unwrap();
        let v0 = soliton_potential(&grid, &p, 0.0).unwrap();
        let params = KdvParams::new(1e-4).unwrap();
        let traj = evolve(&v0, 0.02, &params, 2).unwrap();
        let coarse = lax_residual(&traj, 1, 1.6e-2).unwrap();
        let fine = lax_residual(&traj, 1, 8e-3).unwrap();
        let ratio = coarse / fine;
        assert!(ratio >= 3.5, "halving delta gave ratio {ratio:.2}");
    }

    #[test]
    fn unitary_flow_starts_at_identity_and_stays_unitary() {
        let grid = periodic(64, 40.0);
        let p = SolitonParams::new(1.0, 0.0).unwrap();
        let v0 = soliton_potential(&grid, &p, 0.0).unwrap();
        let params = KdvParams::new(1e-3).unwrap();
        let traj = evolve(&v0, 0.02, &params, 4).unwrap();
        let flow = evolve_unitary(&traj, 5).unwrap();
        let n = grid.n();
        let defect0 = (flow.u(0).matrix() - DMatrix::<Complex64>::identity(n, n)).norm();
        assert_eq!(defect0, 0.0);
        assert!(flow.unitarity_defect() < 1e-8, "{:.3e}", flow.unitarity_defect());
    }

    #[test]
    fn constant_generator_matches_one_shot_exponential() {
        // V ≡ 0: every midpoint generator is the same, so the stepped
        // product must equal exp(-i·s·A) directly.
        let traj = zero_trajectory(64, 0.05, 5);
        let flow = evolve_unitary(&traj, 4).unwrap();
        let a = build_generator(traj.field(0)).unwrap();
        let direct = unitary_exp(&a, 0.05);
        let err = (flow.u(flow.len() - 1).matrix() - &direct).norm();
        assert!(err < 1e-8, "stepped vs direct {err:.3e}");
    }

    #[test]
    fn conjugation_residual_zero_cases() {
        let traj = zero_trajectory(64, 0.02, 2);
        let flow = evolve_unitary(&traj, 2).unwrap();
        assert_eq!(conjugation_residual(&flow, &traj, 0).unwrap(), 0.0);
        // V ≡ 0: H commutes with the generator, so H(s) = H(0) and the
        // conjugated Hamiltonian returns to itself.
        let r = conjugation_residual(&flow, &traj, 2).unwrap();
        assert!(r < 1e-12, "free conjugation residual {r:.3e}");
    }

    #[test]
    fn conjugation_residual_small_along_soliton_flow() {
        let grid = periodic(128, 40.0);
        let p = SolitonParams::new(4.0, -5.0).unwrap();
        let v0 = soliton_potential(&grid, &p, 0.0).unwrap();
        let params = KdvParams::new(1e-4).unwrap();
        let traj = evolve(&v0, 0.02, &params, 4).unwrap();
        let flow = evolve_unitary(&traj, 13).unwrap();
        let r = conjugation_residual(&flow, &traj, 4).unwrap();
        assert!(r < 1e-3, "conjugation residual {r:.3e}");
    }

    #[test]
    fn transformed_canonicals_identity_at_s_zero() {
        let traj = zero_trajectory(64, 0.02, 2);
        let flow = evolve_unitary(&traj, 2).unwrap();
        let grid = flow.grid().clone();
        let (q_s, p_s) = transformed_canonicals(&flow, 0).unwrap();
        assert_eq!((q_s.matrix() - position_operator(&grid).matrix()).norm(), 0.0);
        assert_eq!(
            (p_s.matrix() - momentum_operator(&grid).unwrap().matrix()).norm(),
            0.0
        );
    }

    #[test]
    fn conjugation_preserves_commutator_and_spectrum() {
        let grid = periodic(64, 40.0);
        let p = SolitonParams::new(1.0, 0.0).unwrap();
        let v0 = soliton_potential(&grid, &p, 0.0).unwrap();
        let params = KdvParams::new(1e-3).unwrap();
        let traj = evolve(&v0, 0.05, &params, 2).unwrap();
        let flow = evolve_unitary(&traj, 10).unwrap();
        let j = 2;
        let (q_s, p_s) = transformed_canonicals(&flow, j).unwrap();

        let q = position_operator(&grid);
        let mom = momentum_operator(&grid).unwrap();
        let base_comm = q.matrix() * mom.matrix() - mom.matrix() * q.matrix();
        let u = flow.u(j).matrix();
        let transported = u.adjoint() * &base_comm * u;
        let got = q_s.matrix() * p_s.matrix() - p_s.matrix() * q_s.matrix();
        let rel = (&got - &transported).norm() / base_comm.norm();
        assert!(rel < 1e-9, "commutator transport defect {rel:.3e}");

        // Unitary conjugation leaves the position spectrum (the grid
        // coordinates) unchanged.
        let spec_q = eigenvalues(&q).unwrap();
        let spec_qs = eigenvalues(&q_s).unwrap();
        for (a, b) in spec_q.iter().zip(spec_qs.iter()) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}
