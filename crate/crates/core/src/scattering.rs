//! Scattering coefficients a(k), b(k) of compactly supported potentials and
//! their behaviour along the KdV flow.
//!
//! Convention: the stationary solution is integrated from the right edge of
//! the support window, where it is the pure transmitted plane wave e^{ikq},
//! to the left edge, where it is matched against a·e^{ikq} + b·e^{-ikq}.
//! V ≡ 0 then gives a = 1, b = 0, and real potentials obey
//! |a|² - |b|² = 1.

use num_complex::Complex64;

use crate::error::Error;
use crate::fourier::FourierInterpolant;
use crate::grid::{BoundaryKind, Field};
use crate::kdv::FlowTrajectory;
use crate::Result;

/// Per-wavenumber coefficients of one potential.
#[derive(Debug, Clone)]
pub struct ScatteringData {
    pub k_values: Vec<f64>,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    /// Support interval used for the integration.
    pub window: (f64, f64),
}

/// Potential support must stay below this magnitude outside the window.
const SUPPORT_THRESHOLD: f64 = 1e-10;
/// |a|² - |b|² = 1 enforcement at construction.
const WRONSKIAN_TOLERANCE: f64 = 1e-6;
/// Adaptive integrator tolerances; scattering accuracy has to exceed flow
/// accuracy so that coefficient drift can be attributed to the flow.
const ODE_RTOL: f64 = 1e-10;
const ODE_ATOL: f64 = 1e-12;

/// Interpolated view of a sampled potential: band-limited on periodic
/// grids, cubic Lagrange on boxes.
enum PotentialEval {
    Fourier(FourierInterpolant),
    Cubic {
        origin: f64,
        spacing: f64,
        values: Vec<f64>,
    },
}

impl PotentialEval {
    fn new(v: &Field) -> Result<PotentialEval> {
        match v.grid().kind() {
            BoundaryKind::Periodic => Ok(PotentialEval::Fourier(FourierInterpolant::new(v)?)),
            BoundaryKind::BoxDirichlet => Ok(PotentialEval::Cubic {
                origin: v.grid().points()[0],
                spacing: v.grid().spacing(),
                values: v.values().to_vec(),
            }),
        }
    }

    fn eval(&self, q: f64) -> f64 {
        match self {
            PotentialEval::Fourier(interp) => interp.eval(q),
            PotentialEval::Cubic {
                origin,
                spacing,
                values,
            } => {
                let n = values.len();
                let t = (q - origin) / spacing;
                let i = (t.floor() as i64).clamp(1, n as i64 - 3) as usize;
                let u = t - i as f64;
                // 4-point Lagrange on nodes -1, 0, 1, 2.
                let w0 = -u * (u - 1.0) * (u - 2.0) / 6.0;
                let w1 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0;
                let w2 = -(u + 1.0) * u * (u - 2.0) / 2.0;
                let w3 = (u + 1.0) * u * (u - 1.0) / 6.0;
                w0 * values[i - 1] + w1 * values[i] + w2 * values[i + 1] + w3 * values[i + 2]
            }
        }
    }
}

/// Dormand-Prince 5(4) step with embedded error estimate, for the
/// two-component complex system y' = f(q, y).
fn dp45_step<F>(f: &F, q: f64, y: &[Complex64; 2], h: f64) -> ([Complex64; 2], f64)
where
    F: Fn(f64, &[Complex64; 2]) -> [Complex64; 2],
{
    const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [
            19372.0 / 6561.0,
            -25360.0 / 2187.0,
            64448.0 / 6561.0,
            -212.0 / 729.0,
            0.0,
            0.0,
        ],
        [
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
            0.0,
        ],
        [
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ];
    // 4th-order weights for the error estimate.
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];

    let mut stages: [[Complex64; 2]; 7] = Default::default();
    for s in 0..7 {
        let mut ys = *y;
        for (j, stage) in stages.iter().enumerate().take(s) {
            let w = A[s][j];
            if w != 0.0 {
                ys[0] += h * w * stage[0];
                ys[1] += h * w * stage[1];
            }
        }
        stages[s] = f(q + C[s] * h, &ys);
    }
    // The last stage row doubles as the 5th-order weights.
    let mut y5 = *y;
    for (j, stage) in stages.iter().enumerate().take(6) {
        let w = A[6][j];
        if w != 0.0 {
            y5[0] += h * w * stage[0];
            y5[1] += h * w * stage[1];
        }
    }
    let mut y4 = *y;
    for (j, stage) in stages.iter().enumerate() {
        if B4[j] != 0.0 {
            y4[0] += h * B4[j] * stage[0];
            y4[1] += h * B4[j] * stage[1];
        }
    }
    let mut err = 0.0f64;
    for i in 0..2 {
        let scale = ODE_ATOL + ODE_RTOL * y[i].norm().max(y5[i].norm());
        err += ((y5[i] - y4[i]).norm() / scale).powi(2);
    }
    (y5, (err / 2.0).sqrt())
}

/// Adaptive integration from q_start to q_end (either direction).
fn integrate<F>(f: &F, q_start: f64, q_end: f64, y0: [Complex64; 2]) -> Result<[Complex64; 2]>
where
    F: Fn(f64, &[Complex64; 2]) -> [Complex64; 2],
{
    let span = q_end - q_start;
    if span == 0.0 {
        return Ok(y0);
    }
    let dir = span.signum();
    let mut h = dir * (span.abs() / 50.0).min(0.1);
    let mut q = q_start;
    let mut y = y0;
    let mut steps = 0usize;
    while (q_end - q) * dir > 0.0 {
        if (q + h - q_end) * dir > 0.0 {
            h = q_end - q;
        }
        let (y_new, err) = dp45_step(f, q, &y, h);
        if err <= 1.0 {
            q += h;
            y = y_new;
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h *= factor;
        if h.abs() < 1e-14 * span.abs() {
            return Err(Error::OdeFailure(format!(
                "step size underflow at q = {q:.6}"
            )));
        }
        steps += 1;
        if steps > 2_000_000 {
            return Err(Error::OdeFailure(format!(
                "step budget exhausted at q = {q:.6}"
            )));
        }
    }
    Ok(y)
}

/// Indices of the first and last sample with |V| at or above the support
/// threshold, or None for a numerically zero potential.
fn support_indices(v: &Field) -> Option<(usize, usize)> {
    let first = v
        .values()
        .iter()
        .position(|x| x.abs() >= SUPPORT_THRESHOLD)?;
    let last = v
        .values()
        .iter()
        .rposition(|x| x.abs() >= SUPPORT_THRESHOLD)
        .expect("rposition succeeds when position did");
    Some((first, last))
}

/// Compute a(k), b(k) for one potential by plane-wave matching across its
/// support window.
pub fn scattering_coefficients(v: &Field, k_values: &[f64]) -> Result<ScatteringData> {
    for &k in k_values {
        if k <= 0.0 || !k.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "wavenumbers must be positive, got {k}"
            )));
        }
    }
    let grid = v.grid();
    let n = grid.n();

    let Some((first, last)) = support_indices(v) else {
        // Numerically free potential.
        return Ok(ScatteringData {
            k_values: k_values.to_vec(),
            a: vec![Complex64::new(1.0, 0.0); k_values.len()],
            b: vec![Complex64::ZERO; k_values.len()],
            window: (grid.points()[0], grid.points()[n - 1]),
        });
    };
    if first < 2 || last > n - 3 {
        return Err(Error::WindowViolation(format!(
            "|V| >= {SUPPORT_THRESHOLD:.0e} within two samples of the domain edge \
             (support indices {first}..{last} of {n})"
        )));
    }
    let q_left = grid.points()[first - 2];
    let q_right = grid.points()[last + 2];

    let pot = PotentialEval::new(v)?;
    let mut a = Vec::with_capacity(k_values.len());
    let mut b = Vec::with_capacity(k_values.len());
    for &k in k_values {
        let k2 = k * k;
        let rhs = |q: f64, y: &[Complex64; 2]| -> [Complex64; 2] {
            [y[1], (pot.eval(q) - k2) * y[0]]
        };
        // Pure transmitted wave on the right, integrated leftwards.
        let phase = Complex64::from_polar(1.0, k * q_right);
        let y0 = [phase, Complex64::new(0.0, k) * phase];
        let y = integrate(&rhs, q_right, q_left, y0)?;

        let ik = Complex64::new(0.0, k);
        let e_plus = Complex64::from_polar(1.0, k * q_left);
        let ak = (y[0] + y[1] / ik) / (2.0 * e_plus);
        let bk = (y[0] - y[1] / ik) * e_plus / 2.0;
        let defect = ak.norm_sqr() - bk.norm_sqr() - 1.0;
        if defect.abs() > WRONSKIAN_TOLERANCE {
            return Err(Error::WronskianViolation { k, defect });
        }
        a.push(ak);
        b.push(bk);
    }
    Ok(ScatteringData {
        k_values: k_values.to_vec(),
        a,
        b,
        window: (q_left, q_right),
    })
}

/// Ordinary least squares y = c0 + c1·x, returning (c0, c1).
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    (intercept, slope)
}

/// Behaviour of a(k) and b(k) along a trajectory: a and |b| should be flow
/// invariants while arg b drifts linearly in s at a k-dependent rate.
#[derive(Debug, Clone, serde::Serialize)]
pub struct FlowScatteringReport {
    pub k_values: Vec<f64>,
    pub s_values: Vec<f64>,
    /// a[j][i]: coefficient of snapshot j at k_values[i].
    pub a: Vec<Vec<Complex64>>,
    pub b: Vec<Vec<Complex64>>,
    /// max_j |a(k, s_j) - a(k, 0)| per k.
    pub a_drift: Vec<f64>,
    /// max_j ||b(k, s_j)| - |b(k, 0)|| per k.
    pub b_modulus_drift: Vec<f64>,
    /// Worst |(|a|² - |b|²) - 1| over all (k, s).
    pub wronskian_defect: f64,
    /// Unwrapped arg b(k, s_j) per k (nearest-branch continuation from
    /// s = 0); None where |b| is too small to carry a phase.
    pub phases: Vec<Option<Vec<f64>>>,
    /// Fitted d(arg b)/ds per k; None where |b| is too small to carry a
    /// phase.
    pub phase_rates: Vec<Option<f64>>,
    /// RMS residual of each linear phase fit, in radians.
    pub phase_fit_rms: Vec<Option<f64>>,
    /// c in rate ≈ c·k³ over the k with measurable phases.
    pub cubic_rate_coefficient: Option<f64>,
    /// sqrt(Σ(rate - c·k³)² / Σ rate²).
    pub cubic_fit_relative_residual: Option<f64>,
}

const PHASE_MODULUS_FLOOR: f64 = 1e-8;

pub fn flow_scattering_report(
    traj: &FlowTrajectory,
    k_values: &[f64],
) -> Result<FlowScatteringReport> {
    let mut a = Vec::with_capacity(traj.len());
    let mut b = Vec::with_capacity(traj.len());
    let mut wronskian_defect = 0.0f64;
    for (_, field) in traj.samples() {
        let data = scattering_coefficients(field, k_values)?;
        for i in 0..k_values.len() {
            let defect = (data.a[i].norm_sqr() - data.b[i].norm_sqr() - 1.0).abs();
            wronskian_defect = wronskian_defect.max(defect);
        }
        a.push(data.a);
        b.push(data.b);
    }

    let s_values = traj.s_values();
    let nk = k_values.len();
    let mut a_drift = vec![0.0f64; nk];
    let mut b_modulus_drift = vec![0.0f64; nk];
    for j in 1..a.len() {
        for i in 0..nk {
            a_drift[i] = a_drift[i].max((a[j][i] - a[0][i]).norm());
            b_modulus_drift[i] =
                b_modulus_drift[i].max((b[j][i].norm() - b[0][i].norm()).abs());
        }
    }

    let mut phases = Vec::with_capacity(nk);
    let mut phase_rates = Vec::with_capacity(nk);
    let mut phase_fit_rms = Vec::with_capacity(nk);
    for i in 0..nk {
        let measurable = (0..b.len()).all(|j| b[j][i].norm() > PHASE_MODULUS_FLOOR);
        if !measurable || b.len() < 2 {
            phases.push(None);
            phase_rates.push(None);
            phase_fit_rms.push(None);
            continue;
        }
        // Nearest-branch unwrapping from s = 0.
        let mut unwrapped = Vec::with_capacity(b.len());
        let mut prev = b[0][i].arg();
        unwrapped.push(prev);
        for row in b.iter().skip(1) {
            let raw = row[i].arg();
            let next =
                raw + std::f64::consts::TAU * ((prev - raw) / std::f64::consts::TAU).round();
            unwrapped.push(next);
            prev = next;
        }
        let (intercept, slope) = linear_fit(&s_values, &unwrapped);
        let rms = (unwrapped
            .iter()
            .zip(&s_values)
            .map(|(p, s)| (p - intercept - slope * s).powi(2))
            .sum::<f64>()
            / unwrapped.len() as f64)
            .sqrt();
        phases.push(Some(unwrapped));
        phase_rates.push(Some(slope));
        phase_fit_rms.push(Some(rms));
    }

    // One-parameter fit rate = c·k³ over the measurable k.
    let pairs: Vec<(f64, f64)> = k_values
        .iter()
        .zip(&phase_rates)
        .filter_map(|(&k, r)| r.map(|rate| (k, rate)))
        .collect();
    let (cubic_rate_coefficient, cubic_fit_relative_residual) = if pairs.len() >= 2 {
        let num: f64 = pairs.iter().map(|(k, r)| r * k.powi(3)).sum();
        let den: f64 = pairs.iter().map(|(k, _)| k.powi(6)).sum();
        let c = num / den;
        let ss_res: f64 = pairs.iter().map(|(k, r)| (r - c * k.powi(3)).powi(2)).sum();
        let ss_tot: f64 = pairs.iter().map(|(_, r)| r * r).sum();
        (Some(c), Some((ss_res / ss_tot).sqrt()))
    } else {
        (None, None)
    };

    Ok(FlowScatteringReport {
        k_values: k_values.to_vec(),
        s_values,
        a,
        b,
        a_drift,
        b_modulus_drift,
        wronskian_defect,
        phases,
        phase_rates,
        phase_fit_rms,
        cubic_rate_coefficient,
        cubic_fit_relative_residual,
    })
}
