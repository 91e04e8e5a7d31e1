//! FFT-backed spectral primitives for periodic grids.
//!
//! Conventions: unnormalized forward transform, inverse scaled by 1/n,
//! wavenumbers in FFT ordering `0, 1, .., n/2, -n/2+1, .., -1` scaled by
//! 2π/L. Odd-order derivative symbols zero the Nyquist mode so that the
//! derivative of a real field stays real and the matrix representation
//! stays exactly antisymmetric.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::error::Error;
use crate::grid::{BoundaryKind, Field};
use crate::Result;

/// Forward/inverse FFT pair for a fixed transform size.
pub(crate) struct Spectral {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Spectral {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    /// Unnormalized spectrum of a real sample vector.
    pub fn analyze(&self, values: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(values.len(), self.n);
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        buf
    }

    /// In-place unnormalized forward transform.
    pub fn forward_inplace(&self, buf: &mut [Complex64]) {
        self.forward.process(buf);
    }

    /// In-place inverse transform including the 1/n scale.
    pub fn inverse_inplace(&self, buf: &mut [Complex64]) {
        self.inverse.process(buf);
        let scale = 1.0 / self.n as f64;
        for z in buf.iter_mut() {
            *z *= scale;
        }
    }

    /// Real samples from an unnormalized spectrum.
    pub fn synthesize_real(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        self.inverse_inplace(&mut spectrum);
        spectrum.into_iter().map(|z| z.re).collect()
    }
}

/// Signed mode number for FFT bin `m` of an `n`-point transform.
pub(crate) fn mode_number(m: usize, n: usize) -> i64 {
    if m <= n / 2 {
        m as i64
    } else {
        m as i64 - n as i64
    }
}

/// Wavenumbers 2π·mode/L in FFT bin order.
pub fn wavenumbers(n: usize, length: f64) -> Vec<f64> {
    let base = 2.0 * std::f64::consts::PI / length;
    (0..n).map(|m| base * mode_number(m, n) as f64).collect()
}

/// Multiplier implementing (d/dq)^order, with the Nyquist mode zeroed for
/// odd orders.
pub(crate) fn derivative_symbol(n: usize, length: f64, order: u8) -> Vec<Complex64> {
    let ks = wavenumbers(n, length);
    (0..n)
        .map(|m| {
            let k = ks[m];
            let nyquist = n.is_multiple_of(2) && m == n / 2;
            match order {
                1 => {
                    if nyquist {
                        Complex64::ZERO
                    } else {
                        Complex64::new(0.0, k)
                    }
                }
                2 => Complex64::new(-k * k, 0.0),
                3 => {
                    if nyquist {
                        Complex64::ZERO
                    } else {
                        Complex64::new(0.0, -k * k * k)
                    }
                }
                _ => unreachable!("derivative order restricted to 1..=3"),
            }
        })
        .collect()
}

/// Zero all modes with |mode| > n/3 (2/3-rule truncation for quadratic
/// products). Returns the number of surviving modes on one side.
pub(crate) fn dealias_inplace(spectrum: &mut [Complex64]) -> usize {
    let n = spectrum.len();
    let keep = n / 3;
    for (m, z) in spectrum.iter_mut().enumerate() {
        if mode_number(m, n).unsigned_abs() as usize > keep {
            *z = Complex64::ZERO;
        }
    }
    keep
}

/// Band-limited (trigonometric) interpolant of a periodic field.
///
/// Evaluation costs O(n) per point via incremental phase rotation.
pub struct FourierInterpolant {
    origin: f64,
    base: f64,
    half: usize,
    /// Normalized coefficients for modes 0..=n/2.
    coeffs: Vec<Complex64>,
}

impl FourierInterpolant {
    pub fn new(field: &Field) -> Result<Self> {
        let grid = field.grid();
        if grid.kind() != BoundaryKind::Periodic {
            return Err(Error::PeriodicRequired("FourierInterpolant"));
        }
        let n = grid.n();
        let spectral = Spectral::new(n);
        let mut spectrum = spectral.analyze(field.values());
        let scale = 1.0 / n as f64;
        for z in spectrum.iter_mut() {
            *z *= scale;
        }
        Ok(FourierInterpolant {
            origin: grid.points()[0],
            base: 2.0 * std::f64::consts::PI / grid.length(),
            half: n / 2,
            coeffs: spectrum[..=n / 2].to_vec(),
        })
    }

    /// Evaluate the interpolant at an arbitrary coordinate.
    pub fn eval(&self, q: f64) -> f64 {
        let phi = self.base * (q - self.origin);
        let rot = Complex64::from_polar(1.0, phi);
        let mut phase = rot;
        let mut acc = self.coeffs[0].re;
        for m in 1..self.half {
            acc += 2.0 * (self.coeffs[m] * phase).re;
            phase *= rot;
        }
        // Nyquist: symmetric cosine representation.
        acc += (self.coeffs[self.half] * phase).re;
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn round_trip_is_identity() {
        let n = 16;
        let spectral = Spectral::new(n);
        let values: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() + 0.2).collect();
        let back = spectral.synthesize_real(spectral.analyze(&values));
        for (a, b) in values.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn wavenumber_layout() {
        let ks = wavenumbers(8, 2.0 * std::f64::consts::PI);
        assert_eq!(ks, vec![0.0, 1.0, 2.0, 3.0, 4.0, -3.0, -2.0, -1.0]);
    }

    #[test]
    fn interpolant_reproduces_grid_values_and_midpoints() {
        let grid = Grid::new(64, 10.0, BoundaryKind::Periodic).unwrap();
        let f = Field::sample(&grid, |q| (2.0 * std::f64::consts::PI * q / 10.0).cos()).unwrap();
        let interp = FourierInterpolant::new(&f).unwrap();
        for (i, &q) in grid.points().iter().enumerate() {
            assert!((interp.eval(q) - f.values()[i]).abs() < 1e-12);
        }
        // Band-limited data is reproduced exactly between nodes too.
        let q = 1.2345;
        let exact = (2.0 * std::f64::consts::PI * q / 10.0).cos();
        assert!((interp.eval(q) - exact).abs() < 1e-12);
    }
}
