//! Trigonometric interpolation of periodic nodal data on `[0, 1)`.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::PI;

/// Real trigonometric interpolant of `n` equispaced samples at
/// `x_i = (i + offset) / n`.
#[derive(Debug, Clone)]
pub struct TrigSeries {
    /// `c_k = (1/n) sum_i f_i exp(-2 pi i k x_i)` for `k = 0..=n/2`.
    coeffs: Vec<Complex64>,
    n: usize,
}

pub fn dft(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    buf
}

pub fn idft_real(spec: &[Complex64]) -> Vec<f64> {
    let n = spec.len();
    let mut buf = spec.to_vec();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    buf.iter().map(|c| c.re / n as f64).collect()
}

/// Signed wavenumber of DFT bin `k` for length `n`.
pub fn signed_wavenumber(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

impl TrigSeries {
    pub fn new(values: &[f64], offset: f64) -> Self {
        let n = values.len();
        let raw = dft(values);
        let coeffs = (0..=n / 2)
            .map(|k| {
                let phase = Complex64::from_polar(1.0, -2.0 * PI * k as f64 * offset / n as f64);
                raw[k] * phase / n as f64
            })
            .collect();
        Self { coeffs, n }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `d^order f / dx^order` at `x`.
    pub fn eval(&self, x: f64, order: u32) -> f64 {
        let n = self.n;
        let mut sum = if order == 0 { self.coeffs[0].re } else { 0.0 };
        for k in 1..=n / 2 {
            let omega = 2.0 * PI * k as f64;
            let factor = Complex64::new(0.0, omega).powu(order);
            let term = self.coeffs[k] * factor * Complex64::from_polar(1.0, omega * x);
            if 2 * k == n {
                sum += term.re;
            } else {
                sum += 2.0 * term.re;
            }
        }
        sum
    }

    /// Value and first two derivatives at `x`.
    pub fn eval3(&self, x: f64) -> [f64; 3] {
        let n = self.n;
        let mut out = [self.coeffs[0].re, 0.0, 0.0];
        for k in 1..=n / 2 {
            let omega = 2.0 * PI * k as f64;
            let base = self.coeffs[k] * Complex64::from_polar(1.0, omega * x);
            let weight = if 2 * k == n { 1.0 } else { 2.0 };
            out[0] += weight * base.re;
            out[1] += weight * (base * Complex64::new(0.0, omega)).re;
            out[2] += weight * (-omega * omega * base.re);
        }
        out
    }
}

/// Spectral derivative of order `order` at the sample nodes.
pub fn derivative_at_nodes(values: &[f64], order: u32) -> Vec<f64> {
    let n = values.len();
    let mut spec = dft(values);
    for (k, c) in spec.iter_mut().enumerate() {
        let m = signed_wavenumber(k, n);
        if order % 2 == 1 && 2 * k == n {
            *c = Complex64::new(0.0, 0.0);
            continue;
        }
        let omega = 2.0 * PI * m as f64;
        *c *= Complex64::new(0.0, omega).powu(order);
    }
    idft_real(&spec)
}
