//! Periodic damped beam `eta_tt - gamma eta_tyy + eta_yyyy = F` on `[0, 1)`.

use crate::fields::StructureState;
use crate::periodic::{dft, idft_real, signed_wavenumber};
use rustfft::num_complex::Complex64;
use std::f64::consts::PI;

fn wavenumber(k: usize, n: usize) -> f64 {
    2.0 * PI * signed_wavenumber(k, n) as f64
}

/// One backward-Euler step, solved exactly per Fourier mode.
pub fn structure_step(s: &StructureState, forcing: &[f64], dt: f64, gamma: f64) -> StructureState {
    let n = s.len();
    assert_eq!(forcing.len(), n);
    let eta = dft(&s.eta);
    let w = dft(&s.eta_dot);
    let f = dft(forcing);
    let mut eta_new = vec![Complex64::new(0.0, 0.0); n];
    let mut w_new = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..n {
        let k2 = wavenumber(k, n).powi(2);
        let k4 = k2 * k2;
        let wk = (w[k] - eta[k] * (dt * k4) + f[k] * dt) / (1.0 + dt * gamma * k2 + dt * dt * k4);
        w_new[k] = wk;
        eta_new[k] = eta[k] + wk * dt;
    }
    StructureState::new(idft_real(&eta_new), idft_real(&w_new))
}

/// `sum_k |c_k|^2 k^(2 order)` for the trigonometric interpolant of `v`.
fn sobolev_sq(v: &[f64], order: i32) -> f64 {
    let n = v.len();
    let spec = dft(v);
    let nn = (n * n) as f64;
    (0..n)
        .filter(|&k| !(order % 2 == 1 && 2 * k == n))
        .map(|k| spec[k].norm_sqr() / nn * wavenumber(k, n).abs().powi(2 * order))
        .sum()
}

/// `(1/2 |eta_t|^2, 1/2 |eta_yy|^2)` in `L^2(0, 1)`.
pub fn structure_energy(s: &StructureState) -> (f64, f64) {
    (0.5 * sobolev_sq(&s.eta_dot, 0), 0.5 * sobolev_sq(&s.eta, 2))
}

/// `gamma |eta_ty|^2`, the instantaneous damping rate.
pub fn structure_dissipation_rate(s: &StructureState, gamma: f64) -> f64 {
    gamma * sobolev_sq(&s.eta_dot, 1)
}

/// `|eta|_{W^{2,2}}`.
pub fn w22_norm(eta: &[f64]) -> f64 {
    (sobolev_sq(eta, 0) + sobolev_sq(eta, 1) + sobolev_sq(eta, 2)).sqrt()
}

pub fn bending_norm(eta: &[f64]) -> f64 {
    sobolev_sq(eta, 2).sqrt()
}

/// Upper bound of `|eta|_{W^{2,2}} / |eta_yy|` over mean-free periodic data.
pub fn norm_equivalence_constant() -> f64 {
    let k = 2.0 * PI;
    (1.0 + k.powi(-2) + k.powi(-4)).sqrt()
}

/// `|v|_{W^{1,inf}}` using spectral derivatives.
pub fn w1inf_norm(v: &[f64]) -> f64 {
    let d = crate::periodic::derivative_at_nodes(v, 1);
    let m0 = v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let m1 = d.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    m0.max(m1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mode(n: usize, m: f64, a: f64) -> StructureState {
        StructureState::from_fn(n, |x| a * (2.0 * PI * m * x).sin(), |_| 0.0)
    }

    #[test]
    fn zero_state_stays_zero() {
        let s = StructureState::zeros(32);
        let out = structure_step(&s, &[0.0; 32], 1e-3, 0.1);
        assert_eq!(out, s);
        assert_eq!(structure_energy(&s), (0.0, 0.0));
    }

    #[test]
    fn bending_energy_of_sine() {
        let a = 0.3;
        let (_, b) = structure_energy(&mode(32, 1.0, a));
        let exact = 0.5 * a * a * (2.0 * PI).powi(4) * 0.5;
        assert!((b - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn energy_matches_quadrature() {
        let s = StructureState::from_fn(
            64,
            |x| 0.1 * (2.0 * PI * x).cos() + 0.02 * (6.0 * PI * x).sin(),
            |x| (4.0 * PI * x).sin(),
        );
        let (k, b) = structure_energy(&s);
        let kin: f64 = s.eta_dot.iter().map(|v| v * v).sum::<f64>() / 64.0 * 0.5;
        let d2 = crate::periodic::derivative_at_nodes(&s.eta, 2);
        let bend: f64 = d2.iter().map(|v| v * v).sum::<f64>() / 64.0 * 0.5;
        assert!((k - kin).abs() < 1e-12);
        assert!((b - bend).abs() < 1e-12 * bend.max(1.0));
    }

    #[test]
    fn damped_energy_decreases_and_mean_stays_zero() {
        let mut s = StructureState::from_fn(32, |x| 0.05 * (2.0 * PI * x).sin(), |x| (4.0 * PI * x).cos());
        let mut e = {
            let (a, b) = structure_energy(&s);
            a + b
        };
        for _ in 0..200 {
            s = structure_step(&s, &[0.0; 32], 1e-3, 0.5);
            let (a, b) = structure_energy(&s);
            assert!(a + b <= e + 1e-13);
            e = a + b;
            assert!(s.mean_eta().abs() <= 1e-13);
        }
    }

    #[test]
    fn undamped_frequency() {
        let k2 = (2.0 * PI).powi(2);
        let dt = 0.02 / k2;
        let mut s = mode(32, 1.0, 0.01);
        let node = 8;
        let mut prev = s.eta[node];
        let mut crossings = Vec::new();
        let mut t = 0.0;
        while crossings.len() < 5 {
            s = structure_step(&s, &[0.0; 32], dt, 0.0);
            t += dt;
            let cur = s.eta[node];
            if prev > 0.0 && cur <= 0.0 || prev < 0.0 && cur >= 0.0 {
                crossings.push(t - dt * cur / (cur - prev));
            }
            prev = cur;
        }
        let half_period = (crossings[4] - crossings[0]) / 4.0;
        let omega = PI / half_period;
        assert!((omega - k2).abs() < 0.02 * k2);
    }

    #[test]
    fn norm_equivalence_bounds() {
        let c = norm_equivalence_constant();
        assert!((c - 1.0131).abs() < 1e-3);
        for m in 1..8 {
            let s = mode(64, m as f64, 0.1);
            let r = w22_norm(&s.eta) / bending_norm(&s.eta);
            assert!(r >= 1.0 && r <= c + 1e-12);
        }
    }
}
