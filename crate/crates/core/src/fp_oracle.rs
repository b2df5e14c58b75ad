//! Configuration-space Fokker-Planck solver for Hookean dumbbells under a
//! frozen, spatially homogeneous rotation, used to check the stress closure.

use crate::error::{Error, Result};
use crate::linalg::{pcg, CgOptions, Jacobi, LinearOperator};
use crate::tensor::{reaction_exact, Mat2, SymMat2};
use std::f64::consts::PI;

pub const FP_SOLVE_TOL: f64 = 1e-13;
pub const FP_SOLVE_MAX_ITER: usize = 1000;
/// Courant limit of the explicit drift stages.
pub const FP_CFL_LIMIT: f64 = 0.5;

/// Uniform cell grid on `[-q_max, q_max]^2` with the Maxwellian sampled at
/// cell centres and at faces.
#[derive(Debug, Clone)]
pub struct QGrid {
    pub nq: usize,
    pub q_max: f64,
    pub h: f64,
    /// Cell-centre coordinates per axis.
    pub q: Vec<f64>,
    pub m_cell: Vec<f64>,
    /// Maxwellian at x-faces `(i + 1/2, j)`, `i = 0..nq-1`, row-major in `j`.
    pub m_xface: Vec<f64>,
    /// Maxwellian at y-faces `(i, j + 1/2)`.
    pub m_yface: Vec<f64>,
}

fn maxwellian(q1: f64, q2: f64) -> f64 {
    (-0.5 * (q1 * q1 + q2 * q2)).exp() / (2.0 * PI)
}

impl QGrid {
    pub fn new(nq: usize, q_max: f64) -> Result<Self> {
        if nq < 8 || !(q_max > 0.0) {
            return Err(Error::Validation(format!("bad q-grid nq = {nq}, q_max = {q_max}")));
        }
        let h = 2.0 * q_max / nq as f64;
        let q: Vec<f64> = (0..nq).map(|i| -q_max + (i as f64 + 0.5) * h).collect();
        let mut m_cell = vec![0.0; nq * nq];
        let mut m_xface = vec![0.0; nq * nq];
        let mut m_yface = vec![0.0; nq * nq];
        for j in 0..nq {
            for i in 0..nq {
                let k = j * nq + i;
                m_cell[k] = maxwellian(q[i], q[j]);
                m_xface[k] = maxwellian(q[i] + 0.5 * h, q[j]);
                m_yface[k] = maxwellian(q[i], q[j] + 0.5 * h);
            }
        }
        Ok(Self { nq, q_max, h, q, m_cell, m_xface, m_yface })
    }

    pub fn len(&self) -> usize {
        self.nq * self.nq
    }

    pub fn is_empty(&self) -> bool {
        self.nq == 0
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.h * self.h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FPState {
    pub f: Vec<f64>,
}

impl FPState {
    pub fn maxwellian(grid: &QGrid) -> Self {
        Self { f: grid.m_cell.clone() }
    }

    /// Gaussian with mass `rho0` and second moment `t0`.
    pub fn gaussian(grid: &QGrid, rho0: f64, t0: &SymMat2) -> Result<Self> {
        if !(rho0 > 0.0) || !t0.is_spd() {
            return Err(Error::Validation("gaussian needs rho0 > 0 and SPD T0".into()));
        }
        let c = t0.scale(1.0 / rho0);
        let det = c.det();
        let (i11, i12, i22) = (c.t22 / det, -c.t12 / det, c.t11 / det);
        let norm = rho0 / (2.0 * PI * det.sqrt());
        let n = grid.nq;
        let mut f = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                let (a, b) = (grid.q[i], grid.q[j]);
                f[j * n + i] = norm * (-0.5 * (i11 * a * a + 2.0 * i12 * a * b + i22 * b * b)).exp();
            }
        }
        Ok(Self { f })
    }
}

/// `(rho, T)` by midpoint quadrature.
pub fn moments(s: &FPState, grid: &QGrid) -> (f64, SymMat2) {
    let n = grid.nq;
    let (mut r, mut t11, mut t12, mut t22) = (0.0, 0.0, 0.0, 0.0);
    for j in 0..n {
        for i in 0..n {
            let f = s.f[j * n + i];
            let (a, b) = (grid.q[i], grid.q[j]);
            r += f;
            t11 += f * a * a;
            t12 += f * a * b;
            t22 += f * b * b;
        }
    }
    let w = grid.h * grid.h;
    (r * w, SymMat2::new(t11 * w, t12 * w, t22 * w))
}

fn van_leer(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

/// `-div(W q f)` with limited upwind reconstruction and no flux through the
/// truncation boundary.
fn drift_rhs(f: &[f64], w: &Mat2, grid: &QGrid, out: &mut [f64]) {
    let n = grid.nq;
    let h = grid.h;
    out.iter_mut().for_each(|v| *v = 0.0);
    let slope = |k: usize, stride: usize, idx: usize| -> f64 {
        if idx == 0 || idx == n - 1 {
            0.0
        } else {
            van_leer(f[k] - f[k - stride], f[k + stride] - f[k])
        }
    };
    for j in 0..n {
        for i in 0..n - 1 {
            let (q1, q2) = (grid.q[i] + 0.5 * h, grid.q[j]);
            let v = w.0[0][0] * q1 + w.0[0][1] * q2;
            let k = j * n + i;
            let face = if v >= 0.0 { f[k] + 0.5 * slope(k, 1, i) } else { f[k + 1] - 0.5 * slope(k + 1, 1, i + 1) };
            let flux = v * face / h;
            out[k] -= flux;
            out[k + 1] += flux;
        }
    }
    for j in 0..n - 1 {
        for i in 0..n {
            let (q1, q2) = (grid.q[i], grid.q[j] + 0.5 * h);
            let v = w.0[1][0] * q1 + w.0[1][1] * q2;
            let k = j * n + i;
            let face = if v >= 0.0 { f[k] + 0.5 * slope(k, n, j) } else { f[k + n] - 0.5 * slope(k + n, n, j + 1) };
            let flux = v * face / h;
            out[k] -= flux;
            out[k + n] += flux;
        }
    }
}

fn drift_courant(w: &Mat2, grid: &QGrid, dt: f64) -> f64 {
    let q = grid.q_max;
    let vx = w.0[0][0].abs() * q + w.0[0][1].abs() * q;
    let vy = w.0[1][0].abs() * q + w.0[1][1].abs() * q;
    dt * (vx + vy) / grid.h
}

/// Heun (SSP-RK2) drift step.
fn drift(f: &[f64], w: &Mat2, grid: &QGrid, dt: f64) -> Vec<f64> {
    let mut k = vec![0.0; f.len()];
    drift_rhs(f, w, grid, &mut k);
    let f1: Vec<f64> = f.iter().zip(&k).map(|(a, b)| a + dt * b).collect();
    drift_rhs(&f1, w, grid, &mut k);
    f.iter().zip(&f1).zip(&k).map(|((a, b), c)| 0.5 * a + 0.5 * (b + dt * c)).collect()
}

/// `M g / dt - div(M grad g)` acting on `g = f / M`.
struct FpDiffusion<'a> {
    grid: &'a QGrid,
    dt: f64,
}

impl FpDiffusion<'_> {
    fn diagonal(&self) -> Vec<f64> {
        let g = self.grid;
        let n = g.nq;
        let c = 1.0 / (g.h * g.h);
        let mut d: Vec<f64> = g.m_cell.iter().map(|m| m / self.dt).collect();
        for j in 0..n {
            for i in 0..n {
                let k = j * n + i;
                if i + 1 < n {
                    d[k] += c * g.m_xface[k];
                    d[k + 1] += c * g.m_xface[k];
                }
                if j + 1 < n {
                    d[k] += c * g.m_yface[k];
                    d[k + n] += c * g.m_yface[k];
                }
            }
        }
        d
    }
}

impl LinearOperator for FpDiffusion<'_> {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let g = self.grid;
        let n = g.nq;
        let c = 1.0 / (g.h * g.h);
        for (k, yk) in y.iter_mut().enumerate() {
            *yk = g.m_cell[k] / self.dt * x[k];
        }
        for j in 0..n {
            for i in 0..n {
                let k = j * n + i;
                if i + 1 < n {
                    let fl = c * g.m_xface[k] * (x[k + 1] - x[k]);
                    y[k] -= fl;
                    y[k + 1] += fl;
                }
                if j + 1 < n {
                    let fl = c * g.m_yface[k] * (x[k + n] - x[k]);
                    y[k] -= fl;
                    y[k + n] += fl;
                }
            }
        }
    }
}

fn diffuse(f: &[f64], grid: &QGrid, dt: f64) -> Result<Vec<f64>> {
    let op = FpDiffusion { grid, dt };
    let pc = Jacobi(op.diagonal());
    let b: Vec<f64> = f.iter().map(|v| v / dt).collect();
    let mut g: Vec<f64> = f.iter().zip(&grid.m_cell).map(|(a, m)| a / m).collect();
    let opts = CgOptions { tol: FP_SOLVE_TOL, max_iter: FP_SOLVE_MAX_ITER, constant_nullspace: false };
    pcg(&op, &pc, &b, &mut g, opts)
        .map_err(|s| Error::SolveDiverged { residual: s.residual, iterations: s.iterations })?;
    Ok(g.iter().zip(&grid.m_cell).map(|(a, m)| a * m).collect())
}

/// One Strang step: half drift, implicit Maxwellian diffusion, half drift.
pub fn fp_step(s: &FPState, w: &Mat2, dt: f64, grid: &QGrid) -> Result<FPState> {
    let defect = w.antisymmetry_defect();
    if defect > 1e-12 * w.frobenius() {
        return Err(Error::NotAntisymmetric { defect });
    }
    let courant = drift_courant(w, grid, 0.5 * dt);
    if courant > FP_CFL_LIMIT {
        return Err(Error::CflViolation { courant, limit: FP_CFL_LIMIT });
    }
    let f = drift(&s.f, w, grid, 0.5 * dt);
    let f = diffuse(&f, grid, dt)?;
    let f = drift(&f, w, grid, 0.5 * dt);
    Ok(FPState { f })
}

/// One sample of a closure comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosureSample {
    pub t: f64,
    pub rho: f64,
    pub meso: SymMat2,
    pub macro_: SymMat2,
}

impl ClosureSample {
    pub fn relative_error(&self) -> f64 {
        self.meso.sub(&self.macro_).frobenius() / self.macro_.frobenius()
    }
}

/// Evolves the Gaussian with moments `(rho0, t0)` and the local stress law
/// side by side.
pub fn closure_series(
    w: &Mat2,
    rho0: f64,
    t0: &SymMat2,
    t_end: f64,
    dt: f64,
    grid: &QGrid,
) -> Result<Vec<ClosureSample>> {
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(Error::Validation("closure needs dt > 0 and t_end >= 0".into()));
    }
    let mut s = FPState::gaussian(grid, rho0, t0)?;
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let h = if steps == 0 { 0.0 } else { t_end / steps as f64 };
    let (rho, meso) = moments(&s, grid);
    let mut out = vec![ClosureSample { t: 0.0, rho, meso, macro_: *t0 }];
    for n in 1..=steps {
        s = fp_step(&s, w, h, grid)?;
        let t = n as f64 * h;
        let (rho, meso) = moments(&s, grid);
        let macro_ = reaction_exact(t0, rho0, w, t)?;
        out.push(ClosureSample { t, rho, meso, macro_ });
    }
    Ok(out)
}

/// `max_t |T_meso - T_macro| / |T_macro|`.
pub fn closure_residual(w: &Mat2, rho0: f64, t0: &SymMat2, t_end: f64, dt: f64, grid: &QGrid) -> Result<f64> {
    let series = closure_series(w, rho0, t0, t_end, dt, grid)?;
    Ok(series.iter().map(ClosureSample::relative_error).fold(0.0, f64::max))
}

/// Decay rate of the deviatoric mesoscopic stress, from a log-linear fit.
pub fn relaxation_rate(series: &[ClosureSample]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|s| s.t > 0.0)
        .map(|s| (s.t, s.meso.sub(&SymMat2::isotropic(0.5 * s.meso.trace())).frobenius()))
        .filter(|(_, d)| *d > 0.0)
        .map(|(t, d)| (t, d.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(Error::DegenerateFit("deviatoric stress vanished".into()));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let stt: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let stl: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    Ok(-stl / stt)
}
