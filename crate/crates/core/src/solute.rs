//! Finite-volume update of the polymer density and extra stress.
//!
//! Both quantities satisfy `d_t(J f) + div(V f) = eps div(A grad f) + R` on the
//! reference grid, with `V = B u + J w` the transformed volume flux and `R` the
//! local corotational reaction. A step is Strang split: half transport, exact
//! reaction, half transport, then implicit diffusion.

use crate::error::{Error, Result};
use crate::fields::{Coords, Grid2, ScalarField, SymTensorField, VectorField};
use crate::fluid::{bop, bop_transpose, ChannelGeometry};
use crate::linalg::{pcg, CgOptions, Jacobi, LinearOperator, Preconditioner, StripSolver, YBoundary};
use crate::tensor::{reaction_exact, vorticity, Mat2};

pub const DIFFUSION_TOL: f64 = 1e-12;
pub const DIFFUSION_MAX_ITER: usize = 2000;
/// Upwind transport stays monotone up to a unit Courant number.
pub const ADVECTION_CFL_LIMIT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SoluteState {
    pub rho: ScalarField,
    pub t: SymTensorField,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdvectionScheme {
    Upwind,
    Centered,
}

/// Cell volumes before and after a step and the face volume fluxes
/// (per unit time, already multiplied by face length).
#[derive(Debug, Clone)]
pub struct Transport {
    pub grid: Grid2,
    pub vol_old: Vec<f64>,
    pub vol_new: Vec<f64>,
    pub flux_x: Vec<f64>,
    pub flux_y: Vec<f64>,
}

/// Cell volumes `J |cell|` of the channel geometry.
pub fn channel_volumes(geo: &ChannelGeometry) -> Vec<f64> {
    let g = &geo.grid;
    geo.j_c.iter().map(|j| j * g.hx * g.hy).collect()
}

impl Transport {
    /// Channel transport with volumes moving from `old` to `geo`.
    pub fn channel(u: &VectorField, old: &ChannelGeometry, geo: &ChannelGeometry) -> Self {
        let g = geo.grid;
        let flux = bop(u, geo);
        let flux_x = flux.u.iter().map(|f| f * g.hy).collect();
        let mut flux_y: Vec<f64> = flux.v.iter().zip(&geo.jw_yf).map(|(f, w)| (f + w) * g.hx).collect();
        // the walls move with the fluid
        for i in 0..g.nx {
            flux_y[i] = 0.0;
            flux_y[g.ny * g.nx + i] = 0.0;
        }
        Self { grid: g, vol_old: channel_volumes(old), vol_new: channel_volumes(geo), flux_x, flux_y }
    }

    /// Static polar grid with face velocities `u.u` (angular) and `u.v` (radial).
    pub fn polar(u: &VectorField) -> Self {
        let g = u.grid;
        let vol: Vec<f64> = (0..g.n_cells()).map(|c| g.cell_measure(c / g.nx)).collect();
        let flux_x = u.u.iter().enumerate().map(|(k, v)| v * g.xface_length(k / g.nx)).collect();
        let mut flux_y: Vec<f64> = u.v.iter().enumerate().map(|(k, v)| v * g.yface_length(k / g.nx)).collect();
        for i in 0..g.nx {
            flux_y[g.ny * g.nx + i] = 0.0;
        }
        Self { grid: g, vol_old: vol.clone(), vol_new: vol, flux_x, flux_y }
    }

    fn volumes_at(&self, theta: f64) -> Vec<f64> {
        self.vol_old.iter().zip(&self.vol_new).map(|(a, b)| a + theta * (b - a)).collect()
    }

    /// Largest outflow fraction `dt sum_out F / vol` over all cells.
    pub fn courant(&self, dt: f64) -> f64 {
        let g = &self.grid;
        let mut worst: f64 = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let c = j * g.nx + i;
                let out = (-self.flux_x[c]).max(0.0)
                    + self.flux_x[j * g.nx + g.ip(i)].max(0.0)
                    + (-self.flux_y[c]).max(0.0)
                    + self.flux_y[c + g.nx].max(0.0);
                worst = worst.max(dt * out / self.vol_old[c].min(self.vol_new[c]));
            }
        }
        worst
    }
}

fn face_value(left: f64, right: f64, flux: f64, scheme: AdvectionScheme) -> f64 {
    match scheme {
        AdvectionScheme::Upwind => {
            if flux >= 0.0 {
                left
            } else {
                right
            }
        }
        AdvectionScheme::Centered => 0.5 * (left + right),
    }
}

/// Conservative transport of cell data from volumes `va` to `vb` over `dt`.
fn advect_raw(f: &[f64], tr: &Transport, va: &[f64], vb: &[f64], dt: f64, scheme: AdvectionScheme) -> Vec<f64> {
    let g = &tr.grid;
    let (nx, ny) = (g.nx, g.ny);
    let mut acc: Vec<f64> = f.iter().zip(va).map(|(x, v)| x * v).collect();
    for j in 0..ny {
        for i in 0..nx {
            let c = j * nx + i;
            let l = j * nx + g.im(i);
            let flux = tr.flux_x[c];
            let q = dt * flux * face_value(f[l], f[c], flux, scheme);
            acc[l] -= q;
            acc[c] += q;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let c = j * nx + i;
            let flux = tr.flux_y[c];
            let q = dt * flux * face_value(f[c - nx], f[c], flux, scheme);
            acc[c - nx] -= q;
            acc[c] += q;
        }
    }
    acc.iter().zip(vb).map(|(a, v)| a / v).collect()
}

/// Transports a scalar field over `dt` (full volume change).
pub fn advect(f: &ScalarField, tr: &Transport, dt: f64, scheme: AdvectionScheme) -> Result<ScalarField> {
    let courant = tr.courant(dt);
    if courant > ADVECTION_CFL_LIMIT {
        return Err(Error::CflViolation { courant, limit: ADVECTION_CFL_LIMIT });
    }
    Ok(ScalarField { grid: f.grid, data: advect_raw(&f.data, tr, &tr.vol_old, &tr.vol_new, dt, scheme) })
}

/// Implicit diffusion operator with zero-flux walls.
#[derive(Debug, Clone, Copy)]
pub enum Diffusion<'a> {
    Channel(&'a ChannelGeometry),
    Polar,
}

struct DiffusionOperator<'a> {
    kind: Diffusion<'a>,
    grid: Grid2,
    vol: &'a [f64],
    coeff: f64,
}

/// `-div(A grad f)` integrated over cells.
fn stiffness(kind: Diffusion<'_>, g: &Grid2, f: &[f64]) -> Vec<f64> {
    let (nx, ny) = (g.nx, g.ny);
    match kind {
        Diffusion::Channel(geo) => {
            let mut grad = VectorField::zeros(*g);
            for j in 0..ny {
                for i in 0..nx {
                    grad.u[j * nx + i] = (f[j * nx + i] - f[j * nx + g.im(i)]) / g.hx;
                }
            }
            for j in 1..ny {
                for i in 0..nx {
                    grad.v[j * nx + i] = (f[j * nx + i] - f[(j - 1) * nx + i]) / g.hy;
                }
            }
            let mut w = bop_transpose(&grad, geo);
            for (k, v) in w.u.iter_mut().enumerate() {
                *v /= geo.j_xf[k];
            }
            for (k, v) in w.v.iter_mut().enumerate() {
                *v /= geo.j_yf[k];
            }
            let flux = bop(&w, geo);
            let mut out = vec![0.0; nx * ny];
            for j in 0..ny {
                for i in 0..nx {
                    let c = j * nx + i;
                    let d = (flux.u[j * nx + g.ip(i)] - flux.u[c]) / g.hx + (flux.v[c + nx] - flux.v[c]) / g.hy;
                    out[c] = -d * g.hx * g.hy;
                }
            }
            out
        }
        Diffusion::Polar => {
            let mut out = vec![0.0; nx * ny];
            for j in 0..ny {
                let tx = g.xface_length(j) / g.xface_distance(j);
                for i in 0..nx {
                    let c = j * nx + i;
                    let l = j * nx + g.im(i);
                    let q = tx * (f[c] - f[l]);
                    out[c] += q;
                    out[l] -= q;
                }
            }
            for j in 1..ny {
                let ty = g.yface_length(j) / g.hy;
                for i in 0..nx {
                    let c = j * nx + i;
                    let q = ty * (f[c] - f[c - nx]);
                    out[c] += q;
                    out[c - nx] -= q;
                }
            }
            out
        }
    }
}

impl LinearOperator for DiffusionOperator<'_> {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let k = stiffness(self.kind, &self.grid, x);
        for i in 0..x.len() {
            y[i] = self.vol[i] * x[i] + self.coeff * k[i];
        }
    }
}

struct ScaledStrip {
    solver: StripSolver,
    scale: f64,
}

impl Preconditioner for ScaledStrip {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let s = self.solver.solve(r);
        for (zi, si) in z.iter_mut().zip(s) {
            *zi = si / self.scale;
        }
    }
}

/// `vol f_new + eps dt K f_new = vol f`.
fn diffuse_raw(f: &[f64], kind: Diffusion<'_>, g: &Grid2, vol: &[f64], eps: f64, dt: f64) -> Result<Vec<f64>> {
    let op = DiffusionOperator { kind, grid: *g, vol, coeff: eps * dt };
    let rhs: Vec<f64> = f.iter().zip(vol).map(|(x, v)| x * v).collect();
    let mut x = f.to_vec();
    let opts = CgOptions { tol: DIFFUSION_TOL, max_iter: DIFFUSION_MAX_ITER, constant_nullspace: false };
    let stats = match kind {
        Diffusion::Channel(_) => {
            let area = g.hx * g.hy;
            let pc = ScaledStrip {
                solver: StripSolver::new(g.nx, g.ny, g.hx, g.hy, 1.0, eps * dt, YBoundary::NeumannCell),
                scale: area,
            };
            pcg(&op, &pc, &rhs, &mut x, opts)
        }
        Diffusion::Polar => {
            let diag: Vec<f64> = (0..f.len())
                .map(|c| {
                    let j = c / g.nx;
                    let mut d = 2.0 * g.xface_length(j) / g.xface_distance(j);
                    if j > 0 {
                        d += g.yface_length(j) / g.hy;
                    }
                    if j + 1 < g.ny {
                        d += g.yface_length(j + 1) / g.hy;
                    }
                    vol[c] + eps * dt * d
                })
                .collect();
            pcg(&op, &Jacobi(diag), &rhs, &mut x, opts)
        }
    };
    stats.map_err(|s| Error::DiffusionSolveDiverged { residual: s.residual, iterations: s.iterations })?;
    Ok(x)
}

/// Implicit zero-flux diffusion step. `eps = 0` returns the input.
pub fn diffuse_neumann(f: &ScalarField, eps: f64, kind: Diffusion<'_>, vol: &[f64], dt: f64) -> Result<ScalarField> {
    if eps == 0.0 {
        return Ok(f.clone());
    }
    Ok(ScalarField { grid: f.grid, data: diffuse_raw(&f.data, kind, &f.grid, vol, eps, dt)? })
}

/// `int A grad f . grad f` (the physical Dirichlet energy).
pub fn dirichlet_energy(f: &[f64], kind: Diffusion<'_>, g: &Grid2) -> f64 {
    let k = stiffness(kind, g, f);
    f.iter().zip(&k).map(|(a, b)| a * b).sum()
}

#[derive(Debug, Clone, Copy)]
pub struct SoluteOptions {
    pub scheme: AdvectionScheme,
}

impl Default for SoluteOptions {
    fn default() -> Self {
        Self { scheme: AdvectionScheme::Upwind }
    }
}

/// One split step. `grad_u` is the physical velocity gradient per cell.
pub fn solute_step(
    s: &SoluteState,
    tr: &Transport,
    grad_u: &[Mat2],
    diffusion: Diffusion<'_>,
    eps: f64,
    dt: f64,
    opts: SoluteOptions,
) -> Result<SoluteState> {
    let g = s.rho.grid;
    if !g.same_shape(&tr.grid) || grad_u.len() != g.n_cells() {
        return Err(Error::GridMismatch("solute state and transport grids differ".into()));
    }
    if !(eps >= 0.0) {
        return Err(Error::Validation(format!("eps = {eps} must be nonnegative")));
    }
    let half = 0.5 * dt;
    let courant = tr.courant(half);
    if courant > ADVECTION_CFL_LIMIT {
        return Err(Error::CflViolation { courant, limit: ADVECTION_CFL_LIMIT });
    }
    let mid = tr.volumes_at(0.5);
    let sweep = |f: &[f64], va: &[f64], vb: &[f64]| advect_raw(f, tr, va, vb, half, opts.scheme);

    let rho = sweep(&s.rho.data, &tr.vol_old, &mid);
    let mut t = SymTensorField {
        grid: g,
        t11: sweep(&s.t.t11, &tr.vol_old, &mid),
        t12: sweep(&s.t.t12, &tr.vol_old, &mid),
        t22: sweep(&s.t.t22, &tr.vol_old, &mid),
    };
    for c in 0..g.n_cells() {
        let w = vorticity(&grad_u[c]);
        let next = reaction_exact(&t.get(c), rho[c].max(0.0), &w, dt)?;
        t.set(c, next);
    }
    let mut rho = sweep(&rho, &mid, &tr.vol_new);
    let mut t = SymTensorField {
        grid: g,
        t11: sweep(&t.t11, &mid, &tr.vol_new),
        t12: sweep(&t.t12, &mid, &tr.vol_new),
        t22: sweep(&t.t22, &mid, &tr.vol_new),
    };
    if eps > 0.0 {
        rho = diffuse_raw(&rho, diffusion, &g, &tr.vol_new, eps, dt)?;
        for comp in t.components_mut() {
            *comp = diffuse_raw(comp, diffusion, &g, &tr.vol_new, eps, dt)?;
        }
    }
    let out = SoluteState { rho: ScalarField { grid: g, data: rho }, t };
    if !out.rho.is_finite() || !out.t.is_finite() {
        return Err(Error::SolveDiverged { residual: f64::NAN, iterations: 0 });
    }
    Ok(out)
}

/// Face velocities of the rigid rotation `omega (-y, x)` on a polar grid.
pub fn rigid_rotation(grid: Grid2, omega: f64) -> VectorField {
    assert_eq!(grid.coords, Coords::Polar);
    VectorField::from_fn(grid, |_, r| omega * r, |_, _| 0.0)
}

/// Velocity gradient of the rigid rotation (uniform).
pub fn rigid_rotation_gradient(grid: &Grid2, omega: f64) -> Vec<Mat2> {
    vec![Mat2::new(0.0, -omega, omega, 0.0); grid.n_cells()]
}
