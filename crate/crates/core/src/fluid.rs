//! Incompressible momentum solver on the reference channel grid.
//!
//! Velocities are the physical components pulled back to the reference
//! domain. With `B = J (grad Psi)^{-1}` the transformed system reads
//!
//! ```text
//! J du/dt + grad(u) (B u + J w) = div(grad(u) A) - B^T grad p + div(T B^T)
//! div(B u) = 0
//! ```
//!
//! and is advanced by an IMEX step: implicit reference Laplacian, explicit
//! geometric corrections with `(1 - J) du/dt` lagged, then an incremental
//! projection with the discrete operator `Bop^T G`.

use crate::error::{Error, Result};
use crate::fields::{Grid2, ScalarField, StructureState, SymTensorField, VectorField};
use crate::geometry::{CutoffProfile, Hanzawa, ReferenceGeometry};
use crate::linalg::{pcg, CgOptions, LinearOperator, StripSolver, YBoundary};
use crate::periodic::TrigSeries;
use crate::tensor::Mat2;

pub const PROJECTION_TOL: f64 = 1e-12;
pub const PROJECTION_MAX_ITER: usize = 2000;
pub const CFL_LIMIT: f64 = 0.9;

/// Geometric coefficients of the channel map sampled on the MAC layout.
#[derive(Debug, Clone)]
pub struct ChannelGeometry {
    pub grid: Grid2,
    /// Cell Jacobian from the discrete change of area.
    pub j_c: Vec<f64>,
    pub a_c: Vec<f64>,
    pub jw_c: Vec<f64>,
    pub j_xf: Vec<f64>,
    pub a_xf: Vec<f64>,
    pub jw_xf: Vec<f64>,
    pub j_yf: Vec<f64>,
    pub a_yf: Vec<f64>,
    /// Vertical component of `J w` at y-faces (the horizontal one vanishes).
    pub jw_yf: Vec<f64>,
    pub j_k: Vec<f64>,
    pub a_k: Vec<f64>,
    /// Normal velocity of the flexible wall at the top y-faces.
    pub wall_velocity: Vec<f64>,
    /// Slope of the wall displacement at the top y-faces.
    pub wall_slope: Vec<f64>,
}

impl ChannelGeometry {
    pub fn new(grid: &Grid2, geom: ReferenceGeometry, cutoff: CutoffProfile, s: &StructureState) -> Result<Self> {
        if s.len() != grid.nx {
            return Err(Error::GridMismatch(format!(
                "structure has {} nodes, fluid grid has {} columns",
                s.len(),
                grid.nx
            )));
        }
        let map = Hanzawa::new(geom, cutoff, s)?;
        let (nx, ny, hx, hy) = (grid.nx, grid.ny, grid.hx, grid.hy);
        let eta_c: Vec<f64> = s.eta.clone();
        let deta = crate::periodic::derivative_at_nodes(&s.eta, 1);
        let vel = TrigSeries::new(&s.eta_dot, 0.5);
        let mut eta_xf = vec![0.0; nx];
        let mut deta_xf = vec![0.0; nx];
        let mut vel_xf = vec![0.0; nx];
        for i in 0..nx {
            let e = map.eta(i as f64 * hx);
            eta_xf[i] = e[0];
            deta_xf[i] = e[1];
            vel_xf[i] = vel.eval(i as f64 * hx, 0);
        }
        let phi = |y: f64| cutoff.eval(y - 1.0);
        let node_phi: Vec<[f64; 3]> = (0..=ny).map(|j| phi(j as f64 * hy)).collect();
        let mid_phi: Vec<[f64; 3]> = (0..ny).map(|j| phi((j as f64 + 0.5) * hy)).collect();
        let nc = nx * ny;
        let nn = nx * (ny + 1);
        let mut g = ChannelGeometry {
            grid: *grid,
            j_c: vec![0.0; nc],
            a_c: vec![0.0; nc],
            jw_c: vec![0.0; nc],
            j_xf: vec![0.0; nc],
            a_xf: vec![0.0; nc],
            jw_xf: vec![0.0; nc],
            j_yf: vec![0.0; nn],
            a_yf: vec![0.0; nn],
            jw_yf: vec![0.0; nn],
            j_k: vec![0.0; nn],
            a_k: vec![0.0; nn],
            wall_velocity: s.eta_dot.clone(),
            wall_slope: deta.clone(),
        };
        for j in 0..ny {
            let dphi = (node_phi[j + 1][0] - node_phi[j][0]) / hy;
            let pm = mid_phi[j][0];
            for i in 0..nx {
                let c = j * nx + i;
                g.j_c[c] = 1.0 + eta_c[i] * dphi;
                g.a_c[c] = deta[i] * pm;
                g.jw_c[c] = -s.eta_dot[i] * pm;
                g.j_xf[c] = 1.0 + eta_xf[i] * dphi;
                g.a_xf[c] = deta_xf[i] * pm;
                g.jw_xf[c] = -vel_xf[i] * pm;
            }
        }
        for j in 0..=ny {
            let [p, dp, _] = node_phi[j];
            for i in 0..nx {
                let c = j * nx + i;
                g.j_yf[c] = 1.0 + eta_c[i] * dp;
                g.a_yf[c] = deta[i] * p;
                g.jw_yf[c] = -s.eta_dot[i] * p;
                g.j_k[c] = 1.0 + eta_xf[i] * dp;
                g.a_k[c] = deta_xf[i] * p;
            }
        }
        Ok(g)
    }

    /// Undeformed channel with a resting wall.
    pub fn flat(grid: &Grid2) -> Self {
        let geom = ReferenceGeometry::channel(0.25).expect("valid width");
        Self::new(grid, geom, CutoffProfile::for_width(0.25), &StructureState::zeros(grid.nx))
            .expect("flat geometry")
    }
}

fn a_tensor(j: f64, a: f64) -> Mat2 {
    Mat2::new(j, -a, -a, (1.0 + a * a) / j)
}

fn b_tensor(j: f64, a: f64) -> Mat2 {
    Mat2::new(j, 0.0, -a, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluidState {
    pub u: VectorField,
    /// Modified pressure `p - tr(T) / 2`, mean-free.
    pub p: ScalarField,
    /// Time derivative from the previous step, used for the lagged mass term.
    pub dudt: VectorField,
}

impl FluidState {
    pub fn rest(grid: Grid2) -> Self {
        Self { u: VectorField::zeros(grid), p: ScalarField::zeros(grid), dudt: VectorField::zeros(grid) }
    }

    /// Physical pressure for the given extra stress.
    pub fn physical_pressure(&self, t: &SymTensorField) -> ScalarField {
        let data = self.p.data.iter().enumerate().map(|(c, p)| p + 0.5 * (t.t11[c] + t.t22[c])).collect();
        ScalarField { grid: self.p.grid, data }
    }
}

#[inline]
fn u1_ghost(u: &VectorField, i: usize, j: isize) -> f64 {
    let g = &u.grid;
    if j < 0 {
        -u.u[i]
    } else if j as usize >= g.ny {
        -u.u[(g.ny - 1) * g.nx + i]
    } else {
        u.u[j as usize * g.nx + i]
    }
}

/// Average of `u1` around interior y-face `(i, j)`.
#[inline]
fn avg_u1_at_yface(u: &VectorField, i: usize, j: usize) -> f64 {
    let g = &u.grid;
    let ip = g.ip(i);
    0.25 * (u.u[(j - 1) * g.nx + i] + u.u[(j - 1) * g.nx + ip] + u.u[j * g.nx + i] + u.u[j * g.nx + ip])
}

#[inline]
fn avg_u2_at_xface(u: &VectorField, i: usize, j: usize) -> f64 {
    let g = &u.grid;
    let im = g.im(i);
    0.25 * (u.v[j * g.nx + im] + u.v[j * g.nx + i] + u.v[(j + 1) * g.nx + im] + u.v[(j + 1) * g.nx + i])
}

/// Face fluxes `B u`; boundary rows carry the wall velocity.
pub fn bop(u: &VectorField, geo: &ChannelGeometry) -> VectorField {
    let g = u.grid;
    let mut out = VectorField::zeros(g);
    for (k, v) in out.u.iter_mut().enumerate() {
        *v = geo.j_xf[k] * u.u[k];
    }
    for i in 0..g.nx {
        out.v[i] = u.v[i];
        out.v[g.ny * g.nx + i] = u.v[g.ny * g.nx + i];
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            let c = j * g.nx + i;
            out.v[c] = u.v[c] - geo.a_yf[c] * avg_u1_at_yface(u, i, j);
        }
    }
    out
}

/// Adjoint of `bop` on interior faces.
pub fn bop_transpose(f: &VectorField, geo: &ChannelGeometry) -> VectorField {
    let g = f.grid;
    let mut out = VectorField::zeros(g);
    for (k, v) in out.u.iter_mut().enumerate() {
        *v = geo.j_xf[k] * f.u[k];
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            let c = j * g.nx + i;
            out.v[c] = f.v[c];
            let w = 0.25 * geo.a_yf[c] * f.v[c];
            let ip = g.ip(i);
            out.u[(j - 1) * g.nx + i] -= w;
            out.u[(j - 1) * g.nx + ip] -= w;
            out.u[j * g.nx + i] -= w;
            out.u[j * g.nx + ip] -= w;
        }
    }
    out
}

/// Cell gradient on faces; wall rows are zero.
fn grad_p(p: &[f64], g: &Grid2) -> VectorField {
    let mut out = VectorField::zeros(*g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            out.u[j * g.nx + i] = (p[j * g.nx + i] - p[j * g.nx + g.im(i)]) / g.hx;
        }
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            out.v[j * g.nx + i] = (p[j * g.nx + i] - p[(j - 1) * g.nx + i]) / g.hy;
        }
    }
    out
}

fn div_faces(f: &VectorField) -> Vec<f64> {
    let g = f.grid;
    let mut out = vec![0.0; g.n_cells()];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = j * g.nx + i;
            out[c] = (f.u[j * g.nx + g.ip(i)] - f.u[c]) / g.hx + (f.v[c + g.nx] - f.v[c]) / g.hy;
        }
    }
    out
}

/// `div(B u)` at cells.
pub fn transformed_divergence(u: &VectorField, geo: &ChannelGeometry) -> ScalarField {
    ScalarField { grid: u.grid, data: div_faces(&bop(u, geo)) }
}

/// Transformed pressure gradient `Bop^T G p`.
pub fn pressure_gradient(p: &[f64], geo: &ChannelGeometry) -> VectorField {
    bop_transpose(&grad_p(p, &geo.grid), geo)
}

struct ProjectionOperator<'a> {
    geo: &'a ChannelGeometry,
}

impl LinearOperator for ProjectionOperator<'_> {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let g = pressure_gradient(x, self.geo);
        let d = div_faces(&bop(&g, self.geo));
        for (yi, di) in y.iter_mut().zip(d) {
            *yi = -di;
        }
    }
}

fn neumann_poisson(g: &Grid2) -> StripSolver {
    StripSolver::new(g.nx, g.ny, g.hx, g.hy, 0.0, 1.0, YBoundary::NeumannCell)
}

/// Removes the transformed-divergent part of `u_star`. Returns the corrected
/// velocity and the potential `chi` with `u = u_star - Bop^T G chi`.
pub fn pressure_projection(u_star: &VectorField, geo: &ChannelGeometry) -> Result<(VectorField, ScalarField)> {
    let g = u_star.grid;
    let rhs: Vec<f64> = div_faces(&bop(u_star, geo)).iter().map(|d| -d).collect();
    let mut chi = vec![0.0; g.n_cells()];
    let pc = neumann_poisson(&g);
    let opts = CgOptions { tol: PROJECTION_TOL, max_iter: PROJECTION_MAX_ITER, constant_nullspace: true };
    pcg(&ProjectionOperator { geo }, &pc, &rhs, &mut chi, opts)
        .map_err(|s| Error::ProjectionDiverged { residual: s.residual, iterations: s.iterations })?;
    let corr = pressure_gradient(&chi, geo);
    let mut u = u_star.clone();
    for (a, b) in u.u.iter_mut().zip(&corr.u) {
        *a -= b;
    }
    for j in 1..g.ny {
        for i in 0..g.nx {
            u.v[j * g.nx + i] -= corr.v[j * g.nx + i];
        }
    }
    Ok((u, ScalarField { grid: g, data: chi }))
}

/// Velocity gradient entries `[d1 u1, d2 u1, d1 u2, d2 u2]` at cells and
/// corners.
struct Gradients {
    cell: [Vec<f64>; 4],
    corner: [Vec<f64>; 4],
}

/// Cell to corner average; wall rows are extrapolated linearly.
fn cell_to_corner(v: &[f64], g: &Grid2) -> Vec<f64> {
    let (nx, ny) = (g.nx, g.ny);
    let row = |j: usize, i: usize| 0.5 * (v[j * nx + g.im(i)] + v[j * nx + i]);
    let mut out = vec![0.0; nx * (ny + 1)];
    for i in 0..nx {
        out[i] = 1.5 * row(0, i) - 0.5 * row(1, i);
        out[ny * nx + i] = 1.5 * row(ny - 1, i) - 0.5 * row(ny - 2, i);
        for j in 1..ny {
            out[j * nx + i] = 0.5 * (row(j - 1, i) + row(j, i));
        }
    }
    out
}

fn gradients(u: &VectorField) -> Gradients {
    let g = u.grid;
    let (nx, ny, hx, hy) = (g.nx, g.ny, g.hx, g.hy);
    let nk = nx * (ny + 1);
    let mut k12 = vec![0.0; nk];
    let mut k21 = vec![0.0; nk];
    for j in 0..=ny {
        for i in 0..nx {
            let c = j * nx + i;
            k12[c] = (u1_ghost(u, i, j as isize) - u1_ghost(u, i, j as isize - 1)) / hy;
            k21[c] = (u.v[c] - u.v[j * nx + g.im(i)]) / hx;
        }
    }
    let nc = nx * ny;
    let mut c11 = vec![0.0; nc];
    let mut c12 = vec![0.0; nc];
    let mut c21 = vec![0.0; nc];
    let mut c22 = vec![0.0; nc];
    for j in 0..ny {
        for i in 0..nx {
            let c = j * nx + i;
            let ip = g.ip(i);
            c11[c] = (u.u[j * nx + ip] - u.u[c]) / hx;
            c22[c] = (u.v[c + nx] - u.v[c]) / hy;
            let four = |f: &Vec<f64>| 0.25 * (f[c] + f[j * nx + ip] + f[c + nx] + f[(j + 1) * nx + ip]);
            c12[c] = four(&k12);
            c21[c] = four(&k21);
        }
    }
    let k11 = cell_to_corner(&c11, &g);
    let k22 = cell_to_corner(&c22, &g);
    Gradients { cell: [c11, c12, c21, c22], corner: [k11, k12, k21, k22] }
}

/// Row divergence onto the MAC faces of a tensor with diagonal entries at
/// cells and off-diagonal entries at corners.
fn tensor_divergence(m11: &[f64], m22: &[f64], m12: &[f64], m21: &[f64], g: &Grid2) -> VectorField {
    let (nx, ny, hx, hy) = (g.nx, g.ny, g.hx, g.hy);
    let mut out = VectorField::zeros(*g);
    for j in 0..ny {
        for i in 0..nx {
            let c = j * nx + i;
            out.u[c] = (m11[c] - m11[j * nx + g.im(i)]) / hx + (m12[c + nx] - m12[c]) / hy;
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let c = j * nx + i;
            out.v[c] = (m21[j * nx + g.ip(i)] - m21[c]) / hx + (m22[c] - m22[c - nx]) / hy;
        }
    }
    out
}

/// `div(grad(u) (A - I))` on the faces.
fn geometric_viscous(grads: &Gradients, geo: &ChannelGeometry) -> VectorField {
    let g = &geo.grid;
    let prod = |gr: &[Vec<f64>; 4], j: &[f64], a: &[f64], k: usize, row: usize, col: usize| {
        let c = a_tensor(j[k], a[k]) - Mat2::IDENTITY;
        let gm = Mat2::new(gr[0][k], gr[1][k], gr[2][k], gr[3][k]);
        (gm * c).get(row, col)
    };
    let nc = g.n_cells();
    let nk = g.n_yfaces();
    let m11: Vec<f64> = (0..nc).map(|k| prod(&grads.cell, &geo.j_c, &geo.a_c, k, 0, 0)).collect();
    let m22: Vec<f64> = (0..nc).map(|k| prod(&grads.cell, &geo.j_c, &geo.a_c, k, 1, 1)).collect();
    let m12: Vec<f64> = (0..nk).map(|k| prod(&grads.corner, &geo.j_k, &geo.a_k, k, 0, 1)).collect();
    let m21: Vec<f64> = (0..nk).map(|k| prod(&grads.corner, &geo.j_k, &geo.a_k, k, 1, 0)).collect();
    tensor_divergence(&m11, &m22, &m12, &m21, g)
}

/// `div(T_dev B^T)`. The isotropic part of the stress is a transformed
/// gradient and is carried by the modified pressure instead.
pub fn stress_divergence(t: &SymTensorField, geo: &ChannelGeometry) -> VectorField {
    let g = &geo.grid;
    let nc = g.n_cells();
    let half_tr: Vec<f64> = (0..nc).map(|c| 0.5 * (t.t11[c] + t.t22[c])).collect();
    let d11: Vec<f64> = (0..nc).map(|c| t.t11[c] - half_tr[c]).collect();
    let k11 = cell_to_corner(&d11, g);
    let k12 = cell_to_corner(&t.t12, g);
    let dev = |m: f64, off: f64| Mat2::new(m, off, off, -m);
    let m11: Vec<f64> = (0..nc)
        .map(|c| (dev(d11[c], t.t12[c]) * b_tensor(geo.j_c[c], geo.a_c[c]).transpose()).get(0, 0))
        .collect();
    let m22: Vec<f64> = (0..nc)
        .map(|c| (dev(d11[c], t.t12[c]) * b_tensor(geo.j_c[c], geo.a_c[c]).transpose()).get(1, 1))
        .collect();
    let corner = |k: usize| dev(k11[k], k12[k]) * b_tensor(geo.j_k[k], geo.a_k[k]).transpose();
    let m12: Vec<f64> = (0..g.n_yfaces()).map(|k| corner(k).get(0, 1)).collect();
    let m21: Vec<f64> = (0..g.n_yfaces()).map(|k| corner(k).get(1, 0)).collect();
    tensor_divergence(&m11, &m22, &m12, &m21, g)
}

/// `-(B u + J w) . grad u` with centred differences.
fn convection(u: &VectorField, geo: &ChannelGeometry) -> VectorField {
    let g = u.grid;
    let (nx, ny, hx, hy) = (g.nx, g.ny, g.hx, g.hy);
    let mut out = VectorField::zeros(g);
    for j in 0..ny {
        for i in 0..nx {
            let c = j * nx + i;
            let u1 = u.u[c];
            let u2 = avg_u2_at_xface(u, i, j);
            let v1 = geo.j_xf[c] * u1;
            let v2 = u2 - geo.a_xf[c] * u1 + geo.jw_xf[c];
            let dx = (u.u[j * nx + g.ip(i)] - u.u[j * nx + g.im(i)]) / (2.0 * hx);
            let dy = (u1_ghost(u, i, j as isize + 1) - u1_ghost(u, i, j as isize - 1)) / (2.0 * hy);
            out.u[c] = -(v1 * dx + v2 * dy);
        }
    }
    for j in 1..ny {
        for i in 0..nx {
            let c = j * nx + i;
            let u1 = avg_u1_at_yface(u, i, j);
            let v1 = geo.j_yf[c] * u1;
            let v2 = u.v[c] - geo.a_yf[c] * u1 + geo.jw_yf[c];
            let dx = (u.v[j * nx + g.ip(i)] - u.v[j * nx + g.im(i)]) / (2.0 * hx);
            let dy = (u.v[c + nx] - u.v[c - nx]) / (2.0 * hy);
            out.v[c] = -(v1 * dx + v2 * dy);
        }
    }
    out
}

fn add_assign(a: &mut VectorField, b: &VectorField, s: f64) {
    for (x, y) in a.u.iter_mut().zip(&b.u) {
        *x += s * y;
    }
    for (x, y) in a.v.iter_mut().zip(&b.v) {
        *x += s * y;
    }
}

/// Largest `|u| dt / h` over all faces.
pub fn courant_number(u: &VectorField, dt: f64) -> f64 {
    let g = &u.grid;
    let h = g.hx.min(g.hy);
    u.max_abs() * dt / h
}

#[derive(Debug, Clone, Copy)]
pub struct FluidOptions {
    pub convection: bool,
}

impl Default for FluidOptions {
    fn default() -> Self {
        Self { convection: true }
    }
}

/// Advances the fluid by one step on the geometry `geo` (taken at the new
/// time level, including the wall velocity).
pub fn fluid_step(
    state: &FluidState,
    stress: &SymTensorField,
    geo: &ChannelGeometry,
    dt: f64,
    body_force: Option<&VectorField>,
    opts: FluidOptions,
) -> Result<FluidState> {
    let g = state.u.grid;
    if !g.same_shape(&geo.grid) || !g.same_shape(&stress.grid) {
        return Err(Error::GridMismatch("fluid, stress and geometry grids differ".into()));
    }
    let courant = courant_number(&state.u, dt);
    if courant > CFL_LIMIT {
        return Err(Error::CflViolation { courant, limit: CFL_LIMIT });
    }
    let (nx, ny) = (g.nx, g.ny);
    let u = &state.u;
    let grads = gradients(u);
    let mut rhs = geometric_viscous(&grads, geo);
    add_assign(&mut rhs, &stress_divergence(stress, geo), 1.0);
    add_assign(&mut rhs, &pressure_gradient(&state.p.data, geo), -1.0);
    if opts.convection {
        add_assign(&mut rhs, &convection(u, geo), 1.0);
    }
    if let Some(f) = body_force {
        add_assign(&mut rhs, f, 1.0);
    }
    for (k, r) in rhs.u.iter_mut().enumerate() {
        *r += (1.0 - geo.j_xf[k]) * state.dudt.u[k];
    }
    for (k, r) in rhs.v.iter_mut().enumerate() {
        *r += (1.0 - geo.j_yf[k]) * state.dudt.v[k];
    }

    let inv_dt = 1.0 / dt;
    let b1: Vec<f64> = u.u.iter().zip(&rhs.u).map(|(a, r)| a * inv_dt + r).collect();
    let s1 = StripSolver::new(nx, ny, g.hx, g.hy, inv_dt, 1.0, YBoundary::DirichletHalf);
    let u1 = s1.solve(&b1);

    let mut b2 = vec![0.0; nx * (ny - 1)];
    let iy = 1.0 / (g.hy * g.hy);
    for j in 1..ny {
        for i in 0..nx {
            let c = j * nx + i;
            b2[(j - 1) * nx + i] = u.v[c] * inv_dt + rhs.v[c];
        }
    }
    for i in 0..nx {
        b2[(ny - 2) * nx + i] += geo.wall_velocity[i] * iy;
    }
    let s2 = StripSolver::new(nx, ny - 1, g.hx, g.hy, inv_dt, 1.0, YBoundary::DirichletNode);
    let u2 = s2.solve(&b2);

    let mut star = VectorField::zeros(g);
    star.u = u1;
    for i in 0..nx {
        star.v[ny * nx + i] = geo.wall_velocity[i];
    }
    star.v[nx..ny * nx].copy_from_slice(&u2);
    let (new_u, chi) = pressure_projection(&star, geo)?;
    let mut p = state.p.clone();
    for (a, b) in p.data.iter_mut().zip(&chi.data) {
        *a += b / dt;
    }
    let mean = p.data.iter().sum::<f64>() / p.data.len() as f64;
    p.data.iter_mut().for_each(|x| *x -= mean);
    let mut dudt = VectorField::zeros(g);
    for (k, d) in dudt.u.iter_mut().enumerate() {
        *d = (new_u.u[k] - u.u[k]) * inv_dt;
    }
    for (k, d) in dudt.v.iter_mut().enumerate() {
        *d = (new_u.v[k] - u.v[k]) * inv_dt;
    }
    let out = FluidState { u: new_u, p, dudt };
    if !out.u.is_finite() || !out.p.is_finite() {
        return Err(Error::ProjectionDiverged { residual: f64::NAN, iterations: 0 });
    }
    Ok(out)
}

/// Physical velocity gradient `grad(u) F` at cell centres.
pub fn physical_gradient_cells(u: &VectorField, geo: &ChannelGeometry) -> Vec<Mat2> {
    let gr = gradients(u);
    (0..u.grid.n_cells())
        .map(|c| {
            let gm = Mat2::new(gr.cell[0][c], gr.cell[1][c], gr.cell[2][c], gr.cell[3][c]);
            let (j, a) = (geo.j_c[c], geo.a_c[c]);
            gm * Mat2::new(1.0, 0.0, -a / j, 1.0 / j)
        })
        .collect()
}

/// Reference velocity gradient at cell centres.
pub fn reference_gradient_cells(u: &VectorField) -> Vec<Mat2> {
    let gr = gradients(u);
    (0..u.grid.n_cells())
        .map(|c| Mat2::new(gr.cell[0][c], gr.cell[1][c], gr.cell[2][c], gr.cell[3][c]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::SymMat2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Grid2 {
        Grid2::unit_channel(n, n).unwrap()
    }

    fn wavy(n: usize, amp: f64) -> ChannelGeometry {
        let s = StructureState::from_fn(n, |x| amp * (2.0 * PI * x).sin(), |x| 0.3 * (2.0 * PI * x).cos());
        let geom = ReferenceGeometry::channel(0.3).unwrap();
        ChannelGeometry::new(&grid(n), geom, CutoffProfile::for_width(0.3), &s).unwrap()
    }

    fn random_field(g: Grid2, seed: u64) -> VectorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut u = VectorField::zeros(g);
        u.u.iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
        for j in 1..g.ny {
            for i in 0..g.nx {
                u.v[j * g.nx + i] = rng.gen_range(-1.0..1.0);
            }
        }
        u
    }

    #[test]
    fn flat_divergence_matches_mac() {
        let g = grid(16);
        let u = random_field(g, 1);
        let d = transformed_divergence(&u, &ChannelGeometry::flat(&g));
        assert_eq!(d.data, crate::fields::div(&u).data);
        let shear = VectorField::from_fn(g, |_, y| y, |_, _| 0.0);
        assert!(transformed_divergence(&shear, &ChannelGeometry::flat(&g)).max_abs() < 1e-14);
    }

    #[test]
    fn bop_transpose_is_adjoint() {
        let g = grid(16);
        let geo = wavy(16, 0.1);
        let u = random_field(g, 2);
        let w = random_field(g, 3);
        let dot = |a: &VectorField, b: &VectorField| {
            let s: f64 = a.u.iter().zip(&b.u).map(|(x, y)| x * y).sum();
            s + (g.nx..g.ny * g.nx).map(|k| a.v[k] * b.v[k]).sum::<f64>()
        };
        let lhs = dot(&bop(&u, &geo), &w);
        let rhs = dot(&u, &bop_transpose(&w, &geo));
        assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn projection_contracts() {
        let g = grid(16);
        let geo = wavy(16, 0.1);
        let mut u = random_field(g, 4);
        for i in 0..g.nx {
            u.v[g.ny * g.nx + i] = geo.wall_velocity[i];
        }
        let (p, _) = pressure_projection(&u, &geo).unwrap();
        let norm = p.max_abs();
        assert!(transformed_divergence(&p, &geo).max_abs() <= 1e-9 * norm);
        let (q, chi) = pressure_projection(&p, &geo).unwrap();
        assert!(chi.max_abs() < 1e-9);
        for (a, b) in p.u.iter().zip(&q.u) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn gradient_field_projects_to_zero() {
        let g = grid(16);
        let geo = ChannelGeometry::flat(&g);
        let chi = ScalarField::from_fn(g, |x, y| (2.0 * PI * x).cos() * (PI * y).cos());
        let u = pressure_gradient(&chi.data, &geo);
        let (w, _) = pressure_projection(&u, &geo).unwrap();
        assert!(w.max_abs() < 1e-9);
    }

    #[test]
    fn isotropic_stress_keeps_rest() {
        let g = grid(16);
        let geo = ChannelGeometry::flat(&g);
        let t = SymTensorField::constant(g, SymMat2::isotropic(2.0));
        let s = fluid_step(&FluidState::rest(g), &t, &geo, 1e-2, None, FluidOptions::default()).unwrap();
        assert!(s.u.max_abs() < 1e-13);
        assert!(s.p.max_abs() < 1e-13);
    }

    #[test]
    fn nonuniform_isotropic_stress_is_absorbed_by_pressure() {
        let g = grid(16);
        let geo = wavy(16, 0.05);
        let mut geo = geo;
        geo.wall_velocity.iter_mut().for_each(|v| *v = 0.0);
        let t = SymTensorField::from_fn(g, |x, y| SymMat2::isotropic(1.0 + 0.5 * (2.0 * PI * x).cos() * y));
        let s = fluid_step(&FluidState::rest(g), &t, &geo, 1e-2, None, FluidOptions::default()).unwrap();
        assert!(s.u.max_abs() < 1e-10, "{}", s.u.max_abs());
    }

    #[test]
    fn cfl_guard() {
        let g = grid(16);
        let mut st = FluidState::rest(g);
        st.u.u.iter_mut().for_each(|x| *x = 100.0);
        let r = fluid_step(&st, &SymTensorField::zeros(g), &ChannelGeometry::flat(&g), 0.01, None, FluidOptions::default());
        assert!(matches!(r, Err(Error::CflViolation { .. })));
    }

    #[test]
    fn stokes_mode_decays_at_analytic_rate() {
        let n = 64;
        let g = grid(n);
        let geo = ChannelGeometry::flat(&g);
        let mut st = FluidState::rest(g);
        st.u = VectorField::from_fn(g, |_, y| (PI * y).sin(), |_, _| 0.0);
        let dt = 1e-4;
        let steps = 1000;
        for _ in 0..steps {
            st = fluid_step(&st, &SymTensorField::zeros(g), &geo, dt, None, FluidOptions::default()).unwrap();
        }
        let t = dt * steps as f64;
        let c = g.cell(0, n / 2);
        let y = g.xface_pos(0, n / 2).1;
        let rate = -(st.u.u[c] / (PI * y).sin()).ln() / t;
        assert!((rate - PI * PI).abs() < 0.02 * PI * PI, "rate {rate}");
    }
}
