//! Grids, staggered field containers, stencils and weighted norms.
//!
//! The reference domain is discretized on a uniform grid that is periodic in
//! the first coordinate. For the channel this is `x in [0, lx)`, `y in [0, ly]`;
//! for the disk the same layout is read as polar `(theta, r)`.
//!
//! Index conventions (all row-major with `i` fastest):
//! * cell `(i, j)` at `((i + 1/2) hx, (j + 1/2) hy)`, `nx * ny` entries;
//! * x-face `(i, j)` at `(i hx, (j + 1/2) hy)`, `nx * ny` entries;
//! * y-face `(i, j)` at `((i + 1/2) hx, j hy)`, `nx * (ny + 1)` entries,
//!   rows `0` and `ny` lie on the walls;
//! * corner `(i, j)` at `(i hx, j hy)`, `nx * (ny + 1)` entries.

use crate::error::{Error, Result};
use crate::tensor::SymMat2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coords {
    Cartesian,
    /// First coordinate is the angle, second the radius.
    Polar,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2 {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub coords: Coords,
}

/// Staggering of a stored field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Cell,
    XFace,
    YFace,
    Corner,
    /// 1D data along the flexible boundary.
    Boundary,
}

impl Location {
    pub fn as_str(&self) -> &'static str {
        match self {
            Location::Cell => "cell",
            Location::XFace => "xface",
            Location::YFace => "yface",
            Location::Corner => "corner",
            Location::Boundary => "boundary",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "cell" => Location::Cell,
            "xface" => Location::XFace,
            "yface" => Location::YFace,
            "corner" => Location::Corner,
            "boundary" => Location::Boundary,
            _ => return None,
        })
    }
}

impl Grid2 {
    /// Channel grid on `[0, lx) x [0, ly]`.
    pub fn channel(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        Self::build(nx, ny, lx / nx as f64, ly / ny as f64, Coords::Cartesian)
    }

    /// Unit square channel `[0, 1) x [0, 1]`.
    pub fn unit_channel(nx: usize, ny: usize) -> Result<Self> {
        Self::channel(nx, ny, 1.0, 1.0)
    }

    /// Polar grid of the unit disk: `ntheta` angular by `nr` radial cells.
    pub fn polar_disk(ntheta: usize, nr: usize) -> Result<Self> {
        Self::build(
            ntheta,
            nr,
            2.0 * std::f64::consts::PI / ntheta as f64,
            1.0 / nr as f64,
            Coords::Polar,
        )
    }

    fn build(nx: usize, ny: usize, hx: f64, hy: f64, coords: Coords) -> Result<Self> {
        if nx < 8 || ny < 8 {
            return Err(Error::Validation(format!(
                "grid needs at least 8 nodes per direction, got {nx} x {ny}"
            )));
        }
        if !(hx > 0.0 && hy > 0.0) {
            return Err(Error::Validation("grid spacing must be positive".into()));
        }
        Ok(Self { nx, ny, hx, hy, coords })
    }

    pub fn lx(&self) -> f64 {
        self.hx * self.nx as f64
    }

    pub fn ly(&self) -> f64 {
        self.hy * self.ny as f64
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_yfaces(&self) -> usize {
        self.nx * (self.ny + 1)
    }

    pub fn len(&self, loc: Location) -> usize {
        match loc {
            Location::Cell | Location::XFace => self.nx * self.ny,
            Location::YFace | Location::Corner => self.nx * (self.ny + 1),
            Location::Boundary => self.nx,
        }
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ip(&self, i: usize) -> usize {
        if i + 1 == self.nx {
            0
        } else {
            i + 1
        }
    }

    #[inline]
    pub fn im(&self, i: usize) -> usize {
        if i == 0 {
            self.nx - 1
        } else {
            i - 1
        }
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx, (j as f64 + 0.5) * self.hy)
    }

    pub fn xface_pos(&self, i: usize, j: usize) -> (f64, f64) {
        (i as f64 * self.hx, (j as f64 + 0.5) * self.hy)
    }

    pub fn yface_pos(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx, j as f64 * self.hy)
    }

    /// Geometric cell measure (area in the reference domain).
    pub fn cell_measure(&self, j: usize) -> f64 {
        match self.coords {
            Coords::Cartesian => self.hx * self.hy,
            Coords::Polar => (j as f64 + 0.5) * self.hy * self.hx * self.hy,
        }
    }

    /// Length of x-faces in row `j`.
    pub fn xface_length(&self, _j: usize) -> f64 {
        self.hy
    }

    /// Length of y-faces in row `j` (`j = 0..=ny`).
    pub fn yface_length(&self, j: usize) -> f64 {
        match self.coords {
            Coords::Cartesian => self.hx,
            Coords::Polar => j as f64 * self.hy * self.hx,
        }
    }

    /// Distance between the centres of cells adjacent across an x-face.
    pub fn xface_distance(&self, j: usize) -> f64 {
        match self.coords {
            Coords::Cartesian => self.hx,
            Coords::Polar => (j as f64 + 0.5) * self.hy * self.hx,
        }
    }

    pub fn total_measure(&self) -> f64 {
        (0..self.ny).map(|j| self.cell_measure(j)).sum::<f64>() * self.nx as f64
    }

    pub fn same_shape(&self, other: &Grid2) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.coords == other.coords
    }
}

/// Cell-centred scalar field.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid2,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid2) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Grid2, c: f64) -> Self {
        Self { grid, data: vec![c; grid.n_cells()] }
    }

    pub fn from_fn(grid: Grid2, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(grid.n_cells());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.cell_center(i, j);
                data.push(f(x, y));
            }
        }
        Self { grid, data }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.cell(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn linear_combination(a: f64, f: &ScalarField, b: f64, g: &ScalarField) -> ScalarField {
        let data = f.data.iter().zip(&g.data).map(|(x, y)| a * x + b * y).collect();
        ScalarField { grid: f.grid, data }
    }
}

/// MAC-staggered vector field: `u` on x-faces, `v` on y-faces (walls included).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid2,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid2) -> Self {
        Self { grid, u: vec![0.0; grid.n_cells()], v: vec![0.0; grid.n_yfaces()] }
    }

    pub fn from_fn(grid: Grid2, fu: impl Fn(f64, f64) -> f64, fv: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.xface_pos(i, j);
                out.u[grid.cell(i, j)] = fu(x, y);
            }
        }
        for j in 0..=grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.yface_pos(i, j);
                out.v[j * grid.nx + i] = fv(x, y);
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().chain(&self.v).fold(0.0, |a, x| a.max(x.abs()))
    }

    /// Cell-centred velocity by face averaging.
    pub fn cell_average(&self) -> (Vec<f64>, Vec<f64>) {
        let g = &self.grid;
        let mut uc = vec![0.0; g.n_cells()];
        let mut vc = vec![0.0; g.n_cells()];
        for j in 0..g.ny {
            for i in 0..g.nx {
                let c = g.cell(i, j);
                uc[c] = 0.5 * (self.u[c] + self.u[g.cell(g.ip(i), j)]);
                vc[c] = 0.5 * (self.v[j * g.nx + i] + self.v[(j + 1) * g.nx + i]);
            }
        }
        (uc, vc)
    }
}

/// Cell-centred symmetric tensor field.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    pub grid: Grid2,
    pub t11: Vec<f64>,
    pub t12: Vec<f64>,
    pub t22: Vec<f64>,
}

impl SymTensorField {
    pub fn zeros(grid: Grid2) -> Self {
        Self::constant(grid, SymMat2::ZERO)
    }

    pub fn constant(grid: Grid2, t: SymMat2) -> Self {
        let n = grid.n_cells();
        Self { grid, t11: vec![t.t11; n], t12: vec![t.t12; n], t22: vec![t.t22; n] }
    }

    pub fn from_fn(grid: Grid2, f: impl Fn(f64, f64) -> SymMat2) -> Self {
        let mut out = Self::zeros(grid);
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let (x, y) = grid.cell_center(i, j);
                out.set(grid.cell(i, j), f(x, y));
            }
        }
        out
    }

    #[inline]
    pub fn get(&self, c: usize) -> SymMat2 {
        SymMat2::new(self.t11[c], self.t12[c], self.t22[c])
    }

    #[inline]
    pub fn set(&mut self, c: usize, t: SymMat2) {
        self.t11[c] = t.t11;
        self.t12[c] = t.t12;
        self.t22[c] = t.t22;
    }

    pub fn components(&self) -> [&Vec<f64>; 3] {
        [&self.t11, &self.t12, &self.t22]
    }

    pub fn components_mut(&mut self) -> [&mut Vec<f64>; 3] {
        [&mut self.t11, &mut self.t12, &mut self.t22]
    }

    pub fn is_finite(&self) -> bool {
        self.components().iter().all(|c| c.iter().all(|v| v.is_finite()))
    }

    /// Smallest `(t11, det)` over all cells.
    pub fn spd_margin(&self) -> (f64, f64) {
        (0..self.grid.n_cells()).fold((f64::INFINITY, f64::INFINITY), |(a, b), c| {
            let t = self.get(c);
            (a.min(t.t11), b.min(t.det()))
        })
    }

    pub fn is_spd(&self) -> bool {
        (0..self.grid.n_cells()).all(|c| self.get(c).is_spd())
    }
}

/// Shell displacement and velocity at the boundary nodes `x_i = (i + 1/2) / n`.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureState {
    pub eta: Vec<f64>,
    pub eta_dot: Vec<f64>,
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

impl StructureState {
    pub fn zeros(n: usize) -> Self {
        Self { eta: vec![0.0; n], eta_dot: vec![0.0; n] }
    }

    /// Builds a state with both components projected onto mean zero.
    pub fn new(mut eta: Vec<f64>, mut eta_dot: Vec<f64>) -> Self {
        assert_eq!(eta.len(), eta_dot.len());
        remove_mean(&mut eta);
        remove_mean(&mut eta_dot);
        Self { eta, eta_dot }
    }

    pub fn from_fn(n: usize, eta: impl Fn(f64) -> f64, eta_dot: impl Fn(f64) -> f64) -> Self {
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        Self::new(xs.iter().map(|&x| eta(x)).collect(), xs.iter().map(|&x| eta_dot(x)).collect())
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn max_abs_eta(&self) -> f64 {
        self.eta.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn mean_eta(&self) -> f64 {
        self.eta.iter().sum::<f64>() / self.len() as f64
    }

    pub fn mean_eta_dot(&self) -> f64 {
        self.eta_dot.iter().sum::<f64>() / self.len() as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.len() as f64
    }
}

/// `(sum |f|^p w)^(1/p)` over cells with weights `w` (cell measure times
/// Jacobian); `p = inf` returns `max |f|`.
pub fn weighted_lp_norm(values: &[f64], p: f64, weights: &[f64]) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::BadExponent(p));
    }
    if p.is_infinite() {
        return Ok(values.iter().fold(0.0, |a, v| a.max(v.abs())));
    }
    let s: f64 = values.iter().zip(weights).map(|(v, w)| v.abs().powf(p) * w).sum();
    Ok(s.powf(1.0 / p))
}

/// Cell weights `J * |cell|` for a Jacobian field (`None` means `J = 1`).
pub fn cell_weights(grid: &Grid2, jacobian: Option<&[f64]>) -> Vec<f64> {
    let mut w = Vec::with_capacity(grid.n_cells());
    for j in 0..grid.ny {
        let m = grid.cell_measure(j);
        for i in 0..grid.nx {
            let jac = jacobian.map_or(1.0, |jv| jv[grid.cell(i, j)]);
            w.push(m * jac);
        }
    }
    w
}

pub fn weighted_lp_norm_scalar(f: &ScalarField, p: f64, jacobian: Option<&[f64]>) -> Result<f64> {
    weighted_lp_norm(&f.data, p, &cell_weights(&f.grid, jacobian))
}

/// Weighted L^p norm of the pointwise Frobenius norm of a tensor field.
pub fn weighted_lp_norm_tensor(t: &SymTensorField, p: f64, jacobian: Option<&[f64]>) -> Result<f64> {
    let mags: Vec<f64> = (0..t.grid.n_cells()).map(|c| t.get(c).frobenius()).collect();
    weighted_lp_norm(&mags, p, &cell_weights(&t.grid, jacobian))
}

/// Gradient of a cell field onto the MAC faces (Cartesian grids). Boundary
/// y-faces use a second-order one-sided stencil.
pub fn grad(f: &ScalarField) -> VectorField {
    let g = f.grid;
    let mut out = VectorField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            out.u[g.cell(i, j)] = (f.at(i, j) - f.at(g.im(i), j)) / g.hx;
        }
    }
    for i in 0..g.nx {
        for j in 1..g.ny {
            out.v[j * g.nx + i] = (f.at(i, j) - f.at(i, j - 1)) / g.hy;
        }
        out.v[i] = (-2.0 * f.at(i, 0) + 3.0 * f.at(i, 1) - f.at(i, 2)) / g.hy;
        let n = g.ny;
        out.v[n * g.nx + i] =
            (2.0 * f.at(i, n - 1) - 3.0 * f.at(i, n - 2) + f.at(i, n - 3)) / g.hy;
    }
    out
}

/// MAC divergence at cells (Cartesian grids).
pub fn div(u: &VectorField) -> ScalarField {
    let g = u.grid;
    let mut out = ScalarField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = g.cell(i, j);
            out.data[c] = (u.u[g.cell(g.ip(i), j)] - u.u[c]) / g.hx
                + (u.v[(j + 1) * g.nx + i] - u.v[j * g.nx + i]) / g.hy;
        }
    }
    out
}

/// Five-point Laplacian at cells with zero-flux walls (Cartesian grids).
pub fn laplace(f: &ScalarField) -> ScalarField {
    let g = f.grid;
    let mut out = ScalarField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = f.at(i, j);
            let xx = (f.at(g.ip(i), j) - 2.0 * c + f.at(g.im(i), j)) / (g.hx * g.hx);
            let up = if j + 1 < g.ny { f.at(i, j + 1) - c } else { 0.0 };
            let down = if j > 0 { c - f.at(i, j - 1) } else { 0.0 };
            out.data[g.cell(i, j)] = xx + (up - down) / (g.hy * g.hy);
        }
    }
    out
}

/// Central difference in the periodic direction at cell centres.
pub fn dx_central(f: &ScalarField) -> ScalarField {
    let g = f.grid;
    let mut out = ScalarField::zeros(g);
    for j in 0..g.ny {
        for i in 0..g.nx {
            out.data[g.cell(i, j)] = (f.at(g.ip(i), j) - f.at(g.im(i), j)) / (2.0 * g.hx);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Bottom,
    Top,
}

/// Values of a cell field extrapolated (second order) onto a wall.
pub fn boundary_trace(f: &ScalarField, side: Side) -> Vec<f64> {
    let g = f.grid;
    let (a, b) = match side {
        Side::Bottom => (0, 1),
        Side::Top => (g.ny - 1, g.ny - 2),
    };
    (0..g.nx).map(|i| 1.5 * f.at(i, a) - 0.5 * f.at(i, b)).collect()
}

/// Bilinear interpolation of a cell field; periodic in the first coordinate
/// and linearly extrapolated into the half cell next to each wall.
pub fn interp(f: &ScalarField, x: f64, y: f64) -> f64 {
    interp_cells(&f.grid, &f.data, x, y)
}

pub fn interp_cells(g: &Grid2, data: &[f64], x: f64, y: f64) -> f64 {
    let xi = x / g.hx - 0.5;
    let fl = xi.floor();
    let tx = xi - fl;
    let i0 = (fl as i64).rem_euclid(g.nx as i64) as usize;
    let i1 = g.ip(i0);
    let yj = (y / g.hy - 0.5).clamp(-0.5, g.ny as f64 - 0.5);
    let j0 = (yj.floor().max(0.0) as usize).min(g.ny - 2);
    let ty = yj - j0 as f64;
    let at = |i: usize, j: usize| data[g.cell(i, j)];
    let lo = (1.0 - tx) * at(i0, j0) + tx * at(i1, j0);
    let hi = (1.0 - tx) * at(i0, j0 + 1) + tx * at(i1, j0 + 1);
    (1.0 - ty) * lo + ty * hi
}
