//! Hanzawa transform of the reference domain and its coefficient fields.
//!
//! Two reference instances are supported. The periodic channel
//! `[0, 1) x [0, 1]` has a rigid bottom and a flexible top whose normal
//! displacement is `eta(x)`. The unit disk has a fully flexible boundary
//! parametrized by `xi = theta / (2 pi)` in `[0, 1)`.
//!
//! Points are displaced along the boundary normal by `eta * phi(s)` where `s`
//! is the signed distance to the flexible boundary (negative inside).

use crate::error::{Error, Result};
use crate::fields::{Grid2, StructureState};
use crate::periodic::TrigSeries;
use crate::tensor::Mat2;
use std::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Instance {
    PeriodicChannel,
    Disk,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceGeometry {
    pub instance: Instance,
    /// Tubular width `L`.
    pub width: f64,
}

impl ReferenceGeometry {
    pub fn channel(width: f64) -> Result<Self> {
        Self::new(Instance::PeriodicChannel, width)
    }

    pub fn disk(width: f64) -> Result<Self> {
        Self::new(Instance::Disk, width)
    }

    pub fn new(instance: Instance, width: f64) -> Result<Self> {
        if !(width > 0.0 && width < 0.5) {
            return Err(Error::Validation(format!(
                "tubular width L = {width} must lie in (0, 0.5)"
            )));
        }
        Ok(Self { instance, width })
    }

    /// Length of the parameter interval of the flexible boundary.
    pub fn boundary_length(&self) -> f64 {
        match self.instance {
            Instance::PeriodicChannel => 1.0,
            Instance::Disk => TWO_PI,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self.instance {
            Instance::PeriodicChannel => 2f64.sqrt(),
            Instance::Disk => 2.0,
        }
    }
}

/// Quintic smoothstep `6x^5 - 15x^4 + 10x^3` on `[0, 1]`.
fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
}

/// Antiderivative of the smoothstep with `P(0) = 0`, `P(1) = 1/2`.
fn smoothstep_integral(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x.powi(4) * (2.5 - 3.0 * x + x * x)
}

fn smoothstep_slope(x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    30.0 * x * x * (1.0 - x) * (1.0 - x)
}

/// Cutoff `phi(s)`: zero below `s_lo`, one above `s_hi`.
///
/// `phi'` is a box on `[s_lo, s_hi]` whose edges are blended by quintic
/// smoothsteps of width `blend`, so `phi` is C^2 and its slope never exceeds
/// `1 / (s_hi - s_lo - blend)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffProfile {
    pub s_lo: f64,
    pub s_hi: f64,
    pub blend: f64,
}

impl CutoffProfile {
    pub fn new(s_lo: f64, s_hi: f64, blend: f64) -> Result<Self> {
        if !(s_lo < s_hi && s_hi <= 0.0) {
            return Err(Error::Validation(format!(
                "cutoff needs s_lo < s_hi <= 0, got {s_lo}, {s_hi}"
            )));
        }
        if !(blend > 0.0 && 2.0 * blend <= s_hi - s_lo) {
            return Err(Error::Validation(format!("cutoff blend {blend} out of range")));
        }
        Ok(Self { s_lo, s_hi, blend })
    }

    /// Default profile for tubular width `L`.
    pub fn for_width(width: f64) -> Self {
        Self { s_lo: -0.97 * width, s_hi: -0.01 * width, blend: 0.1 * width }
    }

    fn span(&self) -> f64 {
        self.s_hi - self.s_lo
    }

    fn area(&self) -> f64 {
        1.0 - self.blend / self.span()
    }

    /// `[phi, phi', phi'']` at `s`.
    pub fn eval(&self, s: f64) -> [f64; 3] {
        if s <= self.s_lo {
            return [0.0, 0.0, 0.0];
        }
        if s >= self.s_hi {
            return [1.0, 0.0, 0.0];
        }
        let w = self.span();
        let d = self.blend / w;
        let t = (s - self.s_lo) / w;
        let (g0, g1, g2) = if t < d {
            (d * smoothstep_integral(t / d), smoothstep(t / d), smoothstep_slope(t / d) / d)
        } else if t > 1.0 - d {
            let r = (1.0 - t) / d;
            (1.0 - d - d * smoothstep_integral(r), smoothstep(r), -smoothstep_slope(r) / d)
        } else {
            (0.5 * d + (t - d), 1.0, 0.0)
        };
        let a = self.area();
        [g0 / a, g1 / (a * w), g2 / (a * w * w)]
    }

    pub fn value(&self, s: f64) -> f64 {
        self.eval(s)[0]
    }

    /// Largest slope of the profile.
    pub fn max_slope(&self) -> f64 {
        1.0 / (self.span() - self.blend)
    }
}

/// Pointwise geometric coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointTensors {
    pub grad_psi: Mat2,
    pub j: f64,
    /// `(grad Psi)^{-1}`.
    pub f: Mat2,
    /// `J F`.
    pub b: Mat2,
    /// `B F^T`.
    pub a: Mat2,
    /// `(d_t Psi^{-1}) o Psi`.
    pub domain_velocity: [f64; 2],
}

/// Hanzawa map for one displacement field.
#[derive(Debug, Clone)]
pub struct Hanzawa {
    pub geom: ReferenceGeometry,
    pub cutoff: CutoffProfile,
    eta: TrigSeries,
    eta_dot: TrigSeries,
}

/// Unit tangent direction along the disk boundary for angle `theta`.
fn radial(theta: f64) -> ([f64; 2], [f64; 2]) {
    let (s, c) = theta.sin_cos();
    ([c, s], [-s, c])
}

impl Hanzawa {
    pub fn new(geom: ReferenceGeometry, cutoff: CutoffProfile, state: &StructureState) -> Result<Self> {
        let max_abs = state.max_abs_eta();
        if !(max_abs < geom.width) {
            return Err(Error::DisplacementTooLarge { max_abs, width: geom.width });
        }
        if cutoff.s_lo < -geom.width - 1e-14 {
            return Err(Error::Validation("cutoff extends beyond the tubular width".into()));
        }
        Ok(Self {
            geom,
            cutoff,
            eta: TrigSeries::new(&state.eta, 0.5),
            eta_dot: TrigSeries::new(&state.eta_dot, 0.5),
        })
    }

    pub fn with_default_cutoff(geom: ReferenceGeometry, state: &StructureState) -> Result<Self> {
        Self::new(geom, CutoffProfile::for_width(geom.width), state)
    }

    /// `[eta, eta', eta'']` at boundary parameter `xi in [0, 1)`.
    pub fn eta(&self, xi: f64) -> [f64; 3] {
        self.eta.eval3(xi)
    }

    pub fn eta_dot(&self, xi: f64) -> f64 {
        self.eta_dot.eval(xi, 0)
    }

    fn disk_xi(x: [f64; 2]) -> (f64, f64) {
        let theta = x[1].atan2(x[0]).rem_euclid(TWO_PI);
        (theta, theta / TWO_PI)
    }

    pub fn forward(&self, x: [f64; 2]) -> [f64; 2] {
        match self.geom.instance {
            Instance::PeriodicChannel => {
                let e = self.eta.eval(x[0], 0);
                [x[0], x[1] + e * self.cutoff.value(x[1] - 1.0)]
            }
            Instance::Disk => {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                if r == 0.0 {
                    return x;
                }
                let (theta, xi) = Self::disk_xi(x);
                let rho = r + self.eta.eval(xi, 0) * self.cutoff.value(r - 1.0);
                let (er, _) = radial(theta);
                [rho * er[0], rho * er[1]]
            }
        }
    }

    /// Solves `s + eta * phi(s - 1) = target` along one normal fiber.
    fn solve_fiber(&self, eta: f64, target: f64, lo0: f64) -> Result<f64> {
        let g = |s: f64| s + eta * self.cutoff.value(s - 1.0) - target;
        if g(1.0) <= 0.0 {
            // beyond the boundary the cutoff is one
            return Ok(target - eta);
        }
        if g(lo0) >= 0.0 {
            return Ok(lo0 + (target - lo0 - eta * self.cutoff.value(lo0 - 1.0)));
        }
        let (mut lo, mut hi) = (lo0, 1.0);
        let mut s = target.clamp(lo, hi);
        let tol = 1e-15;
        for _ in 0..100 {
            let [phi, dphi, _] = self.cutoff.eval(s - 1.0);
            let r = s + eta * phi - target;
            if r.abs() <= tol {
                return Ok(s);
            }
            if r < 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let newton = s - r / (1.0 + eta * dphi);
            s = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= 1e-16 {
                return Ok(s);
            }
        }
        Err(Error::NoConvergence { iterations: 100 })
    }

    pub fn inverse(&self, z: [f64; 2]) -> Result<[f64; 2]> {
        match self.geom.instance {
            Instance::PeriodicChannel => {
                let e = self.eta.eval(z[0], 0);
                Ok([z[0], self.solve_fiber(e, z[1], 0.0)?])
            }
            Instance::Disk => {
                let rho = (z[0] * z[0] + z[1] * z[1]).sqrt();
                if rho == 0.0 {
                    return Ok(z);
                }
                let (theta, xi) = Self::disk_xi(z);
                let r = self.solve_fiber(self.eta.eval(xi, 0), rho, 0.0)?;
                let (er, _) = radial(theta);
                Ok([r * er[0], r * er[1]])
            }
        }
    }

    /// Analytic Jacobian data at reference point `x`.
    pub fn tensors_at(&self, x: [f64; 2]) -> PointTensors {
        let (grad_psi, dt_psi) = match self.geom.instance {
            Instance::PeriodicChannel => {
                let [e, de, _] = self.eta.eval3(x[0]);
                let [phi, dphi, _] = self.cutoff.eval(x[1] - 1.0);
                let g = Mat2::new(1.0, 0.0, de * phi, 1.0 + e * dphi);
                (g, [0.0, self.eta_dot(x[0]) * phi])
            }
            Instance::Disk => {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                let [phi, dphi, _] = self.cutoff.eval(r - 1.0);
                if r == 0.0 || phi == 0.0 && dphi == 0.0 {
                    (Mat2::IDENTITY, [0.0, 0.0])
                } else {
                    let (theta, xi) = Self::disk_xi(x);
                    let [e, de, _] = self.eta.eval3(xi);
                    let rho = r + e * phi;
                    let rho_r = 1.0 + e * dphi;
                    let rho_theta = de * phi / TWO_PI;
                    let polar = Mat2::new(rho_r, rho_theta / r, 0.0, rho / r);
                    let (er, et) = radial(theta);
                    let rot = Mat2::new(er[0], et[0], er[1], et[1]);
                    let g = rot * polar * rot.transpose();
                    let v = self.eta_dot(xi) * phi;
                    (g, [v * er[0], v * er[1]])
                }
            }
        };
        let j = grad_psi.det();
        // J > 0 is enforced by the displacement bound
        let f = Mat2::new(grad_psi.get(1, 1), -grad_psi.get(0, 1), -grad_psi.get(1, 0), grad_psi.get(0, 0)).scale(1.0 / j);
        let b = f.scale(j);
        let a = b * f.transpose();
        let w = f.apply(dt_psi);
        PointTensors { grad_psi, j, f, b, a, domain_velocity: [-w[0], -w[1]] }
    }
}

/// Coefficient fields sampled at cell centres of a grid laid over the
/// reference domain (Cartesian for the channel, polar for the disk).
#[derive(Debug, Clone)]
pub struct GeometryTensors {
    pub grid: Grid2,
    pub j: Vec<f64>,
    pub a: Vec<Mat2>,
    pub b: Vec<Mat2>,
    pub domain_velocity: Vec<[f64; 2]>,
    /// Deformed unit normal at the structure nodes.
    pub n_def: Vec<[f64; 2]>,
    /// Length element of the deformed boundary at the structure nodes.
    pub bnd_measure: Vec<f64>,
}

/// Cartesian reference point of cell `(i, j)`.
pub fn cell_point(grid: &Grid2, i: usize, j: usize) -> [f64; 2] {
    let (x, y) = grid.cell_center(i, j);
    match grid.coords {
        crate::fields::Coords::Cartesian => [x, y],
        crate::fields::Coords::Polar => {
            let (s, c) = x.sin_cos();
            [y * c, y * s]
        }
    }
}

pub fn geometry_tensors(
    geom: ReferenceGeometry,
    cutoff: CutoffProfile,
    eta: &StructureState,
    grid: &Grid2,
) -> Result<GeometryTensors> {
    let map = Hanzawa::new(geom, cutoff, eta)?;
    let n = grid.n_cells();
    let mut out = GeometryTensors {
        grid: *grid,
        j: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
        b: Vec::with_capacity(n),
        domain_velocity: Vec::with_capacity(n),
        n_def: Vec::new(),
        bnd_measure: Vec::new(),
    };
    for jj in 0..grid.ny {
        for i in 0..grid.nx {
            let t = map.tensors_at(cell_point(grid, i, jj));
            out.j.push(t.j);
            out.a.push(t.a);
            out.b.push(t.b);
            out.domain_velocity.push(t.domain_velocity);
        }
    }
    let (n_def, m) = boundary_data_from_map(&map, eta.len());
    out.n_def = n_def;
    out.bnd_measure = m;
    Ok(out)
}

fn boundary_data_from_map(map: &Hanzawa, n: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
    let mut normals = Vec::with_capacity(n);
    let mut measure = Vec::with_capacity(n);
    for i in 0..n {
        let xi = (i as f64 + 0.5) / n as f64;
        let [e, de, _] = map.eta(xi);
        match map.geom.instance {
            Instance::PeriodicChannel => {
                let m = (1.0 + de * de).sqrt();
                normals.push([-de / m, 1.0 / m]);
                measure.push(m);
            }
            Instance::Disk => {
                let (er, et) = radial(TWO_PI * xi);
                let tang_r = de;
                let tang_t = TWO_PI * (1.0 + e);
                let m = (tang_r * tang_r + tang_t * tang_t).sqrt();
                let (nr, nt) = (tang_t / m, -tang_r / m);
                normals.push([nr * er[0] + nt * et[0], nr * er[1] + nt * et[1]]);
                measure.push(m);
            }
        }
    }
    (normals, measure)
}

/// Deformed normals and boundary measure at the structure nodes.
pub fn deformed_boundary_data(
    geom: ReferenceGeometry,
    eta: &StructureState,
) -> Result<(Vec<[f64; 2]>, Vec<f64>)> {
    let map = Hanzawa::with_default_cutoff(geom, eta)?;
    Ok(boundary_data_from_map(&map, eta.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn channel() -> ReferenceGeometry {
        ReferenceGeometry::channel(0.3).unwrap()
    }

    #[test]
    fn cutoff_end_values_and_continuity() {
        let c = CutoffProfile::for_width(0.3);
        assert_eq!(c.eval(c.s_lo), [0.0, 0.0, 0.0]);
        assert_eq!(c.eval(c.s_hi)[0], 1.0);
        assert_eq!(c.value(0.0), 1.0);
        let h = 1e-7;
        let mut s = c.s_lo - 0.01;
        while s < 0.01 {
            let [p, dp, ddp] = c.eval(s);
            let fd1 = (c.value(s + h) - c.value(s - h)) / (2.0 * h);
            let fd2 = (c.eval(s + h)[1] - c.eval(s - h)[1]) / (2.0 * h);
            assert!((dp - fd1).abs() < 1e-5, "s = {s}");
            assert!((ddp - fd2).abs() < 1e-3 * (1.0 + ddp.abs()), "s = {s}");
            assert!((0.0..=1.0).contains(&p));
            assert!(dp <= c.max_slope() + 1e-12);
            s += 1e-3;
        }
    }

    #[test]
    fn identity_for_zero_displacement() {
        let m = Hanzawa::with_default_cutoff(channel(), &StructureState::zeros(32)).unwrap();
        let x = [0.3, 0.9];
        assert_eq!(m.forward(x), x);
        assert_eq!(m.inverse(x).unwrap(), x);
        let t = m.tensors_at(x);
        assert_eq!(t.j, 1.0);
        assert_eq!(t.a, Mat2::IDENTITY);
        assert_eq!(t.b, Mat2::IDENTITY);
        assert_eq!(t.domain_velocity, [0.0, 0.0]);
    }

    #[test]
    fn boundary_point_moves_by_eta() {
        let s = StructureState::new(vec![0.1; 16], vec![0.0; 16]);
        // mean removal makes a constant displacement vanish
        assert!(s.max_abs_eta() < 1e-15);
        let s = StructureState::from_fn(16, |x| 0.1 * (2.0 * PI * x).cos(), |_| 0.0);
        let m = Hanzawa::with_default_cutoff(channel(), &s).unwrap();
        let x = s.node(3);
        let z = m.forward([x, 1.0]);
        assert!((z[1] - 1.0 - s.eta[3]).abs() < 1e-14);
        let c = m.cutoff;
        assert_eq!(m.forward([x, 1.0 + c.s_lo]), [x, 1.0 + c.s_lo]);
    }

    #[test]
    fn rejects_large_displacement() {
        let s = StructureState::from_fn(16, |x| 0.4 * (2.0 * PI * x).sin(), |_| 0.0);
        assert!(matches!(
            Hanzawa::with_default_cutoff(channel(), &s),
            Err(Error::DisplacementTooLarge { .. })
        ));
    }

    #[test]
    fn channel_jacobian_closed_form() {
        let s = StructureState::from_fn(32, |x| 0.2 * (2.0 * PI * x).sin(), |_| 0.0);
        let m = Hanzawa::with_default_cutoff(channel(), &s).unwrap();
        let x = [0.25, 0.85];
        let t = m.tensors_at(x);
        let [e, _, _] = m.eta(x[0]);
        assert!((t.j - (1.0 + e * m.cutoff.eval(x[1] - 1.0)[1])).abs() < 1e-14);
        let h = 1e-6;
        let fy = (m.forward([x[0], x[1] + h])[1] - m.forward([x[0], x[1] - h])[1]) / (2.0 * h);
        assert!((t.j - fy).abs() < 1e-8);
    }

    #[test]
    fn boundary_normal_of_sine() {
        let a = 0.05;
        let s = StructureState::from_fn(64, |x| a * (2.0 * PI * x).sin(), |_| 0.0);
        let (n, m) = deformed_boundary_data(channel(), &s).unwrap();
        for i in 0..64 {
            let y = s.node(i);
            let slope = a * TWO_PI * (TWO_PI * y).cos();
            let norm = (1.0 + slope * slope).sqrt();
            assert!((n[i][0] + slope / norm).abs() < 1e-12);
            assert!((n[i][1] - 1.0 / norm).abs() < 1e-12);
            assert!((m[i] - norm).abs() < 1e-12);
        }
    }

    #[test]
    fn disk_reference_boundary_data() {
        let g = ReferenceGeometry::disk(0.3).unwrap();
        let (n, m) = deformed_boundary_data(g, &StructureState::zeros(16)).unwrap();
        for (i, v) in n.iter().enumerate() {
            let th = TWO_PI * (i as f64 + 0.5) / 16.0;
            assert!((v[0] - th.cos()).abs() < 1e-14 && (v[1] - th.sin()).abs() < 1e-14);
            assert!((m[i] - TWO_PI).abs() < 1e-12);
        }
    }
}
