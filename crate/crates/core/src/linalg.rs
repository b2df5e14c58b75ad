//! Preconditioned conjugate gradients and a direct solver for constant
//! coefficient Helmholtz problems on strips periodic in `x`.

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::f64::consts::PI;
use std::sync::Arc;

pub trait LinearOperator {
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

pub trait Preconditioner {
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Diagonal (Jacobi) preconditioner.
pub struct Jacobi(pub Vec<f64>);

impl Preconditioner for Jacobi {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        for ((zi, ri), d) in z.iter_mut().zip(r).zip(&self.0) {
            *zi = ri / d;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgStats {
    pub iterations: usize,
    /// Final relative residual `|b - Ax| / |b|`.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Operator annihilates constants; keep iterates and residuals mean-free.
    pub constant_nullspace: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn remove_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Solves `A x = b` starting from the given `x`. `Err` carries the stats of a
/// run that missed the tolerance.
pub fn pcg(
    op: &dyn LinearOperator,
    pc: &dyn Preconditioner,
    b: &[f64],
    x: &mut [f64],
    opts: CgOptions,
) -> Result<CgStats, CgStats> {
    let n = b.len();
    let mut rhs = b.to_vec();
    if opts.constant_nullspace {
        remove_mean(&mut rhs);
        remove_mean(x);
    }
    let bnorm = dot(&rhs, &rhs).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgStats { iterations: 0, residual: 0.0 });
    }
    let mut ax = vec![0.0; n];
    op.apply(x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    if opts.constant_nullspace {
        remove_mean(&mut r);
    }
    let mut z = vec![0.0; n];
    pc.apply(&r, &mut z);
    if opts.constant_nullspace {
        remove_mean(&mut z);
    }
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut res = dot(&r, &r).sqrt() / bnorm;
    for it in 0..opts.max_iter {
        if res <= opts.tol {
            return Ok(CgStats { iterations: it, residual: res });
        }
        op.apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(CgStats { iterations: it, residual: res });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if opts.constant_nullspace {
            remove_mean(&mut r);
        }
        res = dot(&r, &r).sqrt() / bnorm;
        pc.apply(&r, &mut z);
        if opts.constant_nullspace {
            remove_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if res <= opts.tol {
        Ok(CgStats { iterations: opts.max_iter, residual: res })
    } else {
        Err(CgStats { iterations: opts.max_iter, residual: res })
    }
}

/// Treatment of the two walls in the `y` direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum YBoundary {
    /// Unknowns at cell centres, zero flux through the walls.
    NeumannCell,
    /// Unknowns at cell centres, zero value on the walls (ghost reflection).
    DirichletHalf,
    /// Unknowns at interior nodes, zero value at the wall nodes.
    DirichletNode,
}

impl YBoundary {
    fn end_weight(&self) -> f64 {
        match self {
            YBoundary::NeumannCell => 1.0,
            YBoundary::DirichletHalf => 3.0,
            YBoundary::DirichletNode => 2.0,
        }
    }
}

/// Direct solver for `alpha x - beta (D_xx + D_yy) x = b` with `rows` unknown
/// rows of `nx` periodic entries each.
#[derive(Clone)]
pub struct StripSolver {
    pub nx: usize,
    pub rows: usize,
    pub hx: f64,
    pub hy: f64,
    pub alpha: f64,
    pub beta: f64,
    pub bc: YBoundary,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for StripSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StripSolver")
            .field("nx", &self.nx)
            .field("rows", &self.rows)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("bc", &self.bc)
            .finish()
    }
}

/// Thomas algorithm with constant off-diagonal `off` and complex right side.
fn thomas(diag: &[f64], off: f64, rhs: &mut [Complex64], work: &mut Vec<f64>) {
    let n = diag.len();
    work.clear();
    work.resize(n, 0.0);
    let mut denom = diag[0];
    work[0] = off / denom;
    rhs[0] /= denom;
    for j in 1..n {
        denom = diag[j] - off * work[j - 1];
        work[j] = off / denom;
        let prev = rhs[j - 1];
        rhs[j] = (rhs[j] - prev * off) / denom;
    }
    for j in (0..n - 1).rev() {
        let next = rhs[j + 1];
        rhs[j] -= next * work[j];
    }
}

impl StripSolver {
    pub fn new(nx: usize, rows: usize, hx: f64, hy: f64, alpha: f64, beta: f64, bc: YBoundary) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            nx,
            rows,
            hx,
            hy,
            alpha,
            beta,
            bc,
            fwd: planner.plan_fft_forward(nx),
            inv: planner.plan_fft_inverse(nx),
        }
    }

    fn singular(&self) -> bool {
        self.alpha == 0.0 && self.bc == YBoundary::NeumannCell
    }

    /// Applies the operator (used for testing and residual checks).
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.rows);
        let (ix, iy) = (1.0 / (self.hx * self.hx), 1.0 / (self.hy * self.hy));
        let end = self.bc.end_weight();
        let mut y = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let c = x[j * nx + i];
                let l = x[j * nx + (i + nx - 1) % nx];
                let r = x[j * nx + (i + 1) % nx];
                let mut yy = 0.0;
                let mut diag = 0.0;
                if j > 0 {
                    yy += x[(j - 1) * nx + i];
                    diag += 1.0;
                }
                if j + 1 < ny {
                    yy += x[(j + 1) * nx + i];
                    diag += 1.0;
                }
                if j == 0 || j + 1 == ny {
                    diag += end - 1.0;
                }
                let lap = (l - 2.0 * c + r) * ix + (yy - diag * c) * iy;
                y[j * nx + i] = self.alpha * c - self.beta * lap;
            }
        }
        y
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.rows);
        assert_eq!(b.len(), nx * ny);
        let mut spec: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        for row in spec.chunks_mut(nx) {
            self.fwd.process(row);
        }
        let iy = 1.0 / (self.hy * self.hy);
        let off = -self.beta * iy;
        let end = self.bc.end_weight();
        let mut diag = vec![0.0; ny];
        let mut col = vec![Complex64::new(0.0, 0.0); ny];
        let mut work = Vec::with_capacity(ny);
        for m in 0..nx {
            let lam = (2.0 - 2.0 * (2.0 * PI * m as f64 / nx as f64).cos()) / (self.hx * self.hx);
            for (j, d) in diag.iter_mut().enumerate() {
                let w = if j == 0 || j + 1 == ny { end } else { 2.0 };
                *d = self.alpha + self.beta * (lam + w * iy);
            }
            for j in 0..ny {
                col[j] = spec[j * nx + m];
            }
            if m == 0 && self.singular() {
                // x_0 = 0 and drop the redundant first equation
                thomas(&diag[1..], off, &mut col[1..], &mut work);
                col[0] = Complex64::new(0.0, 0.0);
                let mean = col.iter().sum::<Complex64>() / ny as f64;
                col.iter_mut().for_each(|c| *c -= mean);
            } else {
                thomas(&diag, off, &mut col, &mut work);
            }
            for j in 0..ny {
                spec[j * nx + m] = col[j];
            }
        }
        for row in spec.chunks_mut(nx) {
            self.inv.process(row);
        }
        spec.iter().map(|c| c.re / nx as f64).collect()
    }
}

impl LinearOperator for StripSolver {
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(&StripSolver::apply(self, x));
    }
}

impl Preconditioner for StripSolver {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(&self.solve(r));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn strip_solver_inverts_operator() {
        for bc in [YBoundary::NeumannCell, YBoundary::DirichletHalf, YBoundary::DirichletNode] {
            let s = StripSolver::new(16, 12, 1.0 / 16.0, 1.0 / 12.0, 3.0, 0.7, bc);
            let b = random(16 * 12, 1);
            let x = s.solve(&b);
            let r = s.apply(&x);
            for (u, v) in r.iter().zip(&b) {
                assert!((u - v).abs() < 1e-10, "{bc:?}");
            }
        }
    }

    #[test]
    fn singular_neumann_poisson() {
        let s = StripSolver::new(16, 10, 0.1, 0.1, 0.0, 1.0, YBoundary::NeumannCell);
        let mut b = random(160, 2);
        remove_mean(&mut b);
        let x = s.solve(&b);
        assert!(x.iter().sum::<f64>().abs() < 1e-10);
        for (u, v) in s.apply(&x).iter().zip(&b) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn pcg_matches_direct_solve() {
        let s = StripSolver::new(16, 12, 1.0 / 16.0, 1.0 / 12.0, 1.0, 0.5, YBoundary::DirichletHalf);
        let b = random(16 * 12, 3);
        let mut x = vec![0.0; b.len()];
        let opts = CgOptions { tol: 1e-12, max_iter: 500, constant_nullspace: false };
        let stats = pcg(&s, &Identity, &b, &mut x, opts).unwrap();
        assert!(stats.iterations > 1);
        let direct = s.solve(&b);
        for (u, v) in x.iter().zip(&direct) {
            assert!((u - v).abs() < 1e-9);
        }
        let mut y = vec![0.0; b.len()];
        let stats = pcg(&s, &s, &b, &mut y, opts).unwrap();
        assert!(stats.iterations <= 2);
    }

    #[test]
    fn pcg_reports_failure() {
        let s = StripSolver::new(16, 12, 1.0 / 16.0, 1.0 / 12.0, 0.0, 1.0, YBoundary::DirichletHalf);
        let b = random(16 * 12, 4);
        let mut x = vec![0.0; b.len()];
        let opts = CgOptions { tol: 1e-14, max_iter: 3, constant_nullspace: false };
        assert!(pcg(&s, &Identity, &b, &mut x, opts).is_err());
    }
}
