//! Pointwise 2x2 tensor algebra.
//!
//! The scalar matrix product follows the convention `A : B = sum_ij a_ij b_ji`;
//! [`Contraction::Frobenius`] selects the entrywise `sum_ij a_ij b_ij` instead.
//! Velocity gradients are stored as `(grad u)_ij = d_j u_i`.

use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// General 2x2 matrix, row-major.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[0.0, 0.0], [0.0, 0.0]]);
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Mat2([[a11, a12], [a21, a22]])
    }

    pub fn diag(a: f64, b: f64) -> Self {
        Mat2([[a, 0.0], [0.0, b]])
    }

    /// Antisymmetric generator `[[0, w], [-w, 0]]`.
    pub fn rotation_generator(w: f64) -> Self {
        Mat2([[0.0, w], [-w, 0.0]])
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0[i][j]
    }

    pub fn transpose(&self) -> Self {
        let m = self.0;
        Mat2([[m[0][0], m[1][0]], [m[0][1], m[1][1]]])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        let m = self.0;
        Some(Mat2([
            [m[1][1] / d, -m[0][1] / d],
            [-m[1][0] / d, m[0][0] / d],
        ]))
    }

    pub fn frobenius(&self) -> f64 {
        self.0.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn scale(&self, s: f64) -> Self {
        let m = self.0;
        Mat2([[s * m[0][0], s * m[0][1]], [s * m[1][0], s * m[1][1]]])
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        let m = self.0;
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }

    /// `self^n` by repeated multiplication (`n = 0` gives the identity).
    pub fn pow(&self, n: u32) -> Self {
        (0..n).fold(Mat2::IDENTITY, |acc, _| acc * *self)
    }

    pub fn symmetric_part(&self) -> SymMat2 {
        let m = self.0;
        SymMat2::new(m[0][0], 0.5 * (m[0][1] + m[1][0]), m[1][1])
    }

    /// Defect `|A + A^T|` measuring departure from antisymmetry.
    pub fn antisymmetry_defect(&self) -> f64 {
        (*self + self.transpose()).frobenius()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|v| v.is_finite())
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        Mat2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        self + (-o)
    }
}

impl Neg for Mat2 {
    type Output = Mat2;
    fn neg(self) -> Mat2 {
        self.scale(-1.0)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let (a, b) = (self.0, o.0);
        let mut c = [[0.0; 2]; 2];
        for (i, row) in c.iter_mut().enumerate() {
            for (j, cij) in row.iter_mut().enumerate() {
                *cij = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(c)
    }
}

/// Symmetric 2x2 tensor stored as `(t11, t12, t22)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymMat2 {
    pub t11: f64,
    pub t12: f64,
    pub t22: f64,
}

impl SymMat2 {
    pub const ZERO: SymMat2 = SymMat2 { t11: 0.0, t12: 0.0, t22: 0.0 };
    pub const IDENTITY: SymMat2 = SymMat2 { t11: 1.0, t12: 0.0, t22: 1.0 };

    pub fn new(t11: f64, t12: f64, t22: f64) -> Self {
        Self { t11, t12, t22 }
    }

    pub fn isotropic(r: f64) -> Self {
        Self::new(r, 0.0, r)
    }

    pub fn to_mat(self) -> Mat2 {
        Mat2::new(self.t11, self.t12, self.t12, self.t22)
    }

    pub fn trace(&self) -> f64 {
        self.t11 + self.t22
    }

    pub fn det(&self) -> f64 {
        self.t11 * self.t22 - self.t12 * self.t12
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(s * self.t11, s * self.t12, s * self.t22)
    }

    pub fn add(&self, o: &SymMat2) -> Self {
        Self::new(self.t11 + o.t11, self.t12 + o.t12, self.t22 + o.t22)
    }

    pub fn sub(&self, o: &SymMat2) -> Self {
        Self::new(self.t11 - o.t11, self.t12 - o.t12, self.t22 - o.t22)
    }

    /// Frobenius norm `sqrt(t11^2 + 2 t12^2 + t22^2)`.
    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.t11 * self.t11 + 2.0 * self.t12 * self.t12 + self.t22 * self.t22
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let m = 0.5 * (self.t11 + self.t22);
        let d = 0.5 * (self.t11 - self.t22);
        let r = d.hypot(self.t12);
        [m - r, m + r]
    }

    /// `tr |T|^q`, the pointwise Schatten-q power. Equals the squared
    /// Frobenius norm for `q = 2`.
    pub fn schatten_pow(&self, q: f64) -> f64 {
        let [a, b] = self.eigenvalues();
        a.abs().powf(q) + b.abs().powf(q)
    }

    /// Strict positive definiteness: `t11 > 0` and `det > 0`.
    pub fn is_spd(&self) -> bool {
        self.t11 > 0.0 && self.det() > 0.0
    }

    pub fn is_finite(&self) -> bool {
        self.t11.is_finite() && self.t12.is_finite() && self.t22.is_finite()
    }
}

/// Which scalar matrix product to use in contractions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contraction {
    /// `sum_ij a_ij b_ji`
    Transposed,
    /// `sum_ij a_ij b_ij`
    Frobenius,
}

pub fn contract(a: &Mat2, b: &Mat2, kind: Contraction) -> f64 {
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            s += match kind {
                Contraction::Transposed => a.0[i][j] * b.0[j][i],
                Contraction::Frobenius => a.0[i][j] * b.0[i][j],
            };
        }
    }
    s
}

/// Base of the matrix power in [`corotational_contraction`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PowerBase {
    Z,
    ZTransposed,
}

/// Vorticity tensor `W = (grad_u - grad_u^T) / 2`.
pub fn vorticity(grad_u: &Mat2) -> Mat2 {
    (*grad_u - grad_u.transpose()).scale(0.5)
}

fn check_antisymmetric(w: &Mat2) -> Result<()> {
    let defect = w.antisymmetry_defect();
    if defect > 1e-12 * w.frobenius() {
        return Err(Error::NotAntisymmetric { defect });
    }
    Ok(())
}

/// Corotational term `W T + T W^T`.
pub fn corotational_product(w: &Mat2, t: &SymMat2) -> Result<SymMat2> {
    check_antisymmetric(w)?;
    let tm = t.to_mat();
    let out = *w * tm + tm * w.transpose();
    Ok(out.symmetric_part())
}

/// `W(grad_w) Z : Y^n + Z W(grad_w^T) : Y^n` with `Y` either `Z` or `Z^T`.
///
/// Vanishes identically; exists so the identity can be exercised.
pub fn corotational_contraction(grad_w: &Mat2, z: &Mat2, n: u32, base: PowerBase) -> f64 {
    corotational_contraction_with(grad_w, z, n, base, Contraction::Transposed)
}

pub fn corotational_contraction_with(
    grad_w: &Mat2,
    z: &Mat2,
    n: u32,
    base: PowerBase,
    kind: Contraction,
) -> f64 {
    let w = vorticity(grad_w);
    let wt = vorticity(&grad_w.transpose());
    let y = match base {
        PowerBase::Z => *z,
        PowerBase::ZTransposed => z.transpose(),
    };
    let yn = y.pow(n);
    contract(&(w * *z), &yn, kind) + contract(&(*z * wt), &yn, kind)
}

/// Rotation `exp(dt W)` for antisymmetric `W = [[0, w], [-w, 0]]`.
pub fn rotation(w: &Mat2, dt: f64) -> Mat2 {
    let angle = 0.5 * (w.0[0][1] - w.0[1][0]) * dt;
    let (s, c) = angle.sin_cos();
    Mat2::new(c, s, -s, c)
}

/// Exact solution after time `dt` of
/// `dT/dt = W T + T W^T - 2 (T - rho I)` with `W` and `rho` frozen:
/// `e^{-2 dt} R T0 R^T + rho (1 - e^{-2 dt}) I`, `R = exp(dt W)`.
pub fn reaction_exact(t0: &SymMat2, rho: f64, w: &Mat2, dt: f64) -> Result<SymMat2> {
    check_antisymmetric(w)?;
    let r = rotation(w, dt);
    let decay = (-2.0 * dt).exp();
    let rotated = (r * t0.to_mat() * r.transpose()).symmetric_part();
    Ok(rotated
        .scale(decay)
        .add(&SymMat2::isotropic(rho * (1.0 - decay))))
}

/// Right-hand side `W T + T W^T - 2 (T - rho I)` of the local stress law.
pub fn reaction_rate(t: &SymMat2, rho: f64, w: &Mat2) -> Result<SymMat2> {
    let corot = corotational_product(w, t)?;
    Ok(corot.sub(&t.sub(&SymMat2::isotropic(rho)).scale(2.0)))
}
