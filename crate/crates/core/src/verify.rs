//! Quick built-in invariant checks behind the `verify` subcommand.

use crate::coupled::{run, SimConfig};
use crate::error::Result;
use crate::fields::{cell_weights, weighted_lp_norm, Grid2, ScalarField, StructureState, SymTensorField, VectorField};
use crate::fluid::{fluid_step, ChannelGeometry, FluidOptions, FluidState};
use crate::fp_oracle::{closure_residual, QGrid};
use crate::geometry::{Hanzawa, ReferenceGeometry};
use crate::io::{decode_snapshot, encode_snapshot, state_snapshot};
use crate::solute::{rigid_rotation, rigid_rotation_gradient, solute_step, Diffusion, SoluteOptions, SoluteState, Transport};
use crate::tensor::{corotational_contraction, Mat2, PowerBase, SymMat2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, r: Result<(bool, String)>) -> CheckResult {
    match r {
        Ok((passed, detail)) => CheckResult { name, passed, detail },
        Err(e) => CheckResult { name, passed: false, detail: format!("error: {e}") },
    }
}

fn corotational(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..2000 {
        let mut m = || Mat2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let (gw, z) = (m(), m());
        let w = crate::tensor::vorticity(&gw).frobenius();
        for n in 1..=4 {
            for base in [PowerBase::Z, PowerBase::ZTransposed] {
                let c = corotational_contraction(&gw, &z, n, base).abs();
                let scale = w * z.frobenius().powi(n as i32 + 1);
                if scale > 0.0 {
                    worst = worst.max(c / scale);
                }
            }
        }
    }
    Ok((worst <= 1e-12, format!("max relative contraction {worst:.3e}")))
}

fn closure() -> Result<(bool, String)> {
    let g = QGrid::new(64, 6.0)?;
    let w = Mat2::rotation_generator(1.0);
    let r = closure_residual(&w, 1.0, &SymMat2::new(2.0, 0.0, 1.0), 0.5, 0.005, &g)?;
    Ok((r <= 1e-2, format!("stress residual {r:.3e}")))
}

fn lp_conservation() -> Result<(bool, String)> {
    let n = 64;
    let g = Grid2::polar_disk(n, n)?;
    let rho0 = |th: f64, r: f64| 1.0 + 0.8 * r * th.cos() * (1.0 - 0.5 * r * r);
    let rho = ScalarField::from_fn(g, rho0);
    let t = SymTensorField::from_fn(g, |th, r| SymMat2::new(1.5, 0.3, 0.8).scale(rho0(th, r)));
    let mut s = SoluteState { rho, t };
    let tr = Transport::polar(&rigid_rotation(g, 2.0 * PI));
    let grad = rigid_rotation_gradient(&g, 2.0 * PI);
    let w = cell_weights(&g, None);
    let before = weighted_lp_norm(&s.rho.data, 2.0, &w)?;
    let steps = 2 * n;
    for _ in 0..steps {
        s = solute_step(&s, &tr, &grad, Diffusion::Polar, 0.0, 1.0 / steps as f64, SoluteOptions::default())?;
    }
    let after = weighted_lp_norm(&s.rho.data, 2.0, &w)?;
    let drift = (before - after).abs() / before;
    Ok((drift <= 0.05 && s.t.is_spd(), format!("L2 drift {drift:.3e} over one revolution")))
}

fn geometry_roundtrip(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let geom = ReferenceGeometry::channel(0.3)?;
    let s = StructureState::from_fn(32, |x| 0.2 * (2.0 * PI * x).sin() + 0.05 * (6.0 * PI * x).cos(), |_| 0.0);
    let map = Hanzawa::with_default_cutoff(geom, &s)?;
    let mut worst = 0.0_f64;
    for _ in 0..1000 {
        let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let back = map.inverse(map.forward(x))?;
        worst = worst.max((back[0] - x[0]).abs().max((back[1] - x[1]).abs()));
    }
    Ok((worst <= 1e-10, format!("max round-trip error {worst:.3e}")))
}

/// Manufactured steady Stokes problem with a prescribed polymer stress on the
/// flat channel; returns the discrete L2 velocity error.
pub fn mms_velocity_error(n: usize) -> Result<f64> {
    let k = 2.0 * PI;
    let g0 = |y: f64| y * y * (1.0 - y).powi(2);
    let g1 = |y: f64| 2.0 * y - 6.0 * y * y + 4.0 * y.powi(3);
    let g2 = |y: f64| 2.0 - 12.0 * y + 12.0 * y * y;
    let g3 = |y: f64| -12.0 + 24.0 * y;
    let grid = Grid2::unit_channel(n, n)?;
    let geo = ChannelGeometry::flat(&grid);
    let force = VectorField::from_fn(
        grid,
        |x, y| {
            let s = (k * x).sin();
            -s * (g3(y) - k * k * g1(y)) - k * s * (PI * y).sin() + 0.3 * k * s * y * y - 0.2 * PI * s * (PI * y).cos()
        },
        |x, y| {
            let c = (k * x).cos();
            k * c * (g2(y) - k * k * g0(y)) + PI * c * (PI * y).cos() - 0.2 * k * c * (PI * y).sin() + 0.6 * c * y
        },
    );
    let stress = SymTensorField::from_fn(grid, |x, y| {
        let tau = 0.3 * (k * x).cos() * y * y;
        SymMat2::new(2.0 + tau, 0.2 * (k * x).sin() * (PI * y).sin(), 2.0 - tau)
    });
    let mut st = FluidState::rest(grid);
    let dt = 0.02;
    let opts = FluidOptions { convection: false };
    for _ in 0..400 {
        st = fluid_step(&st, &stress, &geo, dt, Some(&force), opts)?;
    }
    let exact = VectorField::from_fn(grid, |x, y| (k * x).sin() * g1(y), |x, y| -k * (k * x).cos() * g0(y));
    let sq: f64 = st.u.u.iter().zip(&exact.u).chain(st.u.v.iter().zip(&exact.v)).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((sq * grid.hx * grid.hy).sqrt())
}

fn mms() -> Result<(bool, String)> {
    let (e1, e2) = (mms_velocity_error(16)?, mms_velocity_error(32)?);
    let order = (e1 / e2).log2();
    Ok((order >= 1.9, format!("velocity order {order:.3} (errors {e1:.3e}, {e2:.3e})")))
}

fn equilibrium() -> Result<(bool, String)> {
    let mut c = SimConfig::default();
    c.grid.nx = 16;
    c.grid.ny = 16;
    c.time.dt = 2e-3;
    c.time.t_final = 0.02;
    c.initial.rho0 = 1.2;
    let out = run(&c)?;
    let u = out.final_state.fluid.u.max_abs();
    let eta = out.final_state.structure.max_abs_eta();
    Ok((u < 1e-12 && eta < 1e-12, format!("|u| = {u:.3e}, |eta| = {eta:.3e}")))
}

fn snapshot_roundtrip() -> Result<(bool, String)> {
    let mut c = SimConfig::default();
    c.grid.nx = 16;
    c.grid.ny = 16;
    c.time.t_final = 0.005;
    c.initial.eta0_amplitude = 0.02;
    c.initial.rho0_amplitude = 0.3;
    let out = run(&c)?;
    let snap = state_snapshot(&out.final_state);
    let back = decode_snapshot(&encode_snapshot(&snap)?)?;
    let exact = back == snap;
    Ok((exact, if exact { "bit-exact".into() } else { "mismatch".into() }))
}

/// Runs every quick check.
pub fn run_all(seed: u64) -> Vec<CheckResult> {
    vec![
        check("corotational identity", corotational(seed)),
        check("closure oracle", closure()),
        check("Lp conservation", lp_conservation()),
        check("geometry round trip", geometry_roundtrip(seed)),
        check("MMS order", mms()),
        check("equilibrium fixed point", equilibrium()),
        check("snapshot round trip", snapshot_roundtrip()),
    ]
}
