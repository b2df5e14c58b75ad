//! Browser bindings for a few cheap pieces of the solver. Every export returns
//! a flat `Float64Array`; layouts are documented per function.

use oldroyd_fsi::fields::StructureState;
use oldroyd_fsi::fp_oracle::{closure_series, QGrid};
use oldroyd_fsi::geometry::{Hanzawa, ReferenceGeometry};
use oldroyd_fsi::structure::{structure_energy, structure_step};
use oldroyd_fsi::tensor::{Mat2, SymMat2};
use oldroyd_fsi::{Error, Result};
use std::f64::consts::PI;
use wasm_bindgen::prelude::*;

const SHELL_NODES: usize = 64;
const CHANNEL_WIDTH: f64 = 0.3;

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

fn check_count(name: &str, n: usize, lo: usize, hi: usize) -> Result<()> {
    if n < lo || n > hi {
        return Err(Error::Validation(format!("{name} = {n} must lie in [{lo}, {hi}]")));
    }
    Ok(())
}

/// Deformed images of `lines` horizontal then `lines` vertical grid lines,
/// each sampled at `samples` points as interleaved `x, y`.
pub fn deformed_grid(amplitude: f64, mode: u32, lines: usize, samples: usize) -> Result<Vec<f64>> {
    check_count("lines", lines, 2, 64)?;
    check_count("samples", samples, 2, 1024)?;
    let k = 2.0 * PI * f64::from(mode);
    let s = StructureState::from_fn(SHELL_NODES, |x| amplitude * (k * x).sin(), |_| 0.0);
    let map = Hanzawa::with_default_cutoff(ReferenceGeometry::channel(CHANNEL_WIDTH)?, &s)?;
    let mut out = Vec::with_capacity(4 * lines * samples);
    let step = |i: usize, n: usize| i as f64 / (n - 1) as f64;
    for l in 0..lines {
        for i in 0..samples {
            out.extend(map.forward([step(i, samples), step(l, lines)]));
        }
    }
    for l in 0..lines {
        for i in 0..samples {
            out.extend(map.forward([step(l, lines), step(i, samples)]));
        }
    }
    Ok(out)
}

/// Rows of `t, mesoscopic T11, T12, T22, macroscopic T11, T12, T22` for a
/// dumbbell density under the constant rotation rate `theta`.
pub fn closure_curves(theta: f64, nq: usize, t_end: f64, dt: f64) -> Result<Vec<f64>> {
    check_count("nq", nq, 16, 128)?;
    if !(t_end > 0.0 && t_end <= 5.0) {
        return Err(Error::Validation(format!("t_end = {t_end} must lie in (0, 5]")));
    }
    let grid = QGrid::new(nq, 6.0)?;
    let series = closure_series(&Mat2::rotation_generator(theta), 1.0, &SymMat2::new(2.0, 0.3, 1.0), t_end, dt, &grid)?;
    Ok(series
        .iter()
        .flat_map(|s| [s.t, s.meso.t11, s.meso.t12, s.meso.t22, s.macro_.t11, s.macro_.t12, s.macro_.t22])
        .collect())
}

/// Rows of `t, kinetic, bending, max |eta|` for the unforced damped shell.
pub fn shell_energy(amplitude: f64, mode: u32, gamma: f64, dt: f64, steps: usize) -> Result<Vec<f64>> {
    check_count("steps", steps, 1, 100_000)?;
    if !(gamma >= 0.0 && dt > 0.0) {
        return Err(Error::Validation("need gamma >= 0 and dt > 0".into()));
    }
    let k = 2.0 * PI * f64::from(mode);
    let mut s = StructureState::from_fn(SHELL_NODES, |x| amplitude * (k * x).sin(), |_| 0.0);
    let forcing = vec![0.0; SHELL_NODES];
    let mut out = Vec::with_capacity(4 * (steps + 1));
    for n in 0..=steps {
        if n > 0 {
            s = structure_step(&s, &forcing, dt, gamma);
        }
        let (kin, bend) = structure_energy(&s);
        out.extend([n as f64 * dt, kin, bend, s.max_abs_eta()]);
    }
    Ok(out)
}

#[wasm_bindgen(js_name = deformedGrid)]
pub fn deformed_grid_js(amplitude: f64, mode: u32, lines: usize, samples: usize) -> std::result::Result<Vec<f64>, JsError> {
    deformed_grid(amplitude, mode, lines, samples).map_err(js)
}

#[wasm_bindgen(js_name = closureCurves)]
pub fn closure_curves_js(theta: f64, nq: usize, t_end: f64, dt: f64) -> std::result::Result<Vec<f64>, JsError> {
    closure_curves(theta, nq, t_end, dt).map_err(js)
}

#[wasm_bindgen(js_name = shellEnergy)]
pub fn shell_energy_js(amplitude: f64, mode: u32, gamma: f64, dt: f64, steps: usize) -> std::result::Result<Vec<f64>, JsError> {
    shell_energy(amplitude, mode, gamma, dt, steps).map_err(js)
}
