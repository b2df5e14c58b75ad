//! Energies, norms, relative-energy comparison and rate fits.

use crate::coupled::{RunOutput, State};
use crate::error::{Error, Result};
use crate::fields::{cell_weights, weighted_lp_norm, Grid2, StructureState, SymTensorField};
use crate::fluid::{physical_gradient_cells, ChannelGeometry};
use crate::geometry::{CutoffProfile, Hanzawa, ReferenceGeometry};
use crate::solute::{channel_volumes, dirichlet_energy, Diffusion};
use crate::structure::{structure_dissipation_rate, structure_energy};
use crate::tensor::Mat2;

/// Energy contributions of a coupled state plus cumulative dissipation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnergyBreakdown {
    /// `1/2 int |u|^2`.
    pub fluid_kinetic: f64,
    /// `1/2 int |eta_t|^2`.
    pub structure_kinetic: f64,
    /// `1/2 int |eta_yy|^2`.
    pub structure_bending: f64,
    /// `int rho^2`.
    pub rho_l2: f64,
    /// `int |T|^2`.
    pub stress_l2: f64,
    /// `2 int |D(u)|^2` at this instant.
    pub viscous_rate: f64,
    /// `2 eps int |grad T|^2` at this instant.
    pub eps_rate: f64,
    pub viscous_dissipation_cum: f64,
    pub gamma_dissipation_cum: f64,
    pub eps_dissipation_cum: f64,
}

impl EnergyBreakdown {
    pub fn mechanical(&self) -> f64 {
        self.fluid_kinetic + self.structure_kinetic + self.structure_bending
    }

    pub fn total(&self) -> f64 {
        self.mechanical() + self.stress_l2
    }
}

/// Instantaneous energies of `state` on the domain described by `geo`.
pub fn energy(state: &State, geo: &ChannelGeometry, eps: f64) -> Result<EnergyBreakdown> {
    let g = geo.grid;
    let vol = channel_volumes(geo);
    let (uc, vc) = state.fluid.u.cell_average();
    let fluid_kinetic = 0.5 * (0..g.n_cells()).map(|c| (uc[c] * uc[c] + vc[c] * vc[c]) * vol[c]).sum::<f64>();
    let (structure_kinetic, structure_bending) = structure_energy(&state.structure);
    let rho_l2 = state.solute.rho.data.iter().zip(&vol).map(|(r, w)| r * r * w).sum();
    let t = &state.solute.t;
    let stress_l2 = (0..g.n_cells()).map(|c| t.get(c).frobenius_sq() * vol[c]).sum();
    let grads = physical_gradient_cells(&state.fluid.u, geo);
    let viscous_rate = grads.iter().zip(&vol).map(|(m, w)| 2.0 * m.symmetric_part().frobenius_sq() * w).sum();
    let eps_rate = if eps > 0.0 {
        let d = |f: &[f64]| dirichlet_energy(f, Diffusion::Channel(geo), &g);
        2.0 * eps * (d(&t.t11) + 2.0 * d(&t.t12) + d(&t.t22))
    } else {
        0.0
    };
    Ok(EnergyBreakdown {
        fluid_kinetic,
        structure_kinetic,
        structure_bending,
        rho_l2,
        stress_l2,
        viscous_rate,
        eps_rate,
        ..Default::default()
    })
}

/// Largest excess of the energy inequality over a run:
/// mechanical part `E_m(t) + int 2|Du|^2 + gamma int |eta_ty|^2 <= E_m(0)`
/// plus stress part `|T|^2(t) + int |T|^2 + 2 eps int |grad T|^2
/// <= |T0|^2 + t |rho0 I|^2`.
pub fn energy_violation(out: &RunOutput) -> f64 {
    let Some(first) = out.rows.first() else { return 0.0 };
    let e0 = first.energy;
    let rho_i = 2.0 * e0.rho_l2;
    let dt = out.config.time.dt;
    out.rows
        .iter()
        .map(|r| {
            let t = r.step as f64 * dt;
            let e = r.energy;
            let lhs = e.mechanical()
                + e.viscous_dissipation_cum
                + e.gamma_dissipation_cum
                + e.stress_l2
                + r.stress_relaxation_cum
                + e.eps_dissipation_cum;
            let rhs = e0.mechanical() + e0.stress_l2 + t * rho_i;
            lhs - rhs
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `int tr |T|^q` over cells with weights `w`.
pub fn schatten_integral(t: &SymTensorField, q: f64, weights: &[f64]) -> Result<f64> {
    if q.is_nan() || q < 1.0 {
        return Err(Error::BadExponent(q));
    }
    Ok((0..t.grid.n_cells()).map(|c| t.get(c).schatten_pow(q) * weights[c]).sum())
}

/// L^p norms of `rho` for each `p` on the deformed domain.
pub fn lp_report(state: &State, geo: &ChannelGeometry, ps: &[f64]) -> Result<Vec<f64>> {
    let w = cell_weights(&geo.grid, Some(&geo.j_c));
    ps.iter().map(|&p| weighted_lp_norm(&state.solute.rho.data, p, &w)).collect()
}

/// Distance between an `eps` run and its `eps = 0` counterpart at the common
/// snapshot times.
#[derive(Debug, Clone, PartialEq)]
pub struct RelEnergySeries {
    pub eps: f64,
    pub times: Vec<f64>,
    /// `|d_t(eta - zeta)|^2 + |d_yy(eta - zeta)|^2`.
    pub structure: Vec<f64>,
    pub velocity: Vec<f64>,
    pub rho: Vec<f64>,
    pub stress: Vec<f64>,
    /// Running integral of `|T - U|^2 + |grad(u - v)|^2 + gamma |d_t d_y(eta - zeta)|^2`.
    pub cumulative: Vec<f64>,
}

impl RelEnergySeries {
    /// Supremum of the pointwise terms plus the final cumulative term.
    pub fn distance(&self) -> f64 {
        let sup = (0..self.times.len())
            .map(|k| self.structure[k] + self.velocity[k] + self.rho[k] + self.stress[k])
            .fold(0.0, f64::max);
        sup + self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Pointwise terms of the comparison at one time.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RelEnergyTerms {
    pub structure: f64,
    pub velocity: f64,
    pub rho: f64,
    pub stress: f64,
    /// Integrand of the cumulative term.
    pub rate: f64,
}

fn diff_structure(a: &StructureState, b: &StructureState) -> StructureState {
    let d = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p - q).collect::<Vec<_>>();
    StructureState::new(d(&a.eta, &b.eta), d(&a.eta_dot, &b.eta_dot))
}

/// Reference-cell gradient of a cell field: central in x, one-sided at walls.
fn cell_gradient(g: &Grid2, f: &[f64]) -> Vec<[f64; 2]> {
    let mut out = vec![[0.0; 2]; g.n_cells()];
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = g.cell(i, j);
            let dx = (f[g.cell(g.ip(i), j)] - f[g.cell(g.im(i), j)]) / (2.0 * g.hx);
            let dy = if j == 0 {
                (-3.0 * f[c] + 4.0 * f[g.cell(i, 1)] - f[g.cell(i, 2)]) / (2.0 * g.hy)
            } else if j == g.ny - 1 {
                (3.0 * f[c] - 4.0 * f[g.cell(i, j - 1)] + f[g.cell(i, j - 2)]) / (2.0 * g.hy)
            } else {
                (f[g.cell(i, j + 1)] - f[g.cell(i, j - 1)]) / (2.0 * g.hy)
            };
            out[c] = [dx, dy];
        }
    }
    out
}

/// Pulls the `eps` state back onto the domain of the `eps = 0` state via
/// `Psi_{eta - zeta}` and evaluates the distance terms there.
pub fn pullback_compare(
    eps_state: &State,
    ref_state: &State,
    geom: ReferenceGeometry,
    cutoff: CutoffProfile,
    gamma: f64,
) -> Result<RelEnergyTerms> {
    let g = ref_state.fluid.u.grid;
    if !g.same_shape(&eps_state.fluid.u.grid) {
        return Err(Error::GridMismatch("compared states use different grids".into()));
    }
    let ds = diff_structure(&eps_state.structure, &ref_state.structure);
    let (k, b) = structure_energy(&ds);
    let map_eta = Hanzawa::new(geom, cutoff, &eps_state.structure)?;
    let map_zeta = Hanzawa::new(geom, cutoff, &ref_state.structure)?;
    let map_diff = Hanzawa::new(geom, cutoff, &ds)?;
    let geo_zeta = ChannelGeometry::new(&g, geom, cutoff, &ref_state.structure)?;
    let vol = channel_volumes(&geo_zeta);

    let (ue, ve) = eps_state.fluid.u.cell_average();
    let (ur, vr) = ref_state.fluid.u.cell_average();
    let n = g.n_cells();
    let mut du = vec![0.0; n];
    let mut dv = vec![0.0; n];
    let mut drho = vec![0.0; n];
    let mut dt = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let te = eps_state.solute.t.components();
    let tr = ref_state.solute.t.components();
    for j in 0..g.ny {
        for i in 0..g.nx {
            let c = g.cell(i, j);
            let (x, y) = g.cell_center(i, j);
            let z = map_zeta.forward([x, y]);
            let yv = map_diff.forward(z);
            let xe = map_eta.inverse(yv)?;
            let at = |f: &[f64]| crate::fields::interp_cells(&g, f, xe[0].rem_euclid(1.0), xe[1]);
            du[c] = at(&ue) - ur[c];
            dv[c] = at(&ve) - vr[c];
            drho[c] = at(&eps_state.solute.rho.data) - ref_state.solute.rho.data[c];
            for m in 0..3 {
                dt[m][c] = at(te[m]) - tr[m][c];
            }
        }
    }
    let sum = |f: &dyn Fn(usize) -> f64| (0..n).map(|c| f(c) * vol[c]).sum::<f64>();
    let velocity = sum(&|c| du[c] * du[c] + dv[c] * dv[c]);
    let rho = sum(&|c| drho[c] * drho[c]);
    let stress = sum(&|c| dt[0][c].powi(2) + 2.0 * dt[1][c].powi(2) + dt[2][c].powi(2));
    let gu = cell_gradient(&g, &du);
    let gv = cell_gradient(&g, &dv);
    let grad_sq = sum(&|c| {
        let (jc, ac) = (geo_zeta.j_c[c], geo_zeta.a_c[c]);
        let m = Mat2::new(gu[c][0], gu[c][1], gv[c][0], gv[c][1]) * Mat2::new(1.0, 0.0, -ac / jc, 1.0 / jc);
        m.frobenius().powi(2)
    });
    Ok(RelEnergyTerms {
        structure: 2.0 * (k + b),
        velocity,
        rho,
        stress,
        rate: stress + grad_sq + structure_dissipation_rate(&ds, gamma),
    })
}

/// Distance series between an `eps` run and the `eps = 0` reference run.
pub fn relative_energy_series(run: &RunOutput, reference: &RunOutput) -> Result<RelEnergySeries> {
    if run.snapshots.len() != reference.snapshots.len()
        || run.snapshots.iter().zip(&reference.snapshots).any(|(a, b)| a.step != b.step)
    {
        return Err(Error::GridMismatch("runs have different snapshot times".into()));
    }
    let cfg = &run.config;
    let geom = cfg.geometry()?;
    let cutoff = cfg.cutoff();
    let mut s = RelEnergySeries {
        eps: cfg.physics.eps,
        times: vec![],
        structure: vec![],
        velocity: vec![],
        rho: vec![],
        stress: vec![],
        cumulative: vec![],
    };
    let mut prev: Option<(f64, f64)> = None;
    let mut cum = 0.0;
    for (a, b) in run.snapshots.iter().zip(&reference.snapshots) {
        let t = b.state.time;
        let terms = pullback_compare(&a.state, &b.state, geom, cutoff, cfg.physics.gamma)?;
        if let Some((t0, r0)) = prev {
            cum += 0.5 * (t - t0) * (r0 + terms.rate);
        }
        prev = Some((t, terms.rate));
        s.times.push(t);
        s.structure.push(terms.structure);
        s.velocity.push(terms.velocity);
        s.rho.push(terms.rho);
        s.stress.push(terms.stress);
        s.cumulative.push(cum);
    }
    Ok(s)
}

/// Least-squares fit of `log y = slope log x + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_rate(x: &[f64], y: &[f64]) -> Result<RateFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::DegenerateFit("need at least two paired points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::DegenerateFit("values must be positive and finite".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(Error::DegenerateFit("abscissae coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = ly.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit { slope, intercept: my - slope * mx, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_power_law() {
        let x = [0.1, 0.05, 0.025, 0.0125];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powi(2)).collect();
        let f = fit_rate(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fit_rejects_degenerate_input() {
        assert!(matches!(fit_rate(&[1.0], &[1.0]), Err(Error::DegenerateFit(_))));
        assert!(fit_rate(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(fit_rate(&[1.0, 2.0], &[0.0, 2.0]).is_err());
    }

    #[test]
    fn schatten_of_identity() {
        let g = Grid2::unit_channel(8, 8).unwrap();
        let t = SymTensorField::constant(g, crate::tensor::SymMat2::isotropic(2.0));
        let w = cell_weights(&g, None);
        let v = schatten_integral(&t, 2.0, &w).unwrap();
        assert!((v - 8.0).abs() < 1e-12);
        assert!(schatten_integral(&t, 0.5, &w).is_err());
    }
}
