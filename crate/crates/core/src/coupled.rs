//! Partitioned fluid-structure-solute time stepping on the periodic channel.

use crate::diagnostics::{energy, EnergyBreakdown, RelEnergySeries};
use crate::error::{Error, Result};
use crate::fields::{boundary_trace, Grid2, ScalarField, Side, StructureState, SymTensorField, VectorField};
use crate::fluid::{fluid_step, physical_gradient_cells, ChannelGeometry, FluidOptions, FluidState};
use crate::geometry::{CutoffProfile, Instance, ReferenceGeometry};
use crate::periodic::derivative_at_nodes;
use crate::solute::{solute_step, AdvectionScheme, Diffusion, SoluteOptions, SoluteState, Transport};
use crate::structure::{structure_dissipation_rate, structure_step};
use crate::tensor::SymMat2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::time::Instant;

/// Fraction of the tubular width at which a run is stopped.
pub const WALL_CONTACT_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsConfig {
    pub eps: f64,
    pub gamma: f64,
    /// Tubular width `L`.
    pub width: f64,
    /// `channel` or `disk`; coupled runs need the channel.
    pub instance: String,
}

impl Default for PhysicsConfig {
    fn default() -> Self {
        Self { eps: 0.0, gamma: 0.1, width: 0.3, instance: "channel".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub nx: usize,
    pub ny: usize,
    /// Shell nodes; must equal `nx` when given.
    pub ny_s: Option<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nx: 32, ny: 32, ny_s: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    pub t_final: f64,
    pub subiterations: usize,
}

impl Default for TimeConfig {
    fn default() -> Self {
        Self { dt: 1e-3, t_final: 0.1, subiterations: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    pub eta0_amplitude: f64,
    pub eta0_mode: u32,
    /// Amplitude of seeded random perturbations of `eta0` (modes 1 to 4).
    pub eta0_noise: f64,
    pub eta_star_amplitude: f64,
    pub rho0: f64,
    pub rho0_amplitude: f64,
    /// `T0 = rho0 (I + a Q)` with a fixed traceless `Q`.
    pub t0_anisotropy: f64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        Self {
            eta0_amplitude: 0.0,
            eta0_mode: 1,
            eta0_noise: 0.0,
            eta_star_amplitude: 0.0,
            rho0: 1.0,
            rho0_amplitude: 0.0,
            t0_anisotropy: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Steps between diagnostic rows.
    pub every: usize,
    /// Steps between stored snapshots (0 disables them).
    pub snapshot_every: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { every: 10, snapshot_every: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumericsConfig {
    /// `upwind` or `centered`.
    pub advection: String,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self { advection: "upwind".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub eps_list: Vec<f64>,
    /// Also run the largest `eps` at half resolution.
    pub control: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { eps_list: vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3], control: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub nq: usize,
    pub q_max: f64,
    pub dt: f64,
    pub t_end: f64,
    /// Rotation rate: `W = theta [[0, 1], [-1, 0]]`.
    pub theta: f64,
    pub rho0: f64,
    pub t0: [f64; 3],
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { nq: 128, q_max: 6.0, dt: 2e-3, t_end: 1.0, theta: 1.0, rho0: 1.0, t0: [2.0, 0.0, 1.0] }
    }
}

/// Complete run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub physics: PhysicsConfig,
    pub grid: GridConfig,
    pub time: TimeConfig,
    pub initial: InitialConfig,
    pub output: OutputConfig,
    pub numerics: NumericsConfig,
    pub sweep: SweepConfig,
    pub oracle: OracleConfig,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

/// Traceless direction used for anisotropic initial stress.
const ANISOTROPY: SymMat2 = SymMat2 { t11: 0.5, t12: 0.25, t22: -0.5 };

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let p = &self.physics;
        if !(p.eps >= 0.0 && p.eps.is_finite()) {
            return Err(invalid(format!("eps = {} must be >= 0", p.eps)));
        }
        if !(p.gamma > 0.0 && p.gamma.is_finite()) {
            return Err(invalid(format!("gamma = {} must be > 0", p.gamma)));
        }
        if !(p.width > 0.0 && p.width < 0.5) {
            return Err(invalid(format!("width L = {} must lie in (0, 0.5)", p.width)));
        }
        if p.instance != "channel" && p.instance != "disk" {
            return Err(invalid(format!("unknown instance '{}'", p.instance)));
        }
        let g = &self.grid;
        if g.nx < 8 || g.ny < 8 {
            return Err(invalid("grid needs nx, ny >= 8"));
        }
        if let Some(n) = g.ny_s {
            if n != g.nx {
                return Err(invalid(format!("ny_s = {n} must equal nx = {}", g.nx)));
            }
        }
        let t = &self.time;
        if !(t.dt > 0.0 && t.dt.is_finite()) {
            return Err(invalid(format!("dt = {} must be > 0", t.dt)));
        }
        if !(t.t_final >= 0.0 && t.t_final.is_finite()) {
            return Err(invalid(format!("t_final = {} must be >= 0", t.t_final)));
        }
        if t.subiterations == 0 {
            return Err(invalid("subiterations must be >= 1"));
        }
        let i = &self.initial;
        let eta_max = i.eta0_amplitude.abs() + 4.0 * i.eta0_noise.abs();
        if eta_max >= WALL_CONTACT_FRACTION * p.width {
            return Err(invalid(format!(
                "eta0 amplitude {eta_max} must stay below {WALL_CONTACT_FRACTION} L"
            )));
        }
        if i.eta0_mode == 0 {
            return Err(invalid("eta0_mode must be >= 1"));
        }
        if !(i.rho0 >= 0.0) || i.rho0 - i.rho0_amplitude.abs() < 0.0 {
            return Err(invalid("rho0 must be nonnegative everywhere"));
        }
        let aniso = ANISOTROPY.scale(i.t0_anisotropy).add(&SymMat2::IDENTITY);
        if i.rho0 - i.rho0_amplitude.abs() > 0.0 && !aniso.is_spd() {
            return Err(invalid("t0_anisotropy makes T0 indefinite"));
        }
        if self.output.every == 0 {
            return Err(invalid("output.every must be >= 1"));
        }
        self.advection()?;
        let s = &self.sweep;
        if s.eps_list.iter().any(|e| !(*e > 0.0)) {
            return Err(invalid("sweep eps_list entries must be > 0"));
        }
        if s.eps_list.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(invalid("sweep eps_list must be strictly decreasing without duplicates"));
        }
        let o = &self.oracle;
        if o.nq < 16 || !(o.q_max > 0.0) || !(o.dt > 0.0) || !(o.t_end >= 0.0) || !(o.rho0 > 0.0) {
            return Err(invalid("oracle section out of range"));
        }
        if !SymMat2::new(o.t0[0], o.t0[1], o.t0[2]).is_spd() {
            return Err(invalid("oracle t0 must be SPD"));
        }
        Ok(())
    }

    pub fn advection(&self) -> Result<AdvectionScheme> {
        match self.numerics.advection.as_str() {
            "upwind" => Ok(AdvectionScheme::Upwind),
            "centered" => Ok(AdvectionScheme::Centered),
            other => Err(invalid(format!("unknown advection scheme '{other}'"))),
        }
    }

    pub fn geometry(&self) -> Result<ReferenceGeometry> {
        match self.physics.instance.as_str() {
            "channel" => ReferenceGeometry::channel(self.physics.width),
            "disk" => ReferenceGeometry::disk(self.physics.width),
            other => Err(invalid(format!("unknown instance '{other}'"))),
        }
    }

    pub fn cutoff(&self) -> CutoffProfile {
        CutoffProfile::for_width(self.physics.width)
    }

    pub fn grid(&self) -> Result<Grid2> {
        Grid2::unit_channel(self.grid.nx, self.grid.ny)
    }

    pub fn steps(&self) -> usize {
        (self.time.t_final / self.time.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// Full simulation state.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub time: f64,
    pub structure: StructureState,
    pub fluid: FluidState,
    pub solute: SoluteState,
}

/// Traction on the shell, `-(S_bar B^T e2) . e2`, per structure node, with
/// `S = 2 D(u) - p I + T`.
pub fn traction(fluid: &FluidState, t: &SymTensorField, geo: &ChannelGeometry) -> Vec<f64> {
    let g = fluid.u.grid;
    let (nx, ny, hy) = (g.nx, g.ny, g.hy);
    let p = boundary_trace(&fluid.p, Side::Top);
    let f11 = boundary_trace(&ScalarField { grid: g, data: t.t11.clone() }, Side::Top);
    let f12 = boundary_trace(&ScalarField { grid: g, data: t.t12.clone() }, Side::Top);
    let f22 = boundary_trace(&ScalarField { grid: g, data: t.t22.clone() }, Side::Top);
    let top: Vec<f64> = (0..nx).map(|i| fluid.u.v[ny * nx + i]).collect();
    let dtop = derivative_at_nodes(&top, 1);
    (0..nx)
        .map(|i| {
            let ip = g.ip(i);
            let col = |j: usize| 0.5 * (fluid.u.u[j * nx + i] + fluid.u.u[j * nx + ip]);
            let d2u1 = -(3.0 * col(ny - 1) - col(ny - 2) / 3.0) / hy;
            let v = |j: usize| fluid.u.v[j * nx + i];
            let d2u2 = (3.0 * v(ny) - 4.0 * v(ny - 1) + v(ny - 2)) / (2.0 * hy);
            let a = geo.wall_slope[i];
            let g21 = dtop[i] - a * d2u2;
            let g12 = d2u1;
            let g22 = d2u2;
            let s21 = g21 + g12 + f12[i];
            let s22 = 2.0 * g22 - p[i] + 0.5 * (f22[i] - f11[i]);
            a * s21 - s22
        })
        .collect()
}

/// Initial state from the configuration.
pub fn initial_state(cfg: &SimConfig) -> Result<State> {
    cfg.validate()?;
    let geom = cfg.geometry()?;
    if geom.instance != Instance::PeriodicChannel {
        return Err(invalid("coupled runs require the channel instance"));
    }
    let grid = cfg.grid()?;
    let n = grid.nx;
    let ic = &cfg.initial;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise: Vec<(f64, f64)> = (1..=4)
        .map(|_| (ic.eta0_noise * rng.gen_range(-1.0..1.0), rng.gen_range(0.0..2.0 * PI)))
        .collect();
    let m = ic.eta0_mode as f64;
    let structure = StructureState::from_fn(
        n,
        |x| {
            let base = ic.eta0_amplitude * (2.0 * PI * m * x).sin();
            let extra: f64 =
                noise.iter().enumerate().map(|(k, (a, ph))| a * (2.0 * PI * (k + 1) as f64 * x + ph).sin()).sum();
            base + extra
        },
        |x| ic.eta_star_amplitude * (2.0 * PI * m * x).cos(),
    );
    let geo = ChannelGeometry::new(&grid, geom, cfg.cutoff(), &structure)?;
    let mut u = VectorField::zeros(grid);
    for i in 0..n {
        u.v[grid.ny * n + i] = geo.wall_velocity[i];
    }
    let (u, _) = crate::fluid::pressure_projection(&u, &geo)?;
    let rho = ScalarField::from_fn(grid, |x, y| {
        ic.rho0 + ic.rho0_amplitude * (2.0 * PI * x).cos() * (PI * y).cos()
    });
    let shape = SymMat2::IDENTITY.add(&ANISOTROPY.scale(ic.t0_anisotropy));
    let mut t = SymTensorField::zeros(grid);
    for c in 0..grid.n_cells() {
        t.set(c, shape.scale(rho.data[c]));
    }
    let fluid = FluidState { u, p: ScalarField::zeros(grid), dudt: VectorField::zeros(grid) };
    Ok(State { time: 0.0, structure, fluid, solute: SoluteState { rho, t } })
}

/// Per-step quantities needed for cumulative diagnostics.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepRates {
    pub viscous: f64,
    pub gamma: f64,
    pub eps: f64,
    pub stress_sq: f64,
}

/// Static pieces of a run.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub cfg: SimConfig,
    pub geom: ReferenceGeometry,
    pub cutoff: CutoffProfile,
    pub grid: Grid2,
    pub solute_opts: SoluteOptions,
}

impl Stepper {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let geom = cfg.geometry()?;
        if geom.instance != Instance::PeriodicChannel {
            return Err(invalid("coupled runs require the channel instance"));
        }
        Ok(Self {
            cfg: cfg.clone(),
            geom,
            cutoff: cfg.cutoff(),
            grid: cfg.grid()?,
            solute_opts: SoluteOptions { scheme: cfg.advection()? },
        })
    }

    pub fn geometry_of(&self, s: &StructureState) -> Result<ChannelGeometry> {
        ChannelGeometry::new(&self.grid, self.geom, self.cutoff, s)
    }

    /// One coupled step of length `dt`.
    pub fn step(&self, state: &State, dt: f64) -> Result<State> {
        let cfg = &self.cfg;
        let geo_old = self.geometry_of(&state.structure)?;
        let t_old = &state.solute.t;
        let mut forcing = traction(&state.fluid, t_old, &geo_old);
        let mut structure;
        let mut geo;
        let mut fluid;
        let mut iter = 0;
        loop {
            structure = structure_step(&state.structure, &forcing, dt, cfg.physics.gamma);
            let max_abs = structure.max_abs_eta();
            let limit = WALL_CONTACT_FRACTION * cfg.physics.width;
            if max_abs >= limit {
                return Err(Error::WallContact { max_abs, limit });
            }
            geo = self.geometry_of(&structure)?;
            fluid = fluid_step(&state.fluid, t_old, &geo, dt, None, FluidOptions::default())?;
            iter += 1;
            if iter >= cfg.time.subiterations {
                break;
            }
            forcing = traction(&fluid, t_old, &geo);
        }
        let tr = Transport::channel(&fluid.u, &geo_old, &geo);
        let grad = physical_gradient_cells(&fluid.u, &geo);
        let solute = solute_step(
            &state.solute,
            &tr,
            &grad,
            Diffusion::Channel(&geo),
            cfg.physics.eps,
            dt,
            self.solute_opts,
        )?;
        Ok(State { time: state.time + dt, structure, fluid, solute })
    }

    /// Dissipation rates at a state.
    pub fn rates(&self, state: &State) -> Result<StepRates> {
        let geo = self.geometry_of(&state.structure)?;
        let e = energy(state, &geo, self.cfg.physics.eps)?;
        Ok(StepRates {
            viscous: e.viscous_rate,
            gamma: structure_dissipation_rate(&state.structure, self.cfg.physics.gamma),
            eps: e.eps_rate,
            stress_sq: e.stress_l2,
        })
    }
}

/// One row of the time series.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRow {
    pub step: usize,
    pub energy: EnergyBreakdown,
    /// `int rho J`.
    pub mass: f64,
    pub max_abs_eta: f64,
    /// Cumulative `int |T|^2`.
    pub stress_relaxation_cum: f64,
}

/// Stored state at a snapshot time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub state: State,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: SimConfig,
    pub rows: Vec<DiagnosticsRow>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: State,
    /// Set when the run stopped early.
    pub failure: Option<Error>,
    pub wall_clock_seconds: f64,
    pub spd_violations: usize,
}

fn cumulative_row(
    stepper: &Stepper,
    state: &State,
    step: usize,
    cum: &StepRates,
) -> Result<DiagnosticsRow> {
    let geo = stepper.geometry_of(&state.structure)?;
    let mut e = energy(state, &geo, stepper.cfg.physics.eps)?;
    e.viscous_dissipation_cum = cum.viscous;
    e.gamma_dissipation_cum = cum.gamma;
    e.eps_dissipation_cum = cum.eps;
    let vol = crate::solute::channel_volumes(&geo);
    let mass = state.solute.rho.data.iter().zip(&vol).map(|(a, b)| a * b).sum();
    Ok(DiagnosticsRow {
        step,
        energy: e,
        mass,
        max_abs_eta: state.structure.max_abs_eta(),
        stress_relaxation_cum: cum.stress_sq,
    })
}

/// Runs to `t_final`, recording diagnostics and snapshots.
pub fn run(cfg: &SimConfig) -> Result<RunOutput> {
    let start = Instant::now();
    let stepper = Stepper::new(cfg)?;
    let mut state = initial_state(cfg)?;
    let steps = cfg.steps();
    let dt = cfg.time.dt;
    let mut cum = StepRates::default();
    let mut rows = vec![cumulative_row(&stepper, &state, 0, &cum)?];
    let mut snapshots = Vec::new();
    if cfg.output.snapshot_every > 0 {
        snapshots.push(Snapshot { step: 0, state: state.clone() });
    }
    let mut failure = None;
    let mut spd_violations = 0;
    for n in 1..=steps {
        let h = dt.min(cfg.time.t_final - state.time).max(0.0);
        let h = if n == steps { h } else { dt };
        let next = match stepper.step(&state, h) {
            Ok(s) => s,
            Err(e) => {
                failure = Some(e);
                break;
            }
        };
        let r = stepper.rates(&next)?;
        cum.viscous += h * r.viscous;
        cum.gamma += h * r.gamma;
        cum.eps += h * r.eps;
        cum.stress_sq += h * r.stress_sq;
        if !next.solute.t.is_spd() {
            spd_violations += 1;
        }
        state = next;
        if n % cfg.output.every == 0 || n == steps {
            rows.push(cumulative_row(&stepper, &state, n, &cum)?);
        }
        if cfg.output.snapshot_every > 0 && (n % cfg.output.snapshot_every == 0 || n == steps) {
            snapshots.push(Snapshot { step: n, state: state.clone() });
        }
    }
    Ok(RunOutput {
        config: cfg.clone(),
        rows,
        snapshots,
        final_state: state,
        failure,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        spd_violations,
    })
}

/// Result of an `eps` sweep.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub eps_list: Vec<f64>,
    pub reference: RunOutput,
    /// One entry per `eps`, in the order of `eps_list`.
    pub runs: Vec<Result<RunOutput>>,
    pub series: Vec<Result<RelEnergySeries>>,
    /// Largest `eps` rerun at half resolution, with its distance series
    /// against a half-resolution reference.
    pub control: Option<Result<RelEnergySeries>>,
}

fn with_eps(base: &SimConfig, eps: f64) -> SimConfig {
    let mut c = base.clone();
    c.physics.eps = eps;
    if c.output.snapshot_every == 0 {
        c.output.snapshot_every = c.output.every;
    }
    c
}

fn halved(base: &SimConfig) -> SimConfig {
    let mut c = base.clone();
    c.grid.nx /= 2;
    c.grid.ny /= 2;
    c.grid.ny_s = None;
    c
}

/// Runs the `eps = 0` reference and every member of `eps_list` concurrently,
/// then compares each member against the reference.
pub fn sweep(base: &SimConfig, eps_list: &[f64]) -> Result<SweepOutput> {
    let mut check = base.clone();
    check.sweep.eps_list = eps_list.to_vec();
    check.validate()?;
    if eps_list.is_empty() {
        return Err(invalid("sweep needs at least one eps"));
    }
    let mut jobs: Vec<SimConfig> = vec![with_eps(base, 0.0)];
    jobs.extend(eps_list.iter().map(|&e| with_eps(base, e)));
    let control = base.sweep.control && base.grid.nx >= 16 && base.grid.ny >= 16;
    if control {
        jobs.push(halved(&with_eps(base, 0.0)));
        jobs.push(halved(&with_eps(base, eps_list[0])));
    }
    let mut results: Vec<Result<RunOutput>> = jobs.par_iter().map(run).collect();
    let control_pair = if control {
        let b = results.pop().expect("control run");
        let a = results.pop().expect("control reference");
        Some((a, b))
    } else {
        None
    };
    let reference = results.remove(0)?;
    if let Some(e) = &reference.failure {
        return Err(e.clone());
    }
    let compare = |r: &Result<RunOutput>, reference: &RunOutput| -> Result<RelEnergySeries> {
        let r = r.as_ref().map_err(|e| e.clone())?;
        if let Some(e) = &r.failure {
            return Err(e.clone());
        }
        crate::diagnostics::relative_energy_series(r, reference)
    };
    let series: Vec<Result<RelEnergySeries>> = results.par_iter().map(|r| compare(r, &reference)).collect();
    let control = control_pair.map(|(a, b)| {
        let a = a?;
        compare(&b, &a)
    });
    Ok(SweepOutput { eps_list: eps_list.to_vec(), reference, runs: results, series, control })
}
