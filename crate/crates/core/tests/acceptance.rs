//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use oldroyd_fsi::coupled::{run, sweep, SimConfig};
use oldroyd_fsi::fields::{Grid2, ScalarField, StructureState, SymTensorField, VectorField};
use oldroyd_fsi::fluid::{fluid_step, ChannelGeometry, FluidOptions, FluidState};
use oldroyd_fsi::fp_oracle::{closure_series, QGrid};
use oldroyd_fsi::geometry::{CutoffProfile, Hanzawa, ReferenceGeometry};
use oldroyd_fsi::io::{read_snapshot, state_snapshot, timeseries_table, write_snapshot};
use oldroyd_fsi::solute::{rigid_rotation, rigid_rotation_gradient, solute_step, Diffusion, SoluteOptions, SoluteState, Transport};
use oldroyd_fsi::tensor::{corotational_contraction, Mat2, PowerBase, SymMat2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;

type M = [[f64; 2]; 2];

fn mul(a: M, b: M) -> M {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

fn frob(a: M) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Least squares slope, intercept and r^2 of `y` against `x`.
fn linfit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|a| (a - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxy / sxx, my - sxy / sxx * mx, sxy * sxy / (sxx * syy))
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn c1_corotational() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0_f64;
    let mut oracle_worst = 0.0_f64;
    for _ in 0..10_000 {
        let mut r = || rng.gen_range(-2.0..2.0);
        let g: M = [[r(), r()], [r(), r()]];
        let z: M = [[r(), r()], [r(), r()]];
        let w: M = [[0.0, 0.5 * (g[0][1] - g[1][0])], [0.5 * (g[1][0] - g[0][1]), 0.0]];
        let gm = Mat2(g);
        let zm = Mat2(z);
        for n in 1..=4u32 {
            for (base, y) in [(PowerBase::Z, z), (PowerBase::ZTransposed, [[z[0][0], z[1][0]], [z[0][1], z[1][1]]])] {
                let scale = frob(w) * frob(z).powi(n as i32 + 1);
                let c = corotational_contraction(&gm, &zm, n, base).abs();
                worst = worst.max(c / scale);
                // independent evaluation: W Z : Y^n - Z W : Y^n with A : B = tr(A B)
                let mut yn = y;
                for _ in 1..n {
                    yn = mul(yn, y);
                }
                let a = mul(w, z);
                let b = mul(z, w);
                let s: f64 = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| (a[i][j] - b[i][j]) * yn[j][i]).sum();
                oracle_worst = oracle_worst.max(s.abs() / scale);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-12 && oracle_worst <= 1e-12 && secs < 1.0,
        format!("max |contraction|/(|W||Z|^(n+1)) = {worst:.2e} (oracle {oracle_worst:.2e}), {secs:.3}s"),
    )
}

fn c2_closure() -> Outcome {
    let start = Instant::now();
    let grid = QGrid::new(128, 6.0).unwrap();
    let t0 = SymMat2::new(2.0, 0.3, 1.0);
    let mut worst = 0.0_f64;
    for theta in [1.0, -1.0] {
        let w = Mat2::rotation_generator(theta);
        let series = closure_series(&w, 1.0, &t0, 1.0, 0.002, &grid).unwrap();
        for s in &series {
            // exp(tW) for W = theta [[0,1],[-1,0]] is a rotation by -theta t
            let (sn, cs) = (theta * s.t).sin_cos();
            let r: M = [[cs, sn], [-sn, cs]];
            let rt: M = [[cs, -sn], [sn, cs]];
            let rot = mul(mul(r, [[t0.t11, t0.t12], [t0.t12, t0.t22]]), rt);
            let d = (-2.0 * s.t).exp();
            let exact = [[d * rot[0][0] + (1.0 - d), d * rot[0][1]], [d * rot[1][0], d * rot[1][1] + (1.0 - d)]];
            let diff = [
                [s.meso.t11 - exact[0][0], s.meso.t12 - exact[0][1]],
                [s.meso.t12 - exact[1][0], s.meso.t22 - exact[1][1]],
            ];
            worst = worst.max(frob(diff) / frob(exact));
        }
    }
    let relax = closure_series(&Mat2::ZERO, 1.0, &SymMat2::new(2.0, 0.0, 1.0), 1.0, 0.002, &grid).unwrap();
    let (t, l): (Vec<f64>, Vec<f64>) = relax
        .iter()
        .filter(|s| s.t > 0.0)
        .map(|s| (s.t, (0.5 * (s.meso.t11 - s.meso.t22)).hypot(s.meso.t12).ln()))
        .unzip();
    let lambda = -linfit(&t, &l).0;
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-2 && (lambda - 2.0).abs() <= 0.05 && secs < 120.0,
        format!("stress residual {worst:.2e}, relaxation rate {lambda:.4}, {secs:.1}s"),
    )
}

struct RotationRun {
    drift: [f64; 3],
    lq_excess: [f64; 2],
    spd_every_step: bool,
}

fn rotation_run(n: usize) -> RotationRun {
    let g = Grid2::polar_disk(n, n).unwrap();
    let rho0 = |th: f64, r: f64| 1.0 + 0.8 * r * th.cos() * (1.0 - 0.5 * r * r);
    let rho = ScalarField::from_fn(g, rho0);
    let t = SymTensorField::from_fn(g, |th, r| {
        let p = rho0(th, r);
        SymMat2::new(1.5 * p, 0.3 * p, 0.8 * p)
    });
    let mut s = SoluteState { rho, t };
    let omega = 2.0 * PI;
    let tr = Transport::polar(&rigid_rotation(g, omega));
    let grad = rigid_rotation_gradient(&g, omega);
    // cell areas of the polar grid, computed from the annulus formula
    let w: Vec<f64> = (0..g.n_cells())
        .map(|c| {
            let j = (c / n) as f64;
            0.5 * g.hx * (((j + 1.0) * g.hy).powi(2) - (j * g.hy).powi(2))
        })
        .collect();
    let lp = |f: &[f64], p: f64| f.iter().zip(&w).map(|(v, a)| v.abs().powf(p) * a).sum::<f64>().powf(1.0 / p);
    let schatten = |t: &SymTensorField, q: f64| {
        (0..g.n_cells())
            .map(|c| {
                let m = t.get(c);
                let mean = 0.5 * (m.t11 + m.t22);
                let rad = (0.25 * (m.t11 - m.t22).powi(2) + m.t12 * m.t12).sqrt();
                ((mean + rad).abs().powf(q) + (mean - rad).abs().powf(q)) * w[c]
            })
            .sum::<f64>()
    };
    let ps = [1.0, 2.0, 4.0];
    let n0: Vec<f64> = ps.iter().map(|&p| lp(&s.rho.data, p)).collect();
    let qs = [2.0, 4.0];
    let t0q: Vec<f64> = qs.iter().map(|&q| schatten(&s.t, q)).collect();
    let rho_iq: Vec<f64> = qs.iter().map(|&q| 2.0 * lp(&s.rho.data, q).powf(q)).collect();
    let steps = 2 * n;
    let dt = 1.0 / steps as f64;
    let mut cum = [0.0; 2];
    let mut excess = [f64::NEG_INFINITY; 2];
    let mut spd = true;
    for k in 1..=steps {
        s = solute_step(&s, &tr, &grad, Diffusion::Polar, 0.0, dt, SoluteOptions::default()).unwrap();
        spd &= (0..g.n_cells()).all(|c| {
            let m = s.t.get(c);
            m.t11 > 0.0 && m.t11 * m.t22 - m.t12 * m.t12 > 0.0
        });
        let t = k as f64 * dt;
        for (m, &q) in qs.iter().enumerate() {
            let v = schatten(&s.t, q);
            cum[m] += dt * v;
            let rhs = 2.0 * t * rho_iq[m] + t0q[m];
            excess[m] = excess[m].max((v + 2.0 * cum[m] - rhs) / rhs);
        }
    }
    let n1: Vec<f64> = ps.iter().map(|&p| lp(&s.rho.data, p)).collect();
    let mut drift = [0.0; 3];
    for i in 0..3 {
        drift[i] = (n1[i] - n0[i]).abs() / n0[i];
    }
    RotationRun { drift, lq_excess: excess, spd_every_step: spd }
}

fn c3_c4_lp(spd_log: &mut Vec<(String, bool)>) -> (Outcome, Outcome) {
    let start = Instant::now();
    let coarse = rotation_run(64);
    let fine = rotation_run(128);
    spd_log.push(("disk rotation 64^2".into(), coarse.spd_every_step));
    spd_log.push(("disk rotation 128^2".into(), fine.spd_every_step));
    let mut ok3 = fine.drift.iter().all(|d| *d <= 0.05);
    let mut orders = Vec::new();
    for i in 0..3 {
        if fine.drift[i] <= 1e-12 && coarse.drift[i] <= 1e-12 {
            // conserved to round-off on both grids
            orders.push(f64::INFINITY);
            continue;
        }
        let o = (coarse.drift[i] / fine.drift[i]).log2();
        ok3 &= o >= 0.8;
        orders.push(o);
    }
    let secs = start.elapsed().as_secs_f64();
    ok3 &= secs < 300.0;
    let c3 = outcome(
        ok3,
        format!(
            "drift p=1,2,4 at 128^2: {:.2e}, {:.2e}, {:.2e}; orders {:.2}, {:.2}, {:.2} ({:.1}s)",
            fine.drift[0], fine.drift[1], fine.drift[2], orders[0], orders[1], orders[2], secs
        ),
    );
    let ok4 = fine.lq_excess.iter().all(|e| *e <= 0.01);
    let c4 = outcome(
        ok4,
        format!("max (lhs - rhs)/rhs: q=2 {:.2e}, q=4 {:.2e}", fine.lq_excess[0], fine.lq_excess[1]),
    );
    (c3, c4)
}

fn energy_config() -> SimConfig {
    let mut c = SimConfig::default();
    c.grid.nx = 64;
    c.grid.ny = 64;
    c.time.dt = 1e-3;
    c.time.t_final = 1.0;
    c.initial.eta0_amplitude = 0.05;
    c.initial.eta0_mode = 1;
    c.initial.rho0 = 1.0;
    c.output.every = 1;
    c
}

fn c6_energy(spd_log: &mut Vec<(String, bool)>) -> Outcome {
    let start = Instant::now();
    let cfg = energy_config();
    let out = run(&cfg).unwrap();
    spd_log.push(("coupled energy run".into(), out.spd_violations == 0 && out.final_state.solute.t.is_spd()));
    let e0 = out.rows[0].energy;
    let total0 = e0.mechanical() + e0.stress_l2;
    // |rho0 I|^2 = 2 int rho0^2
    let rho_i = 2.0 * e0.rho_l2;
    let mut worst = f64::NEG_INFINITY;
    for r in &out.rows {
        let t = r.step as f64 * cfg.time.dt;
        let e = r.energy;
        let lhs = e.mechanical()
            + e.stress_l2
            + e.viscous_dissipation_cum
            + e.gamma_dissipation_cum
            + e.eps_dissipation_cum
            + r.stress_relaxation_cum;
        let rhs = total0 + t * rho_i;
        worst = worst.max(lhs - rhs);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        out.failure.is_none() && worst <= 1e-4 * total0 && secs < 600.0,
        format!("max violation {:.2e} (limit {:.2e}), {:.1}s", worst, 1e-4 * total0, secs),
    )
}

fn sweep_config() -> SimConfig {
    let mut c = SimConfig::default();
    c.grid.nx = 64;
    c.grid.ny = 64;
    c.time.dt = 1e-3;
    c.time.t_final = 0.5;
    c.initial.eta0_amplitude = 0.02;
    c.initial.rho0 = 1.0;
    c.initial.rho0_amplitude = 0.5;
    c.initial.t0_anisotropy = 0.5;
    c.output.every = 10;
    c.output.snapshot_every = 10;
    c.sweep.control = true;
    c
}

fn c7_sweep(spd_log: &mut Vec<(String, bool)>) -> Outcome {
    let start = Instant::now();
    let cfg = sweep_config();
    let eps = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
    let res = sweep(&cfg, &eps).unwrap();
    spd_log.push(("sweep eps = 0 reference".into(), res.reference.spd_violations == 0));
    let d: Vec<f64> = res.series.iter().map(|s| s.as_ref().unwrap().distance()).collect();
    let decreasing = d.windows(2).all(|w| w[1] < w[0]);
    let lx: Vec<f64> = eps[2..].iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = d[2..].iter().map(|v| v.ln()).collect();
    let (slope, _, r2) = linfit(&lx, &ly);
    let control = res.control.as_ref().unwrap().as_ref().unwrap().distance();
    let shift = (control - d[0]).abs() / d[0];
    let secs = start.elapsed().as_secs_f64();
    outcome(
        decreasing && (1.7..=2.3).contains(&slope) && r2 >= 0.98 && shift < 0.2 && secs < 1800.0,
        format!(
            "D = {:?}; slope {slope:.3}, r^2 {r2:.4}, control shift {:.1}%, {secs:.1}s",
            d.iter().map(|v| format!("{v:.3e}")).collect::<Vec<_>>(),
            100.0 * shift
        ),
    )
}

fn c8_geometry() -> Outcome {
    let start = Instant::now();
    let geom = ReferenceGeometry::channel(0.3).unwrap();
    let cutoff = CutoffProfile::for_width(0.3);
    let s = StructureState::from_fn(
        32,
        |x| 0.15 * (2.0 * PI * x).sin() + 0.05 * (6.0 * PI * x).cos() - 0.02 * (10.0 * PI * x).sin(),
        |x| 0.4 * (2.0 * PI * x).cos(),
    );
    let map = Hanzawa::new(geom, cutoff, &s).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut rt = 0.0_f64;
    let mut min_j = f64::INFINITY;
    let mut fd_ratio = f64::INFINITY;
    for k in 0..10_000 {
        let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
        let z = map.forward(x);
        let back = map.inverse(z).unwrap();
        rt = rt.max((back[0] - x[0]).abs().max((back[1] - x[1]).abs()));
        let tens = map.tensors_at(x);
        min_j = min_j.min(tens.j);
        if k % 100 == 0 && x[1] > 0.05 && x[1] < 0.95 {
            let fd = |h: f64| {
                let mut e = 0.0_f64;
                for col in 0..2 {
                    let mut p = x;
                    let mut m = x;
                    p[col] += h;
                    m[col] -= h;
                    let (fp, fm) = (map.forward(p), map.forward(m));
                    for row in 0..2 {
                        let d = (fp[row] - fm[row]) / (2.0 * h);
                        e = e.max((d - tens.grad_psi.get(row, col)).abs());
                    }
                }
                e
            };
            let (e1, e2) = (fd(1e-2), fd(5e-3));
            if e1 > 1e-11 {
                fd_ratio = fd_ratio.min(e1 / e2);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    // halving h must cut the error by about four
    outcome(
        rt <= 1e-10 && min_j > 0.0 && fd_ratio >= 3.5 && secs < 10.0,
        format!("round trip {rt:.2e}, min J {min_j:.3}, worst FD error ratio {fd_ratio:.2}, {secs:.2}s"),
    )
}

fn mms_error(n: usize) -> f64 {
    // velocity from the stream function sin(2 pi x) y^2 (1 - y)^2,
    // modified pressure cos(2 pi x) sin(pi y), deviatoric stress
    // tau = 0.3 cos(2 pi x) y^2, T12 = 0.2 sin(2 pi x) sin(pi y)
    let k = 2.0 * PI;
    let psi_y = |y: f64| 2.0 * y * (1.0 - y) * (1.0 - 2.0 * y);
    let psi_yy = |y: f64| 2.0 - 12.0 * y + 12.0 * y * y;
    let psi_yyy = |y: f64| 24.0 * y - 12.0;
    let psi = |y: f64| (y * (1.0 - y)).powi(2);
    let grid = Grid2::unit_channel(n, n).unwrap();
    let geo = ChannelGeometry::flat(&grid);
    let force = VectorField::from_fn(
        grid,
        |x, y| {
            let lap = (k * x).sin() * (psi_yyy(y) - k * k * psi_y(y));
            let px = -k * (k * x).sin() * (PI * y).sin();
            let div_t = -0.3 * k * (k * x).sin() * y * y + 0.2 * PI * (k * x).sin() * (PI * y).cos();
            -lap + px - div_t
        },
        |x, y| {
            let lap = -k * (k * x).cos() * (psi_yy(y) - k * k * psi(y));
            let py = PI * (k * x).cos() * (PI * y).cos();
            let div_t = 0.2 * k * (k * x).cos() * (PI * y).sin() - 0.6 * (k * x).cos() * y;
            -lap + py - div_t
        },
    );
    let stress = SymTensorField::from_fn(grid, |x, y| {
        let tau = 0.3 * (k * x).cos() * y * y;
        SymMat2::new(3.0 + tau, 0.2 * (k * x).sin() * (PI * y).sin(), 3.0 - tau)
    });
    let mut st = FluidState::rest(grid);
    for _ in 0..500 {
        st = fluid_step(&st, &stress, &geo, 0.02, Some(&force), FluidOptions { convection: false }).unwrap();
    }
    let exact = VectorField::from_fn(grid, |x, y| (k * x).sin() * psi_y(y), |x, y| -k * (k * x).cos() * psi(y));
    let sq: f64 = st.u.u.iter().zip(&exact.u).chain(st.u.v.iter().zip(&exact.v)).map(|(a, b)| (a - b).powi(2)).sum();
    (sq * grid.hx * grid.hy).sqrt()
}

fn c9_mms() -> Outcome {
    let start = Instant::now();
    let e: Vec<f64> = [16, 32, 64].iter().map(|&n| mms_error(n)).collect();
    let o1 = (e[0] / e[1]).log2();
    let o2 = (e[1] / e[2]).log2();
    let secs = start.elapsed().as_secs_f64();
    outcome(
        o1 >= 1.9 && o2 >= 1.9 && secs < 300.0,
        format!("errors {:.2e}, {:.2e}, {:.2e}; orders {o1:.3}, {o2:.3}; {secs:.1}s", e[0], e[1], e[2]),
    )
}

fn c10_determinism(spd_log: &mut Vec<(String, bool)>) -> Outcome {
    let mut cfg = SimConfig::default();
    cfg.seed = 11;
    cfg.grid.nx = 32;
    cfg.grid.ny = 32;
    cfg.time.dt = 2e-3;
    cfg.time.t_final = 0.1;
    cfg.initial.eta0_amplitude = 0.03;
    cfg.initial.eta0_noise = 0.005;
    cfg.initial.eta_star_amplitude = 0.1;
    cfg.initial.rho0_amplitude = 0.4;
    cfg.initial.t0_anisotropy = 0.6;
    cfg.output.every = 5;
    let dir = tempfile::tempdir().unwrap();
    let mut csv = Vec::new();
    let mut bins = Vec::new();
    for k in 0..2 {
        let out = run(&cfg).unwrap();
        if k == 0 {
            spd_log.push(("determinism run".into(), out.spd_violations == 0));
        }
        csv.push(timeseries_table(&out.rows, cfg.time.dt).to_csv());
        let p = dir.path().join(format!("s{k}.bin"));
        let snap = state_snapshot(&out.final_state);
        write_snapshot(&p, &snap).unwrap();
        let back = read_snapshot(&p).unwrap();
        let exact = back.time.to_bits() == snap.time.to_bits()
            && back.fields.len() == snap.fields.len()
            && back.fields.iter().zip(&snap.fields).all(|(a, b)| {
                a.name == b.name
                    && a.location == b.location
                    && a.data.len() == b.data.len()
                    && a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits())
            });
        bins.push((std::fs::read(&p).unwrap(), exact));
    }
    let same_csv = csv[0] == csv[1];
    let same_bin = bins[0].0 == bins[1].0;
    let roundtrip = bins.iter().all(|b| b.1);
    outcome(
        same_csv && same_bin && roundtrip,
        format!("identical CSV {same_csv}, identical snapshot {same_bin}, bit-exact round trip {roundtrip}"),
    )
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    // cargo passes libtest flags such as --list; nothing to list here
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let mut spd_log = Vec::new();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("1 corotational identity", c1_corotational()));
    results.push(("2 closure oracle", c2_closure()));
    let (c3, c4) = c3_c4_lp(&mut spd_log);
    results.push(("3 Lp conservation", c3));
    results.push(("4 Lq stress dissipation", c4));
    let c6 = c6_energy(&mut spd_log);
    let c7 = c7_sweep(&mut spd_log);
    let c8 = c8_geometry();
    let c9 = c9_mms();
    let c10 = c10_determinism(&mut spd_log);
    let spd_ok = spd_log.iter().all(|(_, ok)| *ok);
    let spd_detail = spd_log.iter().map(|(n, ok)| format!("{n}: {ok}")).collect::<Vec<_>>().join(", ");
    results.push(("5 SPD preservation", outcome(spd_ok, spd_detail)));
    results.push(("6 coupled energy inequality", c6));
    results.push(("7 vanishing-eps rate", c7));
    results.push(("8 geometry", c8));
    results.push(("9 MMS order", c9));
    results.push(("10 determinism and I/O", c10));
    results.sort_by_key(|(n, _)| n.split(' ').next().unwrap().parse::<u32>().unwrap());
    let mut failed = 0;
    for (name, o) in &results {
        println!("{} criterion {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
        if !o.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {} failed", results.len() - failed, failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
