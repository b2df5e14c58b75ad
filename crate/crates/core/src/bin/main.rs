use clap::{Parser, Subcommand};
use oldroyd_fsi::coupled::{run, sweep, RunOutput, SimConfig};
use oldroyd_fsi::diagnostics::{energy_violation, fit_rate};
use oldroyd_fsi::fp_oracle::{closure_series, relaxation_rate, QGrid};
use oldroyd_fsi::io::{read_config, render_config, state_snapshot, timeseries_table, write_atomic, write_snapshot, Table};
use oldroyd_fsi::tensor::{Mat2, SymMat2};
use oldroyd_fsi::{verify, Error, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "oldroyd-fsi", version, about = "Corotational Oldroyd-B fluid coupled to a viscoelastic shell")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Overrides the seed from the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Single coupled run.
    Run { config: PathBuf },
    /// eps sweep against the eps = 0 limit.
    Sweep { config: PathBuf },
    /// Fokker-Planck closure check.
    FpOracle { config: PathBuf },
    /// Built-in invariant checks.
    Verify,
}

struct Ctx {
    out: PathBuf,
    seed: Option<u64>,
    quiet: bool,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn load(&self, path: &Path) -> Result<SimConfig> {
        let mut cfg = read_config(path)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        Ok(cfg)
    }
}

fn write_run(ctx: &Ctx, out: &RunOutput, stem: &str) -> Result<()> {
    let mut table = timeseries_table(&out.rows, out.config.time.dt);
    if let Some(e) = &out.failure {
        table.notes.push(format!("truncated: {e}"));
    }
    table.write(&ctx.out.join(format!("{stem}.csv")))?;
    for s in &out.snapshots {
        write_snapshot(&ctx.out.join(format!("{stem}_{:06}.bin", s.step)), &state_snapshot(&s.state))?;
    }
    write_snapshot(&ctx.out.join(format!("{stem}_final.bin")), &state_snapshot(&out.final_state))
}

fn cmd_run(ctx: &Ctx, path: &Path) -> Result<()> {
    let cfg = ctx.load(path)?;
    write_atomic(&ctx.out.join("config.toml"), render_config(&cfg)?.as_bytes())?;
    let out = run(&cfg)?;
    write_run(ctx, &out, "timeseries")?;
    let e0 = out.rows[0].energy.total();
    ctx.say(format!(
        "steps {} | energy {:.6e} -> {:.6e} | inequality excess {:.3e} | {:.2}s",
        out.rows.last().map_or(0, |r| r.step),
        e0,
        out.rows.last().map_or(e0, |r| r.energy.total()),
        energy_violation(&out),
        out.wall_clock_seconds
    ));
    match out.failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn cmd_sweep(ctx: &Ctx, path: &Path) -> Result<()> {
    let cfg = ctx.load(path)?;
    write_atomic(&ctx.out.join("config.toml"), render_config(&cfg)?.as_bytes())?;
    let res = sweep(&cfg, &cfg.sweep.eps_list)?;
    let mut table = Table::new(&[
        "eps[1]",
        "distance[energy]",
        "sup_structure[energy]",
        "sup_velocity[energy]",
        "sup_rho[mass^2]",
        "sup_stress[energy]",
        "cumulative[energy]",
    ]);
    let mut failure = None;
    let mut eps_ok = Vec::new();
    let mut d_ok = Vec::new();
    for (eps, s) in res.eps_list.iter().zip(&res.series) {
        match s {
            Ok(s) => {
                let sup = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
                let d = s.distance();
                table.push(vec![
                    *eps,
                    d,
                    sup(&s.structure),
                    sup(&s.velocity),
                    sup(&s.rho),
                    sup(&s.stress),
                    s.cumulative.last().copied().unwrap_or(0.0),
                ]);
                eps_ok.push(*eps);
                d_ok.push(d);
                ctx.say(format!("eps {eps:.3e}  D {d:.6e}"));
            }
            Err(e) => {
                table.notes.push(format!("eps {eps}: {e}"));
                failure.get_or_insert(e.clone());
            }
        }
    }
    if let Some(Ok(c)) = &res.control {
        table.notes.push(format!("control half-resolution distance at eps {}: {}", res.eps_list[0], c.distance()));
    }
    table.write(&ctx.out.join("sweep.csv"))?;
    let mut fits = Table::new(&["points[count]", "slope[1]", "intercept[1]", "r_squared[1]"]);
    let k = eps_ok.len();
    for m in [k.min(3), k] {
        if let Ok(f) = fit_rate(&eps_ok[k - m..], &d_ok[k - m..]) {
            fits.push(vec![m as f64, f.slope, f.intercept, f.r_squared]);
            ctx.say(format!("fit over {m} smallest eps: slope {:.4}, r^2 {:.5}", f.slope, f.r_squared));
        }
    }
    fits.write(&ctx.out.join("sweep_fit.csv"))?;
    write_run(ctx, &res.reference, "reference")?;
    for (i, r) in res.runs.iter().enumerate() {
        if let Ok(r) = r {
            let mut t = timeseries_table(&r.rows, r.config.time.dt);
            if let Some(e) = &r.failure {
                t.notes.push(format!("truncated: {e}"));
            }
            t.write(&ctx.out.join(format!("eps_{i}.csv")))?;
        }
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn cmd_oracle(ctx: &Ctx, path: &Path) -> Result<()> {
    let cfg = ctx.load(path)?;
    let o = &cfg.oracle;
    let grid = QGrid::new(o.nq, o.q_max)?;
    let t0 = SymMat2::new(o.t0[0], o.t0[1], o.t0[2]);
    let w = Mat2::rotation_generator(o.theta);
    let series = closure_series(&w, o.rho0, &t0, o.t_end, o.dt, &grid)?;
    let mut table = Table::new(&[
        "t[time]",
        "rho[mass]",
        "meso_t11[stress]",
        "meso_t12[stress]",
        "meso_t22[stress]",
        "macro_t11[stress]",
        "macro_t12[stress]",
        "macro_t22[stress]",
        "relative_error[1]",
    ]);
    for s in &series {
        table.push(vec![
            s.t,
            s.rho,
            s.meso.t11,
            s.meso.t12,
            s.meso.t22,
            s.macro_.t11,
            s.macro_.t12,
            s.macro_.t22,
            s.relative_error(),
        ]);
    }
    let residual = series.iter().map(|s| s.relative_error()).fold(0.0, f64::max);
    let relax = closure_series(&Mat2::ZERO, o.rho0, &t0, o.t_end, o.dt, &grid)?;
    let lambda = relaxation_rate(&relax)?;
    table.notes.push(format!("residual {residual}"));
    table.notes.push(format!("relaxation rate {lambda}"));
    table.write(&ctx.out.join("closure.csv"))?;
    ctx.say(format!("closure residual {residual:.3e}, relaxation rate {lambda:.4}"));
    Ok(())
}

fn cmd_verify(ctx: &Ctx) -> Result<()> {
    let results = verify::run_all(ctx.seed.unwrap_or(0));
    let mut ok = true;
    for r in &results {
        ok &= r.passed;
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    if ok {
        Ok(())
    } else {
        Err(Error::CheckFailed("invariant checks failed".into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = Ctx { out: cli.out, seed: cli.seed, quiet: cli.quiet };
    if let Err(e) = std::fs::create_dir_all(&ctx.out) {
        eprintln!("error: cannot create {}: {e}", ctx.out.display());
        return ExitCode::from(3);
    }
    let res = match &cli.command {
        Command::Run { config } => cmd_run(&ctx, config),
        Command::Sweep { config } => cmd_sweep(&ctx, config),
        Command::FpOracle { config } => cmd_oracle(&ctx, config),
        Command::Verify => cmd_verify(&ctx),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
