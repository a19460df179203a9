//! Subcommand execution and CSV/plot-data emission.
//!
//! Every CSV starts with one `#`-prefixed metadata line (the only
//! non-reproducible byte range: it carries a timestamp) followed by a header
//! row; reruns with identical config and seeds are byte-identical below the
//! first line.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};

use lossq::fluid::{regimes, solve, solve_mollified, FluidSolution};
use lossq::harness::{convergence_experiment, residual_moment_check};
use lossq::observables::align;
use lossq::simulator::{simulate, SimPath};

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Fluid,
    Compare,
    Blocked,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Fluid => "fluid",
            Self::Compare => "compare",
            Self::Blocked => "blocked",
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Also write gnuplot-ready two-column `.dat` files.
    pub emit_plot_data: bool,
}

/// Runs one subcommand, returning the files written.
pub fn run(cmd: Command, cfg: &RunConfig, opts: &RunOptions) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("cannot create output directory {}", cfg.out_dir.display()))?;
    let mut writer = Emitter::new(cfg, cmd);
    match cmd {
        Command::Simulate => simulate_cmd(cfg, opts, &mut writer)?,
        Command::Fluid => fluid_cmd(cfg, opts, &mut writer)?,
        Command::Compare => compare_cmd(cfg, opts, &mut writer)?,
        Command::Blocked => blocked_cmd(cfg, opts, &mut writer)?,
    }
    Ok(writer.written)
}

/// Collects rows into files under the output directory.
struct Emitter {
    out_dir: PathBuf,
    meta: String,
    written: Vec<PathBuf>,
}

impl Emitter {
    fn new(cfg: &RunConfig, cmd: Command) -> Self {
        let stamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or_default();
        Self {
            out_dir: cfg.out_dir.clone(),
            meta: format!(
                "# lossq {} command={} generated-unix={stamp}",
                env!("CARGO_PKG_VERSION"),
                cmd.name()
            ),
            written: Vec::new(),
        }
    }

    fn csv(&mut self, name: &str, header: &str, body: &str) -> Result<()> {
        let path = self.out_dir.join(name);
        let mut f = fs::File::create(&path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        writeln!(f, "{}", self.meta)?;
        writeln!(f, "{header}")?;
        f.write_all(body.as_bytes())?;
        self.written.push(path);
        Ok(())
    }

    /// Two-column gnuplot data, no metadata line.
    fn dat(&mut self, name: &str, series: impl Iterator<Item = (f64, f64)>) -> Result<()> {
        let path = self.out_dir.join(name);
        let mut body = String::new();
        for (t, v) in series {
            writeln!(body, "{t} {v}").unwrap();
        }
        fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(path);
        Ok(())
    }
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Uniform mesh covering `[0, T]` with the solver step.
fn summary_mesh(horizon: f64, h: f64) -> Vec<f64> {
    let n = (horizon / h).round().max(1.0) as usize;
    (0..=n).map(|i| (horizon * i as f64 / n as f64).min(horizon)).collect()
}

fn simulate_cmd(cfg: &RunConfig, opts: &RunOptions, out: &mut Emitter) -> Result<()> {
    let mesh = summary_mesh(cfg.model.horizon, cfg.h);
    for &n in &cfg.n_list {
        let scaled = cfg.model.with_capacity(n);
        for rep in 0..cfg.reps {
            let seed = cfg.base_seed + rep as u64;
            let path = simulate(&scaled, seed);

            let mut body = String::new();
            for e in path.events() {
                writeln!(body, "{},{},{},{}", e.time, e.kind.as_str(), e.job_id, e.occupied_after)
                    .unwrap();
            }
            out.csv(
                &format!("events_n{n}_seed{seed}.csv"),
                "time,kind,job_id,occupied_count",
                &body,
            )?;

            let mut body = String::new();
            for &t in &mesh {
                writeln!(
                    body,
                    "{t},{},{},{}",
                    path.occupancy_at(t)?,
                    path.integrated(t)?,
                    path.blocked_fraction(t)?
                )
                .unwrap();
            }
            out.csv(&format!("path_n{n}_seed{seed}.csv"), "time,rho_n,theta_n,b_n", &body)?;

            if opts.emit_plot_data && rep == 0 {
                out.dat(
                    &format!("rho_n{n}.dat"),
                    mesh.iter().map(|&t| (t, path.occupancy_at(t).unwrap())),
                )?;
            }
        }
    }
    Ok(())
}

fn write_solution_csv(out: &mut Emitter, name: &str, sol: &FluidSolution) -> Result<()> {
    let mut body = String::new();
    let weights = sol.admission_weights();
    for k in 0..=sol.num_cells() {
        let t = sol.node_time(k);
        writeln!(
            body,
            "{t},{},{},{},{}",
            sol.rho_nodes()[k],
            weights[k.min(weights.len() - 1)],
            sol.integrated(t)?,
            sol.blocked(t)?
        )
        .unwrap();
    }
    out.csv(name, "time,rho,w,theta,b", &body)
}

fn fluid_cmd(cfg: &RunConfig, opts: &RunOptions, out: &mut Emitter) -> Result<()> {
    let sol = solve(&cfg.model, cfg.h)?;
    write_solution_csv(out, "solution.csv", &sol)?;

    let reg = regimes(&sol, cfg.tol_pin)?;
    let mut body = String::new();
    let mut k = 1;
    if reg.sigma0() > 0.0 {
        writeln!(body, "0,,{}", reg.sigma0()).unwrap();
    }
    for (tau, sigma) in reg.hitting_exit_pairs() {
        writeln!(body, "{k},{tau},{sigma}").unwrap();
        k += 1;
    }
    out.csv("regimes.csv", "k,tau_k,sigma_k", &body)?;

    if let Some(d) = cfg.mollifier_width {
        let moll = solve_mollified(&cfg.model, cfg.h, d)?;
        write_solution_csv(out, "solution_mollified.csv", &moll)?;
    }

    if opts.emit_plot_data {
        out.dat(
            "rho.dat",
            (0..=sol.num_cells()).map(|k| (sol.node_time(k), sol.rho_nodes()[k])),
        )?;
        out.dat(
            "b.dat",
            (0..=sol.num_cells()).map(|k| (sol.node_time(k), sol.blocked(sol.node_time(k)).unwrap())),
        )?;
    }
    Ok(())
}

fn compare_cmd(cfg: &RunConfig, opts: &RunOptions, out: &mut Emitter) -> Result<()> {
    let table = convergence_experiment(&cfg.model, &cfg.n_list, cfg.reps, cfg.base_seed)?;

    let mut body = String::new();
    for r in &table.rows {
        writeln!(
            body,
            "{},{},{},{},{},{}",
            r.n,
            r.seed,
            r.sup_err_rho,
            r.sup_err_theta,
            r.sup_err_b,
            opt_cell(r.max_residual_sq_over_bound)
        )
        .unwrap();
    }
    out.csv(
        "errors.csv",
        "n,seed,sup_err_rho,sup_err_theta,sup_err_b,max_residual_sq_over_bound",
        &body,
    )?;

    let mut body = String::new();
    for s in &table.summaries {
        writeln!(
            body,
            "{},{},{},{},{},{},{},{},{},{}",
            s.n,
            s.rho.q1,
            s.rho.median,
            s.rho.q3,
            s.theta.q1,
            s.theta.median,
            s.theta.q3,
            s.b.q1,
            s.b.median,
            s.b.q3
        )
        .unwrap();
    }
    out.csv(
        "error_summary.csv",
        "n,rho_q1,rho_median,rho_q3,theta_q1,theta_median,theta_q3,b_q1,b_median,b_q3",
        &body,
    )?;

    // Overlay of the first replication per server count.
    let sol = solve(&cfg.model, cfg.h)?;
    let mesh = summary_mesh(cfg.model.horizon, cfg.h);
    for &n in &cfg.n_list {
        let path = simulate(&cfg.model.with_capacity(n), cfg.base_seed);
        write_overlay(out, &format!("overlay_n{n}.csv"), &path, &sol, &mesh)?;
        if opts.emit_plot_data {
            out.dat(
                &format!("rho_n{n}.dat"),
                mesh.iter().map(|&t| (t, path.occupancy_at(t).unwrap())),
            )?;
        }
    }
    if opts.emit_plot_data {
        out.dat("rho_fluid.dat", mesh.iter().map(|&t| (t, sol.rho_at(t).unwrap())))?;
    }

    if cfg.model.r0 == 0.0 {
        let n = *cfg.n_list.last().unwrap();
        let check = residual_moment_check(&cfg.model, n, cfg.reps, cfg.base_seed, 40)?;
        let mut body = String::new();
        for r in &check.rows {
            writeln!(body, "{},{},{},{}", r.t, r.mean_residual_sq, r.bound, r.ratio).unwrap();
        }
        out.csv("residual_bound.csv", "time,mean_residual_sq,bound,ratio", &body)?;
    }
    Ok(())
}

fn write_overlay(
    out: &mut Emitter,
    name: &str,
    path: &SimPath,
    sol: &FluidSolution,
    mesh: &[f64],
) -> Result<()> {
    let ov = align(path, sol, mesh)?;
    let mut body = String::new();
    for i in 0..ov.times.len() {
        writeln!(
            body,
            "{},{},{},{},{},{},{},{}",
            ov.times[i],
            ov.rho_n[i],
            ov.rho[i],
            ov.theta_n[i],
            ov.theta[i],
            ov.b_n[i],
            ov.b[i],
            opt_cell(ov.congestion_ratio[i])
        )
        .unwrap();
    }
    out.csv(name, "time,rho_n,rho,theta_n,theta,b_n,b,congestion_ratio", &body)
}

fn blocked_cmd(cfg: &RunConfig, opts: &RunOptions, out: &mut Emitter) -> Result<()> {
    let sol = solve(&cfg.model, cfg.h)?;
    let path = simulate(&cfg.model, cfg.base_seed);
    let mesh = summary_mesh(cfg.model.horizon, cfg.h);
    let ov = align(&path, &sol, &mesh)?;

    let mut body = String::new();
    for i in 0..ov.times.len() {
        let t = ov.times[i];
        let mass = cfg.model.intensity.cumulative(t)?;
        let ratio_n = (mass > 0.0).then(|| ov.b_n[i] / mass);
        writeln!(
            body,
            "{t},{},{},{},{}",
            ov.b_n[i],
            ov.b[i],
            opt_cell(ratio_n),
            opt_cell(ov.congestion_ratio[i])
        )
        .unwrap();
    }
    out.csv("blocked.csv", "time,b_n,b,congestion_ratio_n,congestion_ratio", &body)?;

    if opts.emit_plot_data {
        out.dat("b_sim.dat", ov.times.iter().zip(&ov.b_n).map(|(&t, &v)| (t, v)))?;
        out.dat("b_fluid.dat", ov.times.iter().zip(&ov.b).map(|(&t, &v)| (t, v)))?;
    }
    Ok(())
}
