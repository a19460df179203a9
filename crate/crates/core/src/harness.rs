//! Replication harness: uniform-error tables across server counts, and the
//! second-moment check on the compensated residual.
//!
//! One fluid solution is shared by every server count (the limit equation has
//! no capacity in it). Replications are independent and run in parallel; the
//! table is a pure function of `(config, n_list, reps, base_seed)`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fluid::{default_step, solve, FluidSolution};
use crate::observables::align;
use crate::simulator::{simulate, ModelConfig, SimPath};

/// Grid size for the per-replication residual-bound ratio.
const RESIDUAL_GRID: usize = 40;

/// Largest difference between a simulated path and the fluid solution over
/// `mesh` refined with the path's event times. The refined grid pins down
/// the sup of a step-versus-continuous difference to within one jump plus
/// the fluid's modulus over a grid cell, and handles paths and solutions
/// that share a discontinuity (deterministic initial work) consistently.
pub fn sup_error(path: &SimPath, sol: &FluidSolution, mesh: &[f64]) -> Result<f64> {
    if !path.config().same_fluid_problem(sol.config()) {
        return Err(Error::ConfigMismatch(
            "path and solution were built from different model instances".into(),
        ));
    }
    let overlay = align(path, sol, mesh)?;
    let mut sup = 0.0f64;
    for i in 0..overlay.times.len() {
        sup = sup.max((overlay.rho_n[i] - overlay.rho[i]).abs());
    }
    Ok(sup)
}

/// Per-replication uniform errors against the shared fluid solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    pub n: usize,
    pub seed: u64,
    pub sup_err_rho: f64,
    pub sup_err_theta: f64,
    pub sup_err_b: f64,
    /// Largest `X^n(t)^2 / (Lambda(t)/n)` over the residual grid; `None`
    /// unless the configuration starts empty.
    pub max_residual_sq_over_bound: Option<f64>,
}

/// Median and quartiles of the uniform errors for one server count.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSummary {
    pub n: usize,
    pub rho: Quartiles,
    pub theta: Quartiles,
    pub b: Quartiles,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// All replications of a convergence sweep plus per-`n` summaries.
#[derive(Debug, Clone)]
pub struct ErrorTable {
    pub rows: Vec<ErrorRow>,
    pub summaries: Vec<ErrorSummary>,
}

impl ErrorTable {
    pub fn summary_for(&self, n: usize) -> Option<&ErrorSummary> {
        self.summaries.iter().find(|s| s.n == n)
    }
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let idx = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = idx.floor() as usize;
    let hi = idx.ceil() as usize;
    let w = idx - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

fn quartiles(mut xs: Vec<f64>) -> Quartiles {
    xs.sort_by(|a, b| a.total_cmp(b));
    Quartiles {
        q1: percentile(&xs, 0.25),
        median: percentile(&xs, 0.5),
        q3: percentile(&xs, 0.75),
    }
}

/// Simulates `reps` replications per server count (seeds `base_seed + i`,
/// shared across counts) and measures every path against one fluid solution.
pub fn convergence_experiment(
    config: &ModelConfig,
    n_list: &[usize],
    reps: usize,
    base_seed: u64,
) -> Result<ErrorTable> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "n_list must be nonempty and strictly increasing".into(),
        ));
    }
    if reps == 0 {
        return Err(Error::InvalidParameter("reps must be >= 1".into()));
    }
    let sol = solve(config, default_step(config))?;
    let mesh: Vec<f64> = (0..=sol.num_cells()).map(|k| sol.node_time(k)).collect();
    let residual_grid = uniform_grid(config.horizon, RESIDUAL_GRID);

    let mut rows = Vec::with_capacity(n_list.len() * reps);
    for &n in n_list {
        let scaled = config.with_capacity(n);
        let mut batch: Vec<ErrorRow> = (0..reps)
            .into_par_iter()
            .map(|i| {
                let seed = base_seed + i as u64;
                let path = simulate(&scaled, seed);
                measure(&path, &sol, &mesh, &residual_grid, seed)
            })
            .collect::<Result<Vec<_>>>()?;
        rows.append(&mut batch);
    }

    let summaries = n_list
        .iter()
        .map(|&n| {
            let of = |f: fn(&ErrorRow) -> f64| {
                quartiles(rows.iter().filter(|r| r.n == n).map(f).collect())
            };
            ErrorSummary {
                n,
                rho: of(|r| r.sup_err_rho),
                theta: of(|r| r.sup_err_theta),
                b: of(|r| r.sup_err_b),
            }
        })
        .collect();

    Ok(ErrorTable { rows, summaries })
}

fn measure(
    path: &SimPath,
    sol: &FluidSolution,
    mesh: &[f64],
    residual_grid: &[f64],
    seed: u64,
) -> Result<ErrorRow> {
    let overlay = align(path, sol, mesh)?;
    let mut sup_rho = 0.0f64;
    let mut sup_theta = 0.0f64;
    let mut sup_b = 0.0f64;
    for i in 0..overlay.times.len() {
        sup_rho = sup_rho.max((overlay.rho_n[i] - overlay.rho[i]).abs());
        sup_theta = sup_theta.max((overlay.theta_n[i] - overlay.theta[i]).abs());
        sup_b = sup_b.max((overlay.b_n[i] - overlay.b[i]).abs());
    }
    let residual = if path.config().r0 == 0.0 {
        let mut worst = 0.0f64;
        for &t in residual_grid {
            let x = path.martingale_residual(t)?;
            let bound = path.config().intensity.cumulative(t)? / path.capacity() as f64;
            if bound > 0.0 {
                worst = worst.max(x * x / bound);
            }
        }
        Some(worst)
    } else {
        None
    };
    Ok(ErrorRow {
        n: path.capacity(),
        seed,
        sup_err_rho: sup_rho,
        sup_err_theta: sup_theta,
        sup_err_b: sup_b,
        max_residual_sq_over_bound: residual,
    })
}

fn uniform_grid(t_end: f64, points: usize) -> Vec<f64> {
    // Clamped so rounding cannot push the last point past the horizon.
    (1..=points).map(|i| (t_end * i as f64 / points as f64).min(t_end)).collect()
}

/// Empirical second moment of the residual against its theoretical envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRow {
    pub t: f64,
    pub mean_residual_sq: f64,
    /// `Lambda(t) / n`.
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct ResidualCheck {
    pub rows: Vec<ResidualRow>,
    pub max_ratio: f64,
}

/// Averages `X^n(t)^2` over `reps` replications on a coarse grid and reports
/// it next to the envelope `Lambda(t) / n`. Empty-start configurations only.
pub fn residual_moment_check(
    config: &ModelConfig,
    n: usize,
    reps: usize,
    base_seed: u64,
    grid_points: usize,
) -> Result<ResidualCheck> {
    if config.r0 != 0.0 {
        return Err(Error::UnsupportedConfiguration(
            "the residual decomposition requires an empty start (r0 = 0)".into(),
        ));
    }
    if reps == 0 || grid_points == 0 {
        return Err(Error::InvalidParameter("reps and grid_points must be >= 1".into()));
    }
    let scaled = config.with_capacity(n);
    let grid = uniform_grid(config.horizon, grid_points);

    let sums: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let path = simulate(&scaled, base_seed + i as u64);
            grid.iter()
                .map(|&t| path.martingale_residual(t).map(|x| x * x))
                .collect::<Result<Vec<f64>>>()
        })
        .try_reduce(
            || vec![0.0; grid.len()],
            |mut acc, xs| {
                for (a, x) in acc.iter_mut().zip(&xs) {
                    *a += x;
                }
                Ok(acc)
            },
        )?;

    let mut rows = Vec::with_capacity(grid.len());
    let mut max_ratio = 0.0f64;
    for (i, &t) in grid.iter().enumerate() {
        let mean = sums[i] / reps as f64;
        let bound = config.intensity.cumulative(t)? / n as f64;
        let ratio = if bound > 0.0 { mean / bound } else { 0.0 };
        max_ratio = max_ratio.max(ratio);
        rows.push(ResidualRow { t, mean_residual_sq: mean, bound, ratio });
    }
    Ok(ResidualCheck { rows, max_ratio })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::intensity::IntensitySpec;
    use crate::lifetimes::LifetimeDist;

    fn cfg(
        intensity: IntensitySpec,
        service: LifetimeDist,
        initial: Option<LifetimeDist>,
        r0: f64,
        horizon: f64,
        capacity: usize,
    ) -> ModelConfig {
        ModelConfig::new(intensity, service, initial, r0, horizon, capacity).unwrap()
    }

    #[test]
    fn sup_error_zero_when_path_equals_fluid() {
        // No arrivals, empty start: both paths are identically zero.
        let c = cfg(
            IntensitySpec::constant(0.0).unwrap(),
            LifetimeDist::exponential(1.0).unwrap(),
            None,
            0.0,
            5.0,
            10,
        );
        let sol = solve(&c, default_step(&c)).unwrap();
        let path = simulate(&c, 1);
        let mesh: Vec<f64> = (0..=100).map(|i| 5.0 * i as f64 / 100.0).collect();
        assert_eq!(sup_error(&path, &sol, &mesh).unwrap(), 0.0);
    }

    #[test]
    fn sup_error_single_server_is_order_one() {
        let c = cfg(
            IntensitySpec::constant(0.5).unwrap(),
            LifetimeDist::exponential(1.0).unwrap(),
            None,
            0.0,
            5.0,
            1,
        );
        let sol = solve(&c, default_step(&c)).unwrap();
        let mesh: Vec<f64> = (0..=50).map(|i| 5.0 * i as f64 / 50.0).collect();
        for seed in 0..5 {
            let e = sup_error(&simulate(&c, seed), &sol, &mesh).unwrap();
            assert!(e <= 1.0, "bounded by one: {e}");
            assert!(e > 0.0, "single-server granularity keeps it positive");
        }
    }

    #[test]
    fn sup_error_rejects_mismatched_configs() {
        let a = cfg(
            IntensitySpec::constant(0.5).unwrap(),
            LifetimeDist::exponential(1.0).unwrap(),
            None,
            0.0,
            5.0,
            10,
        );
        let b = cfg(
            IntensitySpec::constant(0.7).unwrap(),
            LifetimeDist::exponential(1.0).unwrap(),
            None,
            0.0,
            5.0,
            10,
        );
        let sol = solve(&b, default_step(&b)).unwrap();
        assert!(sup_error(&simulate(&a, 1), &sol, &[]).is_err());
    }

    #[test]
    fn zero_intensity_errors_bounded_by_rounding() {
        // Deterministic initial work keeps all initial jobs in lockstep, so
        // the only gap to the fluid is the rounding of r0 * n.
        let c = cfg(
            IntensitySpec::constant(0.0).unwrap(),
            LifetimeDist::exponential(1.0).unwrap(),
            Some(LifetimeDist::deterministic(0.6).unwrap()),
            0.37,
            1.0,
            1, // replaced per n below
        );
        for n in [7usize, 33] {
            let table =
                convergence_experiment(&c.with_capacity(n), &[n], 10, 5).unwrap();
            for row in &table.rows {
                let tol = 1.0 / (2.0 * n as f64) + 1e-12;
                assert!(row.sup_err_rho <= tol, "rho err {} at n={n}", row.sup_err_rho);
                assert!(row.sup_err_theta <= tol, "theta err {}", row.sup_err_theta);
                assert_eq!(row.sup_err_b, 0.0);
                assert!(row.max_residual_sq_over_bound.is_none());
            }
        }
    }

    #[test]
    fn table_is_reproducible_and_ordered() {
        let c = cfg(
            IntensitySpec::constant(0.8).unwrap(),
            LifetimeDist::exponential(1.0).unwrap(),
            None,
            0.0,
            3.0,
            10,
        );
        let a = convergence_experiment(&c, &[5, 10], 12, 42).unwrap();
        let b = convergence_experiment(&c, &[5, 10], 12, 42).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.rows.len(), 24);
        // Residual column present for the empty start.
        assert!(a.rows.iter().all(|r| r.max_residual_sq_over_bound.is_some()));
        assert!(convergence_experiment(&c, &[10, 5], 3, 1).is_err());
        assert!(convergence_experiment(&c, &[], 3, 1).is_err());
    }

    #[test]
    fn residual_check_zero_intensity() {
        let c = cfg(
            IntensitySpec::constant(0.0).unwrap(),
            LifetimeDist::exponential(1.0).unwrap(),
            None,
            0.0,
            4.0,
            10,
        );
        let out = residual_moment_check(&c, 10, 20, 1, 10).unwrap();
        for row in &out.rows {
            assert_eq!(row.mean_residual_sq, 0.0);
            assert_eq!(row.bound, 0.0);
        }
        assert_eq!(out.max_ratio, 0.0);
    }

    #[test]
    fn residual_check_requires_empty_start() {
        let c = cfg(
            IntensitySpec::constant(1.0).unwrap(),
            LifetimeDist::exponential(1.0).unwrap(),
            None,
            0.5,
            4.0,
            10,
        );
        assert!(matches!(
            residual_moment_check(&c, 10, 20, 1, 10),
            Err(Error::UnsupportedConfiguration(_))
        ));
    }

    #[test]
    fn residual_second_moment_within_envelope() {
        // Constant load, moderate n: the averaged squared residual must stay
        // under 1.5x the envelope (slack for sampling noise).
        let c = cfg(
            IntensitySpec::constant(1.0).unwrap(),
            LifetimeDist::exponential(1.0).unwrap(),
            None,
            0.0,
            5.0,
            100,
        );
        let out = residual_moment_check(&c, 100, 200, 7, 20).unwrap();
        assert!(out.max_ratio <= 1.5, "max ratio {}", out.max_ratio);
        // And it is strictly positive once arrivals flow.
        assert!(out.rows.last().unwrap().mean_residual_sq > 0.0);
    }
}
