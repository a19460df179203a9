//! Shared post-processing: congestion ratio, cumulative idleness, and
//! alignment of simulated step paths with mesh solutions on a common grid.

use crate::error::{Error, Result};
use crate::fluid::FluidSolution;
use crate::simulator::SimPath;

/// Anything with an integrated-occupancy path on `[0, T]`.
pub trait IntegratedOccupancy {
    fn integrated_occupancy(&self, t: f64) -> Result<f64>;
}

impl IntegratedOccupancy for SimPath {
    fn integrated_occupancy(&self, t: f64) -> Result<f64> {
        self.integrated(t)
    }
}

impl IntegratedOccupancy for FluidSolution {
    fn integrated_occupancy(&self, t: f64) -> Result<f64> {
        self.integrated(t)
    }
}

/// Cumulative idleness `t - Theta(t)`: the time mass during which capacity
/// was not exhausted, per server.
pub fn idleness<P: IntegratedOccupancy + ?Sized>(x: &P, t: f64) -> Result<f64> {
    Ok(t - x.integrated_occupancy(t)?)
}

/// Fraction of arrival mass blocked by time `t`, `b(t) / Lambda(t)`.
///
/// Undefined (an error, not zero) while no arrival mass has accrued: "no
/// load yet" is not the same observation as "no blocking".
pub fn congestion_ratio(sol: &FluidSolution, t: f64) -> Result<f64> {
    let mass = sol.config().intensity.cumulative(t)?;
    if mass <= 0.0 {
        return Err(Error::UndefinedRatio(t));
    }
    Ok(sol.blocked(t)? / mass)
}

/// Simulated and fluid series sampled on one common grid.
#[derive(Debug, Clone)]
pub struct OverlaySeries {
    pub times: Vec<f64>,
    pub rho_n: Vec<f64>,
    pub rho: Vec<f64>,
    pub theta_n: Vec<f64>,
    pub theta: Vec<f64>,
    pub b_n: Vec<f64>,
    pub b: Vec<f64>,
    /// `b / Lambda`; `None` where no arrival mass has accrued yet.
    pub congestion_ratio: Vec<Option<f64>>,
}

/// Samples every series on the union of `grid` and the path's event times.
pub fn align(path: &SimPath, sol: &FluidSolution, grid: &[f64]) -> Result<OverlaySeries> {
    if !path.config().same_fluid_problem(sol.config()) {
        return Err(Error::ConfigMismatch(
            "path and solution were built from different model instances".into(),
        ));
    }
    let t_end = path.horizon();
    let mut times: Vec<f64> = grid.iter().copied().filter(|t| (0.0..=t_end).contains(t)).collect();
    times.extend(path.events().iter().map(|e| e.time));
    times.sort_by(|a, b| a.total_cmp(b));
    times.dedup();

    let mut out = OverlaySeries {
        times: Vec::with_capacity(times.len()),
        rho_n: Vec::with_capacity(times.len()),
        rho: Vec::with_capacity(times.len()),
        theta_n: Vec::with_capacity(times.len()),
        theta: Vec::with_capacity(times.len()),
        b_n: Vec::with_capacity(times.len()),
        b: Vec::with_capacity(times.len()),
        congestion_ratio: Vec::with_capacity(times.len()),
    };
    for t in times {
        out.rho_n.push(path.occupancy_at(t)?);
        out.rho.push(sol.rho_at(t)?);
        out.theta_n.push(path.integrated(t)?);
        out.theta.push(sol.integrated(t)?);
        out.b_n.push(path.blocked_fraction(t)?);
        out.b.push(sol.blocked(t)?);
        out.congestion_ratio.push(congestion_ratio(sol, t).ok());
        out.times.push(t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::solve;
    use crate::intensity::IntensitySpec;
    use crate::lifetimes::LifetimeDist;
    use crate::simulator::{simulate, ModelConfig};

    fn underload(capacity: usize) -> ModelConfig {
        ModelConfig::new(
            IntensitySpec::constant(0.5).unwrap(),
            LifetimeDist::exponential(1.0).unwrap(),
            None,
            0.0,
            5.0,
            capacity,
        )
        .unwrap()
    }

    fn overload() -> ModelConfig {
        ModelConfig::new(
            IntensitySpec::constant(3.0).unwrap(),
            LifetimeDist::deterministic(1.0).unwrap(),
            None,
            0.0,
            2.0,
            100,
        )
        .unwrap()
    }

    #[test]
    fn congestion_ratio_values() {
        let c = overload();
        let sol = solve(&c, crate::fluid::default_step(&c)).unwrap();
        assert!((congestion_ratio(&sol, 2.0).unwrap() - 2.0 / 3.0).abs() < 1e-2);
        // No blocking before the hit.
        assert!(congestion_ratio(&sol, 1.0 / 3.0).unwrap() < 1e-2);
        // Never-saturating config blocks nothing.
        let u = underload(100);
        let sol = solve(&u, crate::fluid::default_step(&u)).unwrap();
        assert_eq!(congestion_ratio(&sol, 4.0).unwrap(), 0.0);
    }

    #[test]
    fn congestion_ratio_undefined_without_mass() {
        let c = ModelConfig::new(
            IntensitySpec::piecewise(vec![0.0, 1.0, 5.0], vec![0.0, 2.0]).unwrap(),
            LifetimeDist::exponential(1.0).unwrap(),
            None,
            0.0,
            5.0,
            10,
        )
        .unwrap();
        let sol = solve(&c, crate::fluid::default_step(&c)).unwrap();
        assert!(matches!(congestion_ratio(&sol, 0.5), Err(Error::UndefinedRatio(_))));
        assert!(congestion_ratio(&sol, 2.0).is_ok());
    }

    #[test]
    fn idleness_of_empty_and_pinned_systems() {
        let z = ModelConfig::new(
            IntensitySpec::constant(0.0).unwrap(),
            LifetimeDist::exponential(1.0).unwrap(),
            None,
            0.0,
            5.0,
            10,
        )
        .unwrap();
        let path = simulate(&z, 1);
        for t in [0.0, 2.0, 5.0] {
            assert_eq!(idleness(&path, t).unwrap(), t);
        }
        // A pinned stretch contributes no idleness.
        let c = overload();
        let sol = solve(&c, crate::fluid::default_step(&c)).unwrap();
        let added = idleness(&sol, 1.9).unwrap() - idleness(&sol, 0.5).unwrap();
        assert!(added.abs() < 1e-2, "idleness grew by {added} while pinned");
        // Closed-form value on the underload config.
        let u = underload(100);
        let sol = solve(&u, crate::fluid::default_step(&u)).unwrap();
        assert!((idleness(&sol, 5.0).unwrap() - 2.996631).abs() < 2e-3);
    }

    #[test]
    fn idleness_is_monotone_and_bounded() {
        let c = underload(30);
        let path = simulate(&c, 9);
        let mut prev = 0.0;
        for i in 0..=100 {
            let t = 5.0 * i as f64 / 100.0;
            let v = idleness(&path, t).unwrap();
            assert!(v + 1e-12 >= prev && v <= t + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn align_produces_common_grid_with_event_times() {
        let c = underload(20);
        let sol = solve(&c, crate::fluid::default_step(&c)).unwrap();
        let path = simulate(&c, 3);
        let grid: Vec<f64> = (0..=50).map(|i| 5.0 * i as f64 / 50.0).collect();
        let ov = align(&path, &sol, &grid).unwrap();
        // Union contains both inputs.
        for t in &grid {
            assert!(ov.times.iter().any(|u| u == t));
        }
        for e in path.events() {
            assert!(ov.times.iter().any(|u| *u == e.time));
        }
        assert!(ov.times.windows(2).all(|w| w[0] < w[1]));
        // Empty grid degenerates to event times only.
        let ov = align(&path, &sol, &[]).unwrap();
        assert_eq!(ov.times.len(), path.events().len());
    }

    #[test]
    fn align_rejects_mismatched_configs() {
        let a = underload(20);
        let b = overload();
        let sol = solve(&b, crate::fluid::default_step(&b)).unwrap();
        let path = simulate(&a, 3);
        assert!(matches!(align(&path, &sol, &[]), Err(Error::ConfigMismatch(_))));
    }

    #[test]
    fn align_zero_intensity_series_coincide() {
        // With no arrivals and an empty start both series vanish.
        let c = ModelConfig::new(
            IntensitySpec::constant(0.0).unwrap(),
            LifetimeDist::exponential(1.0).unwrap(),
            None,
            0.0,
            4.0,
            10,
        )
        .unwrap();
        let sol = solve(&c, crate::fluid::default_step(&c)).unwrap();
        let path = simulate(&c, 5);
        let grid: Vec<f64> = (0..=20).map(|i| 4.0 * i as f64 / 20.0).collect();
        let ov = align(&path, &sol, &grid).unwrap();
        for i in 0..ov.times.len() {
            assert_eq!(ov.rho_n[i], ov.rho[i]);
            assert_eq!(ov.b_n[i], ov.b[i]);
            assert!(ov.congestion_ratio[i].is_none());
        }
    }
}
