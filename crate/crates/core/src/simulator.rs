//! Event-driven simulation of the nonstationary many-server loss system.
//!
//! Arrivals follow a Poisson process with rate `n * lambda(u)` generated by
//! thinning, service times are iid marks, and an arrival is admitted exactly
//! when some server is free. The realized path records every event plus the
//! derived step functions: occupied fraction, its running integral, and the
//! scaled count of blocked arrivals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution as _;

use crate::error::{Error, Result};
use crate::intensity::IntensitySpec;
use crate::lifetimes::LifetimeDist;
use crate::quad::survival_kernel_integral;

/// Absolute tolerance for the compensator integral in
/// [`SimPath::martingale_residual`].
const RESIDUAL_QUAD_TOL: f64 = 1e-8;

/// A full problem instance. The capacity is used by the simulator only; the
/// fluid solver works on the capacity-free part.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub intensity: IntensitySpec,
    /// Service-time law of fresh arrivals.
    pub service: LifetimeDist,
    /// Remaining-work law of jobs present at time zero.
    pub initial_service: LifetimeDist,
    /// Initial occupied fraction in `[0, 1]`.
    pub r0: f64,
    /// Time horizon `T > 0`.
    pub horizon: f64,
    /// Number of servers.
    pub capacity: usize,
}

impl ModelConfig {
    /// Validates the instance. When `initial_service` is `None` it defaults
    /// to the arrival service law.
    pub fn new(
        intensity: IntensitySpec,
        service: LifetimeDist,
        initial_service: Option<LifetimeDist>,
        r0: f64,
        horizon: f64,
        capacity: usize,
    ) -> Result<Self> {
        if !r0.is_finite() || !(0.0..=1.0).contains(&r0) {
            return Err(Error::InvalidParameter(format!("r0 must lie in [0, 1], got {r0}")));
        }
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if capacity == 0 {
            return Err(Error::InvalidParameter("capacity must be >= 1".into()));
        }
        if let Some(end) = intensity.domain_end() {
            if end < horizon {
                return Err(Error::InvalidParameter(format!(
                    "intensity is defined up to {end} but the horizon is {horizon}"
                )));
            }
        }
        let mass = intensity.cumulative(horizon)?;
        if !mass.is_finite() {
            return Err(Error::InvalidParameter("cumulative intensity is not finite".into()));
        }
        let initial_service = initial_service.unwrap_or_else(|| service.clone());
        Ok(Self { intensity, service, initial_service, r0, horizon, capacity })
    }

    /// Initial job count: `r0 * n` rounded to the nearest integer.
    pub fn initial_jobs(&self) -> usize {
        ((self.r0 * self.capacity as f64).round() as usize).min(self.capacity)
    }

    /// Same instance as seen by the fluid equation, which has no capacity.
    pub fn same_fluid_problem(&self, other: &Self) -> bool {
        self.intensity == other.intensity
            && self.service == other.service
            && self.initial_service == other.initial_service
            && self.r0 == other.r0
            && self.horizon == other.horizon
    }

    /// Copy with a different server count (used for convergence sweeps).
    pub fn with_capacity(&self, capacity: usize) -> Self {
        Self { capacity, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    ArrivalAdmitted,
    ArrivalBlocked,
    Departure,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ArrivalAdmitted => "arrival-admitted",
            Self::ArrivalBlocked => "arrival-blocked",
            Self::Departure => "departure",
        }
    }
}

/// One entry of the chronological event log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEvent {
    pub time: f64,
    pub kind: EventKind,
    pub job_id: u64,
    /// Occupied count immediately after the event.
    pub occupied_after: u32,
}

/// Pending departure; orders a min-heap, departures at equal times by job id.
#[derive(Debug, Clone, Copy)]
struct Departure {
    time: f64,
    job_id: u64,
}

impl PartialEq for Departure {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.job_id == other.job_id
    }
}
impl Eq for Departure {}
impl Ord for Departure {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed for BinaryHeap (max-heap) -> earliest first.
        other.time.total_cmp(&self.time).then(other.job_id.cmp(&self.job_id))
    }
}
impl PartialOrd for Departure {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A realized trajectory over `[0, T]`.
#[derive(Debug, Clone)]
pub struct SimPath {
    config: ModelConfig,
    seed: u64,
    events: Vec<SimEvent>,
    /// `(T_i, S_i)` of admitted arrivals, in arrival order.
    admitted: Vec<(f64, f64)>,
    /// Remaining times drawn for the initial jobs.
    initial_remaining: Vec<f64>,
    initial_occupied: u32,
    // Derived caches for O(log) point queries.
    event_times: Vec<f64>,
    occupied_after: Vec<u32>,
    theta_at_event: Vec<f64>,
    blocked_times: Vec<f64>,
    /// Maximal intervals on which every server is busy.
    full_intervals: Vec<(f64, f64)>,
}

/// Poisson arrival epochs with rate `n * lambda(u)` on `[0, horizon)`.
///
/// Thinning runs per monotone piece of the intensity against the piece's own
/// tight bound, so acceptance stays high without changing the law. Epochs are
/// strictly increasing and reproducible from the stream.
pub fn sample_arrivals<R: Rng + ?Sized>(
    spec: &IntensitySpec,
    n_servers: usize,
    horizon: f64,
    rng: &mut R,
) -> Vec<f64> {
    let mut pieces = vec![0.0];
    pieces.extend(spec.partition_points(0.0, horizon));
    pieces.push(horizon);

    let mut epochs = Vec::new();
    for w in pieces.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let bound = spec.upper_bound(a, b).expect("valid piece");
        if bound <= 0.0 {
            continue;
        }
        let gap = rand_distr::Exp::new(n_servers as f64 * bound).unwrap();
        let mut t = a;
        loop {
            t += gap.sample(rng);
            if t >= b {
                break;
            }
            let accept: f64 = rng.random();
            if accept * bound < spec.eval(t).expect("t within domain") {
                epochs.push(t);
            }
        }
    }
    debug_assert!(epochs.windows(2).all(|w| w[0] < w[1]));
    epochs
}

/// Runs one replication. The replication's stream is split into independent
/// substreams for arrivals, service marks and initial remaining times, so an
/// identical `(config, seed)` pair reproduces the log bit for bit.
pub fn simulate(config: &ModelConfig, seed: u64) -> SimPath {
    let n = config.capacity as u32;
    let mut arrivals_rng = ChaCha8Rng::seed_from_u64(seed);
    arrivals_rng.set_stream(0);
    let mut marks_rng = ChaCha8Rng::seed_from_u64(seed);
    marks_rng.set_stream(1);
    let mut init_rng = ChaCha8Rng::seed_from_u64(seed);
    init_rng.set_stream(2);

    let epochs = sample_arrivals(&config.intensity, config.capacity, config.horizon, &mut arrivals_rng);
    // Every arrival carries a mark whether or not it is admitted.
    let marks: Vec<f64> = epochs.iter().map(|_| config.service.sample(&mut marks_rng)).collect();

    let n0 = config.initial_jobs();
    let initial_remaining: Vec<f64> =
        (0..n0).map(|_| config.initial_service.sample(&mut init_rng)).collect();

    let mut heap = BinaryHeap::with_capacity(n0 + epochs.len());
    for (i, s) in initial_remaining.iter().enumerate() {
        heap.push(Departure { time: *s, job_id: i as u64 });
    }

    let mut events = Vec::with_capacity(2 * epochs.len() + n0);
    let mut occupied = n0 as u32;
    let mut admitted = Vec::new();
    let mut next_id = n0 as u64;

    let log = |events: &mut Vec<SimEvent>, time: f64, kind: EventKind, job_id: u64, occ: u32| {
        if time <= config.horizon {
            events.push(SimEvent { time, kind, job_id, occupied_after: occ });
        }
    };

    for (i, &t_arr) in epochs.iter().enumerate() {
        // Departures take effect first at shared timestamps, matching the
        // left limit in the admission test.
        while let Some(dep) = heap.peek() {
            if dep.time > t_arr {
                break;
            }
            let dep = heap.pop().unwrap();
            occupied -= 1;
            log(&mut events, dep.time, EventKind::Departure, dep.job_id, occupied);
        }
        let id = next_id;
        next_id += 1;
        if occupied < n {
            occupied += 1;
            log(&mut events, t_arr, EventKind::ArrivalAdmitted, id, occupied);
            admitted.push((t_arr, marks[i]));
            heap.push(Departure { time: t_arr + marks[i], job_id: id });
        } else {
            log(&mut events, t_arr, EventKind::ArrivalBlocked, id, occupied);
        }
    }
    while let Some(dep) = heap.peek() {
        if dep.time > config.horizon {
            break;
        }
        let dep = heap.pop().unwrap();
        occupied -= 1;
        log(&mut events, dep.time, EventKind::Departure, dep.job_id, occupied);
    }

    SimPath::assemble(config.clone(), seed, events, admitted, initial_remaining, n0 as u32)
}

impl SimPath {
    fn assemble(
        config: ModelConfig,
        seed: u64,
        events: Vec<SimEvent>,
        admitted: Vec<(f64, f64)>,
        initial_remaining: Vec<f64>,
        initial_occupied: u32,
    ) -> Self {
        let n = config.capacity as f64;
        let mut event_times = Vec::with_capacity(events.len());
        let mut occupied_after = Vec::with_capacity(events.len());
        let mut theta_at_event = Vec::with_capacity(events.len());
        let mut blocked_times = Vec::new();
        let mut full_intervals: Vec<(f64, f64)> = Vec::new();

        let mut theta = 0.0;
        let mut prev_time = 0.0;
        let mut prev_occ = initial_occupied;
        let mut full_since = (initial_occupied as usize == config.capacity).then_some(0.0);

        for e in &events {
            theta += prev_occ as f64 / n * (e.time - prev_time);
            event_times.push(e.time);
            occupied_after.push(e.occupied_after);
            theta_at_event.push(theta);
            if e.kind == EventKind::ArrivalBlocked {
                blocked_times.push(e.time);
            }
            let now_full = e.occupied_after as usize == config.capacity;
            match (full_since, now_full) {
                (None, true) => full_since = Some(e.time),
                (Some(s), false) => {
                    full_intervals.push((s, e.time));
                    full_since = None;
                }
                _ => {}
            }
            prev_time = e.time;
            prev_occ = e.occupied_after;
        }
        if let Some(s) = full_since {
            full_intervals.push((s, config.horizon));
        }

        Self {
            config,
            seed,
            events,
            admitted,
            initial_remaining,
            initial_occupied,
            event_times,
            occupied_after,
            theta_at_event,
            blocked_times,
            full_intervals,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn capacity(&self) -> usize {
        self.config.capacity
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn horizon(&self) -> f64 {
        self.config.horizon
    }

    pub fn events(&self) -> &[SimEvent] {
        &self.events
    }

    /// `(T_i, S_i)` of admitted arrivals.
    pub fn admitted(&self) -> &[(f64, f64)] {
        &self.admitted
    }

    /// Remaining times the initial jobs were given.
    pub fn initial_remaining(&self) -> &[f64] {
        &self.initial_remaining
    }

    pub fn initial_occupied(&self) -> u32 {
        self.initial_occupied
    }

    /// Maximal intervals on which the system is full.
    pub fn full_intervals(&self) -> &[(f64, f64)] {
        &self.full_intervals
    }

    fn check_horizon(&self, t: f64) -> Result<()> {
        if !t.is_finite() || t < 0.0 || t > self.config.horizon {
            return Err(Error::OutOfDomain { t, end: self.config.horizon });
        }
        Ok(())
    }

    fn occupied_count_at(&self, t: f64) -> u32 {
        match self.event_times.partition_point(|s| *s <= t) {
            0 => self.initial_occupied,
            i => self.occupied_after[i - 1],
        }
    }

    fn occupied_count_before(&self, t: f64) -> u32 {
        match self.event_times.partition_point(|s| *s < t) {
            0 => self.initial_occupied,
            i => self.occupied_after[i - 1],
        }
    }

    /// Right-continuous occupied fraction `rho^n(t)`.
    pub fn occupancy_at(&self, t: f64) -> Result<f64> {
        self.check_horizon(t)?;
        Ok(self.occupied_count_at(t) as f64 / self.config.capacity as f64)
    }

    /// Left limit `rho^n(t-)`.
    pub fn occupancy_before(&self, t: f64) -> Result<f64> {
        self.check_horizon(t)?;
        Ok(self.occupied_count_before(t) as f64 / self.config.capacity as f64)
    }

    /// Exact integral of the occupied fraction over `[0, t]`.
    pub fn integrated(&self, t: f64) -> Result<f64> {
        self.check_horizon(t)?;
        let n = self.config.capacity as f64;
        Ok(match self.event_times.partition_point(|s| *s <= t) {
            0 => self.initial_occupied as f64 / n * t,
            i => {
                self.theta_at_event[i - 1]
                    + self.occupied_after[i - 1] as f64 / n * (t - self.event_times[i - 1])
            }
        })
    }

    /// Scaled count of blocked arrivals in `[0, t]`.
    pub fn blocked_fraction(&self, t: f64) -> Result<f64> {
        self.check_horizon(t)?;
        let count = self.blocked_times.partition_point(|s| *s <= t);
        Ok(count as f64 / self.config.capacity as f64)
    }

    /// Residual between the path and its compensated drift,
    /// `X^n_t = rho^n_t - ∫_0^t 1{rho^n_{u-} < 1} Fbar(t - u) lambda_u du`.
    ///
    /// Only defined for empty-start configurations; the indicator path is
    /// piecewise constant so the integral is taken exactly over the runs
    /// below capacity.
    pub fn martingale_residual(&self, t: f64) -> Result<f64> {
        if self.config.r0 != 0.0 {
            return Err(Error::UnsupportedConfiguration(
                "the residual decomposition requires an empty start (r0 = 0)".into(),
            ));
        }
        self.check_horizon(t)?;
        let mut drift = survival_kernel_integral(
            &self.config.service,
            &self.config.intensity,
            t,
            0.0,
            t,
            RESIDUAL_QUAD_TOL,
        );
        for (s, e) in &self.full_intervals {
            if *s >= t {
                break;
            }
            drift -= survival_kernel_integral(
                &self.config.service,
                &self.config.intensity,
                t,
                *s,
                e.min(t),
                RESIDUAL_QUAD_TOL,
            );
        }
        Ok(self.occupancy_at(t)? - drift)
    }
}
