//! Experiment configuration: structured TOML in, validated [`RunConfig`] out.
//!
//! Unknown keys are rejected, missing fields are reported by name, and every
//! numeric constraint is checked at parse time so a run never dies halfway
//! through its replications.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;

use lossq::simulator::ModelConfig;
use lossq::{IntensitySpec, LifetimeDist};

/// Environment variable consulted for the default output directory.
pub const OUT_DIR_ENV: &str = "LOSSQ_OUT_DIR";

/// A fully validated run: the model instance plus solver and harness
/// controls.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelConfig,
    /// Solver mesh step; defaults to `horizon / 4000`.
    pub h: f64,
    /// Pinning tolerance for regime extraction; defaults to `10 h`.
    pub tol_pin: f64,
    /// When set, `fluid` also writes a mollified solution of this width.
    pub mollifier_width: Option<f64>,
    pub n_list: Vec<usize>,
    pub reps: usize,
    pub base_seed: u64,
    pub out_dir: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: RawModel,
    #[serde(default)]
    solver: RawSolver,
    #[serde(default)]
    harness: RawHarness,
    #[serde(default)]
    output: RawOutput,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    intensity: RawIntensity,
    service: RawDist,
    initial_service: Option<RawDist>,
    #[serde(default)]
    r0: f64,
    horizon: f64,
    capacity: Option<usize>,
}

/// One flat table per intensity; `kind` selects the variant and the
/// remaining fields must match it exactly.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntensity {
    kind: String,
    rate: Option<f64>,
    base: Option<f64>,
    amplitude: Option<f64>,
    period: Option<f64>,
    breaks: Option<Vec<f64>>,
    rates: Option<Vec<f64>>,
    points: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDist {
    kind: String,
    rate: Option<f64>,
    value: Option<f64>,
    location: Option<f64>,
    scale: Option<f64>,
    shape: Option<f64>,
    /// Empirical variant: one-column text file of durations.
    path: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    h: Option<f64>,
    tol_pin: Option<f64>,
    mollifier_width: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHarness {
    n_list: Vec<usize>,
    reps: usize,
    base_seed: u64,
}

impl Default for RawHarness {
    fn default() -> Self {
        Self { n_list: vec![20, 200], reps: 50, base_seed: 1 }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

/// Requires `field` for the given `kind`.
fn need<T>(v: Option<T>, kind: &str, field: &str) -> Result<T> {
    v.ok_or_else(|| anyhow!("`{kind}` requires field `{field}`"))
}

/// Rejects a field that does not belong to `kind`.
fn refuse<T>(v: &Option<T>, kind: &str, field: &str) -> Result<()> {
    if v.is_some() {
        bail!("field `{field}` does not apply to kind `{kind}`");
    }
    Ok(())
}

impl RawIntensity {
    fn build(self) -> Result<IntensitySpec> {
        let k = self.kind.as_str();
        let spec = match k {
            "constant" => {
                refuse(&self.base, k, "base")?;
                refuse(&self.breaks, k, "breaks")?;
                refuse(&self.points, k, "points")?;
                IntensitySpec::constant(need(self.rate, k, "rate")?)
            }
            "sinusoidal" => {
                refuse(&self.rate, k, "rate")?;
                refuse(&self.breaks, k, "breaks")?;
                refuse(&self.points, k, "points")?;
                IntensitySpec::sinusoidal(
                    need(self.base, k, "base")?,
                    need(self.amplitude, k, "amplitude")?,
                    need(self.period, k, "period")?,
                )
            }
            "piecewise-constant" => {
                refuse(&self.rate, k, "rate")?;
                refuse(&self.base, k, "base")?;
                refuse(&self.points, k, "points")?;
                IntensitySpec::piecewise(
                    need(self.breaks, k, "breaks")?,
                    need(self.rates, k, "rates")?,
                )
            }
            "table" => {
                refuse(&self.rate, k, "rate")?;
                refuse(&self.base, k, "base")?;
                refuse(&self.breaks, k, "breaks")?;
                IntensitySpec::table(need(self.points, k, "points")?)
            }
            other => bail!(
                "unknown intensity kind `{other}` \
                 (expected constant | sinusoidal | piecewise-constant | table)"
            ),
        };
        spec.map_err(|e| anyhow!("intensity: {e}"))
    }
}

impl RawDist {
    fn build(self, base_dir: &Path, which: &str) -> Result<LifetimeDist> {
        let k = self.kind.as_str();
        let dist = match k {
            "exponential" => LifetimeDist::exponential(need(self.rate, k, "rate")?),
            "deterministic" => LifetimeDist::deterministic(need(self.value, k, "value")?),
            "lognormal" => LifetimeDist::lognormal(
                need(self.location, k, "location")?,
                need(self.scale, k, "scale")?,
            ),
            "weibull" => LifetimeDist::weibull(
                need(self.shape, k, "shape")?,
                need(self.scale, k, "scale")?,
            ),
            "empirical" => {
                let rel = need(self.path, k, "path")?;
                let file = if rel.is_absolute() { rel } else { base_dir.join(rel) };
                LifetimeDist::empirical_from_path(&file)
            }
            other => bail!(
                "unknown {which} kind `{other}` \
                 (expected exponential | deterministic | lognormal | weibull | empirical)"
            ),
        };
        dist.map_err(|e| anyhow!("{which}: {e}"))
    }
}

/// Parses and validates a TOML run configuration.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let raw: RawConfig = toml::from_str(&text)
        .with_context(|| format!("invalid config {}", path.display()))?;
    let base_dir = path.parent().unwrap_or_else(|| Path::new("."));

    let harness = raw.harness;
    if harness.n_list.is_empty() || harness.n_list.windows(2).any(|w| w[0] >= w[1]) {
        bail!("harness.n_list must be nonempty and strictly increasing");
    }
    if harness.reps == 0 {
        bail!("harness.reps must be >= 1");
    }

    let capacity = raw.model.capacity.unwrap_or(*harness.n_list.last().unwrap());
    let intensity = raw.model.intensity.build()?;
    let service = raw.model.service.build(base_dir, "service")?;
    let initial_service = raw
        .model
        .initial_service
        .map(|d| d.build(base_dir, "initial_service"))
        .transpose()?;
    let model = ModelConfig::new(
        intensity,
        service,
        initial_service,
        raw.model.r0,
        raw.model.horizon,
        capacity,
    )
    .map_err(|e| anyhow!("model: {e}"))?;

    let h = raw.solver.h.unwrap_or(model.horizon / 4000.0);
    if !h.is_finite() || h <= 0.0 || h > model.horizon / 10.0 {
        bail!("solver.h must satisfy 0 < h <= horizon/10, got {h}");
    }
    let tol_pin = raw.solver.tol_pin.unwrap_or(10.0 * h);
    if !tol_pin.is_finite() || tol_pin <= 0.0 || tol_pin > 0.1 {
        bail!("solver.tol_pin must lie in (0, 0.1], got {tol_pin}");
    }
    if let Some(d) = raw.solver.mollifier_width {
        if !d.is_finite() || d <= 0.0 || d >= 1.0 {
            bail!("solver.mollifier_width must lie in (0, 1), got {d}");
        }
    }

    let out_dir = raw
        .output
        .dir
        .map(|d| if d.is_absolute() { d } else { base_dir.join(d) })
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));

    Ok(RunConfig {
        model,
        h,
        tol_pin,
        mollifier_width: raw.solver.mollifier_width,
        n_list: harness.n_list,
        reps: harness.reps,
        base_seed: harness.base_seed,
        out_dir,
    })
}
