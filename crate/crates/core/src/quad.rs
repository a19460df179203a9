//! Adaptive quadrature for the survival-kernel integrals.

use crate::intensity::IntensitySpec;
use crate::lifetimes::LifetimeDist;

/// Adaptive Simpson on `[a, b]` with absolute tolerance `tol` and explicit
/// endpoint values (so callers can sample jump points from inside the panel).
fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fb: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// `∫_a^b Fbar(t - u) lambda(u) du` for `0 <= a <= b <= t`.
///
/// The interval is split at intensity breakpoints and at the preimages of
/// survival jumps, so each panel's integrand is smooth (or exactly constant,
/// which Simpson integrates exactly). Panel endpoint samples are taken a hair
/// inside the panel: in `u` the kernel is left-continuous at a jump, so the
/// raw edge value belongs to the neighbouring panel.
pub fn survival_kernel_integral(
    dist: &LifetimeDist,
    intensity: &IntensitySpec,
    t: f64,
    a: f64,
    b: f64,
    tol: f64,
) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut cuts: Vec<f64> = intensity.partition_points(a, b);
    for s in dist.survival_discontinuities() {
        let u = t - s;
        if u > a && u < b {
            cuts.push(u);
        }
    }
    cuts.push(b);
    cuts.sort_by(|x, y| x.total_cmp(y));
    cuts.dedup();

    let f = |u: f64| {
        dist.survival((t - u).max(0.0)).unwrap_or(0.0) * intensity.eval(u).unwrap_or(0.0)
    };
    let panel_tol = tol / cuts.len() as f64;
    let mut lo = a;
    let mut acc = 0.0;
    for hi in cuts {
        let nudge = 1e-9 * (hi - lo);
        acc += adaptive_simpson(&f, lo, hi, f(lo + nudge), f(hi - nudge), panel_tol);
        lo = hi;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_rate_exponential_kernel_closed_form() {
        // ∫_0^t e^{-(t-u)} c du = c (1 - e^{-t})
        let dist = LifetimeDist::exponential(1.0).unwrap();
        let spec = IntensitySpec::constant(0.5).unwrap();
        for t in [0.3, 1.0, 4.2] {
            let got = survival_kernel_integral(&dist, &spec, t, 0.0, t, 1e-10);
            let want = 0.5 * (1.0 - (-t).exp());
            assert!((got - want).abs() < 1e-9, "t={t}: {got} vs {want}");
        }
    }

    #[test]
    fn deterministic_kernel_splits_at_the_jump() {
        // Fbar(t-u) = 1{t-u < 1}: mass of [0, t] seen from t = min(t, 1) * c.
        let dist = LifetimeDist::deterministic(1.0).unwrap();
        let spec = IntensitySpec::constant(3.0).unwrap();
        let got = survival_kernel_integral(&dist, &spec, 2.0, 0.0, 2.0, 1e-10);
        assert!((got - 3.0).abs() < 1e-8);
        let got = survival_kernel_integral(&dist, &spec, 0.5, 0.0, 0.5, 1e-10);
        assert!((got - 1.5).abs() < 1e-8);
    }

    #[test]
    fn sinusoidal_kernel_matches_fine_riemann_sum() {
        let dist = LifetimeDist::lognormal(-0.5, 1.0).unwrap();
        let spec = IntensitySpec::sinusoidal(2.0 / 3.0, 1.0, 10.0).unwrap();
        let t = 7.3;
        let n = 2_000_000;
        let h = t / n as f64;
        let mut oracle = 0.0;
        for i in 0..n {
            let u = (i as f64 + 0.5) * h;
            oracle += dist.survival(t - u).unwrap() * spec.eval(u).unwrap() * h;
        }
        let got = survival_kernel_integral(&dist, &spec, t, 0.0, t, 1e-10);
        assert!((got - oracle).abs() < 1e-7, "{got} vs {oracle}");
    }
}
