//! Front tracking and wave-speed validation.
//!
//! Fisher-KPP fronts invading an unstable zero state travel asymptotically
//! at `2·sqrt(D·ρ)`. The helpers here measure the speed of a simulated front
//! and compare it with that value; [`validate`] bundles the speed check with
//! conservation and stability checks of the pure-diffusion problem.

use crate::config::{ModelParams, SeedParams, SimConfig};
use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};
use crate::imaging::DiffusionField;
use crate::integrator::{integrate, seed_initial, TimeGrid};
use crate::operator::assemble;

/// Both readings of the velocity law, mm·day⁻¹.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoreticalVelocity {
    /// `2·sqrt(D·ρ)`, the Fisher-KPP minimal front speed.
    pub kpp: f64,
    /// `2·sqrt(D)·ρ`.
    pub sqrt_d_times_rho: f64,
    /// Effective `D = p_w·D_w + p_g·D_g`.
    pub effective_d: f64,
}

pub fn theoretical_velocity(p_white: f64, p_gray: f64, model: &ModelParams) -> Result<TheoreticalVelocity> {
    let valid = |p: f64| (0.0..=1.0).contains(&p);
    if !valid(p_white) || !valid(p_gray) || (p_white + p_gray - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "matter fractions ({p_white}, {p_gray}) must be non-negative and sum to 1"
        )));
    }
    let d = p_white * model.d_white + p_gray * model.d_gray;
    Ok(TheoreticalVelocity {
        kpp: 2.0 * (d * model.rho).sqrt(),
        sqrt_d_times_rho: 2.0 * d.sqrt() * model.rho,
        effective_d: d,
    })
}

/// Distance from `centre` along `axis` (0, 1 or 2) of the farthest point on
/// the lattice line through `centre` where `u` reaches `threshold`, refined
/// by linear interpolation towards the next point outward. Zero if `u` never
/// reaches the threshold on that line.
pub fn front_position(u: &ScalarField, axis: usize, centre: [f64; 3], threshold: f64) -> f64 {
    assert!(axis < 3, "axis must be 0, 1 or 2");
    let grid = u.grid();
    let dims = grid.dims();
    let h = grid.spacing();
    let origin = grid.origin();
    let nearest = |a: usize| -> usize {
        let idx = ((centre[a] - origin[a]) / h).round();
        idx.clamp(0.0, (dims[a] - 1) as f64) as usize
    };
    let mut base = [nearest(0), nearest(1), nearest(2)];
    let n = dims[axis];
    let line: Vec<f64> = (0..n)
        .map(|k| {
            base[axis] = k;
            u.values()[base[0] + dims[0] * (base[1] + dims[1] * base[2])]
        })
        .collect();
    let coord = |k: usize| origin[axis] + k as f64 * h;

    let mut farthest: f64 = 0.0;
    for (k, &val) in line.iter().enumerate() {
        if val < threshold {
            continue;
        }
        let x = coord(k);
        let outward: isize = if x >= centre[axis] { 1 } else { -1 };
        let mut reach = (x - centre[axis]).abs();
        let next = k as isize + outward;
        if (0..n as isize).contains(&next) {
            let nv = line[next as usize];
            if nv < threshold {
                reach += (val - threshold) / (val - nv) * h;
            }
        }
        farthest = farthest.max(reach);
    }
    farthest
}

/// A tracked front position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrontSample {
    pub time: f64,
    pub position: f64,
}

/// Which samples enter the velocity fit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitWindow {
    /// Fraction of the earliest samples discarded as transient.
    pub skip_fraction: f64,
    /// Samples closer than this to the seed are discarded.
    pub min_position: f64,
    /// Samples farther than this (boundary contamination) are discarded.
    pub max_position: f64,
}

impl FitWindow {
    /// Skip the first 20% and keep only fronts at least five spacings from
    /// both the seed and the far boundary at distance `extent`.
    pub fn for_domain(h: f64, extent: f64) -> Self {
        FitWindow {
            skip_fraction: 0.2,
            min_position: 5.0 * h,
            max_position: extent - 5.0 * h,
        }
    }

    /// Only the transient skip.
    pub fn unbounded() -> Self {
        FitWindow {
            skip_fraction: 0.2,
            min_position: f64::NEG_INFINITY,
            max_position: f64::INFINITY,
        }
    }
}

/// Least-squares slope of position against time over the fit window.
pub fn estimate_velocity(samples: &[FrontSample], window: &FitWindow) -> Result<f64> {
    let skip = (window.skip_fraction * samples.len() as f64).ceil() as usize;
    let kept: Vec<&FrontSample> = samples
        .iter()
        .skip(skip)
        .filter(|s| s.position >= window.min_position && s.position <= window.max_position)
        .collect();
    if kept.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "velocity fit needs at least 3 samples in the window, found {}",
            kept.len()
        )));
    }
    let n = kept.len() as f64;
    let mean_t = kept.iter().map(|s| s.time).sum::<f64>() / n;
    let mean_x = kept.iter().map(|s| s.position).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for s in &kept {
        let dt = s.time - mean_t;
        sxy += dt * (s.position - mean_x);
        sxx += dt * dt;
    }
    if sxx == 0.0 {
        return Err(Error::InvalidInput("velocity fit needs distinct sample times".into()));
    }
    Ok(sxy / sxx)
}

/// Homogeneous-medium slab experiment measuring the front speed.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveSpeedSetup {
    /// Lattice spacing, mm.
    pub spacing: f64,
    /// Slab length along x, mm.
    pub length: f64,
    /// Step length, days.
    pub tau: f64,
    /// Simulated time, days.
    pub duration: f64,
    /// Density level tracked as the front.
    pub threshold: f64,
}

impl Default for WaveSpeedSetup {
    fn default() -> Self {
        WaveSpeedSetup {
            spacing: 0.5,
            length: 200.0,
            tau: 1.0,
            duration: 1600.0,
            threshold: 0.5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct WaveSpeedResult {
    pub measured: f64,
    pub theory: TheoreticalVelocity,
    pub samples: Vec<FrontSample>,
    /// False when no sample fell inside the fit window and the slope was
    /// taken over the whole run instead.
    pub windowed: bool,
}

impl WaveSpeedResult {
    /// `|measured − 2√(Dρ)| / 2√(Dρ)`.
    pub fn relative_deviation(&self) -> f64 {
        (self.measured - self.theory.kpp).abs() / self.theory.kpp
    }
}

/// Runs a front from the `x = 0` end of a two-row slab of uniform
/// diffusivity `d` and fits its speed.
pub fn wave_speed_experiment(
    model: &ModelParams,
    d: f64,
    seed: &SeedParams,
    setup: &WaveSpeedSetup,
    tol: f64,
) -> Result<WaveSpeedResult> {
    if !(setup.spacing > 0.0 && setup.length > setup.spacing && setup.tau > 0.0 && setup.duration > setup.tau) {
        return Err(Error::InvalidInput(format!("degenerate wave-speed setup {setup:?}")));
    }
    let nx = (setup.length / setup.spacing).round() as usize + 1;
    let grid = Grid::new([nx, 2, 1], setup.spacing, [0.0; 3])?;
    let extent = (nx - 1) as f64 * setup.spacing;
    // both rows sit at the same distance from the seed, so the front stays planar
    let centre = [0.0, 0.5 * setup.spacing, 0.0];
    let seed = SeedParams {
        center: centre,
        ..seed.clone()
    };
    let initial = seed_initial(&grid, &seed, None)?;
    let a = assemble(&DiffusionField::uniform(grid, d)?);
    let steps = (setup.duration / setup.tau).round() as usize;
    let times = TimeGrid::new(0.0, steps as f64 * setup.tau, steps)?;
    let mut samples = Vec::with_capacity(steps + 1);
    integrate(initial, &a, model.rho, &times, tol, |_, t, u| {
        samples.push(FrontSample {
            time: t,
            position: front_position(u, 0, centre, setup.threshold),
        });
        Ok(())
    })?;
    let window = FitWindow::for_domain(setup.spacing, extent);
    let (measured, windowed) = match estimate_velocity(&samples, &window) {
        Ok(v) => (v, true),
        Err(Error::InvalidInput(msg)) => {
            log::warn!("{msg}; fitting the whole run (front pinned or too slow?)");
            (estimate_velocity(&samples, &FitWindow::unbounded())?, false)
        }
        Err(e) => return Err(e),
    };
    let theory = theoretical_velocity(1.0, 0.0, &ModelParams { d_white: d, ..model.clone() })?;
    Ok(WaveSpeedResult {
        measured,
        theory,
        samples,
        windowed,
    })
}

/// Relative change of total mass over a sequence of fields.
fn max_mass_drift(masses: &[f64]) -> f64 {
    let m0 = masses[0];
    masses
        .iter()
        .map(|m| (m - m0).abs() / m0.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Outcome of one check in a [`ValidationReport`].
#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    /// `None` when the check does not apply (e.g. no wave for ρ = 0).
    pub passed: Option<bool>,
    pub detail: String,
}

#[derive(Clone, Debug, Default)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
    pub wave: Option<WaveSpeedResult>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed != Some(false))
    }
}

/// Thresholds used by [`validate`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidationLimits {
    pub max_speed_deviation: f64,
    pub max_mass_drift: f64,
    pub sup_norm_slack: f64,
}

impl Default for ValidationLimits {
    fn default() -> Self {
        ValidationLimits {
            max_speed_deviation: 0.15,
            max_mass_drift: 1e-8,
            sup_norm_slack: 1e-10,
        }
    }
}

/// Pure diffusion of a smooth bump on a small box: returns per-step masses
/// and sup norms.
fn diffusion_history(h: f64, d: f64, tau: f64, steps: usize, tol: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = Grid::new([6, 6, 6], h, [0.0; 3])?;
    let initial = seed_initial(
        &grid,
        &SeedParams {
            center: [1.5 * h, 2.5 * h, 3.5 * h],
            amplitude: 0.8,
            width: 0.32 / (h * h),
        },
        None,
    )?;
    let a = assemble(&DiffusionField::uniform(grid, d)?);
    let times = TimeGrid::new(0.0, tau * steps as f64, steps)?;
    let (mut masses, mut sups) = (Vec::new(), Vec::new());
    integrate(initial, &a, 0.0, &times, tol, |_, _, u| {
        masses.push(u.values().iter().sum());
        sups.push(u.values().iter().fold(0.0f64, |m, x| m.max(x.abs())));
        Ok(())
    })?;
    Ok((masses, sups))
}

/// Wave speed (skipped when ρ = 0), mass conservation and sup-norm decay of
/// the configured model.
pub fn validate(cfg: &SimConfig, setup: &WaveSpeedSetup, limits: &ValidationLimits) -> Result<ValidationReport> {
    let mut report = ValidationReport::default();
    let model = &cfg.model;
    let tol = cfg.time.action_tol;

    if model.rho > 0.0 && model.d_white > 0.0 {
        let wave = wave_speed_experiment(model, model.d_white, &cfg.seed, setup, tol)?;
        let dev = wave.relative_deviation();
        report.checks.push(CheckResult {
            name: "fisher wave speed",
            passed: Some(dev <= limits.max_speed_deviation),
            detail: format!(
                "measured {:.5} mm/day, 2*sqrt(D*rho) = {:.5}, 2*sqrt(D)*rho = {:.5}, deviation {:.2}% (limit {:.0}%)",
                wave.measured,
                wave.theory.kpp,
                wave.theory.sqrt_d_times_rho,
                100.0 * dev,
                100.0 * limits.max_speed_deviation
            ) + if wave.windowed { "" } else { " [front never entered the fit window]" },
        });
        report.wave = Some(wave);
    } else {
        report.checks.push(CheckResult {
            name: "fisher wave speed",
            passed: None,
            detail: "skipped: no travelling wave without growth and diffusion".into(),
        });
    }

    let d = model.d_white;
    let (masses, _) = diffusion_history(8.0, d, cfg.tau(), cfg.time.num_steps, tol)?;
    let drift = max_mass_drift(&masses);
    report.checks.push(CheckResult {
        name: "mass conservation",
        passed: Some(drift <= limits.max_mass_drift),
        detail: format!(
            "rho = 0, {} steps of {:.4} d: max relative drift {drift:.3e} (limit {:.0e})",
            cfg.time.num_steps,
            cfg.tau(),
            limits.max_mass_drift
        ),
    });

    let huge_tau = 1e6;
    let (masses, sups) = diffusion_history(40.0, d, huge_tau, 100, tol)?;
    let drift = max_mass_drift(&masses);
    let growth = sups
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::NEG_INFINITY, f64::max);
    report.checks.push(CheckResult {
        name: "large-step stability",
        passed: Some(growth <= limits.sup_norm_slack && drift <= limits.max_mass_drift),
        detail: format!(
            "rho = 0, 100 steps of {huge_tau:.0e} d: max sup-norm increase {growth:.3e}, mass drift {drift:.3e}"
        ),
    });

    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn model() -> ModelParams {
        ModelParams {
            rho: 0.025,
            d_white: 0.13,
            d_gray: 0.013,
        }
    }

    #[test]
    fn white_matter_velocity() {
        let v = theoretical_velocity(1.0, 0.0, &model()).unwrap();
        assert!((v.kpp - 2.0 * 0.00325f64.sqrt()).abs() < 1e-15);
        assert!((v.kpp - 0.114).abs() < 1e-3);
        assert!((v.sqrt_d_times_rho - 2.0 * 0.13f64.sqrt() * 0.025).abs() < 1e-15);
    }

    #[test]
    fn mixed_matter_velocity() {
        let v = theoretical_velocity(0.3, 0.7, &model()).unwrap();
        assert!((v.effective_d - 0.0481).abs() < 1e-15);
        assert!((v.kpp - 2.0 * (0.0481f64 * 0.025).sqrt()).abs() < 1e-15);
        assert!((v.kpp - 0.0694).abs() < 1e-4);
    }

    #[test]
    fn no_growth_no_speed() {
        let m = ModelParams { rho: 0.0, ..model() };
        assert_eq!(theoretical_velocity(0.5, 0.5, &m).unwrap().kpp, 0.0);
        assert!(theoretical_velocity(0.5, 0.6, &m).is_err());
        assert!(theoretical_velocity(-0.1, 1.1, &m).is_err());
    }

    #[test]
    fn white_dominates_gray() {
        let w = theoretical_velocity(1.0, 0.0, &model()).unwrap();
        let g = theoretical_velocity(0.0, 1.0, &model()).unwrap();
        assert!(w.kpp >= g.kpp && w.sqrt_d_times_rho >= g.sqrt_d_times_rho);
    }

    fn line_field(h: f64, f: impl Fn(f64) -> f64, n: usize) -> ScalarField {
        let g = Grid::new([n, 1, 1], h, [0.0; 3]).unwrap();
        let vals = (0..n).map(|i| f(i as f64 * h)).collect();
        ScalarField::from_values(g, vals).unwrap()
    }

    #[test]
    fn front_of_zero_field() {
        let u = line_field(1.0, |_| 0.0, 50);
        assert_eq!(front_position(&u, 0, [0.0; 3], 0.1), 0.0);
    }

    #[test]
    fn front_of_step_profile() {
        let h = 1.0;
        let u = line_field(h, |x| if x <= 30.0 { 1.0 } else { 0.0 }, 101);
        let r = front_position(&u, 0, [0.0; 3], 0.1);
        assert!((r - 30.0).abs() <= h, "{r}");
    }

    #[test]
    fn front_of_linear_ramp() {
        let h = 0.7;
        let u = line_field(h, |x| (1.0 - x / 100.0).max(0.0), 150);
        let r = front_position(&u, 0, [0.0; 3], 0.1);
        assert!((r - 90.0).abs() <= h / 2.0, "{r}");
    }

    #[test]
    fn front_looks_both_ways() {
        let u = line_field(1.0, |x| if (x - 20.0).abs() <= 7.0 { 1.0 } else { 0.0 }, 41);
        let r = front_position(&u, 0, [20.0, 0.0, 0.0], 0.5);
        assert!((r - 7.5).abs() < 1e-12, "{r}");
    }

    #[test]
    fn synthetic_linear_front() {
        let samples: Vec<_> = (0..50)
            .map(|k| {
                let t = 150.0 + 10.0 * k as f64;
                FrontSample { time: t, position: 0.11 * (t - 150.0) }
            })
            .collect();
        let v = estimate_velocity(&samples, &FitWindow::unbounded()).unwrap();
        assert!((v - 0.11).abs() < 1e-12);
    }

    #[test]
    fn constant_front_has_zero_speed() {
        let samples: Vec<_> = (0..10)
            .map(|k| FrontSample { time: k as f64, position: 4.0 })
            .collect();
        assert_eq!(estimate_velocity(&samples, &FitWindow::unbounded()).unwrap(), 0.0);
    }

    #[test]
    fn too_few_samples() {
        let samples: Vec<_> = (0..3)
            .map(|k| FrontSample { time: k as f64, position: k as f64 })
            .collect();
        assert!(estimate_velocity(&samples, &FitWindow::unbounded()).is_err());
        let window = FitWindow::for_domain(1.0, 100.0);
        let near_seed: Vec<_> = (0..20)
            .map(|k| FrontSample { time: k as f64, position: 0.1 * k as f64 })
            .collect();
        assert!(estimate_velocity(&near_seed, &window).is_err());
    }

    proptest! {
        #[test]
        fn velocity_is_translation_invariant(
            slope in -1.0f64..1.0,
            noise in proptest::collection::vec(-0.5f64..0.5, 10..40),
            dt in -1e3f64..1e3,
            dx in -50.0f64..50.0,
        ) {
            let samples: Vec<_> = noise.iter().enumerate()
                .map(|(k, e)| FrontSample { time: 3.0 * k as f64, position: slope * 3.0 * k as f64 + e })
                .collect();
            let shifted: Vec<_> = samples.iter()
                .map(|s| FrontSample { time: s.time + dt, position: s.position + dx })
                .collect();
            let w = FitWindow::unbounded();
            let a = estimate_velocity(&samples, &w).unwrap();
            let b = estimate_velocity(&shifted, &w).unwrap();
            prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b);
        }
    }
}
