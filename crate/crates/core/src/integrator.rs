//! Exponential Euler time stepping for `U' = A·U + F(U)`.
//!
//! One step reads
//!
//! ```text
//! U_{n+1} = exp(τA)·U_n + τ·φ₁(τA)·F(U_n)
//!         = U_n + τ·φ₁(τA)·(A·U_n + F(U_n))
//! ```
//!
//! using `exp(z) = 1 + z·φ₁(z)`, so each step costs one φ₁ action. The
//! scheme is exact when `F ≡ 0` and first order in τ otherwise.

use std::time::{Duration, Instant};

use crate::config::{SeedParams, SimConfig};
use crate::error::{Error, Result};
use crate::expact::phi1v;
use crate::grid::{Grid, ScalarField};
use crate::imaging::{DiffusionField, MaterialVolume};
use crate::operator::{assemble, reaction_into, LinearOperator, SparseOperator};

/// Band outside of which densities trigger a diagnostic warning.
pub const DENSITY_BAND: (f64, f64) = (-0.01, 1.01);

/// Uniform partition `t_n = t0 + n·τ` of `[t0, t_end]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    t_end: f64,
    num_steps: usize,
}

impl TimeGrid {
    /// `num_steps == 0` is allowed and describes an empty run.
    pub fn new(t0: f64, t_end: f64, num_steps: usize) -> Result<Self> {
        if !(t0.is_finite() && t_end.is_finite()) || t_end <= t0 {
            return Err(Error::InvalidInput(format!(
                "time interval [{t0}, {t_end}] must be finite with t_end > t0"
            )));
        }
        Ok(TimeGrid { t0, t_end, num_steps })
    }

    pub fn from_config(cfg: &SimConfig) -> Result<Self> {
        TimeGrid::new(cfg.time.t0, cfg.time.t_end, cfg.time.num_steps)
    }

    pub fn num_steps(&self) -> usize {
        self.num_steps
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn tau(&self) -> f64 {
        (self.t_end - self.t0) / self.num_steps.max(1) as f64
    }

    /// `t_n`; the last node is `t_end` exactly.
    pub fn time(&self, n: usize) -> f64 {
        if n >= self.num_steps {
            self.t_end
        } else {
            self.t0 + n as f64 * self.tau()
        }
    }
}

/// Gaussian initial density `amplitude·exp(−width·‖x − centre‖²)`, zero
/// outside tissue when a material volume is supplied.
pub fn seed_initial(grid: &Grid, seed: &SeedParams, materials: Option<&MaterialVolume>) -> Result<ScalarField> {
    if !grid.contains(seed.center) {
        return Err(Error::InvalidInput(format!(
            "seed centre {:?} lies outside the grid box {:?}",
            seed.center,
            grid.bounds()
        )));
    }
    if let Some(mv) = materials {
        if mv.grid().dims() != grid.dims() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: mv.grid().len(),
            });
        }
    }
    let values = (0..grid.len())
        .map(|v| {
            if materials.is_some_and(|mv| !mv.labels()[v].is_tissue()) {
                return 0.0;
            }
            let r2 = squared_distance(grid.point(v), seed.center);
            seed.amplitude * (-seed.width * r2).exp()
        })
        .collect();
    ScalarField::from_values(*grid, values)
}

fn squared_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

/// Largest distance from `centre` of any voxel with density ≥ `threshold`;
/// zero when no voxel reaches it.
pub fn tumor_radius(u: &ScalarField, centre: [f64; 3], threshold: f64) -> f64 {
    let grid = u.grid();
    u.values()
        .iter()
        .enumerate()
        .filter(|(_, &x)| x >= threshold)
        .map(|(v, _)| squared_distance(grid.point(v), centre))
        .fold(0.0, f64::max)
        .sqrt()
}

/// One exponential Euler step of length `tau`. `index` only labels errors.
pub fn step(u: &ScalarField, a: &SparseOperator, rho: f64, tau: f64, tol: f64, index: usize) -> Result<ScalarField> {
    let n = a.dim();
    if u.values().len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: u.values().len(),
        });
    }
    let mut rhs = vec![0.0; n];
    a.apply_into(u.values(), &mut rhs);
    let mut growth = vec![0.0; n];
    reaction_into(u.values(), rho, &mut growth);
    for (r, g) in rhs.iter_mut().zip(&growth) {
        *r += g;
    }
    let increment = phi1v(tau, a, &rhs, tol).map_err(|e| match e {
        Error::Overflow { .. } | Error::NonFinite(_) => Error::StepFailed { step: index },
        other => other,
    })?;
    let next: Vec<f64> = u
        .values()
        .iter()
        .zip(&increment)
        .map(|(&x, &dx)| x + tau * dx)
        .collect();
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::StepFailed { step: index });
    }
    ScalarField::from_values(*u.grid(), next)
}

/// Advances `initial` over `times`, calling `observe(n, t_n, U_n)` for
/// `n = 0..=N`. Returns `U_N`.
pub fn integrate<F>(
    initial: ScalarField,
    a: &SparseOperator,
    rho: f64,
    times: &TimeGrid,
    tol: f64,
    mut observe: F,
) -> Result<ScalarField>
where
    F: FnMut(usize, f64, &ScalarField) -> Result<()>,
{
    let tau = times.tau();
    let mut u = initial;
    observe(0, times.time(0), &u)?;
    for n in 1..=times.num_steps() {
        u = step(&u, a, rho, tau, tol, n)?;
        observe(n, times.time(n), &u)?;
    }
    Ok(u)
}

/// Per-step diagnostics recorded by [`run`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepMetrics {
    pub step: usize,
    pub time: f64,
    /// `Σ u · h^d`.
    pub total_mass: f64,
    pub max_density: f64,
    /// See [`tumor_radius`].
    pub radius: f64,
}

impl StepMetrics {
    pub fn measure(step: usize, time: f64, u: &ScalarField, centre: [f64; 3], threshold: f64) -> Self {
        StepMetrics {
            step,
            time,
            total_mass: u.total_mass(),
            max_density: u.max_value(),
            radius: tumor_radius(u, centre, threshold),
        }
    }
}

/// Receives density snapshots during [`run`].
pub trait OutputSink {
    fn snapshot(&mut self, step: usize, time: f64, field: &ScalarField) -> Result<()>;
}

/// Wall-clock split of a run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunTiming {
    pub assembly: Duration,
    /// Time stepping, excluding time spent in sinks.
    pub time_loop: Duration,
    pub output: Duration,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub final_field: ScalarField,
    pub initial_field: ScalarField,
    pub metrics: Vec<StepMetrics>,
    pub timing: RunTiming,
}

/// Full simulation: seed, assemble, step `num_steps` times.
///
/// Snapshots go to every sink at step 0, every `output.snapshot_every`
/// steps and at the last step; metrics are recorded on the
/// `output.metrics_every` cadence (plus the first and last step).
pub fn run(
    cfg: &SimConfig,
    diffusion: &DiffusionField,
    materials: Option<&MaterialVolume>,
    sinks: &mut [&mut dyn OutputSink],
) -> Result<RunOutput> {
    let grid = cfg.lattice()?;
    if diffusion.grid().dims() != grid.dims() {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            actual: diffusion.grid().len(),
        });
    }
    let times = TimeGrid::new(cfg.time.t0, cfg.time.t_end, cfg.time.num_steps)?;
    let initial = seed_initial(&grid, &cfg.seed, materials)?;
    if initial.max_value() < 1e-3 * cfg.seed.amplitude.abs() {
        log::warn!(
            "seed is under-resolved: peak initial density {:.3e} vs amplitude {}; \
             consider a finer grid or a smaller seed width",
            initial.max_value(),
            cfg.seed.amplitude
        );
    }

    let started = Instant::now();
    let a = assemble(diffusion);
    let assembly = started.elapsed();
    log::info!(
        "assembled operator: {} unknowns, {} nonzeros, |tau*A|_1 = {:.3e} ({:.3?})",
        a.dim(),
        a.nnz(),
        times.tau() * a.one_norm(),
        assembly
    );

    let out = &cfg.output;
    let last = times.num_steps();
    let mut metrics = Vec::new();
    let mut output_time = Duration::ZERO;
    let mut warned = false;
    let loop_start = Instant::now();
    let report_every = (last / 10).max(1);

    let final_field = integrate(initial.clone(), &a, cfg.model.rho, &times, cfg.time.action_tol, |n, t, u| {
        if !warned && (u.min_value() < DENSITY_BAND.0 || u.max_value() > DENSITY_BAND.1) {
            warned = true;
            log::warn!(
                "density left [{}, {}] at step {n}: range [{:.4}, {:.4}]",
                DENSITY_BAND.0,
                DENSITY_BAND.1,
                u.min_value(),
                u.max_value()
            );
        }
        if n % out.metrics_every == 0 || n == last {
            metrics.push(StepMetrics::measure(n, t, u, cfg.seed.center, out.radius_threshold));
        }
        if n % out.snapshot_every == 0 || n == last {
            let io_start = Instant::now();
            for sink in sinks.iter_mut() {
                sink.snapshot(n, t, u)?;
            }
            output_time += io_start.elapsed();
        }
        if n > 0 && (n % report_every == 0 || n == last) {
            log::info!(
                "step {n}/{last}  t = {t:.1} d  max u = {:.4}  wall {:.2?}",
                u.max_value(),
                loop_start.elapsed()
            );
        }
        Ok(())
    })?;
    let time_loop = loop_start.elapsed().saturating_sub(output_time);

    Ok(RunOutput {
        final_field,
        initial_field: initial,
        metrics,
        timing: RunTiming {
            assembly,
            time_loop,
            output: output_time,
        },
    })
}
