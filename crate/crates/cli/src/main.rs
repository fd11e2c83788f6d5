use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use gliosim::analysis::{self, ValidationLimits, WaveSpeedSetup};
use gliosim::imaging::{self, diffusion_from_materials, Material};
use gliosim::integrator::{self, OutputSink};
use gliosim::io::{write_metrics_csv, VtkSeriesWriter};
use gliosim::{DiffusionField, ImageStack, MaterialVolume, Preset, SimConfig};

const CONFIG_KEYS: &str = "\
Config file keys (TOML; every key optional, layered over the preset):
  [model]    rho (1/day), d_white, d_gray (mm^2/day)
  [grid]     nx, ny, nz (points per axis; nz = 1 for 2-D), spacing (mm), origin = [x, y, z] (mm)
  [time]     t0, t_end (days), num_steps, action_tol
  [seed]     center = [x, y, z] (mm), amplitude, width (1/mm^2)
  [imaging]  air_max, white_max, gray_max (intensity upper bounds), pixel_spacing, slice_thickness (mm)
  [output]   snapshot_every, metrics_every (steps), radius_threshold

Presets: paper-3d (default), paper-2d, bench-32.
Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure or failed validation.";

#[derive(Parser)]
#[command(name = "gliosim", version, about = "Brain tumor growth simulation on voxel grids", after_long_help = CONFIG_KEYS)]
struct Cli {
    /// Worker threads for the sparse kernels (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a slice stack or raw volume into a label volume on the grid.
    #[command(after_long_help = CONFIG_KEYS)]
    Ingest(IngestArgs),
    /// Run a simulation, writing VTK snapshots and metrics.csv.
    #[command(after_long_help = CONFIG_KEYS)]
    Run(RunArgs),
    /// Check wave speed, mass conservation and large-step stability.
    #[command(after_long_help = CONFIG_KEYS)]
    Validate(ValidateArgs),
    /// Time the simulation loop without writing output.
    #[command(after_long_help = CONFIG_KEYS)]
    Bench(BenchArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file layered over the preset.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base parameter set.
    #[arg(long, value_name = "NAME")]
    preset: Option<Preset>,
}

impl ConfigArgs {
    fn load(&self, default: Preset) -> anyhow::Result<SimConfig> {
        let base = self.preset.unwrap_or(default).config();
        let cfg = match &self.config {
            Some(path) => SimConfig::load_over(path, base)?,
            None => base,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct IngestArgs {
    /// Directory of .pgm slices, or a raw `nx ny nz` volume file.
    input: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Label volume to write.
    #[arg(long, value_name = "FILE", default_value = "labels.raw")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Label volume from `ingest` (default: homogeneous white matter).
    #[arg(long, value_name = "FILE")]
    materials: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Write a snapshot every K steps (overrides output.snapshot_every).
    #[arg(long, value_name = "K", value_parser = clap::value_parser!(u64).range(1..))]
    snapshot_every: Option<u64>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Wave-speed slab spacing, mm.
    #[arg(long)]
    spacing: Option<f64>,
    /// Wave-speed slab length, mm.
    #[arg(long)]
    length: Option<f64>,
    /// Wave-speed step, days.
    #[arg(long)]
    tau: Option<f64>,
    /// Wave-speed simulated time, days.
    #[arg(long)]
    duration: Option<f64>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Label volume from `ingest` (default: homogeneous white matter).
    #[arg(long, value_name = "FILE")]
    materials: Option<PathBuf>,
    /// Number of timed runs.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    repeat: u64,
}

/// Failure that maps to an exit code.
enum Failure {
    Data(anyhow::Error),
    Numerical(anyhow::Error),
    Validation,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let numerical = e
            .chain()
            .any(|c| c.downcast_ref::<gliosim::Error>().is_some_and(|e| e.is_numerical()));
        if numerical {
            Failure::Numerical(e)
        } else {
            Failure::Data(e)
        }
    }
}

impl From<gliosim::Error> for Failure {
    fn from(e: gliosim::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(2);
        }
    }

    let result = match cli.command {
        Command::Ingest(args) => ingest(args),
        Command::Run(args) => run(args),
        Command::Validate(args) => validate(args),
        Command::Bench(args) => bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(3)
        }
        Err(Failure::Validation) => ExitCode::from(3),
    }
}

fn load_input(path: &Path) -> anyhow::Result<ImageStack> {
    if path.is_dir() {
        let files = imaging::slice_files(path)?;
        log::info!("reading {} slices from {}", files.len(), path.display());
        Ok(imaging::load_stack(&files)?)
    } else if path.is_file() {
        Ok(ImageStack::load_raw(path)?)
    } else {
        bail!("{}: no such file or directory", path.display())
    }
}

fn ingest(args: IngestArgs) -> Result<(), Failure> {
    let cfg = args.config.load(Preset::Paper3d)?;
    let grid = cfg.lattice()?;
    let stack = load_input(&args.input)?;
    let [w, h, s] = stack.dims();
    let mv = imaging::resample(&stack, &grid, &cfg.thresholds())?;
    imaging::write_label_volume(&mv, &args.out)?;

    let [nx, ny, nz] = grid.dims();
    println!("input      {w} x {h} x {s} intensities");
    println!("grid       {nx} x {ny} x {nz}, h = {:.4} mm", grid.spacing());
    for m in Material::ALL {
        let count = mv.labels().iter().filter(|&&l| l == m).count();
        println!("{:<10} {count:>9} voxels", format!("{m:?}").to_lowercase());
    }
    match imaging::matter_fractions(&mv) {
        Ok((white, gray)) => {
            println!("white matter {:>6.2}%", 100.0 * white);
            println!("gray matter  {:>6.2}%", 100.0 * gray);
        }
        Err(e) => log::warn!("{e}"),
    }
    println!("wrote {}", args.out.display());
    Ok(())
}

fn tissue(cfg: &SimConfig, path: Option<&Path>) -> anyhow::Result<(Option<MaterialVolume>, DiffusionField)> {
    let grid = cfg.lattice()?;
    match path {
        Some(path) => {
            let mv = imaging::read_label_volume(path, grid)?;
            let d = diffusion_from_materials(&mv, &cfg.model);
            Ok((Some(mv), d))
        }
        None => {
            log::info!("no material volume given: homogeneous white matter");
            Ok((None, DiffusionField::uniform(grid, cfg.model.d_white)?))
        }
    }
}

fn run(args: RunArgs) -> Result<(), Failure> {
    let mut cfg = args.config.load(Preset::Paper3d)?;
    if let Some(k) = args.snapshot_every {
        cfg.output.snapshot_every = k as usize;
    }
    let (mv, d) = tissue(&cfg, args.materials.as_deref())?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let g = &cfg.grid;
    log::info!(
        "{} x {} x {} grid, {} steps of {:.4} days",
        g.nx,
        g.ny,
        g.nz,
        cfg.time.num_steps,
        cfg.tau()
    );

    let mut vtk = VtkSeriesWriter::new(&args.out, "tumor", mv.as_ref());
    let sinks: &mut [&mut dyn OutputSink] = &mut [&mut vtk];
    let out = integrator::run(&cfg, &d, mv.as_ref(), sinks)?;

    let started = Instant::now();
    write_metrics_csv(&out.metrics, &args.out.join("metrics.csv"))?;
    let output = out.timing.output + started.elapsed();

    let last = out.metrics.last().expect("metrics include the final step");
    println!(
        "final: t = {:.1} days, max density {:.4}, radius {:.2} mm, mass {:.4e}",
        last.time, last.max_density, last.radius, last.total_mass
    );
    println!("snapshots  {} files in {}", vtk.written().len(), args.out.display());
    print_timing(out.timing.assembly, out.timing.time_loop, Some(output));
    Ok(())
}

fn print_timing(assembly: Duration, time_loop: Duration, output: Option<Duration>) {
    println!("assembly   {:>10.3} s", assembly.as_secs_f64());
    println!("time loop  {:>10.3} s", time_loop.as_secs_f64());
    if let Some(output) = output {
        println!("output     {:>10.3} s", output.as_secs_f64());
    }
}

fn validate(args: ValidateArgs) -> Result<(), Failure> {
    let cfg = args.config.load(Preset::Paper3d)?;
    let defaults = WaveSpeedSetup::default();
    let setup = WaveSpeedSetup {
        spacing: args.spacing.unwrap_or(defaults.spacing),
        length: args.length.unwrap_or(defaults.length),
        tau: args.tau.unwrap_or(defaults.tau),
        duration: args.duration.unwrap_or(defaults.duration),
        ..defaults
    };
    let limits = ValidationLimits::default();
    let report = analysis::validate(&cfg, &setup, &limits)?;

    if let Some(wave) = &report.wave {
        println!("wave speed (D = {}, rho = {})", cfg.model.d_white, cfg.model.rho);
        println!("  theory 2*sqrt(D*rho)   {:.5} mm/day", wave.theory.kpp);
        println!("  theory 2*sqrt(D)*rho   {:.5} mm/day", wave.theory.sqrt_d_times_rho);
        println!("  measured               {:.5} mm/day", wave.measured);
        println!("  relative deviation     {:.2}%", 100.0 * wave.relative_deviation());
        println!();
    }
    for check in &report.checks {
        let status = match check.passed {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "SKIP",
        };
        println!("{status}  {:<22} {}", check.name, check.detail);
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Validation)
    }
}

fn bench(args: BenchArgs) -> Result<(), Failure> {
    let cfg = args.config.load(Preset::Bench32)?;
    let (mv, d) = tissue(&cfg, args.materials.as_deref())?;
    let g = &cfg.grid;
    println!("{} x {} x {} grid, {} steps, {} workers", g.nx, g.ny, g.nz, cfg.time.num_steps, rayon::current_num_threads());
    let mut best = Duration::MAX;
    for r in 1..=args.repeat {
        let out = integrator::run(&cfg, &d, mv.as_ref(), &mut [])?;
        println!("run {r}: time loop {:.3} s", out.timing.time_loop.as_secs_f64());
        if out.timing.time_loop < best {
            best = out.timing.time_loop;
        }
        if r == args.repeat {
            print_timing(out.timing.assembly, best, None);
        }
    }
    Ok(())
}
