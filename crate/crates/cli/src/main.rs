use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{error::ErrorKind, Args, Parser, Subcommand};

use kfp_cli::config::{
    ConfigFile, DomainConfig, InitialConfig, ModeConfig, ResolvedConfig, SpatialConfig,
};
use kfp_cli::output::{
    density_file_name, ensure_dir, write_density_csv, write_json, write_manifest,
};
use kfp_cli::report::{TraceReport, Verdict};
use kfp_cli::studies::{
    converge_study, integrability_study, is_usage_error, simulate, weak_residual_study,
};
use kfp_cli::{HarnessError, Result};
use kfp_core::endpoint::{chord_data, endpoint_derivatives, DerivativeMode};
use kfp_core::geometry::Domain;
use kfp_core::heat::{heat_solve, project_initial};
use kfp_core::linalg::Vector;
use kfp_core::mesh::Mesh;

#[derive(Parser)]
#[command(
    name = "kfp",
    version,
    about = "Kinetic Fokker-Planck dynamics in a reflecting ball: specular billiards, \
             particle runs and diffusion-limit verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonOpts {
    /// JSON config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated Knudsen numbers, e.g. 0.4,0.2,0.1.
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    n_particles: Option<usize>,
    /// Macroscopic time step; default eps^2/8 per run.
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    /// Base RNG seed (runs use seed, seed+1, ...).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_seeds: Option<usize>,
    #[arg(long)]
    mesh_nr: Option<usize>,
    #[arg(long)]
    mesh_ntheta: Option<usize>,
    #[arg(long)]
    mesh_radius: Option<f64>,
    /// Builtin initial datum: uniform | bump | eigenmode | blob.
    #[arg(long)]
    initial: Option<String>,
    /// Boundary mode: reflecting | free-space.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    snapshots: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// Domain dimension for the unit ball (2 or 3).
    #[arg(long)]
    dim: Option<usize>,
    /// Ellipse semi-axes a,b (level-set domain) instead of the unit ball.
    #[arg(long)]
    ellipse: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Trace one specular cycle and its end point.
    Trace {
        /// Start position, comma separated.
        #[arg(long)]
        x: String,
        /// Velocity, comma separated.
        #[arg(long)]
        v: String,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Tabulate the end-point map and its derivatives over samples.
    Endpoint {
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Use a deterministic parameter grid instead of random samples.
        #[arg(long)]
        grid: bool,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Run the particle solver and dump snapshot densities/diagnostics.
    Simulate {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Solve the Neumann heat equation on the disk.
    Heat {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Convergence of the particle density to the heat solution as eps -> 0.
    Converge {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Weak-formulation residual with end-point test functions.
    WeakResidual {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Monte Carlo integrability of (2/L)^p over phase space.
    Integrability {
        #[arg(long)]
        p: f64,
        /// Comma-separated sample schedule; default 100000,300000,1000000.
        #[arg(long)]
        schedule: Option<String>,
        #[arg(long, default_value_t = 4)]
        seed: u64,
        #[arg(long)]
        out: Option<String>,
    },
}

fn parse_f64_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| HarnessError::Config(format!("bad number '{s}': {e}")))
        })
        .collect()
}

fn parse_usize_list(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| HarnessError::Config(format!("bad count '{s}': {e}")))
        })
        .collect()
}

fn builtin_initial(name: &str) -> Result<InitialConfig> {
    let spatial = match name {
        "uniform" => SpatialConfig::Uniform,
        "bump" => SpatialConfig::Bump {
            center: vec![0.4, 0.0],
            width: 0.3,
        },
        "eigenmode" => SpatialConfig::EigenmodeMix { amplitude: 0.5 },
        "blob" => SpatialConfig::GaussianBlob {
            center: vec![0.0, 0.0],
            sigma: 0.25,
        },
        other => {
            return Err(HarnessError::Config(format!(
                "unknown initial datum '{other}' (expected uniform|bump|eigenmode|blob)"
            )))
        }
    };
    Ok(InitialConfig {
        spatial,
        velocity_variance: 1.0,
    })
}

fn resolve(common: &CommonOpts) -> Result<ResolvedConfig> {
    let file = match &common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let mut cfg = ResolvedConfig::from_file(&file);
    if let Some(eps) = &common.eps {
        cfg.eps = parse_f64_list(eps)?;
    }
    if let Some(n) = common.n_particles {
        cfg.n_particles = n;
    }
    if common.dt.is_some() {
        cfg.dt = common.dt;
    }
    if let Some(t) = common.t_end {
        cfg.t_end = t;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(s) = common.n_seeds {
        cfg.n_seeds = s;
    }
    if let Some(v) = common.mesh_nr {
        cfg.mesh.n_r = v;
    }
    if let Some(v) = common.mesh_ntheta {
        cfg.mesh.n_theta = v;
    }
    if let Some(v) = common.mesh_radius {
        cfg.mesh.radius = v;
    }
    if let Some(name) = &common.initial {
        cfg.initial = builtin_initial(name)?;
    }
    if let Some(mode) = &common.mode {
        cfg.boundary_mode = match mode.as_str() {
            "reflecting" => ModeConfig::Reflecting,
            "free-space" => ModeConfig::FreeSpace,
            other => {
                return Err(HarnessError::Config(format!(
                    "unknown boundary mode '{other}'"
                )))
            }
        };
    }
    if let Some(s) = common.snapshots {
        cfg.snapshots = s;
    }
    if let Some(dir) = &common.out {
        cfg.output_dir = dir.clone();
    }
    if let Some(axes) = &common.ellipse {
        cfg.domain = DomainConfig::Ellipse {
            semi_axes: parse_f64_list(axes)?,
        };
    } else if let Some(dim) = common.dim {
        cfg.domain = DomainConfig::UnitBall { dim };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_trace(x: &str, v: &str, common: &CommonOpts) -> Result<i32> {
    let started = Instant::now();
    let cfg = resolve(common)?;
    let xs = parse_f64_list(x)?;
    let vs = parse_f64_list(v)?;
    if xs.len() != vs.len() || xs.len() != cfg.domain.dim() {
        return Err(HarnessError::Config(
            "x and v must match the domain dimension".into(),
        ));
    }
    let report = match cfg.domain.dim() {
        2 => trace_in::<2>(&cfg, &xs, &vs)?,
        3 => trace_in::<3>(&cfg, &xs, &vs)?,
        d => {
            return Err(HarnessError::Config(format!(
                "unsupported dimension {d}; only 2 and 3"
            )))
        }
    };
    println!("{}", serde_json::to_string_pretty(&report)?);
    let dir = Path::new(&cfg.output_dir);
    ensure_dir(dir)?;
    write_json(&dir.join("trace.json"), &report)?;
    write_manifest(dir, "trace", cfg.hash(), cfg.seed, started)?;
    Ok(0)
}

fn trace_in<const D: usize>(
    cfg: &ResolvedConfig,
    xs: &[f64],
    vs: &[f64],
) -> Result<TraceReport> {
    let domain: Domain<f64, D> = cfg.domain.build()?;
    let mut x = [0.0; D];
    x.copy_from_slice(xs);
    let mut v = [0.0; D];
    v.copy_from_slice(vs);
    let (x, v) = (Vector(x), Vector(v));
    let result = if matches!(cfg.domain, DomainConfig::UnitBall { .. }) {
        kfp_core::billiards::endpoint_analytic(&x, &v)?
    } else {
        kfp_core::billiards::endpoint(&domain, &x, &v)?
    };
    Ok(TraceReport {
        x0: xs.to_vec(),
        v0: vs.to_vec(),
        breakpoints_tau: result.cycle.breakpoints_tau(),
        reflection_points: result
            .cycle
            .reflection_points()
            .iter()
            .map(|p| p.iter().copied().collect())
            .collect(),
        eta: result.eta.iter().copied().collect(),
        reflections: result.cycle.reflections(),
        near_grazing: result.cycle.near_grazing(),
        path_length: result.path_length,
    })
}

fn run_endpoint(samples: usize, grid: bool, common: &CommonOpts) -> Result<i32> {
    let started = Instant::now();
    let cfg = resolve(common)?;
    let rows = match cfg.domain.dim() {
        2 => endpoint_rows::<2>(&cfg, samples, grid)?,
        3 => endpoint_rows::<3>(&cfg, samples, grid)?,
        d => {
            return Err(HarnessError::Config(format!(
                "unsupported dimension {d}; only 2 and 3"
            )))
        }
    };
    let dir = Path::new(&cfg.output_dir);
    ensure_dir(dir)?;
    std::fs::write(dir.join("endpoint.csv"), rows)?;
    write_manifest(dir, "endpoint", cfg.hash(), cfg.seed, started)?;
    println!("wrote {}", dir.join("endpoint.csv").display());
    Ok(0)
}

fn endpoint_rows<const D: usize>(
    cfg: &ResolvedConfig,
    samples: usize,
    grid: bool,
) -> Result<String> {
    use rand::Rng;
    use rand::SeedableRng;
    let domain: Domain<f64, D> = cfg.domain.build()?;
    let mode = if matches!(cfg.domain, DomainConfig::UnitBall { .. }) {
        DerivativeMode::Analytic
    } else {
        DerivativeMode::FiniteDifference
    };
    let mut header = String::new();
    for i in 0..D {
        header.push_str(&format!("x{i},"));
    }
    for i in 0..D {
        header.push_str(&format!("v{i},"));
    }
    for i in 0..D {
        header.push_str(&format!("eta{i},"));
    }
    for i in 0..D {
        for j in 0..D {
            header.push_str(&format!("j{i}{j},"));
        }
    }
    for i in 0..D {
        header.push_str(&format!("lap{i},"));
    }
    header.push_str("n,l,near_grazing\n");

    let mut out = header;
    let mut emit = |x: Vector<f64, D>, v: Vector<f64, D>| -> Result<()> {
        let derivs = match endpoint_derivatives(&domain, &x, &v, mode) {
            Ok(d) => d,
            Err(_) => return Ok(()), // grazing or breakpoint-straddling: skip
        };
        let chord = chord_data(&x, &v).map(|c| c.length).unwrap_or(f64::NAN);
        let mut row = String::new();
        for i in 0..D {
            row.push_str(&format!("{},", x[i]));
        }
        for i in 0..D {
            row.push_str(&format!("{},", v[i]));
        }
        for i in 0..D {
            row.push_str(&format!("{},", derivs.eta[i]));
        }
        for i in 0..D {
            for j in 0..D {
                row.push_str(&format!("{},", derivs.jacobian[(i, j)]));
            }
        }
        for i in 0..D {
            row.push_str(&format!("{},", derivs.laplacian[i]));
        }
        row.push_str(&format!(
            "{},{},{}\n",
            derivs.reflections, chord, derivs.near_grazing
        ));
        out.push_str(&row);
        Ok(())
    };

    if grid {
        // Deterministic sweep: radial starts, an angle fan and a speed ramp.
        let k = (samples as f64).cbrt().ceil() as usize;
        for a in 0..k {
            let r = 0.9 * a as f64 / k.max(1) as f64;
            let mut x = [0.0; D];
            x[0] = r;
            for b in 0..k {
                let th = std::f64::consts::TAU * b as f64 / k as f64;
                for c in 0..k {
                    let speed = 0.25 + 9.75 * c as f64 / k as f64;
                    let mut v = [0.0; D];
                    v[0] = speed * th.cos();
                    v[1] = speed * th.sin();
                    emit(Vector(x), Vector(v))?;
                }
            }
        }
    } else {
        use kfp_core::scalar::Real;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut made = 0usize;
        while made < samples {
            let x: Vector<f64, D> = kfp_core::initial::sample_unit_ball(&mut rng);
            let dir: Vector<f64, D> =
                Vector::from_fn(|_| f64::standard_normal(&mut rng)).normalized();
            let speed = rng.random::<f64>() * 10.0;
            if speed == 0.0 {
                continue;
            }
            emit(x, dir * speed)?;
            made += 1;
        }
    }
    Ok(out)
}

fn run_simulate(common: &CommonOpts) -> Result<i32> {
    let started = Instant::now();
    let cfg = resolve(common)?;
    let eps = cfg.eps[0];
    let (report, densities) = simulate(&cfg, eps)?;
    let dir = Path::new(&cfg.output_dir);
    ensure_dir(dir)?;
    for (t, rho) in &densities {
        write_density_csv(&dir.join(density_file_name(eps, *t)), rho)?;
    }
    write_json(&dir.join("simulate.json"), &report)?;
    write_manifest(dir, "simulate", cfg.hash(), cfg.seed, started)?;
    println!(
        "simulated eps = {eps}: {} snapshots -> {}",
        report.snapshots.len(),
        dir.display()
    );
    Ok(0)
}

fn run_heat(common: &CommonOpts) -> Result<i32> {
    let started = Instant::now();
    let cfg = resolve(common)?;
    let spec = cfg.initial.build::<2>()?;
    let mesh = Mesh::polar(cfg.mesh.n_r, cfg.mesh.n_theta, cfg.mesh.radius)?;
    let rho0 = project_initial(&spec.spatial, &mesh)?;
    let dt = cfg.dt.unwrap_or(1e-3);
    let state = heat_solve(&rho0, cfg.t_end, dt)?;
    let dir = Path::new(&cfg.output_dir);
    ensure_dir(dir)?;
    write_density_csv(&dir.join(format!("heat_t{}.csv", cfg.t_end)), &state.field)?;
    write_json(
        &dir.join("heat.json"),
        &serde_json::json!({
            "config": cfg,
            "dt": dt,
            "t_end": state.time,
            "mass_initial": rho0.integral(),
            "mass_final": state.field.integral(),
        }),
    )?;
    write_manifest(dir, "heat", cfg.hash(), cfg.seed, started)?;
    println!("heat solve to t = {} -> {}", state.time, dir.display());
    Ok(0)
}

fn run_converge(common: &CommonOpts) -> Result<i32> {
    let started = Instant::now();
    let cfg = resolve(common)?;
    let (report, densities) = converge_study(&cfg)?;
    let dir = Path::new(&cfg.output_dir);
    ensure_dir(dir)?;
    for (eps, rho) in &densities {
        write_density_csv(&dir.join(density_file_name(*eps, cfg.t_end)), rho)?;
    }
    write_json(&dir.join("report.json"), &report)?;
    write_manifest(dir, "converge", cfg.hash(), cfg.seed, started)?;
    for entry in &report.entries {
        println!(
            "eps = {:>5}: L2 error {:.5e} +- {:.1e}",
            entry.eps, entry.l2_error_mean, entry.l2_error_stderr
        );
    }
    println!("verdict: {:?}", report.verdict);
    Ok(match report.verdict {
        Verdict::NotMonotone => 2,
        _ => 0,
    })
}

fn run_weak_residual(common: &CommonOpts) -> Result<i32> {
    let started = Instant::now();
    let cfg = resolve(common)?;
    let report = weak_residual_study(&cfg)?;
    let dir = Path::new(&cfg.output_dir);
    ensure_dir(dir)?;
    write_json(&dir.join("report.json"), &report)?;
    write_manifest(dir, "weak-residual", cfg.hash(), cfg.seed, started)?;
    for series in &report.series {
        print!("{:<24}", series.test_function);
        for p in &series.points {
            print!(" |R({})| = {:.3e}+-{:.1e}", p.eps, p.mean.abs(), p.stderr);
        }
        println!(
            "  {}",
            if series.decreasing_beyond_bars {
                "decreasing"
            } else {
                "flat"
            }
        );
    }
    println!("{} of {} residual series decrease", report.n_decreasing, report.series.len());
    Ok(if report.n_decreasing >= 2 { 0 } else { 2 })
}

fn run_integrability(
    p: f64,
    schedule: Option<&str>,
    seed: u64,
    out: Option<&str>,
) -> Result<i32> {
    let started = Instant::now();
    let schedule = match schedule {
        Some(text) => parse_usize_list(text)?,
        None => vec![100_000, 300_000, 1_000_000],
    };
    let report = integrability_study(p, &schedule, seed)?;
    for est in &report.estimates {
        println!(
            "n = {:>9}: mean (2/L)^{p} = {:.6e} +- {:.1e}",
            est.samples, est.mean, est.stderr
        );
    }
    println!("verdict: {:?}", report.verdict);
    let dir = PathBuf::from(out.unwrap_or("out"));
    ensure_dir(&dir)?;
    write_json(&dir.join("report.json"), &report)?;
    let hasher_cfg = ResolvedConfig {
        seed,
        ..ResolvedConfig::default()
    };
    write_manifest(&dir, "integrability", hasher_cfg.hash(), seed, started)?;
    // Divergence at large p is the expected analytic behavior, not an
    // error: always exit 0 when the study ran.
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<i32> {
    match &cli.command {
        Command::Trace { x, v, common } => run_trace(x, v, common),
        Command::Endpoint {
            samples,
            grid,
            common,
        } => run_endpoint(*samples, *grid, common),
        Command::Simulate { common } => run_simulate(common),
        Command::Heat { common } => run_heat(common),
        Command::Converge { common } => run_converge(common),
        Command::WeakResidual { common } => run_weak_residual(common),
        Command::Integrability {
            p,
            schedule,
            seed,
            out,
        } => run_integrability(*p, schedule.as_deref(), *seed, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version are not usage errors.
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(if is_usage_error(&err) { 1 } else { 2 })
        }
    }
}
