//! Command-line front end: mesh generation, assembly, solves, spectral
//! estimates and file outputs for the coupled Stokes-Darcy discretization.
//!
//! Three subcommands cover the workflows:
//!   solve        solve the built-in verification case per level, write VTK
//!                and JSON summaries
//!   convergence  run the refinement study and write the CSV / log-log data
//!   infsup       estimate coercivity and inf-sup constants per level
//!
//! Options may also come from a key=value config file; command-line flags
//! take precedence. Every output carries a provenance line with the
//! canonical config string's hash, and identical configs produce
//! byte-identical outputs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use stokes_darcy::assembly::{
    self, assemble_divergence, assemble_jump_penalty_ext, assemble_norm_gram,
    assemble_stiffness_ext, split_velocity_blocks, MaterialParams,
};
use stokes_darcy::io as sdio;
use stokes_darcy::mesh::{build_structured_mesh, DomainGeometry};
use stokes_darcy::solver::{estimate_coercivity, estimate_inf_sup, EigenMode};
use stokes_darcy::space::{build_dof_map, edge_midpoint_values};
use stokes_darcy::verification::{
    compute_error_norms, manufactured_case, run_convergence_study, solve_level, StudyOptions,
};

#[derive(Parser)]
#[command(name = "stokes-darcy", version, about = "Coupled Stokes-Darcy flow solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the built-in verification case on each level.
    Solve(CommonArgs),
    /// Run the refinement study and report errors and observed orders.
    Convergence(CommonArgs),
    /// Estimate the coercivity and inf-sup constants on each level.
    Infsup(CommonArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Mesh levels, comma separated (cells per unit edge).
    #[arg(long)]
    levels: Option<String>,
    /// Fluid viscosity.
    #[arg(long)]
    mu: Option<f64>,
    /// Slip coefficient of the interface friction law.
    #[arg(long)]
    alpha1: Option<f64>,
    /// Permeability tensor entries (symmetric 2x2).
    #[arg(long)]
    kxx: Option<f64>,
    #[arg(long)]
    kxy: Option<f64>,
    #[arg(long)]
    kyy: Option<f64>,
    /// Penalty weight on Stokes-side edges (default 1 + 2 mu).
    #[arg(long)]
    penalty_weight: Option<f64>,
    /// Polynomial degree the volume quadrature is exact for.
    #[arg(long)]
    quad_degree: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write solution fields as legacy VTK.
    #[arg(long)]
    emit_vtk: bool,
    /// Dump system blocks in MatrixMarket form.
    #[arg(long)]
    emit_matrices: bool,
    /// Seed recorded in the provenance line (reserved for randomized runs).
    #[arg(long)]
    seed: Option<u64>,
    /// Optional key=value config file; flags win over file entries.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Debug)]
struct RunConfig {
    command: &'static str,
    levels: Vec<usize>,
    mu: f64,
    alpha1: f64,
    k: [f64; 3],
    penalty_weight: Option<f64>,
    quad_degree: usize,
    out: PathBuf,
    emit_vtk: bool,
    emit_matrices: bool,
    seed: u64,
}

impl RunConfig {
    fn params(&self) -> MaterialParams {
        MaterialParams {
            mu: self.mu,
            permeability: [[self.k[0], self.k[1]], [self.k[1], self.k[2]]],
            alpha1: self.alpha1,
            stokes_penalty_weight: self.penalty_weight,
        }
    }

    /// Canonical single-line form: sorted key=value pairs. This exact string
    /// is echoed into every output and hashed for provenance.
    fn canonical(&self) -> String {
        let mut s = String::new();
        let levels = self
            .levels
            .iter()
            .map(|n| n.to_string())
            .collect::<Vec<_>>()
            .join(",");
        write!(
            s,
            "alpha1={} command={} emit_matrices={} emit_vtk={} kxx={} kxy={} kyy={} levels={} mu={} \
             penalty_weight={} quad_degree={} seed={}",
            self.alpha1,
            self.command,
            self.emit_matrices,
            self.emit_vtk,
            self.k[0],
            self.k[1],
            self.k[2],
            levels,
            self.mu,
            self.penalty_weight
                .map(|w| w.to_string())
                .unwrap_or_else(|| "default".into()),
            self.quad_degree,
            self.seed,
        )
        .unwrap();
        s
    }

    fn provenance(&self) -> String {
        let canonical = self.canonical();
        format!("config-hash={:016x} {canonical}", fnv1a(canonical.as_bytes()))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Solver(stokes_darcy::Error),
    Io(std::io::Error),
}

impl From<stokes_darcy::Error> for CliError {
    fn from(e: stokes_darcy::Error) -> Self {
        CliError::Solver(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config file {path:?}: {e}")))?;
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!(
                "config line {} is not key=value: {line:?}",
                lineno + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_levels(text: &str) -> Result<Vec<usize>, CliError> {
    let levels: Result<Vec<usize>, _> = text
        .split(',')
        .map(|part| part.trim().parse::<usize>())
        .collect();
    let levels = levels.map_err(|e| CliError::Usage(format!("bad levels {text:?}: {e}")))?;
    if levels.is_empty() || levels.contains(&0) {
        return Err(CliError::Usage("levels must be positive".into()));
    }
    Ok(levels)
}

fn resolve(args: &CommonArgs, command: &'static str) -> Result<RunConfig, CliError> {
    let file = match &args.config {
        Some(path) => parse_config_file(path)?,
        None => BTreeMap::new(),
    };
    let from_file = |key: &str| file.get(key).cloned();
    let parse_f64 = |key: &str| -> Result<Option<f64>, CliError> {
        from_file(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| CliError::Usage(format!("config {key}={v}: {e}")))
            })
            .transpose()
    };

    let default_levels: Vec<usize> = match command {
        "solve" => vec![8],
        "convergence" => vec![4, 8, 16, 32],
        _ => vec![2, 4, 8],
    };
    let levels = match (&args.levels, from_file("levels")) {
        (Some(text), _) => parse_levels(text)?,
        (None, Some(text)) => parse_levels(&text)?,
        (None, None) => default_levels,
    };
    if command == "convergence" {
        for w in levels.windows(2) {
            if w[1] != 2 * w[0] {
                return Err(CliError::Usage(format!(
                    "convergence levels must strictly double, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
    }

    let config = RunConfig {
        command,
        levels,
        mu: args.mu.or(parse_f64("mu")?).unwrap_or(1.0),
        alpha1: args.alpha1.or(parse_f64("alpha1")?).unwrap_or(1.0),
        k: [
            args.kxx.or(parse_f64("kxx")?).unwrap_or(1.0),
            args.kxy.or(parse_f64("kxy")?).unwrap_or(0.0),
            args.kyy.or(parse_f64("kyy")?).unwrap_or(1.0),
        ],
        penalty_weight: args.penalty_weight.or(parse_f64("penalty_weight")?),
        quad_degree: match (args.quad_degree, from_file("quad_degree")) {
            (Some(d), _) => d,
            (None, Some(v)) => v
                .parse()
                .map_err(|e| CliError::Usage(format!("config quad_degree={v}: {e}")))?,
            (None, None) => 10,
        },
        out: args
            .out
            .clone()
            .or_else(|| from_file("out").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out")),
        emit_vtk: args.emit_vtk || from_file("emit_vtk").as_deref() == Some("true"),
        emit_matrices: args.emit_matrices || from_file("emit_matrices").as_deref() == Some("true"),
        seed: match (args.seed, from_file("seed")) {
            (Some(s), _) => s,
            (None, Some(v)) => v
                .parse()
                .map_err(|e| CliError::Usage(format!("config seed={v}: {e}")))?,
            (None, None) => 0,
        },
    };
    if !(config.quad_degree >= 2 && config.quad_degree <= 20) {
        return Err(CliError::Usage(format!(
            "quad_degree must be in [2, 20], got {}",
            config.quad_degree
        )));
    }
    config
        .params()
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(config)
}

fn run_solve(config: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(&config.out)?;
    let params = config.params();
    let case = manufactured_case(params);
    for &n in &config.levels {
        let (mesh, dofmap, sol, blocks) = solve_level(n, &params, config.quad_degree)?;
        let errors = compute_error_norms(
            &mesh,
            &dofmap,
            &sol.velocity,
            &sol.pressure,
            &case,
            config.quad_degree,
            n,
        );

        let summary = json!({
            "config": config.canonical(),
            "config_hash": format!("{:016x}", fnv1a(config.canonical().as_bytes())),
            "n": n,
            "h": mesh.h,
            "sigma_h": mesh.sigma_h,
            "dofs": {
                "velocity": dofmap.n_velocity(),
                "pressure": dofmap.n_pressure,
                "constrained": dofmap.n_constrained(),
            },
            "residuals": {
                "momentum": sol.residuals.momentum,
                "mass": sol.residuals.mass,
                "mean_pressure": sol.residuals.mean_pressure,
            },
            "errors": {
                "err_u_h": errors.err_u,
                "broken_h1_stokes": errors.broken_h1_stokes,
                "interface_tangential": errors.interface_tangential,
                "l2_darcy": errors.l2_darcy,
                "div_darcy": errors.div_darcy,
                "jump": errors.jump,
                "err_p": errors.err_p,
            },
        });
        fs::write(
            config.out.join(format!("summary_n{n}.json")),
            format!("{}\n", serde_json::to_string_pretty(&summary).unwrap()),
        )?;

        if config.emit_vtk {
            // Cell-centroid velocities: the mean of the edge-midpoint values.
            let vel: Vec<(f64, f64)> = (0..mesh.triangles.len())
                .map(|t| {
                    let m = edge_midpoint_values(&dofmap, &sol.velocity, t);
                    let c = (m[0] + m[1] + m[2]) * (1.0 / 3.0);
                    (c.x, c.y)
                })
                .collect();
            let text = sdio::vtk_unstructured_grid(
                &mesh,
                &config.provenance(),
                &[("pressure", &sol.pressure.values)],
                &[("velocity", &vel)],
            );
            fs::write(config.out.join(format!("solution_n{n}.vtk")), text)?;
        }

        if config.emit_matrices {
            fs::write(
                config.out.join(format!("A_n{n}.mtx")),
                sdio::matrix_market(&blocks.a, &config.provenance()),
            )?;
            fs::write(
                config.out.join(format!("B_n{n}.mtx")),
                sdio::matrix_market(&blocks.b, &config.provenance()),
            )?;
        }
    }
    Ok(())
}

fn run_convergence(config: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(&config.out)?;
    let params = config.params();
    let opts = StudyOptions {
        quad_degree: config.quad_degree,
        spectral: true,
        eigen_mode: EigenMode::Auto,
    };
    let study = run_convergence_study(&config.levels, &params, &opts)?;
    fs::write(
        config.out.join("convergence.csv"),
        sdio::convergence_csv(&study, &config.provenance()),
    )?;
    fs::write(
        config.out.join("convergence_loglog.dat"),
        sdio::loglog_data(&study, &config.provenance()),
    )?;
    Ok(())
}

fn run_infsup(config: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(&config.out)?;
    let params = config.params();
    let mut rows = Vec::new();
    for &n in &config.levels {
        let mesh = build_structured_mesh(n, DomainGeometry::default())?;
        let dofmap = build_dof_map(&mesh);
        let norm_gram = assemble_norm_gram(&mesh, &dofmap, &params);
        let a = {
            let mut ext = assemble_stiffness_ext(&mesh, &dofmap, &params)?;
            ext.extend_from(&assemble_jump_penalty_ext(&mesh, &dofmap, &params));
            split_velocity_blocks(&ext, &dofmap).0
        };
        let b = assemble_divergence(&mesh, &dofmap);
        let areas: Vec<f64> = mesh.triangles.iter().map(|t| t.area).collect();
        let alpha = estimate_coercivity(&a, &norm_gram, EigenMode::Auto)?;
        let beta = estimate_inf_sup(&b, &norm_gram, &areas, EigenMode::Auto)?;
        rows.push((n, mesh.h, alpha, beta));
    }
    fs::write(
        config.out.join("infsup.csv"),
        sdio::spectral_csv(&rows, &config.provenance()),
    )?;
    Ok(())
}

fn check_compatibility(config: &RunConfig) {
    // Warn when the mass source violates the zero-mean requirement. The
    // built-in case has g = 0, so this is a guard for future sources.
    if let Some(&n) = config.levels.first() {
        if let Ok(mesh) = build_structured_mesh(n, DomainGeometry::default()) {
            let case = manufactured_case(config.params());
            let integral = assembly::source_compatibility(&mesh, &case.source(), 4);
            if integral.abs() > 1e-10 {
                eprintln!("warning: mass source integrates to {integral:e}, expected 0");
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, command, runner): (&CommonArgs, &'static str, fn(&RunConfig) -> Result<(), CliError>) =
        match &cli.command {
            Command::Solve(a) => (a, "solve", run_solve),
            Command::Convergence(a) => (a, "convergence", run_convergence),
            Command::Infsup(a) => (a, "infsup", run_infsup),
        };

    let config = match resolve(args, command) {
        Ok(c) => c,
        Err(CliError::Usage(msg)) => {
            eprintln!(
                "{}",
                json!({ "status": 2, "error": "invalid configuration", "detail": msg })
            );
            return ExitCode::from(2);
        }
        Err(e) => {
            eprintln!("{}", json!({ "status": 2, "error": format!("{e:?}") }));
            return ExitCode::from(2);
        }
    };

    check_compatibility(&config);
    match runner(&config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!(
                "{}",
                json!({ "status": 2, "error": "invalid configuration", "detail": msg })
            );
            ExitCode::from(2)
        }
        Err(CliError::Solver(e)) => {
            eprintln!(
                "{}",
                json!({ "status": 3, "error": "solver failure", "detail": e.to_string() })
            );
            ExitCode::from(3)
        }
        Err(CliError::Io(e)) => {
            eprintln!(
                "{}",
                json!({ "status": 3, "error": "io failure", "detail": e.to_string() })
            );
            ExitCode::from(3)
        }
    }
}
