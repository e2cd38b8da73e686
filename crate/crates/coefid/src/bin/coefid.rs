//! Command-line front end: mesh generation, direct runs, identification runs,
//! named presets and config-file execution.
//!
//! Exit codes: 0 on success, 1 on validation errors (bad arguments, malformed
//! files, inconsistent configs), 2 on numerical failures (degenerate
//! observation, solver breakdown, diverging iteration).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coefid::direct::{
    record_observations, run_direct, subsample_observations, CoefficientFunction, DirectScheme,
    TimeGrid,
};
use coefid::error::{Error, Result};
use coefid::experiment::presets::{trapezoid_polygon, Preset, TRAPEZOID_EDGE_LENGTH};
use coefid::experiment::{csvio, expr::parse_linear_form, run_config_file, execute};
use coefid::fem::{build_observation, ObservationSpec, ProblemSpec};
use coefid::inverse::{
    identify, solve_nonlinear_implicit, solve_via_transform, IdentificationResult, SchemeKind,
};
use coefid::mesh::{triangulate, Mesh, Point, PolygonSpec};

#[derive(Parser)]
#[command(
    name = "coefid",
    version,
    about = "Direct solver and time-dependent reaction-coefficient identification \
             for a 2D parabolic problem"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Triangulate a convex polygon and write the mesh as text.
    Mesh(MeshArgs),
    /// Solve the direct problem and record an observation series.
    Direct(DirectArgs),
    /// Recover the reaction coefficient from an observation series.
    Identify(IdentifyArgs),
    /// Run a named preset (fig2, fig4, fig5, fig6, fig7, convergence_table).
    Run(RunArgs),
    /// Execute an experiment config file (TOML).
    RunConfig(RunConfigArgs),
}

#[derive(Args)]
struct MeshArgs {
    /// Polygon: `trapezoid`, `unit_square`, or `x,y;x,y;...` (counterclockwise).
    #[arg(long, default_value = "trapezoid")]
    polygon: String,
    /// Target edge length of the triangulation.
    #[arg(long, default_value_t = TRAPEZOID_EDGE_LENGTH)]
    edge_length: f64,
    /// Output file.
    #[arg(long, default_value = "mesh.txt")]
    out: PathBuf,
}

#[derive(Args)]
struct ProblemArgs {
    /// Diffusion coefficient: a number or a linear expression in x1, x2.
    #[arg(long, default_value = "1.0")]
    diffusion: String,
    /// Boundary coefficient of the Robin condition.
    #[arg(long, default_value = "10.0")]
    boundary_coeff: String,
    /// Initial state.
    #[arg(long, default_value = "1.0")]
    initial: String,
    /// Observation: `centroid`, `mean`, or a point `x,y`.
    #[arg(long, default_value = "centroid")]
    observation: String,
    /// Mesh file to load; omit to triangulate --polygon at --edge-length.
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Polygon used when no mesh file is given.
    #[arg(long, default_value = "trapezoid")]
    polygon: String,
    #[arg(long, default_value_t = TRAPEZOID_EDGE_LENGTH)]
    edge_length: f64,
}

#[derive(Args)]
struct DirectArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Exact coefficient: `eq20`, `smooth_rational` or `zero`.
    #[arg(long, default_value = "eq20")]
    coefficient: String,
    #[arg(long, default_value_t = 0.1)]
    final_time: f64,
    #[arg(long, default_value_t = 1000)]
    n_steps: usize,
    /// Time scheme: `implicit` or `crank_nicolson`.
    #[arg(long, default_value = "implicit")]
    scheme: String,
    /// Multiplicative Gaussian noise level on the recorded series.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the full nodal trajectory (t,node_0..node_{n-1}).
    #[arg(long)]
    field: bool,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct IdentifyArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Observation series CSV (`t,value`), e.g. from `coefid direct`.
    #[arg(long)]
    observations: PathBuf,
    /// Method: `first_order`, `crank_nicolson`, `hybrid_implicit`,
    /// `transform` or `nonlinear`.
    #[arg(long, default_value = "first_order")]
    scheme: String,
    /// Identification step count; must divide the data step count
    /// (default: use the data grid).
    #[arg(long)]
    n_steps: Option<usize>,
    /// Override the degeneracy threshold on the recovery denominator.
    #[arg(long)]
    threshold: Option<f64>,
    /// Coefficient value seeding schemes that reference the previous level.
    #[arg(long)]
    p0: Option<f64>,
    /// Fixed-point tolerance (nonlinear method).
    #[arg(long, default_value_t = 1e-10)]
    fp_tol: f64,
    /// Fixed-point iteration cap (nonlinear method).
    #[arg(long, default_value_t = 50)]
    max_iters: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Preset name.
    preset: String,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the noise seed of the preset.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for independent identification runs.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Override the exact-coefficient selector of the preset.
    #[arg(long)]
    coefficient: Option<String>,
}

#[derive(Args)]
struct RunConfigArgs {
    /// Config file path.
    path: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

fn parse_polygon(text: &str) -> Result<PolygonSpec> {
    match text {
        "trapezoid" => Ok(trapezoid_polygon()),
        "unit_square" => PolygonSpec::new(vec![
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            Point::new(1.0, 1.0),
            Point::new(0.0, 1.0),
        ]),
        list => {
            let vertices: Result<Vec<Point>> = list
                .split(';')
                .map(|pair| {
                    let mut it = pair.split(',');
                    let bad = || Error::Config {
                        field: "polygon".into(),
                        message: format!("cannot parse vertex `{pair}` (expected `x,y`)"),
                    };
                    let x: f64 = it.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
                    let y: f64 = it.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
                    if it.next().is_some() {
                        return Err(bad());
                    }
                    Ok(Point::new(x, y))
                })
                .collect();
            PolygonSpec::new(vertices?)
        }
    }
}

fn parse_coefficient(kind: &str, final_time: f64) -> Result<CoefficientFunction> {
    match kind {
        "eq20" => Ok(CoefficientFunction::RampThenZero {
            slope: 1000.0,
            switch_time: 0.5 * final_time,
        }),
        "smooth_rational" => Ok(CoefficientFunction::RationalBump {
            scale: 1000.0,
            curvature: 500.0,
        }),
        "zero" => Ok(CoefficientFunction::Constant(0.0)),
        other => Err(Error::Config {
            field: "coefficient".into(),
            message: format!("unknown coefficient `{other}`"),
        }),
    }
}

fn parse_direct_scheme(name: &str) -> Result<DirectScheme> {
    match name {
        "implicit" => Ok(DirectScheme::Implicit),
        "crank_nicolson" => Ok(DirectScheme::CrankNicolson),
        other => Err(Error::Config {
            field: "scheme".into(),
            message: format!("unknown scheme `{other}` (expected implicit or crank_nicolson)"),
        }),
    }
}

impl ProblemArgs {
    /// Load or generate the mesh; returns the mesh and whether it was
    /// freshly triangulated (so callers can persist it next to outputs).
    fn mesh(&self) -> Result<(Mesh, bool)> {
        match &self.mesh {
            Some(path) => Ok((Mesh::read_file(path)?, false)),
            None => {
                let polygon = parse_polygon(&self.polygon)?;
                Ok((triangulate(&polygon, self.edge_length)?, true))
            }
        }
    }

    fn spec(&self) -> Result<ProblemSpec> {
        let k = parse_linear_form(&self.diffusion, "diffusion")?;
        let g = parse_linear_form(&self.boundary_coeff, "boundary_coeff")?;
        let u0 = parse_linear_form(&self.initial, "initial")?;
        Ok(ProblemSpec::new(
            move |p| k.eval(p.x, p.y),
            move |p| g.eval(p.x, p.y),
            |_, _| 0.0,
            move |p| u0.eval(p.x, p.y),
        ))
    }

    fn observation_spec(&self, mesh: &Mesh) -> Result<ObservationSpec> {
        match self.observation.as_str() {
            "centroid" => Ok(ObservationSpec::Point(mesh.centroid())),
            "mean" => Ok(ObservationSpec::Mean),
            pair => {
                let mut it = pair.split(',');
                let bad = || Error::Config {
                    field: "observation".into(),
                    message: format!(
                        "expected `centroid`, `mean` or a point `x,y`, got `{pair}`"
                    ),
                };
                let x: f64 = it.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
                let y: f64 = it.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
                if it.next().is_some() {
                    return Err(bad());
                }
                Ok(ObservationSpec::Point(Point::new(x, y)))
            }
        }
    }
}

fn cmd_mesh(args: &MeshArgs) -> Result<()> {
    let polygon = parse_polygon(&args.polygon)?;
    let mesh = triangulate(&polygon, args.edge_length)?;
    mesh.write_file(&args.out)?;
    println!(
        "wrote {} ({} nodes, {} triangles, {} boundary edges, min angle {:.1} deg)",
        args.out.display(),
        mesh.num_nodes(),
        mesh.num_triangles(),
        mesh.boundary_edges.len(),
        mesh.min_angle_deg()
    );
    Ok(())
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    println!("wrote {}", path.display());
    Ok(path)
}

fn cmd_direct(args: &DirectArgs) -> Result<()> {
    let (mesh, generated) = args.problem.mesh()?;
    let spec = args.problem.spec()?;
    let p = parse_coefficient(&args.coefficient, args.final_time)?;
    let grid = TimeGrid::new(args.final_time, args.n_steps)?;
    let scheme = parse_direct_scheme(&args.scheme)?;
    let obs = build_observation(&mesh, &args.problem.observation_spec(&mesh)?)?;

    let traj = run_direct(&mesh, &spec, &p, grid, scheme)?;
    let phi = record_observations(&traj, &obs, args.noise, args.seed);

    if generated {
        write_out(&args.out, "mesh.txt", &mesh.to_text())?;
    }
    write_out(
        &args.out,
        "observations.csv",
        &csvio::observations_csv(&grid.times(), &phi),
    )?;
    if args.field {
        write_out(&args.out, "field.csv", &csvio::field_csv(&traj))?;
    }
    Ok(())
}

fn cmd_identify(args: &IdentifyArgs) -> Result<()> {
    let (mesh, generated) = args.problem.mesh()?;
    let spec = args.problem.spec()?;
    let (times, phi_data) = csvio::read_observations(&args.observations)?;
    let data_steps = times.len() - 1;
    let final_time = *times.last().unwrap();
    if !(final_time > 0.0) {
        return Err(Error::Csv(format!(
            "observation series must end at a positive time, got {final_time}"
        )));
    }
    let n_steps = args.n_steps.unwrap_or(data_steps);
    let phi = subsample_observations(&phi_data, n_steps)?;
    let grid = TimeGrid::new(final_time, n_steps)?;
    let obs = build_observation(&mesh, &args.problem.observation_spec(&mesh)?)?;

    let result: IdentificationResult = match args.scheme.as_str() {
        "transform" => solve_via_transform(&mesh, &spec, grid, &obs, &phi)?.1,
        "nonlinear" => {
            solve_nonlinear_implicit(&mesh, &spec, grid, &obs, &phi, args.fp_tol, args.max_iters)?
        }
        name => {
            let kind = SchemeKind::ALL
                .iter()
                .find(|s| s.name() == name)
                .copied()
                .ok_or_else(|| Error::Config {
                    field: "scheme".into(),
                    message: format!(
                        "unknown scheme `{name}` (expected first_order, crank_nicolson, \
                         hybrid_implicit, transform or nonlinear)"
                    ),
                })?;
            identify(
                &mesh, &spec, grid, kind, &obs, &phi, args.p0, args.threshold,
            )?
        }
    };

    if generated {
        write_out(&args.out, "mesh.txt", &mesh.to_text())?;
    }
    write_out(
        &args.out,
        "p_recovered.csv",
        &csvio::identification_csv(grid, &result, None),
    )?;
    Ok(())
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let preset = Preset::parse(&args.preset)?;
    let mut config = preset.config_with_coefficient(args.coefficient.as_deref());
    if let Some(seed) = args.seed {
        config.noise.seed = seed;
    }
    let files = execute(&config, &args.out, args.threads)?;
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn cmd_run_config(args: &RunConfigArgs) -> Result<()> {
    let files = run_config_file(&args.path, args.out.as_deref(), args.seed, args.threads)?;
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Mesh(args) => cmd_mesh(args),
        Command::Direct(args) => cmd_direct(args),
        Command::Identify(args) => cmd_identify(args),
        Command::Run(args) => cmd_run(args),
        Command::RunConfig(args) => cmd_run_config(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
