//! Experiment configuration, named presets and the reproducible runner.
//!
//! A run is described by a TOML config (or a built-in preset), executes a
//! direct data-generation pass plus a matrix of identification runs, and
//! writes CSV outputs together with a manifest listing every file with its
//! SHA-256 hash. Outputs are bit-for-bit reproducible for a fixed config and
//! seed.

pub mod csvio;
pub mod expr;
pub mod metrics;
pub mod presets;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::direct::{
    record_observations, run_direct_assembled, subsample_observations, CoefficientFunction,
    DirectScheme, TimeGrid,
};
use crate::error::{Error, Result};
use crate::fem::{assemble, build_observation, ObservationSpec, ProblemSpec};
use crate::inverse::{identify_assembled, IdentificationResult, SchemeKind};
use crate::mesh::{triangulate, Point, PolygonSpec};
use expr::{parse_linear_form, LinearForm};

/// Domain polygon: a named preset shape or an explicit vertex list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PolygonField {
    Named(String),
    Vertices(Vec<[f64; 2]>),
}

/// Constant or linear-expression coefficient field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoefField {
    Number(f64),
    Expression(String),
}

impl CoefField {
    fn resolve(&self, field: &str) -> Result<LinearForm> {
        match self {
            CoefField::Number(v) => Ok(LinearForm::constant(*v)),
            CoefField::Expression(s) => parse_linear_form(s, field),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub polygon: PolygonField,
    pub edge_length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub diffusion: CoefField,
    pub boundary_coeff: CoefField,
    pub initial: CoefField,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientConfig {
    /// One of `eq20`, `smooth_rational`, `zero`, `table`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    #[serde(rename = "final")]
    pub final_time: f64,
    /// Step count of the synthetic-data run.
    pub n_data: usize,
    /// Step counts of the identification runs; each must divide `n_data`.
    #[serde(default)]
    pub n_inverse: Vec<usize>,
    /// Extra direct runs to record (observation series per step count).
    #[serde(default)]
    pub n_direct: Vec<usize>,
    /// Scheme of the data run: `implicit` (default) or `crank_nicolson`.
    #[serde(default = "default_data_scheme")]
    pub data_scheme: String,
}

fn default_data_scheme() -> String {
    "implicit".into()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemesConfig {
    #[serde(default)]
    pub list: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationConfig {
    /// One of `centroid`, `point`, `mean`.
    #[serde(default = "default_observation_kind")]
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<[f64; 2]>,
}

fn default_observation_kind() -> String {
    "centroid".into()
}

impl Default for ObservationConfig {
    fn default() -> Self {
        ObservationConfig {
            kind: default_observation_kind(),
            point: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub level: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig { level: 0.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    #[serde(default)]
    pub emit_field: bool,
    #[serde(default)]
    pub emit_convergence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    pub problem: ProblemConfig,
    pub coefficient: CoefficientConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub schemes: SchemesConfig,
    #[serde(default)]
    pub observation: ObservationConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn config_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| config_err("<config>", e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialization cannot fail")
    }

    pub fn validate(&self) -> Result<()> {
        self.polygon()?;
        if !(self.domain.edge_length > 0.0) || !self.domain.edge_length.is_finite() {
            return Err(config_err(
                "domain.edge_length",
                format!("must be positive, got {}", self.domain.edge_length),
            ));
        }
        self.problem.diffusion.resolve("problem.diffusion")?;
        self.problem
            .boundary_coeff
            .resolve("problem.boundary_coeff")?;
        self.problem.initial.resolve("problem.initial")?;
        self.coefficient()?;
        if !(self.time.final_time > 0.0) {
            return Err(config_err(
                "time.final",
                format!("must be positive, got {}", self.time.final_time),
            ));
        }
        if self.time.n_data == 0 {
            return Err(config_err("time.n_data", "must be at least 1"));
        }
        for (i, &n) in self.time.n_inverse.iter().enumerate() {
            if n == 0 || self.time.n_data % n != 0 {
                return Err(config_err(
                    &format!("time.n_inverse[{i}]"),
                    format!("{n} must be a nonzero divisor of n_data = {}", self.time.n_data),
                ));
            }
        }
        for (i, &n) in self.time.n_direct.iter().enumerate() {
            if n == 0 {
                return Err(config_err(
                    &format!("time.n_direct[{i}]"),
                    "must be at least 1",
                ));
            }
        }
        self.data_scheme()?;
        let kinds = self.scheme_kinds()?;
        if kinds.is_empty() != self.time.n_inverse.is_empty() {
            return Err(config_err(
                "schemes.list",
                "schemes.list and time.n_inverse must be both empty (direct-only run) \
                 or both nonempty",
            ));
        }
        match self.observation.kind.as_str() {
            "centroid" | "mean" => {}
            "point" => {
                if self.observation.point.is_none() {
                    return Err(config_err(
                        "observation.point",
                        "required when observation.kind = \"point\"",
                    ));
                }
            }
            other => {
                return Err(config_err(
                    "observation.kind",
                    format!("unknown kind `{other}` (expected centroid, point or mean)"),
                ));
            }
        }
        if self.noise.level < 0.0 {
            return Err(config_err(
                "noise.level",
                format!("must be nonnegative, got {}", self.noise.level),
            ));
        }
        Ok(())
    }

    pub fn polygon(&self) -> Result<PolygonSpec> {
        match &self.domain.polygon {
            PolygonField::Named(name) => match name.as_str() {
                "trapezoid" => Ok(presets::trapezoid_polygon()),
                "unit_square" => PolygonSpec::new(vec![
                    Point::new(0.0, 0.0),
                    Point::new(1.0, 0.0),
                    Point::new(1.0, 1.0),
                    Point::new(0.0, 1.0),
                ]),
                other => Err(config_err(
                    "domain.polygon",
                    format!("unknown polygon name `{other}` (expected trapezoid or unit_square)"),
                )),
            },
            PolygonField::Vertices(list) => PolygonSpec::new(
                list.iter().map(|&[x, y]| Point::new(x, y)).collect(),
            )
            .map_err(|e| config_err("domain.polygon", e.to_string())),
        }
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let k = self.problem.diffusion.resolve("problem.diffusion")?;
        let g = self.problem.boundary_coeff.resolve("problem.boundary_coeff")?;
        let u0 = self.problem.initial.resolve("problem.initial")?;
        Ok(ProblemSpec::new(
            move |p| k.eval(p.x, p.y),
            move |p| g.eval(p.x, p.y),
            |_, _| 0.0,
            move |p| u0.eval(p.x, p.y),
        ))
    }

    pub fn coefficient(&self) -> Result<CoefficientFunction> {
        match self.coefficient.kind.as_str() {
            "eq20" => Ok(CoefficientFunction::RampThenZero {
                slope: 1000.0,
                switch_time: 0.5 * self.time.final_time,
            }),
            "smooth_rational" => Ok(CoefficientFunction::RationalBump {
                scale: 1000.0,
                curvature: 500.0,
            }),
            "zero" => Ok(CoefficientFunction::Constant(0.0)),
            "table" => {
                let times = self.coefficient.times.clone().ok_or_else(|| {
                    config_err("coefficient.times", "required when kind = \"table\"")
                })?;
                let values = self.coefficient.values.clone().ok_or_else(|| {
                    config_err("coefficient.values", "required when kind = \"table\"")
                })?;
                if times.len() != values.len() || times.is_empty() {
                    return Err(config_err(
                        "coefficient.values",
                        format!(
                            "times and values must have the same nonzero length \
                             ({} vs {})",
                            times.len(),
                            values.len()
                        ),
                    ));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(config_err(
                        "coefficient.times",
                        "sample times must be strictly increasing",
                    ));
                }
                Ok(CoefficientFunction::Table { times, values })
            }
            other => Err(config_err(
                "coefficient.kind",
                format!("unknown kind `{other}` (expected eq20, smooth_rational, zero or table)"),
            )),
        }
    }

    pub fn observation_spec(&self, polygon: &PolygonSpec) -> Result<ObservationSpec> {
        match self.observation.kind.as_str() {
            "centroid" => Ok(ObservationSpec::Point(polygon.centroid())),
            "mean" => Ok(ObservationSpec::Mean),
            "point" => {
                let [x, y] = self.observation.point.ok_or_else(|| {
                    config_err("observation.point", "required when kind = \"point\"")
                })?;
                Ok(ObservationSpec::Point(Point::new(x, y)))
            }
            other => Err(config_err(
                "observation.kind",
                format!("unknown kind `{other}`"),
            )),
        }
    }

    pub fn scheme_kinds(&self) -> Result<Vec<SchemeKind>> {
        self.schemes
            .list
            .iter()
            .enumerate()
            .map(|(i, name)| {
                SchemeKind::ALL
                    .iter()
                    .find(|s| s.name() == name)
                    .copied()
                    .ok_or_else(|| {
                        config_err(
                            &format!("schemes.list[{i}]"),
                            format!(
                                "unknown scheme `{name}` (expected first_order, \
                                 crank_nicolson or hybrid_implicit)"
                            ),
                        )
                    })
            })
            .collect()
    }

    pub fn data_scheme(&self) -> Result<DirectScheme> {
        match self.time.data_scheme.as_str() {
            "implicit" => Ok(DirectScheme::Implicit),
            "crank_nicolson" => Ok(DirectScheme::CrankNicolson),
            other => Err(config_err(
                "time.data_scheme",
                format!("unknown scheme `{other}` (expected implicit or crank_nicolson)"),
            )),
        }
    }
}

#[derive(Debug, Serialize)]
struct ManifestEntry {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    config: String,
    outputs: Vec<ManifestEntry>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Execute a validated config into `out_dir`, returning the written files.
///
/// Identification runs are independent and execute on up to `threads` worker
/// threads; outputs are written by the main thread in config order, so the
/// file contents do not depend on the thread count.
pub fn execute(config: &ExperimentConfig, out_dir: &Path, threads: usize) -> Result<Vec<PathBuf>> {
    config.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut written: Vec<PathBuf> = Vec::new();
    let write = |name: &str, contents: &str, written: &mut Vec<PathBuf>| -> Result<()> {
        let path = out_dir.join(name);
        std::fs::write(&path, contents)?;
        written.push(path);
        Ok(())
    };

    let polygon = config.polygon()?;
    let mesh = triangulate(&polygon, config.domain.edge_length)?;
    write("mesh.txt", &mesh.to_text(), &mut written)?;

    let spec = config.problem_spec()?;
    let forms = assemble(&mesh, &spec)?;
    let obs_spec = config.observation_spec(&polygon)?;
    let obs = build_observation(&mesh, &obs_spec)?;
    let coefficient = config.coefficient()?;
    let data_scheme = config.data_scheme()?;

    // Synthetic data run.
    let data_grid = TimeGrid::new(config.time.final_time, config.time.n_data)?;
    let data_traj = run_direct_assembled(&forms, &mesh, &spec, &coefficient, data_grid, data_scheme)?;
    let phi_data = record_observations(&data_traj, &obs, config.noise.level, config.noise.seed);
    write(
        "observations.csv",
        &csvio::observations_csv(&data_grid.times(), &phi_data),
        &mut written,
    )?;
    if config.output.emit_field {
        write("field.csv", &csvio::field_csv(&data_traj), &mut written)?;
    }

    // Extra direct runs at other step counts.
    for &n in &config.time.n_direct {
        let grid = TimeGrid::new(config.time.final_time, n)?;
        let traj = run_direct_assembled(&forms, &mesh, &spec, &coefficient, grid, data_scheme)?;
        let phi = record_observations(&traj, &obs, config.noise.level, config.noise.seed);
        write(
            &format!("observations_N{n}.csv"),
            &csvio::observations_csv(&grid.times(), &phi),
            &mut written,
        )?;
    }

    // Identification matrix.
    let schemes = config.scheme_kinds()?;
    let runs: Vec<(SchemeKind, usize)> = schemes
        .iter()
        .flat_map(|&s| config.time.n_inverse.iter().map(move |&n| (s, n)))
        .collect();

    let results: Mutex<Vec<Option<Result<IdentificationResult>>>> =
        Mutex::new((0..runs.len()).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = threads.max(1).min(runs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= runs.len() {
                    break;
                }
                let (scheme, n) = runs[i];
                let outcome = (|| {
                    let grid = TimeGrid::new(config.time.final_time, n)?;
                    let phi = subsample_observations(&phi_data, n)?;
                    identify_assembled(
                        &forms, &mesh, &spec, grid, scheme, &obs, &phi, None, None,
                    )
                })();
                results.lock().unwrap()[i] = Some(outcome);
            });
        }
    });
    let outcomes = results.into_inner().unwrap();
    let mut identifications: Vec<(SchemeKind, usize, IdentificationResult)> = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        let (scheme, n) = runs[i];
        let result = outcome.expect("worker pool covered every run")?;
        identifications.push((scheme, n, result));
    }

    let single_scheme = schemes.len() == 1;
    let exact = coefficient.clone();
    let eval_exact = move |t: f64| exact.eval(t);
    for (scheme, n, result) in &identifications {
        let grid = TimeGrid::new(config.time.final_time, *n)?;
        let name = if single_scheme {
            format!("p_recovered_N{n}.csv")
        } else {
            format!("p_recovered_{}_N{n}.csv", scheme.name())
        };
        write(
            &name,
            &csvio::identification_csv(grid, result, Some(&eval_exact)),
            &mut written,
        )?;
    }

    if !identifications.is_empty() {
        let mut summary = String::from("scheme,n_steps,tau,max_error,max_error_smooth,max_error_late\n");
        for (scheme, n, result) in &identifications {
            let grid = TimeGrid::new(config.time.final_time, *n)?;
            let all = metrics::max_error(grid, &result.p_series, &coefficient);
            let smooth = metrics::max_error_in_windows(
                grid,
                &result.p_series,
                &coefficient,
                &metrics::SMOOTH_WINDOWS,
            );
            let late = metrics::max_error_in_windows(
                grid,
                &result.p_series,
                &coefficient,
                &metrics::LATE_WINDOW,
            );
            summary.push_str(&format!(
                "{},{},{},{},{},{}\n",
                scheme.name(),
                n,
                csvio::fmt_f64(grid.tau()),
                csvio::fmt_f64(all),
                csvio::fmt_f64(smooth),
                csvio::fmt_f64(late)
            ));
        }
        write("summary.csv", &summary, &mut written)?;
    }

    if config.output.emit_convergence && !identifications.is_empty() {
        let mut table = String::from("scheme,n_steps,tau,error,order\n");
        for &scheme in &schemes {
            let mut prev: Option<(f64, f64)> = None;
            for (s, n, result) in &identifications {
                if *s != scheme {
                    continue;
                }
                let grid = TimeGrid::new(config.time.final_time, *n)?;
                let err = metrics::max_error_in_windows(
                    grid,
                    &result.p_series,
                    &coefficient,
                    &metrics::LATE_WINDOW,
                );
                let order = prev.map(|(tau_c, err_c)| {
                    metrics::pairwise_order(
                        tau_c,
                        err_c.max(f64::MIN_POSITIVE),
                        grid.tau(),
                        err.max(f64::MIN_POSITIVE),
                    )
                });
                table.push_str(&format!(
                    "{},{},{},{},{}\n",
                    scheme.name(),
                    n,
                    csvio::fmt_f64(grid.tau()),
                    csvio::fmt_f64(err),
                    order.map(csvio::fmt_f64).unwrap_or_default()
                ));
                prev = Some((grid.tau(), err));
            }
        }
        write("convergence.csv", &table, &mut written)?;
    }

    // Manifest with content hashes, written last and excluded from itself.
    let mut entries: Vec<ManifestEntry> = written
        .iter()
        .map(|path| -> Result<ManifestEntry> {
            let bytes = std::fs::read(path)?;
            Ok(ManifestEntry {
                path: path
                    .file_name()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                sha256: sha256_hex(&bytes),
            })
        })
        .collect::<Result<_>>()?;
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        tool: "coefid",
        version: env!("CARGO_PKG_VERSION"),
        seed: config.noise.seed,
        config: config.to_toml(),
        outputs: entries,
    };
    let manifest_path = out_dir.join("manifest.json");
    std::fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).expect("manifest serialization cannot fail"),
    )?;
    written.push(manifest_path);

    Ok(written)
}

/// Run a config file; `--out` and `--seed` overrides win over the file.
pub fn run_config_file(
    path: &Path,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
    threads: usize,
) -> Result<Vec<PathBuf>> {
    let text = std::fs::read_to_string(path)?;
    let mut config = ExperimentConfig::from_toml(&text)?;
    if let Some(seed) = seed_override {
        config.noise.seed = seed;
    }
    let out_dir = out_override
        .map(Path::to_path_buf)
        .or_else(|| config.output.directory.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    execute(&config, &out_dir, threads)
}
