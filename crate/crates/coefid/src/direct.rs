//! Time marching for the direct problem with a known reaction coefficient,
//! and synthesis of observation data for inverse experiments.

use std::sync::Arc;

use rand::SeedableRng;
use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::fem::{
    assemble, assemble_initial_load, assemble_load, AssembledForms, ObservationFunctional,
    ProblemSpec,
};
use crate::mesh::Mesh;
use crate::sparse::{axpy_combine, solve_spd};

/// Relative CG tolerance used by the time steppers; far below the
/// discretization error, so trajectory identities hold to ~1e-10 even after
/// the per-step errors accumulate over a thousand steps.
pub const STEP_SOLVE_TOL: f64 = 1e-13;

/// Uniform grid on [0, T] with `steps` intervals, `t_n = n * tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    final_time: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(final_time: f64, steps: usize) -> Result<Self> {
        if !(final_time > 0.0) || !final_time.is_finite() {
            return Err(Error::Config {
                field: "time.final".into(),
                message: format!("final time must be positive, got {final_time}"),
            });
        }
        if steps == 0 {
            return Err(Error::Config {
                field: "time.steps".into(),
                message: "need at least one time step".into(),
            });
        }
        Ok(TimeGrid { final_time, steps })
    }

    pub fn final_time(&self) -> f64 {
        self.final_time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> f64 {
        self.final_time / self.steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        self.tau() * n as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|n| self.time(n)).collect()
    }
}

/// Time-dependent reaction coefficient `p(t)`.
#[derive(Clone)]
pub enum CoefficientFunction {
    Constant(f64),
    /// `slope * t` up to `switch_time` (inclusive), zero afterwards.
    RampThenZero { slope: f64, switch_time: f64 },
    /// `scale * t / (1 + curvature * t^2)`.
    RationalBump { scale: f64, curvature: f64 },
    /// Piecewise-linear interpolation of a sample table, clamped at the ends.
    Table { times: Vec<f64>, values: Vec<f64> },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl CoefficientFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            CoefficientFunction::Constant(c) => *c,
            CoefficientFunction::RampThenZero { slope, switch_time } => {
                if t <= *switch_time {
                    slope * t
                } else {
                    0.0
                }
            }
            CoefficientFunction::RationalBump { scale, curvature } => {
                scale * t / (1.0 + curvature * t * t)
            }
            CoefficientFunction::Table { times, values } => {
                if times.is_empty() {
                    return 0.0;
                }
                if t <= times[0] {
                    return values[0];
                }
                if t >= times[times.len() - 1] {
                    return values[values.len() - 1];
                }
                let k = times.partition_point(|&s| s <= t) - 1;
                let span = times[k + 1] - times[k];
                let w = if span > 0.0 { (t - times[k]) / span } else { 0.0 };
                values[k] + w * (values[k + 1] - values[k])
            }
            CoefficientFunction::Custom(f) => f(t),
        }
    }
}

impl std::fmt::Debug for CoefficientFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CoefficientFunction::Constant(c) => write!(f, "Constant({c})"),
            CoefficientFunction::RampThenZero { slope, switch_time } => {
                write!(f, "RampThenZero {{ slope: {slope}, switch_time: {switch_time} }}")
            }
            CoefficientFunction::RationalBump { scale, curvature } => {
                write!(f, "RationalBump {{ scale: {scale}, curvature: {curvature} }}")
            }
            CoefficientFunction::Table { times, .. } => {
                write!(f, "Table {{ {} samples }}", times.len())
            }
            CoefficientFunction::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Time scheme for the direct problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirectScheme {
    Implicit,
    CrankNicolson,
}

/// The nodal states `u^0 .. u^N` of one marching run.
#[derive(Debug, Clone)]
pub struct FieldTrajectory {
    pub states: Vec<Vec<f64>>,
    pub grid: TimeGrid,
}

impl FieldTrajectory {
    pub fn state(&self, n: usize) -> &[f64] {
        &self.states[n]
    }

    /// Apply an observation functional to every state.
    pub fn observe(&self, obs: &ObservationFunctional) -> Vec<f64> {
        self.states.iter().map(|u| obs.apply(u)).collect()
    }
}

/// Solve `M u0 = (initial, phi_i)`, the L2 projection of the initial state.
pub fn project_initial(forms: &AssembledForms, mesh: &Mesh, spec: &ProblemSpec) -> Result<Vec<f64>> {
    let rhs = assemble_initial_load(mesh, spec);
    solve_spd(&forms.mass, &rhs, STEP_SOLVE_TOL)
}

/// One backward-Euler step: solve
/// `(M/tau + K + B + p_next M) u_next = M u_n / tau + F_next`.
pub fn step_implicit(
    forms: &AssembledForms,
    u_n: &[f64],
    p_next: f64,
    load_next: &[f64],
    tau: f64,
) -> Result<Vec<f64>> {
    let mass_coeff = 1.0 / tau + p_next;
    if mass_coeff <= 0.0 {
        return Err(Error::IndefiniteSystem {
            step: 0,
            shift: mass_coeff,
        });
    }
    let a = axpy_combine(
        &[mass_coeff, 1.0, 1.0],
        &[&forms.mass, &forms.stiffness, &forms.boundary],
    )?;
    let mu = forms.mass.matvec(u_n);
    let rhs: Vec<f64> = mu
        .iter()
        .zip(load_next)
        .map(|(m, f)| m / tau + f)
        .collect();
    solve_spd(&a, &rhs, STEP_SOLVE_TOL)
}

/// One Crank-Nicolson step: solve
/// `(M/tau + K/2 + B/2 + p_next M / 2) u_next
///    = (M/tau - K/2 - B/2 - p_n M / 2) u_n + F_next`.
pub fn step_crank_nicolson(
    forms: &AssembledForms,
    u_n: &[f64],
    p_n: f64,
    p_next: f64,
    load_next: &[f64],
    tau: f64,
) -> Result<Vec<f64>> {
    let mass_coeff = 1.0 / tau + 0.5 * p_next;
    if mass_coeff <= 0.0 {
        return Err(Error::IndefiniteSystem {
            step: 0,
            shift: mass_coeff,
        });
    }
    let a = axpy_combine(
        &[mass_coeff, 0.5, 0.5],
        &[&forms.mass, &forms.stiffness, &forms.boundary],
    )?;
    let mu = forms.mass.matvec(u_n);
    let ku = forms.stiffness.matvec(u_n);
    let bu = forms.boundary.matvec(u_n);
    let rhs: Vec<f64> = (0..u_n.len())
        .map(|i| (1.0 / tau - 0.5 * p_n) * mu[i] - 0.5 * ku[i] - 0.5 * bu[i] + load_next[i])
        .collect();
    solve_spd(&a, &rhs, STEP_SOLVE_TOL)
}

/// March the direct problem over the whole time grid.
pub fn run_direct(
    mesh: &Mesh,
    spec: &ProblemSpec,
    p: &CoefficientFunction,
    grid: TimeGrid,
    scheme: DirectScheme,
) -> Result<FieldTrajectory> {
    let forms = assemble(mesh, spec)?;
    run_direct_assembled(&forms, mesh, spec, p, grid, scheme)
}

pub fn run_direct_assembled(
    forms: &AssembledForms,
    mesh: &Mesh,
    spec: &ProblemSpec,
    p: &CoefficientFunction,
    grid: TimeGrid,
    scheme: DirectScheme,
) -> Result<FieldTrajectory> {
    let tau = grid.tau();
    let mut states = Vec::with_capacity(grid.steps() + 1);
    states.push(project_initial(forms, mesh, spec)?);
    for n in 0..grid.steps() {
        let t_next = grid.time(n + 1);
        let load = assemble_load(mesh, spec, t_next);
        let u_n = states.last().unwrap();
        let u_next = match scheme {
            DirectScheme::Implicit => {
                step_implicit(forms, u_n, p.eval(t_next), &load, tau)
            }
            DirectScheme::CrankNicolson => step_crank_nicolson(
                forms,
                u_n,
                p.eval(grid.time(n)),
                p.eval(t_next),
                &load,
                tau,
            ),
        }
        .map_err(|e| e.at_step(n + 1))?;
        states.push(u_next);
    }
    Ok(FieldTrajectory { states, grid })
}

/// Observation series `phi_n = r . u_n`, optionally perturbed by multiplicative
/// Gaussian noise `(1 + noise_level * xi_n)` with a fixed seed.
pub fn record_observations(
    traj: &FieldTrajectory,
    obs: &ObservationFunctional,
    noise_level: f64,
    seed: u64,
) -> Vec<f64> {
    let mut phi = traj.observe(obs);
    if noise_level > 0.0 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let normal = rand_distr::StandardNormal;
        for v in &mut phi {
            let xi: f64 = normal.sample(&mut rng);
            *v *= 1.0 + noise_level * xi;
        }
    }
    phi
}

/// Restrict a fine observation series to a coarser uniform grid sharing the
/// endpoints; the fine step count must be divisible by the coarse one.
pub fn subsample_observations(phi_fine: &[f64], coarse_steps: usize) -> Result<Vec<f64>> {
    if phi_fine.len() < 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: phi_fine.len(),
        });
    }
    let fine_steps = phi_fine.len() - 1;
    if coarse_steps == 0 || fine_steps % coarse_steps != 0 {
        return Err(Error::Config {
            field: "time.n_inverse".into(),
            message: format!(
                "coarse step count {coarse_steps} must divide the data step count {fine_steps}"
            ),
        });
    }
    let stride = fine_steps / coarse_steps;
    Ok((0..=coarse_steps).map(|n| phi_fine[n * stride]).collect())
}
