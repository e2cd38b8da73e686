//! Identification of the time-dependent reaction coefficient from point or
//! integral observations.
//!
//! Each time step of a linearized scheme splits into two elliptic solves via
//! the decomposition `u_next = y + p_next * w`: the same system matrix with
//! two right-hand sides, after which `p_next` follows from the observation by
//! a scalar formula. The scheme equation then holds for any scalar `p`, so
//! matching the observation is the only constraint that fixes it.
//!
//! Scheme variants (all with mass matrix M, stiffness K, boundary B, step tau):
//!
//! * `FirstOrder`: reaction term `p_next * M u_n`;
//!   `(M/tau + K + B) y = M u_n / tau + F`, same matrix with `-M u_n` for `w`.
//! * `CrankNicolson`: symmetric averaging of K, B and the reaction term;
//!   `(M/tau + K/2 + B/2 + p_n M / 2) y = (M/tau - K/2 - B/2) u_n + F`,
//!   same matrix with `-M u_n / 2` for `w`.
//! * `HybridImplicit`: implicit in K and B, averaged reaction only;
//!   `(M/tau + K + B + p_n M / 2) y = M u_n / tau + F`, same matrix with
//!   `-M u_n / 2` for `w`.
//!
//! Two independent solution routes cross-check the linearized schemes: an
//! exponential substitution that removes the reaction term entirely
//! ([`solve_via_transform`]) and a fixed-point iteration on the fully implicit
//! nonlinear step ([`solve_nonlinear_implicit`]).

use crate::direct::{project_initial, FieldTrajectory, TimeGrid};
use crate::error::{Error, Result};
use crate::fem::{assemble, assemble_load, AssembledForms, ObservationFunctional, ProblemSpec};
use crate::mesh::Mesh;
use crate::sparse::{axpy_combine, solve_spd, SparseMatrix};
use crate::direct::CoefficientFunction;

/// Relative CG tolerance for the per-step elliptic solves.
const SOLVE_TOL: f64 = 1e-12;

/// Linearized time scheme for the inverse problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    FirstOrder,
    CrankNicolson,
    HybridImplicit,
}

impl SchemeKind {
    pub const ALL: [SchemeKind; 3] = [
        SchemeKind::FirstOrder,
        SchemeKind::CrankNicolson,
        SchemeKind::HybridImplicit,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SchemeKind::FirstOrder => "first_order",
            SchemeKind::CrankNicolson => "crank_nicolson",
            SchemeKind::HybridImplicit => "hybrid_implicit",
        }
    }

    /// Whether the scheme references the coefficient at the previous level.
    pub fn needs_previous_coefficient(&self) -> bool {
        !matches!(self, SchemeKind::FirstOrder)
    }
}

/// The auxiliary fields of one decomposition step.
#[derive(Debug, Clone)]
pub struct DecompositionPair {
    pub y: Vec<f64>,
    pub w: Vec<f64>,
}

/// Per-step record kept alongside the recovered coefficient.
#[derive(Debug, Clone, Copy)]
pub struct StepDiagnostics {
    /// Observation functional applied to `w` (the recovery denominator); for
    /// the transform route this holds the observed value used as denominator.
    pub w_functional: f64,
    /// Relative residual of the assembled scheme equation at the accepted
    /// `(u_next, p_next)`.
    pub residual: f64,
    /// Inner iterations spent (1 for the linearized schemes).
    pub iterations: usize,
    /// Degeneracy threshold in force at this step.
    pub threshold: f64,
}

/// Recovered coefficient series with the reconstructed field trajectory.
#[derive(Debug, Clone)]
pub struct IdentificationResult {
    /// `p` at `t_1 .. t_N`.
    pub p_series: Vec<f64>,
    pub trajectory: FieldTrajectory,
    pub diagnostics: Vec<StepDiagnostics>,
}

/// State of the exponential-substitution route.
#[derive(Debug, Clone)]
pub struct TransformState {
    /// Multiplier series, starting at 1.
    pub chi_series: Vec<f64>,
    pub v_trajectory: FieldTrajectory,
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Default degeneracy threshold for `|r.w|`.
fn default_threshold(tau: f64, u_n: &[f64]) -> f64 {
    1e-14 / tau * norm_inf(u_n)
}

/// Solve the coefficient-free first-order system for `y`:
/// `(M/tau + K + B) y = M u_n / tau + F_next`.
pub fn solve_y_first_order(
    forms: &AssembledForms,
    u_n: &[f64],
    load_next: &[f64],
    tau: f64,
) -> Result<Vec<f64>> {
    let a = axpy_combine(
        &[1.0 / tau, 1.0, 1.0],
        &[&forms.mass, &forms.stiffness, &forms.boundary],
    )?;
    let mu = forms.mass.matvec(u_n);
    let rhs: Vec<f64> = mu
        .iter()
        .zip(load_next)
        .map(|(m, f)| m / tau + f)
        .collect();
    solve_spd(&a, &rhs, SOLVE_TOL)
}

/// Solve the companion system for `w`: `(M/tau + K + B) w = -M u_n`.
pub fn solve_w_first_order(forms: &AssembledForms, u_n: &[f64], tau: f64) -> Result<Vec<f64>> {
    let a = axpy_combine(
        &[1.0 / tau, 1.0, 1.0],
        &[&forms.mass, &forms.stiffness, &forms.boundary],
    )?;
    let rhs: Vec<f64> = forms.mass.matvec(u_n).iter().map(|m| -m).collect();
    solve_spd(&a, &rhs, SOLVE_TOL)
}

/// Scalar recovery: `p_next = (phi_next - r.y) / (r.w)`, guarded against a
/// degenerate denominator.
pub fn recover_p(
    y: &[f64],
    w: &[f64],
    obs: &ObservationFunctional,
    phi_next: f64,
    threshold: f64,
) -> Result<f64> {
    let rw = obs.apply(w);
    if !(rw.abs() > threshold) {
        return Err(Error::DegenerateObservation {
            step: 0,
            value: rw,
            threshold,
        });
    }
    Ok((phi_next - obs.apply(y)) / rw)
}

/// Build the scheme system matrix and the two right-hand sides for one step.
fn scheme_systems(
    forms: &AssembledForms,
    scheme: SchemeKind,
    u_n: &[f64],
    p_n: f64,
    load_next: &[f64],
    tau: f64,
) -> Result<(SparseMatrix, Vec<f64>, Vec<f64>)> {
    let n = u_n.len();
    let mu = forms.mass.matvec(u_n);
    match scheme {
        SchemeKind::FirstOrder => {
            let a = axpy_combine(
                &[1.0 / tau, 1.0, 1.0],
                &[&forms.mass, &forms.stiffness, &forms.boundary],
            )?;
            let rhs_y: Vec<f64> = (0..n).map(|i| mu[i] / tau + load_next[i]).collect();
            let rhs_w: Vec<f64> = mu.iter().map(|m| -m).collect();
            Ok((a, rhs_y, rhs_w))
        }
        SchemeKind::CrankNicolson => {
            let mass_coeff = 1.0 / tau + 0.5 * p_n;
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
            let ku = forms.stiffness.matvec(u_n);
            let bu = forms.boundary.matvec(u_n);
            let rhs_y: Vec<f64> = (0..n)
                .map(|i| mu[i] / tau - 0.5 * ku[i] - 0.5 * bu[i] + load_next[i])
                .collect();
            let rhs_w: Vec<f64> = mu.iter().map(|m| -0.5 * m).collect();
            Ok((a, rhs_y, rhs_w))
        }
        SchemeKind::HybridImplicit => {
            let mass_coeff = 1.0 / tau + 0.5 * p_n;
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
            let rhs_y: Vec<f64> = (0..n).map(|i| mu[i] / tau + load_next[i]).collect();
            let rhs_w: Vec<f64> = mu.iter().map(|m| -0.5 * m).collect();
            Ok((a, rhs_y, rhs_w))
        }
    }
}

/// Residual of the assembled scheme equation at `(u_next, p_next)`.
///
/// Returns `(||A u_next - rhs||, ||rhs||)` where `rhs` collects every term
/// not multiplying `u_next`, including the recovered reaction term.
pub fn scheme_residual(
    forms: &AssembledForms,
    scheme: SchemeKind,
    u_n: &[f64],
    u_next: &[f64],
    p_n: f64,
    p_next: f64,
    load_next: &[f64],
    tau: f64,
) -> Result<(f64, f64)> {
    let (a, rhs_y, _) = scheme_systems(forms, scheme, u_n, p_n, load_next, tau)?;
    let mu = forms.mass.matvec(u_n);
    let reaction_scale = match scheme {
        SchemeKind::FirstOrder => p_next,
        SchemeKind::CrankNicolson | SchemeKind::HybridImplicit => 0.5 * p_next,
    };
    let rhs: Vec<f64> = (0..u_n.len())
        .map(|i| rhs_y[i] - reaction_scale * mu[i])
        .collect();
    let au = a.matvec(u_next);
    let res: Vec<f64> = (0..u_n.len()).map(|i| au[i] - rhs[i]).collect();
    Ok((norm2(&res), norm2(&rhs)))
}

/// One identification step: solve for the decomposition pair, recover the
/// coefficient from the observation and recombine the state.
#[allow(clippy::too_many_arguments)]
pub fn step_inverse(
    forms: &AssembledForms,
    u_n: &[f64],
    p_n: f64,
    load_next: &[f64],
    tau: f64,
    scheme: SchemeKind,
    obs: &ObservationFunctional,
    phi_next: f64,
    threshold: f64,
) -> Result<(Vec<f64>, f64, DecompositionPair)> {
    let (a, rhs_y, rhs_w) = scheme_systems(forms, scheme, u_n, p_n, load_next, tau)?;
    let y = solve_spd(&a, &rhs_y, SOLVE_TOL)?;
    let w = solve_spd(&a, &rhs_w, SOLVE_TOL)?;
    let p_next = recover_p(&y, &w, obs, phi_next, threshold)?;
    let u_next: Vec<f64> = y.iter().zip(&w).map(|(yi, wi)| yi + p_next * wi).collect();
    Ok((u_next, p_next, DecompositionPair { y, w }))
}

/// Identify the coefficient series from an observation series.
///
/// `phi` must hold `N + 1` values on the same grid. For schemes referencing
/// the previous coefficient level, `p0` seeds the first step; by default it is
/// taken from a single first-order probe step. `threshold` overrides the
/// per-step degeneracy threshold (default `1e-14 / tau * max|u_n|`).
/// The first failing step aborts with its index and cause.
#[allow(clippy::too_many_arguments)]
pub fn identify(
    mesh: &Mesh,
    spec: &ProblemSpec,
    grid: TimeGrid,
    scheme: SchemeKind,
    obs: &ObservationFunctional,
    phi: &[f64],
    p0: Option<f64>,
    threshold: Option<f64>,
) -> Result<IdentificationResult> {
    let forms = assemble(mesh, spec)?;
    identify_assembled(&forms, mesh, spec, grid, scheme, obs, phi, p0, threshold)
}

#[allow(clippy::too_many_arguments)]
pub fn identify_assembled(
    forms: &AssembledForms,
    mesh: &Mesh,
    spec: &ProblemSpec,
    grid: TimeGrid,
    scheme: SchemeKind,
    obs: &ObservationFunctional,
    phi: &[f64],
    p0: Option<f64>,
    threshold: Option<f64>,
) -> Result<IdentificationResult> {
    let steps = grid.steps();
    if phi.len() != steps + 1 {
        return Err(Error::DimensionMismatch {
            expected: steps + 1,
            got: phi.len(),
        });
    }
    let tau = grid.tau();
    let u0 = project_initial(forms, mesh, spec)?;

    // Seed the previous coefficient level when the scheme needs one: a single
    // first-order probe step at n = 0 unless the caller supplied a value.
    let mut p_prev = if scheme.needs_previous_coefficient() {
        match p0 {
            Some(v) => v,
            None => {
                let load = assemble_load(mesh, spec, grid.time(1));
                let thr = threshold.unwrap_or_else(|| default_threshold(tau, &u0));
                let (_, p_probe, _) = step_inverse(
                    forms,
                    &u0,
                    0.0,
                    &load,
                    tau,
                    SchemeKind::FirstOrder,
                    obs,
                    phi[1],
                    thr,
                )
                .map_err(|e| e.at_step(1))?;
                p_probe
            }
        }
    } else {
        0.0
    };

    let mut states = Vec::with_capacity(steps + 1);
    states.push(u0);
    let mut p_series = Vec::with_capacity(steps);
    let mut diagnostics = Vec::with_capacity(steps);

    for n in 0..steps {
        let load = assemble_load(mesh, spec, grid.time(n + 1));
        let u_n = states.last().unwrap();
        let thr = threshold.unwrap_or_else(|| default_threshold(tau, u_n));
        let (u_next, p_next, pair) = step_inverse(
            forms, u_n, p_prev, &load, tau, scheme, obs, phi[n + 1], thr,
        )
        .map_err(|e| e.at_step(n + 1))?;
        let (res, rhs_norm) =
            scheme_residual(forms, scheme, u_n, &u_next, p_prev, p_next, &load, tau)?;
        diagnostics.push(StepDiagnostics {
            w_functional: obs.apply(&pair.w),
            residual: if rhs_norm > 0.0 { res / rhs_norm } else { res },
            iterations: 1,
            threshold: thr,
        });
        p_series.push(p_next);
        states.push(u_next);
        p_prev = p_next;
    }

    Ok(IdentificationResult {
        p_series,
        trajectory: FieldTrajectory { states, grid },
        diagnostics,
    })
}

/// March a linearized scheme with a prescribed coefficient (no observation).
///
/// Useful to manufacture observation data that is exactly consistent with a
/// given scheme and grid.
pub fn run_linearized(
    mesh: &Mesh,
    spec: &ProblemSpec,
    p: &CoefficientFunction,
    grid: TimeGrid,
    scheme: SchemeKind,
) -> Result<FieldTrajectory> {
    let forms = assemble(mesh, spec)?;
    let tau = grid.tau();
    let mut states = Vec::with_capacity(grid.steps() + 1);
    states.push(project_initial(&forms, mesh, spec)?);
    for n in 0..grid.steps() {
        let load = assemble_load(mesh, spec, grid.time(n + 1));
        let u_n = states.last().unwrap();
        let p_n = p.eval(grid.time(n));
        let p_next = p.eval(grid.time(n + 1));
        let (a, rhs_y, rhs_w) = scheme_systems(&forms, scheme, u_n, p_n, &load, tau)
            .map_err(|e| e.at_step(n + 1))?;
        let y = solve_spd(&a, &rhs_y, SOLVE_TOL)?;
        let w = solve_spd(&a, &rhs_w, SOLVE_TOL)?;
        let u_next: Vec<f64> = y.iter().zip(&w).map(|(yi, wi)| yi + p_next * wi).collect();
        states.push(u_next);
    }
    Ok(FieldTrajectory { states, grid })
}

/// Identify the coefficient through the exponential substitution
/// `v = chi * u`, `chi(t) = exp(integral of p)`, which removes the reaction
/// term: `v` is marched by the coefficient-free implicit scheme, `chi` is
/// recovered from the observation at each step and `p` follows from the log
/// increments of `chi`.
///
/// When the source is nonzero, its weighting uses the lagged multiplier
/// `chi_n` (the new value is not known while assembling the step).
pub fn solve_via_transform(
    mesh: &Mesh,
    spec: &ProblemSpec,
    grid: TimeGrid,
    obs: &ObservationFunctional,
    phi: &[f64],
) -> Result<(TransformState, IdentificationResult)> {
    let steps = grid.steps();
    if phi.len() != steps + 1 {
        return Err(Error::DimensionMismatch {
            expected: steps + 1,
            got: phi.len(),
        });
    }
    let tau = grid.tau();
    let forms = assemble(mesh, spec)?;
    let a = axpy_combine(
        &[1.0 / tau, 1.0, 1.0],
        &[&forms.mass, &forms.stiffness, &forms.boundary],
    )?;
    let phi_scale = phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let phi_floor = 1e-14 * phi_scale;

    let v0 = project_initial(&forms, mesh, spec)?;
    let mut v_states = vec![v0.clone()];
    let mut u_states = vec![v0];
    let mut chi = vec![1.0f64];
    let mut p_series = Vec::with_capacity(steps);
    let mut diagnostics = Vec::with_capacity(steps);

    for n in 0..steps {
        let step = n + 1;
        if !(phi[step].abs() > phi_floor) {
            return Err(Error::TransformDegenerate {
                step,
                message: format!(
                    "observed value {:e} too close to zero (floor {:e})",
                    phi[step], phi_floor
                ),
            });
        }
        let load = assemble_load(mesh, spec, grid.time(step));
        let v_n = v_states.last().unwrap();
        let mv = forms.mass.matvec(v_n);
        let chi_n = *chi.last().unwrap();
        let rhs: Vec<f64> = (0..v_n.len())
            .map(|i| mv[i] / tau + chi_n * load[i])
            .collect();
        let v_next = solve_spd(&a, &rhs, SOLVE_TOL)?;
        let chi_next = obs.apply(&v_next) / phi[step];
        if !(chi_next > 0.0) {
            return Err(Error::TransformDegenerate {
                step,
                message: format!("recovered multiplier {chi_next:e} is not positive"),
            });
        }
        let av = a.matvec(&v_next);
        let res = norm2(
            &av.iter()
                .zip(&rhs)
                .map(|(x, r)| x - r)
                .collect::<Vec<f64>>(),
        );
        let rhs_norm = norm2(&rhs);
        p_series.push((chi_next.ln() - chi_n.ln()) / tau);
        u_states.push(v_next.iter().map(|v| v / chi_next).collect());
        diagnostics.push(StepDiagnostics {
            w_functional: phi[step],
            residual: if rhs_norm > 0.0 { res / rhs_norm } else { res },
            iterations: 1,
            threshold: phi_floor,
        });
        chi.push(chi_next);
        v_states.push(v_next);
    }

    let state = TransformState {
        chi_series: chi,
        v_trajectory: FieldTrajectory {
            states: v_states,
            grid,
        },
    };
    let result = IdentificationResult {
        p_series,
        trajectory: FieldTrajectory {
            states: u_states,
            grid,
        },
        diagnostics,
    };
    Ok((state, result))
}

/// Identify the coefficient by the fully implicit nonlinear scheme, resolved
/// at every step by fixed-point iteration.
///
/// Each iterate solves the implicit system with the current coefficient guess
/// frozen, then re-recovers the coefficient through the decomposition applied
/// at that iterate. Stops when
/// `|p_new - p_old| <= fp_tol * (1 + |p_new|)`; exceeding `max_iters` aborts
/// with the iterate history.
pub fn solve_nonlinear_implicit(
    mesh: &Mesh,
    spec: &ProblemSpec,
    grid: TimeGrid,
    obs: &ObservationFunctional,
    phi: &[f64],
    fp_tol: f64,
    max_iters: usize,
) -> Result<IdentificationResult> {
    let steps = grid.steps();
    if phi.len() != steps + 1 {
        return Err(Error::DimensionMismatch {
            expected: steps + 1,
            got: phi.len(),
        });
    }
    let tau = grid.tau();
    let forms = assemble(mesh, spec)?;
    let a_free = axpy_combine(
        &[1.0 / tau, 1.0, 1.0],
        &[&forms.mass, &forms.stiffness, &forms.boundary],
    )?;

    let u0 = project_initial(&forms, mesh, spec)?;
    let mut states = vec![u0];
    let mut p_series = Vec::with_capacity(steps);
    let mut diagnostics = Vec::with_capacity(steps);
    let mut p_prev = 0.0;

    for n in 0..steps {
        let step = n + 1;
        let load = assemble_load(mesh, spec, grid.time(step));
        let u_n = states.last().unwrap().clone();
        let mu = forms.mass.matvec(&u_n);
        let rhs_y: Vec<f64> = (0..u_n.len()).map(|i| mu[i] / tau + load[i]).collect();
        let y = solve_spd(&a_free, &rhs_y, SOLVE_TOL)?;
        let r_y = obs.apply(&y);
        let thr = default_threshold(tau, &u_n);

        let mut p_k = p_prev;
        let mut history = vec![p_k];
        let mut accepted: Option<(Vec<f64>, f64, f64, usize)> = None;

        for iter in 1..=max_iters {
            let mass_coeff = 1.0 / tau + p_k;
            if mass_coeff <= 0.0 {
                return Err(Error::IndefiniteSystem {
                    step,
                    shift: mass_coeff,
                });
            }
            let a_k = axpy_combine(
                &[mass_coeff, 1.0, 1.0],
                &[&forms.mass, &forms.stiffness, &forms.boundary],
            )?;
            let u_cand = solve_spd(&a_k, &rhs_y, SOLVE_TOL)?;
            let rhs_w: Vec<f64> = forms.mass.matvec(&u_cand).iter().map(|m| -m).collect();
            let w = solve_spd(&a_free, &rhs_w, SOLVE_TOL)?;
            let r_w = obs.apply(&w);
            if !(r_w.abs() > thr) {
                return Err(Error::DegenerateObservation {
                    step,
                    value: r_w,
                    threshold: thr,
                });
            }
            let p_new = (phi[step] - r_y) / r_w;
            history.push(p_new);
            if (p_new - p_k).abs() <= fp_tol * (1.0 + p_new.abs()) {
                let u_next: Vec<f64> =
                    y.iter().zip(&w).map(|(yi, wi)| yi + p_new * wi).collect();
                accepted = Some((u_next, p_new, r_w, iter));
                break;
            }
            p_k = p_new;
        }

        let (u_next, p_next, r_w, iterations) = accepted.ok_or(Error::FixedPointDiverged {
            step,
            history: history.clone(),
        })?;

        // Residual of the fully implicit nonlinear relation at the accepted pair.
        let a_final = axpy_combine(
            &[1.0 / tau + p_next, 1.0, 1.0],
            &[&forms.mass, &forms.stiffness, &forms.boundary],
        )?;
        let au = a_final.matvec(&u_next);
        let res = norm2(
            &au.iter()
                .zip(&rhs_y)
                .map(|(x, r)| x - r)
                .collect::<Vec<f64>>(),
        );
        let rhs_norm = norm2(&rhs_y);
        diagnostics.push(StepDiagnostics {
            w_functional: r_w,
            residual: if rhs_norm > 0.0 { res / rhs_norm } else { res },
            iterations,
            threshold: thr,
        });
        p_series.push(p_next);
        states.push(u_next);
        p_prev = p_next;
    }

    Ok(IdentificationResult {
        p_series,
        trajectory: FieldTrajectory { states, grid },
        diagnostics,
    })
}
