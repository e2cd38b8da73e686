//! Identification machinery checked against dense solves, prescribed-march
//! consistency and the structural properties of the decomposition.

mod common;

use coefid::direct::{record_observations, run_direct, DirectScheme, TimeGrid};
use coefid::fem::assemble;
use coefid::inverse::{
    identify, run_linearized, scheme_residual, solve_w_first_order, solve_y_first_order,
    step_inverse, SchemeKind,
};
use coefid::mesh::triangulate;
use coefid::sparse::axpy_combine;

#[test]
fn decomposition_solves_match_dense_oracle() {
    let mesh = triangulate(&common::trapezoid(), 0.2).unwrap();
    let spec = common::reference_problem();
    let forms = assemble(&mesh, &spec).unwrap();
    let tau = 1e-3;
    let u0 = coefid::direct::project_initial(&forms, &mesh, &spec).unwrap();
    let zero = vec![0.0; u0.len()];

    let y = solve_y_first_order(&forms, &u0, &zero, tau).unwrap();
    let w = solve_w_first_order(&forms, &u0, tau).unwrap();

    let a = axpy_combine(
        &[1.0 / tau, 1.0, 1.0],
        &[&forms.mass, &forms.stiffness, &forms.boundary],
    )
    .unwrap();
    let dense = common::to_dense(&a);
    let rhs_y: Vec<f64> = forms.mass.matvec(&u0).iter().map(|m| m / tau).collect();
    let rhs_w: Vec<f64> = forms.mass.matvec(&u0).iter().map(|m| -m).collect();
    assert!(common::max_abs_diff(&y, &common::dense_solve_spd(&dense, &rhs_y)) < 1e-8);
    assert!(common::max_abs_diff(&w, &common::dense_solve_spd(&dense, &rhs_w)) < 1e-10);

    // The companion field has a fixed (negative) sign for this data.
    assert!(w.iter().all(|&v| v < 0.0), "w should be strictly negative");
}

#[test]
fn identification_reproduces_a_prescribed_march_exactly() {
    // Manufactured data: march each linearized scheme with a known
    // coefficient on the same grid, then identify; recovery is exact up to
    // solver tolerance.
    let mesh = triangulate(&common::trapezoid(), 0.12).unwrap();
    let spec = common::reference_problem();
    let grid = TimeGrid::new(0.1, 50).unwrap();
    let p = common::smooth_coefficient();
    let obs = common::centroid_observation(&mesh);

    for scheme in SchemeKind::ALL {
        let traj = run_linearized(&mesh, &spec, &p, grid, scheme).unwrap();
        let phi = traj.observe(&obs);
        let result = identify(
            &mesh,
            &spec,
            grid,
            scheme,
            &obs,
            &phi,
            Some(p.eval(0.0)),
            None,
        )
        .unwrap();
        for n in 0..grid.steps() {
            let expected = p.eval(grid.time(n + 1));
            let got = result.p_series[n];
            assert!(
                (got - expected).abs() <= 1e-8 * (1.0 + expected.abs()),
                "{scheme:?} step {}: {got} vs {expected}",
                n + 1
            );
        }
    }
}

#[test]
fn recovered_pair_satisfies_scheme_for_any_coefficient_value() {
    // The decomposition makes the scheme equation hold identically in the
    // scalar coefficient: probe the residual at the recovered value and at
    // two unrelated values.
    let mesh = triangulate(&common::trapezoid(), 0.12).unwrap();
    let spec = common::reference_problem();
    let forms = assemble(&mesh, &spec).unwrap();
    let grid = TimeGrid::new(0.1, 100).unwrap();
    let tau = grid.tau();
    let obs = common::centroid_observation(&mesh);

    let data = run_direct(&mesh, &spec, &common::ramp_coefficient(0.1), grid, DirectScheme::Implicit)
        .unwrap();
    let phi = data.observe(&obs);

    let u0 = coefid::direct::project_initial(&forms, &mesh, &spec).unwrap();
    let zero = vec![0.0; u0.len()];
    for scheme in SchemeKind::ALL {
        let p_n = 3.0;
        let (_, p_next, pair) = step_inverse(
            &forms, &u0, p_n, &zero, tau, scheme, &obs, phi[1], 1e-16,
        )
        .unwrap();
        for p_probe in [p_next, p_next + 0.7, 3.0] {
            let u_probe: Vec<f64> = pair
                .y
                .iter()
                .zip(&pair.w)
                .map(|(y, w)| y + p_probe * w)
                .collect();
            let (res, rhs) =
                scheme_residual(&forms, scheme, &u0, &u_probe, p_n, p_probe, &zero, tau).unwrap();
            assert!(
                res <= 1e-8 * rhs,
                "{scheme:?} residual {res:e} at probe {p_probe} exceeds 1e-8 * {rhs:e}"
            );
        }
    }
}

#[test]
fn companion_functional_is_negative_throughout_reference_run() {
    let mesh = triangulate(&common::trapezoid(), 0.08).unwrap();
    let spec = common::reference_problem();
    let grid = TimeGrid::new(0.1, 100).unwrap();
    let obs = common::centroid_observation(&mesh);
    let data = run_direct(&mesh, &spec, &common::ramp_coefficient(0.1), grid, DirectScheme::Implicit)
        .unwrap();
    let phi = record_observations(&data, &obs, 0.0, 0);
    for scheme in SchemeKind::ALL {
        let result = identify(&mesh, &spec, grid, scheme, &obs, &phi, None, None).unwrap();
        for (n, d) in result.diagnostics.iter().enumerate() {
            assert!(
                d.w_functional < 0.0,
                "{scheme:?}: w functional {} at step {} is not negative",
                d.w_functional,
                n + 1
            );
            assert!(
                d.w_functional.abs() > d.threshold,
                "recorded value should clear the degeneracy threshold"
            );
        }
    }
}

#[test]
fn explicit_threshold_triggers_degeneracy_error() {
    let mesh = triangulate(&common::trapezoid(), 0.15).unwrap();
    let spec = common::reference_problem();
    let grid = TimeGrid::new(0.1, 10).unwrap();
    let obs = common::centroid_observation(&mesh);
    let data =
        run_direct(&mesh, &spec, &common::smooth_coefficient(), grid, DirectScheme::Implicit)
            .unwrap();
    let phi = data.observe(&obs);
    // An absurdly large threshold makes every step "degenerate".
    let r = identify(
        &mesh,
        &spec,
        grid,
        SchemeKind::FirstOrder,
        &obs,
        &phi,
        None,
        Some(1e6),
    );
    match r {
        Err(coefid::Error::DegenerateObservation { step, .. }) => assert_eq!(step, 1),
        other => panic!("expected degeneracy, got {other:?}"),
    }
}

#[test]
fn mean_observation_identifies_like_point_observation() {
    // Integral (mean-value) observation drives the same machinery.
    let mesh = triangulate(&common::trapezoid(), 0.1).unwrap();
    let spec = common::reference_problem();
    let grid = TimeGrid::new(0.1, 80).unwrap();
    let p = common::smooth_coefficient();
    let obs = coefid::fem::build_observation(&mesh, &coefid::fem::ObservationSpec::Mean).unwrap();
    let data = run_direct(&mesh, &spec, &p, grid, DirectScheme::Implicit).unwrap();
    let phi = data.observe(&obs);
    let result = identify(&mesh, &spec, grid, SchemeKind::FirstOrder, &obs, &phi, None, None)
        .unwrap();
    let err = coefid::experiment::metrics::max_error_in_windows(
        grid,
        &result.p_series,
        &p,
        &coefid::experiment::metrics::LATE_WINDOW,
    );
    // First-order accuracy at tau = 1.25e-3 leaves an O(1) error against the
    // analytic coefficient, far below its scale of ~20.
    assert!(err < 2.0, "mean-value identification error {err}");
    for (n, state) in result.trajectory.states.iter().enumerate().skip(1) {
        assert!((obs.apply(state) - phi[n]).abs() < 1e-10);
    }
}
