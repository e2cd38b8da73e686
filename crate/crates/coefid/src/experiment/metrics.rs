//! Error metrics and observed-order estimation for identification runs.

use crate::direct::{CoefficientFunction, TimeGrid};

/// Max absolute error of the recovered series against the exact coefficient,
/// restricted to times `t` with `t/T` inside one of the given windows.
pub fn max_error_in_windows(
    grid: TimeGrid,
    p_recovered: &[f64],
    exact: &CoefficientFunction,
    windows: &[(f64, f64)],
) -> f64 {
    let total = grid.final_time();
    let mut worst = 0.0f64;
    for (n, p) in p_recovered.iter().enumerate() {
        let t = grid.time(n + 1);
        let frac = t / total;
        if windows
            .iter()
            .any(|&(lo, hi)| frac >= lo - 1e-12 && frac <= hi + 1e-12)
        {
            worst = worst.max((p - exact.eval(t)).abs());
        }
    }
    worst
}

/// Whole-series max error.
pub fn max_error(grid: TimeGrid, p_recovered: &[f64], exact: &CoefficientFunction) -> f64 {
    max_error_in_windows(grid, p_recovered, exact, &[(0.0, 1.0)])
}

/// Windows skipping a band around the mid-time switch of the discontinuous
/// test coefficient.
pub const SMOOTH_WINDOWS: [(f64, f64); 2] = [(0.05, 0.45), (0.55, 1.0)];

/// Late-time window where the smooth test coefficient is past its ramp-up.
pub const LATE_WINDOW: [(f64, f64); 1] = [(0.2, 1.0)];

/// Observed order between two (step size, error) samples.
pub fn pairwise_order(tau_coarse: f64, err_coarse: f64, tau_fine: f64, err_fine: f64) -> f64 {
    (err_coarse / err_fine).ln() / (tau_coarse / tau_fine).ln()
}

/// Least-squares slope of `ln(error)` against `ln(tau)` over a refinement study.
pub fn observed_order_least_squares(taus: &[f64], errors: &[f64]) -> f64 {
    assert_eq!(taus.len(), errors.len());
    assert!(taus.len() >= 2);
    let xs: Vec<f64> = taus.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Count sign changes of `(recovered - exact)` over steps whose time fraction
/// lies in the window; values below `dead_band` are skipped so roundoff-level
/// residuals do not register as crossings.
pub fn sign_changes_in_window(
    grid: TimeGrid,
    p_recovered: &[f64],
    exact: &CoefficientFunction,
    window: (f64, f64),
    dead_band: f64,
) -> usize {
    let total = grid.final_time();
    let mut last_sign = 0i8;
    let mut changes = 0usize;
    for (n, p) in p_recovered.iter().enumerate() {
        let t = grid.time(n + 1);
        let frac = t / total;
        if frac < window.0 - 1e-12 || frac > window.1 + 1e-12 {
            continue;
        }
        let diff = p - exact.eval(t);
        if diff.abs() <= dead_band {
            continue;
        }
        let sign = if diff > 0.0 { 1i8 } else { -1i8 };
        if last_sign != 0 && sign != last_sign {
            changes += 1;
        }
        last_sign = sign;
    }
    changes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_recovered_from_synthetic_errors() {
        let taus = [0.1, 0.05, 0.025, 0.0125];
        let first: Vec<f64> = taus.iter().map(|t| 3.0 * t).collect();
        let second: Vec<f64> = taus.iter().map(|t| 3.0 * t * t).collect();
        assert!((observed_order_least_squares(&taus, &first) - 1.0).abs() < 1e-12);
        assert!((observed_order_least_squares(&taus, &second) - 2.0).abs() < 1e-12);
        assert!((pairwise_order(0.1, 0.3, 0.05, 0.15) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn window_errors_and_sign_changes() {
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let exact = CoefficientFunction::Constant(0.0);
        let rec = vec![0.0, 0.0, 0.0, 0.0, 1.0, -1.0, 2.0, -0.5, 0.0, 0.0];
        let err_all = max_error(grid, &rec, &exact);
        assert_eq!(err_all, 2.0);
        let err_early = max_error_in_windows(grid, &rec, &exact, &[(0.0, 0.35)]);
        assert_eq!(err_early, 0.0);
        let changes = sign_changes_in_window(grid, &rec, &exact, (0.0, 1.0), 1e-9);
        assert_eq!(changes, 3);
    }
}
