//! Built-in experiment presets on the trapezoidal reference domain.
//!
//! All presets share the same setup: unit diffusion, boundary coefficient 10,
//! unit initial state, zero source, final time 0.1, point observation at the
//! domain centroid, synthetic data from a 1000-step implicit run. They differ
//! in the exact coefficient and the identification matrix.

use crate::mesh::{Point, PolygonSpec};

use super::{
    CoefField, CoefficientConfig, DomainConfig, ExperimentConfig, NoiseConfig, ObservationConfig,
    OutputConfig, PolygonField, ProblemConfig, SchemesConfig, TimeConfig,
};
use crate::error::{Error, Result};

/// Reference trapezoid with corners (0,0), (1.5,0), (1.5,0.5), (0,1).
pub fn trapezoid_polygon() -> PolygonSpec {
    PolygonSpec::new(vec![
        Point::new(0.0, 0.0),
        Point::new(1.5, 0.0),
        Point::new(1.5, 0.5),
        Point::new(0.0, 1.0),
    ])
    .expect("reference trapezoid is a valid polygon")
}

/// Default mesh spacing for the trapezoid, tuned so the triangulation lands
/// near 1180 nodes / 2230 triangles.
pub const TRAPEZOID_EDGE_LENGTH: f64 = 0.034;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig2,
    Fig4,
    Fig5,
    Fig6,
    Fig7,
    ConvergenceTable,
}

impl Preset {
    pub const ALL: [Preset; 6] = [
        Preset::Fig2,
        Preset::Fig4,
        Preset::Fig5,
        Preset::Fig6,
        Preset::Fig7,
        Preset::ConvergenceTable,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Fig6 => "fig6",
            Preset::Fig7 => "fig7",
            Preset::ConvergenceTable => "convergence_table",
        }
    }

    pub fn parse(name: &str) -> Result<Preset> {
        Preset::ALL
            .iter()
            .find(|p| p.name() == name)
            .copied()
            .ok_or_else(|| Error::Config {
                field: "preset".into(),
                message: format!(
                    "unknown preset `{name}` (expected one of {})",
                    Preset::ALL
                        .iter()
                        .map(|p| p.name())
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            })
    }

    /// The experiment config this preset expands to.
    pub fn config(&self) -> ExperimentConfig {
        let coefficient = |kind: &str| CoefficientConfig {
            kind: kind.into(),
            times: None,
            values: None,
        };
        let schemes = |list: &[&str]| SchemesConfig {
            list: list.iter().map(|s| s.to_string()).collect(),
        };
        let time = |n_inverse: Vec<usize>, n_direct: Vec<usize>| TimeConfig {
            final_time: 0.1,
            n_data: 1000,
            n_inverse,
            n_direct,
            data_scheme: "implicit".into(),
        };
        let base = |coefficient: CoefficientConfig,
                    schemes: SchemesConfig,
                    time: TimeConfig,
                    emit_convergence: bool| ExperimentConfig {
            domain: DomainConfig {
                polygon: PolygonField::Named("trapezoid".into()),
                edge_length: TRAPEZOID_EDGE_LENGTH,
            },
            problem: ProblemConfig {
                diffusion: CoefField::Number(1.0),
                boundary_coeff: CoefField::Number(10.0),
                initial: CoefField::Number(1.0),
            },
            coefficient,
            time,
            schemes,
            observation: ObservationConfig::default(),
            noise: NoiseConfig::default(),
            output: OutputConfig {
                directory: None,
                emit_field: false,
                emit_convergence,
            },
        };

        match self {
            Preset::Fig2 => base(
                coefficient("eq20"),
                schemes(&[]),
                time(vec![], vec![100, 250, 500, 1000]),
                false,
            ),
            Preset::Fig4 => base(
                coefficient("eq20"),
                schemes(&["first_order"]),
                time(vec![100, 250, 500], vec![]),
                false,
            ),
            Preset::Fig5 => base(
                coefficient("eq20"),
                schemes(&["crank_nicolson"]),
                time(vec![100, 250, 500], vec![]),
                false,
            ),
            Preset::Fig6 => base(
                coefficient("smooth_rational"),
                schemes(&["first_order"]),
                time(vec![125, 250, 500], vec![]),
                false,
            ),
            Preset::Fig7 => base(
                coefficient("smooth_rational"),
                schemes(&["crank_nicolson"]),
                time(vec![125, 250, 500], vec![]),
                false,
            ),
            Preset::ConvergenceTable => base(
                coefficient("smooth_rational"),
                schemes(&["first_order", "crank_nicolson", "hybrid_implicit"]),
                time(vec![125, 250, 500], vec![]),
                true,
            ),
        }
    }

    /// Config with the exact-coefficient selector replaced (used by the CLI
    /// `--coefficient` override).
    pub fn config_with_coefficient(&self, kind: Option<&str>) -> ExperimentConfig {
        let mut config = self.config();
        if let Some(kind) = kind {
            config.coefficient.kind = kind.into();
        }
        config
    }
}
