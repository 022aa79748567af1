//! The coupled lattice NLS: nonlinearity, action-angle form, assumption checks and
//! a spectral simulator.

mod assumptions;
mod diag;
mod model;
mod sim;
mod transform;

pub(crate) use assumptions::toeplitz_checks;
pub use assumptions::{verify_assumptions, AssumptionOptions, AssumptionReport, CheckResult};
pub use diag::{peak_frequency, quasiperiodicity_diagnostic, DiagTolerance, DiagnosticReport, ModeFrequency, ModeSpec};
pub use model::{
    build_lattice_perturbation, cubic_coefficient, gn3_coefficient, gn4_coefficient, quintic_coefficient,
    tuple_multiplicity, NlsModel, ParamPoint, FULL_TUPLE_LIMIT,
};
pub use sim::{
    default_directions, linear_stability, nonlinearity, simulate, GrowthExponent, SimOptions, SimState, Trajectory,
};
pub use transform::{action_angle, binomial, from_lattice, normal_form_at, to_lattice, ExpansionOptions, TransformReport};
