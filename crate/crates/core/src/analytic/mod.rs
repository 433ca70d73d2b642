//! Expectation-level algebra: objectives, expected updates, closed-form
//! limits, eigenvalue certificates, regularization paths and saddle gaps.

mod closed_form;
mod expected;
mod gap;
mod objectives;
mod path;

pub use closed_form::{closed_form, ClosedForm};
pub use expected::{
    eigen_certificate, empirical_update, expected_update, sample_update, EigenCertificate,
    ExpectedUpdate, SINGULAR_TOL,
};
pub use gap::{epsilon_opt, minimize_quadratic_on_ball};
pub use objectives::{
    dualdice_direction_exact, eval_dualdice, eval_j, eval_l, eval_saddle_l, exact_direction,
    gendice_direction_exact, hardexample_gradient, saddle_direction,
};
pub use path::{regularization_path, PathPoint, RegularizationPath, PATH_RANK_TOL};
