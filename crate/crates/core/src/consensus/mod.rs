//! The consensus iteration: gradients, the step, run drivers in matrix and
//! message-passing form, and the Euclidean baseline.

mod euclidean;
mod gradient;
mod node_sim;
mod run;

pub use euclidean::{
    euclidean_deviation, euclidean_pgd_step, run_euclidean_pgd, PgdTrace, Projection,
};
pub use gradient::{
    drcs_gradient, drcs_step, drcs_step_ascent_form, euclidean_grad_onestep,
    euclidean_grad_with_power, mix, multistep_grad, retract_along, riemannian_grad,
    riemannian_grad_closed_form, GradientField, GradientKind,
};
pub use node_sim::{
    node_sim_run, node_sim_run_from, AuditReport, Delivery, MessageLog, NodeNetwork,
};
pub use run::{
    observe, run_drcs, run_drcs_from, AlphaRule, ConvergenceTrace, Mode, RunConfig,
    StagnationDetector, StopRule, TerminalStatus, TraceRecord, DEFAULT_MAX_ITERS, DEFAULT_STOP_TOL,
    STAGNATION_FLOOR, STAGNATION_WINDOW, TRACE_CSV_HEADER,
};

pub(crate) use gradient::{check_network, tangent_step};
