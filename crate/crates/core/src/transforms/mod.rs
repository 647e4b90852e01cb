//! Hitting-time Laplace transforms against the single-jump boundary.
//!
//! The joint transform of `(X(tau), tau)` is assembled from the exit
//! transforms of the pre-jump interval plus, for paths that survive to the
//! jump time `T1`, a killed expectation of the post-jump exit transform. The
//! killed expectation goes through the resolvent directly, so it has none of
//! the removable poles of the closed-form `Phi` expressions, which are kept as
//! an independent cross-check.

mod boundary;
mod exit;
mod joint;
mod phi;

pub use boundary::{
    BoundarySpec, JointVariant, JumpAtom, JumpLaw, MVariant, ReflectedReading, TransformQuery, DEFAULT_JUMP_NODES,
};
pub use exit::{reflected_hit_lt, two_sided_exit_lt};
pub use joint::{joint_lt, killed_expectation, JointLt, JUMP_NODE_TOL, MAX_JUMP_NODES};
pub use phi::{
    g_functions, phi_pair, phi_quadruple, phi_tilde_quadruple, GValues, POLE_GUARD, RICHARDSON_SPREAD,
    RICHARDSON_STEPS,
};
