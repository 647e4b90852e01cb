//! First-passage laws of Brownian motion with a broken (two-regime) drift,
//! free on the line or reflected at zero, against a boundary that jumps once
//! at an independent exponential time.

pub mod error;
pub mod greens;
pub mod inversion;
pub mod montecarlo;
pub mod piecewise;
pub mod quadrature;
pub mod spectral;
pub mod transforms;

pub use error::{FptError, Result};
pub use greens::{green, resolvent_integral, tail_mass, GreenKernel, PiecewiseExpPayoff};
pub use inversion::{invert_laplace, stehfest_density, transition_density, Density, DensityRow, InversionMethod, InversionParams};
pub use montecarlo::{
    density_histogram, density_histograms, estimate_joint_lt, estimate_phi_quadruple, simulate_hitting, BinSpec,
    HitKind, HitSample, Histogram, MCEstimate, Reflection, SimConfig,
};
pub use spectral::{
    fundamental_solution, fundamental_solution_derivative, speed_scale_densities, spectral_roots, wronskian, Direction,
    DriftSpec, Frequency, Roots, SpectralData, System,
};
pub use transforms::{
    g_functions, joint_lt, killed_expectation, phi_quadruple, phi_tilde_quadruple, reflected_hit_lt, two_sided_exit_lt,
    BoundarySpec, GValues, JointLt, JointVariant, JumpAtom, JumpLaw, MVariant, ReflectedReading, TransformQuery,
};
