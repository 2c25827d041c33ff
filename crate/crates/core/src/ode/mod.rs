//! Adaptive integration of the self-similar profile equations.

pub mod integrator;
pub mod profile;

pub use profile::{
    integrate, integrate_until, psi_ratio, psi_ratio_upto, Direction, Event, EventKind,
    IntegratorControls, ProfileOde, ProfileSample, ProfileTrajectory, PsiSeries, TailFit,
    Termination,
};
