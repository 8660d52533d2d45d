use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("no interior minimum: candidate {candidate} is within tolerance of an endpoint of ({lo}, {hi})")]
    NoInteriorMinimum { candidate: f64, lo: f64, hi: f64 },

    #[error("exponent is not convex at its minimizer {at} (second derivative {curvature})")]
    NonConvexAtMinimum { at: f64, curvature: f64 },

    #[error("quadrature did not converge after {panels} panels (estimated error {error:e})")]
    QuadratureNonConvergent { panels: usize, error: f64 },

    #[error("cannot bracket a root of the CGF slope for target {target}")]
    BracketFailure { target: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate curvature {curvature:e} at u = {at}")]
    DegenerateCurvature { at: f64, curvature: f64 },

    #[error("u = {u} lies outside the truncation window J_{n} = ({lo}, {hi})")]
    WindowError { n: u32, u: f64, lo: f64, hi: f64 },

    #[error("tilted-rate gap vanishes (delta = {delta:e}); x is on the boundary of A")]
    GapVanishes { delta: f64 },

    #[error("Riccati solution blew up at t = {time}")]
    BlowUp { time: f64 },

    #[error("integrator step size underflow at t = {time}")]
    StepUnderflow { time: f64 },

    #[error("least-squares fit is ill-conditioned (condition number {condition:e})")]
    FitIllConditioned { condition: f64 },

    #[error("complex evaluation left the real branch (imaginary residue {residue:e})")]
    BranchFault { residue: f64 },

    #[error("moment generating function explodes at u = {u}, t = {t}")]
    ExplosionRegion { u: f64, t: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::QuadratureNonConvergent { .. }
            | Error::BlowUp { .. }
            | Error::StepUnderflow { .. }
            | Error::FitIllConditioned { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
