use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} outside [{min}, {max}]")]
    Domain {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("point is not on the unit sphere (|x| = {norm})")]
    NonUnit { norm: f64 },

    #[error("initial state is not unit speed (H = {h}, expected 0.5)")]
    EnergyMismatch { h: f64 },

    #[error("geodesic reached the singular orbit at rho = {rho} with momentum {momentum} in the collapsing angle")]
    SingularCollision { rho: f64, momentum: f64 },

    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("grid resolution {got} below minimum {min}")]
    ResolutionTooSmall { got: usize, min: usize },

    #[error("epsilon-graph is disconnected ({unreached} of {total} nodes unreached); increase epsilon or n_samples")]
    Disconnected { unreached: usize, total: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
