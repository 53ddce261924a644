use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("explicit fill has {got} spins, lattice needs {expected}")]
    FillLength { expected: usize, got: usize },

    #[error("spin state {0} is not valid for this model")]
    InvalidSpin(String),

    #[error("site index {index} out of range for {n_sites} sites")]
    SiteOutOfRange { index: usize, n_sites: usize },

    #[error("cluster target {target} out of range for {n_species} species")]
    TargetOutOfRange { target: usize, n_species: usize },

    #[error("{0} is only defined for finite q")]
    RequiresFiniteQ(&'static str),

    #[error("state space of {states} configurations exceeds the limit of {limit}")]
    StateSpaceTooLarge { states: u128, limit: u128 },

    #[error("stop rule already holds in the initial state")]
    AlreadyAbsorbed,

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("fit needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("invalid scaling point: {0}")]
    InvalidPoint(String),

    #[error("trajectory is empty")]
    EmptyTrajectory,
}
