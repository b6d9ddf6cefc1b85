use crate::energy::ConstraintId;

pub type Result<T> = std::result::Result<T, ModelError>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("{name} = {value} is outside {expected}")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("UE {ue} offloads data but its remote-computing window is {window:e} s")]
    InfeasibleTime { ue: usize, window: f64 },
    #[error("SIC margin 1 - Y1*Y2 = {margin:e} is below the guard band")]
    SicInfeasible { margin: f64 },
    #[error("no feasible point: {0} cannot be satisfied")]
    Infeasible(ConstraintId),
    #[error("solver failure: {0}")]
    Solver(String),
}

pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> ModelError {
    ModelError::Domain {
        name,
        value,
        expected,
    }
}
