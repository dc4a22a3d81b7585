use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, found {found}")]
    Dimension {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid network: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix {0} is not symmetric")]
    NotSymmetric(&'static str),

    #[error("control is not admissible in the current state")]
    Inadmissible,

    #[error("binary program is infeasible")]
    Infeasible,

    #[error("binary program has {size} variables, limit is {limit}")]
    TooLarge { size: usize, limit: usize },

    #[error("trace has {len} slots, at least {min} are required")]
    TraceTooShort { len: usize, min: usize },

    #[error("arrival rate {rate} at buffer {buffer} exceeds weight {weight}")]
    UnrealizableRate {
        buffer: usize,
        rate: f64,
        weight: u32,
    },
}

pub(crate) fn check_dim(what: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            found,
        })
    }
}
