use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes of the library.
///
/// [`Error::is_budget`] and [`Error::is_precondition`] group the variants the
/// way the command line reports them.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("ambiguous lift: adjacent samples {index} and {next} differ by {gap:.6} (>= 1/4)")]
    AmbiguousLift { index: usize, next: usize, gap: f64 },
    #[error("matrix is not hyperbolic: eigenvalue moduli {0:.6} and {1:.6}")]
    NotHyperbolic(f64, f64),
    #[error("matrix has determinant {0}, expected +1 or -1")]
    NotUnimodular(i64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("budget exhausted: {0}")]
    BudgetExhausted(String),
    #[error("pseudo-orbit defect {defect:.3e} exceeds admissible {limit:.3e}")]
    DefectTooLarge { defect: f64, limit: f64 },
    #[error("window too small: tail bound {tail:.3e} exceeds tolerance {tol:.3e}")]
    WindowTooSmall { tail: f64, tol: f64 },
    #[error("no convergence after {iterations} iterations (last change {last_change:.3e})")]
    NoConvergence { iterations: usize, last_change: f64 },
    #[error("no expansivity witness within horizon {0}")]
    NoWitness(usize),
    #[error("partition refinement exhausted after {levels} levels (best defect {best:.3e}, needed {needed:.3e})")]
    RefinementExhausted { levels: usize, best: f64, needed: f64 },
    #[error("undecided: {0}")]
    Undecided(String),
    #[error("inconclusive continuity test, gaps {0:?}")]
    Inconclusive(Vec<f64>),
    #[error("no separation time found within horizon {0}")]
    NoSeparationTime(usize),
    #[error("certificate failed: {0}")]
    CertificateFailed(String),
}

impl Error {
    /// Errors caused by running out of search budget.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            Error::BudgetExhausted(_)
                | Error::RefinementExhausted { .. }
                | Error::NoConvergence { .. }
                | Error::NoWitness(_)
        )
    }

    /// Errors caused by a mathematical precondition that the input violates.
    pub fn is_precondition(&self) -> bool {
        !self.is_budget() && !matches!(self, Error::InvalidInput(_))
    }
}
