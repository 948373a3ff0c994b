//! Discrete variable-exponent p(x)-Laplacian energies on positive cones,
//! checks of their convexity and comparison inequalities, and an
//! energy-minimisation solver for the associated Dirichlet problems.

pub mod anisotropy;
pub mod energy;
pub mod error;
pub mod exec;
pub mod exponent;
pub mod inequality;
pub mod expr;
pub mod mesh;
pub mod problems;
pub mod report;
pub mod solver;

pub use anisotropy::{AnisotropyKind, AnisotropyModel, Local, Site};
pub use error::{Error, Result};
pub use exec::Exec;
pub use exponent::ExponentField;
pub use expr::ScalarExpr;
pub use mesh::{CellVectorField, Domain, Mesh, NodeField};
pub use report::{Status, ValidationReport};
pub use energy::{
    AbsorptionTerm, EnergyKind, EnergyModel, EnergyParts, KirchhoffTerm, LineFunctional, ReactionKind, ReactionTerm,
};
pub use solver::{
    first_eigenpair, minimize_energy, solve, solve_kirchhoff, solve_problem1, solve_problem2, EigenOptions,
    EigenReport, InitKind, SolveReport, SolverOptions, UniquenessReport,
};
