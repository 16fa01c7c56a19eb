//! B-spline Galerkin discretization and the symmetric-definite generalized
//! eigensolvers built on it.

pub mod assemble;
pub mod banded;
pub mod bspline;
pub mod eigen;
pub mod quadrature;

pub use assemble::{assemble_1d, assemble_hyperangular, GalerkinMatrices, OperatorForm, OperatorKind};
pub use banded::BandedSym;
pub use bspline::{BSplineBasis, BoundaryCondition};
pub use eigen::{dense_generalized, dense_reference, solve_lowest, Cutoff, EigenOptions, EigenSolution};
pub use quadrature::GaussLegendre;
