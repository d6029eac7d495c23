//! Reconstruction of matrices and multipartite quantum states from marginal data.

pub mod bipartite;
pub mod chain;
pub mod error;
pub mod linalg;
pub mod matrec;
pub mod measure;
pub mod opspace;
pub mod petz;
pub mod quantum;
pub mod random;
pub mod tensor_nets;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
pub use opspace::{BasisKind, OperatorBasis, Superoperator, TransferMatrix};
pub use quantum::{DensityOperator, NamedState};
pub use tensor_nets::{MpRep, RepKind};
pub use chain::{ChainOptions, MeasurementScheme};
pub use measure::{ObservableSet, Povm};
