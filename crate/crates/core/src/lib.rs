//! Matrix-free convex optimization.
//!
//! Linear functions are represented as forward-adjoint oracles ([`Fao`]): a
//! linear map packaged with an algorithm for applying it and an algorithm for
//! applying its adjoint. Oracles compose into [`FaoDag`]s, which can be
//! evaluated with a preplanned global buffer, transposed mechanically and
//! rewritten. Problems written as expression DAGs are checked against the DCP
//! rules and canonicalized into cone programs whose constraint operator is an
//! FAO DAG rather than a sparse matrix, then solved by a first-order method
//! that only ever multiplies by the operator and its adjoint.
//!
//! ```
//! use matfree::{Fao, Shape};
//!
//! let conv = Fao::conv(matfree::ConvVariant::Column, &[1.0, 1.0], Shape::vector(3)).unwrap();
//! let y = conv.forward(&[&[1.0, 2.0, 3.0]]).unwrap();
//! assert_eq!(y[0], vec![1.0, 3.0, 5.0, 3.0]);
//! ```

pub mod bench;
pub mod canon;
pub mod dag;
pub mod error;
pub mod expr;
pub mod fao;
pub mod fft;
pub mod linalg;
pub mod shape;
pub mod solver;
pub mod sparse;
#[doc(hidden)]
pub mod testing;

pub use canon::{canonicalize, ConeProgram};
pub use dag::{FaoDag, MemoryPlan};
pub use error::{Error, Result};
pub use expr::{ExprBuilder, ExpressionDag, Opr};
pub use fao::{ConvMethod, ConvVariant, Fao, Wavelet};
pub use linalg::DenseMatrix;
pub use shape::Shape;
pub use solver::{solve, Cone, ConeKind, Solution, SolverOptions, Status};
