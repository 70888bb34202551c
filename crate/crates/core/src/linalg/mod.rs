pub mod eigen;
pub mod krylov;
pub mod sparse;

pub use eigen::eigenvalues;
pub use krylov::{expm, expmv, KrylovOptions, KrylovStats};
pub use sparse::CsrMatrix;
