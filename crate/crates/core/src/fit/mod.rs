//! Offline construction of approximation tables.

pub mod constant;
pub mod dyadic;
pub mod io;
pub mod ncchi2;
pub mod poly;

pub use constant::{fit_constant, ConstantTable, Construction};
pub use dyadic::{
    fit_dyadic_table, fit_dyadic_table_centered, fit_gaussian_dyadic, DyadicPolyTable,
};
pub use io::{decode, encode, export_table, import_table, AnyTable, TableFormat};
pub use ncchi2::{fit_ncchi2, knot_y, NcChi2Table, PTransform};
pub use poly::{
    fit_poly_interval, gaussian_singular_linear, horner, FitTarget, FnTarget, PolyFit,
    QuantileTarget,
};
