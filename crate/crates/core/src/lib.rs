//! Sharp worst-case probability bounds for products, sums, minima and maxima
//! of nonnegative random variables with permutation-symmetric first and
//! second moments.

// `!(a <= b)` is used on purpose so NaN fails the test; dense kernels index by row.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod analytic;
pub mod error;
pub mod event;
pub mod families;
pub mod generic_bounds;
pub mod geometry;
pub mod lp;
pub mod moments;
pub mod poly;
pub mod portfolio;
pub mod primal_oracle;
pub mod product_bounds;
pub mod sdp;
pub mod sip;

pub use analytic::{ClosedFormBound, Regime};
pub use error::{Error, Result};
pub use event::{Event, Functional, Tail};
pub use moments::{MomentSpec, Validation};
pub use poly::Polynomial;
pub use primal_oracle::{Atom, DiscreteSymmetricDistribution};
pub use sip::DualPoint;
pub use product_bounds::{BoundOptions, BoundQuery, BoundResult, Shortcut, Side};
