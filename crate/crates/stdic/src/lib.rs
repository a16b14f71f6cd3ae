//! Subset-based spatial-temporal digital image correlation (ST-DIC).
//!
//! The library decouples the three ingredients of a subset DIC algorithm so
//! they can be combined freely:
//!
//! * **shape function** ([`shapefn`]) — which Taylor terms in the local
//!   `(dx, dy, dt)` coordinates model the deformation, from pure
//!   translation up to second-order spatial/temporal polynomials with
//!   strain-rate cross terms;
//! * **correlation criterion** ([`criterion`]) — plain SSD or the
//!   illumination-invariant ZNSSD, sharing one Jacobian through a scalar
//!   step factor;
//! * **optimizer** ([`solver`]) — forward-additive, forward-compositional
//!   and inverse-compositional Gauss-Newton, the last with a precomputed
//!   Jacobian pseudo-inverse.
//!
//! On top of those sit a full-field measurement pipeline ([`engine`]), a
//! synthetic-experiment generator ([`synth`]) and error/strain statistics
//! ([`metrics`]).

pub mod criterion;
pub mod engine;
mod error;
pub mod image;
pub mod metrics;
pub mod shapefn;
pub mod solver;
pub mod synth;

pub use error::{Error, Result};
pub use image::{GrayImage, ImageSequence, SubsetRegion};
pub use shapefn::{BasisVector, Monomial, ParamLayout, ParamSet, ShapeFunctionSpec, WarpMatrix};
