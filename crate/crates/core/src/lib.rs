//! Closed-form steady states of degenerate `Jg -> Je` dipole transitions in
//! elliptically polarized light, with a brute-force GOBE oracle.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod angular;
pub mod error;
pub mod gobe;
pub mod operators;
pub mod polarization;
pub mod steadystate;
pub mod verify;

pub use angular::{AngularMomentum, ScaledLegendre};
pub use error::{Error, Result};
pub use operators::{CMat, Normalization};
pub use polarization::{ComplexVector3, Frame, Polarization, SphericalTensor};
pub use steadystate::{
    classify, steady_state, DensityMatrix, FieldParams, SteadyStateResult, TransitionClass, TransitionSpec,
};
