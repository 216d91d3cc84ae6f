//! Generalized immediate exchange model: the continuous wealth dynamics on a
//! graph, its discrete dual particle system, duality functions and the
//! SU(1,1) structure tying them together.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuous;
pub mod dual;
pub mod duality;
pub mod error;
pub mod markov;
pub mod specialfn;
pub mod stats;
pub mod su11;

pub use continuous::{BetaQuadrature, ContinuousTrajectorySample, Edge, ExchangeKernel, WealthVector};
pub use dual::{CanonicalMeasure, DiscreteGammaMeasure, OccupationVector, SectorDistribution};
pub use duality::{DualityPolynomial, PathDualityReport, ScalingGaps, SelfDualityPolynomial};
pub use error::{Error, Result};
pub use specialfn::{ModelParams, RngStream};
pub use stats::Estimate;
pub use su11::{Ladder, MonomialOperator, SectorOperator};
