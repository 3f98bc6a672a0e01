//! Constitutive relations: viscous potentials, their mollification and
//! conjugates, the smoothed friction functional and the pressure law.

mod gauss;
pub mod friction;
pub mod mollify;
pub mod potential;
pub mod pressure;
pub mod tensor;

pub use friction::{grad_j_delta, j_delta, SmoothedAbsolute};
pub use gauss::gauss_legendre;
pub use mollify::{mollify, MollifiedPotential, MollifiedSample};
pub use potential::{
    maximize_conjugate, AscentOptions, ConjugateValue, CustomPotential, PotentialKind, PotentialSpec,
};
pub use pressure::{PressureLaw, PressureSample};
pub use tensor::SymTensor;
