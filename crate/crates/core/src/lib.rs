//! Semiparametric identification, estimation and testing for panel multinomial
//! choice models where consumers may buy a bundle of two goods.

pub mod ccp;
pub mod criterion;
pub mod dgp;
pub mod estimators;
pub mod harness;
pub mod error;
pub mod model;
pub mod moments;
pub mod rng;
pub mod sharpness;
pub mod testing;

pub use error::{Error, Result};
pub use model::{Choice, ChoiceSet, Good, ObservationPanel, Theta};
