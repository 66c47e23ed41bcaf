//! Point and set estimators for θ and the comparison estimators.

pub mod fe_logit;
pub mod msm;
pub mod optim;
pub mod semi_nb;
pub mod set;
pub mod two_step;

pub use fe_logit::{estimate_fe_logit, BetaEstimate, FeLogitOptions};
pub use msm::{estimate_msm_parametric, MsmEstimate, MsmOptions};
pub use semi_nb::{estimate_semi_nobundle, SemiNoBundleOptions};
pub use set::{estimate_set, AxisSpec, GridSpec, SetEstimate};
pub use two_step::{estimate_two_step, PointEstimate, SearchOptions, TwoStepOptions};
