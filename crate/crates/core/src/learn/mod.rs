//! Statistical layer: self-organizing maps, kriging, linear and logistic
//! regression with simulated quantities of interest, cross-validation and
//! fit metrics.

pub mod cv;
pub mod gp;
pub mod metrics;
pub mod regress;
pub mod som;

pub use cv::{kfold_cv, kfold_indices, CvModel, CvResult, Dataset, Metric};
pub use gp::{gp_fit, gp_fit_ml, gp_predict, GpBasis, GpConfig, GpModel};
pub use metrics::{auc, cv_rmse, metrics, r2_in_sample, r2_out_of_sample, rmse, Metrics};
pub use regress::{
    first_differences, logit_fit, logit_simulate, ols_fit, FirstDifference, FitKind, FitSummary,
    RegressOptions, Scenario, SimulatedOutcome,
};
pub use som::{som_map, som_train, SomConfig, SomGrid};
