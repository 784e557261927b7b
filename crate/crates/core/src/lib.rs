//! Conditional maximum likelihood estimation for fixed-effects dynamic panel
//! logit models.
//!
//! The library covers:
//! - binary AR(p) models with strictly exogenous covariates, estimated by
//!   conditioning on sufficient statistics over maximal admissible time-index
//!   groups ([`sets`], [`likelihood`]);
//! - the classical Cox conditional estimator and a covariate-only variant;
//! - a multinomial AR(1) variant with base-category restrictions ([`mnl`]);
//! - Newton optimization, sandwich variance, and a two-step GMM combiner of
//!   likelihood-equation systems ([`inference`]);
//! - a brute-force path-enumeration probability oracle ([`oracle`]);
//! - DGP simulation and a Monte Carlo harness ([`simulate`]).

pub mod error;
pub mod expfam;
pub mod inference;
pub mod likelihood;
pub mod mnl;
pub mod oracle;
pub mod panel;
pub mod sets;
pub mod simulate;

pub use error::{Error, Result};
pub use likelihood::LikelihoodReport;
pub use panel::{MnlPanelDataset, MnlParameterVector, PanelDataset, ParameterVector};
pub use sets::{Group, GroupSystem};
