//! Model-order selection: the likelihood-ratio stationarity test, the
//! `d_s` selection rule, and the hold-out permutation scheme (BNISE).

mod chi2;
mod holdout;
mod lrt;
mod select;

pub use chi2::{chi2_cdf, chi2_sf, gamma_p, gamma_q, ln_gamma};
pub use holdout::{bnise, check_defined, holdout_stationarity_check, BniseReport, HoldoutCheck, HoldoutConfig};
pub use lrt::{closed_form_sum, likelihood_ratio_statistic, normalized, StationarityTest};
pub use select::{select_order, test_candidate, Candidate, OrderSelection};
