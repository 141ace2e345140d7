//! Capacity outage probability for coordinated multi-cell (CoMP) downlink
//! transmission under Rayleigh fading.
//!
//! The crate is organised bottom-up:
//!
//! * [`analytic`]: the hypoexponential CCDF/pdf and the closed-form CoMP
//!   outage probability, with a numerical-conditioning policy.
//! * [`montecarlo`]: a seeded, parallel SINR sampler used as ground truth
//!   and as the fallback when the closed form is ill-conditioned.
//! * [`optimize`]: goodput maximisation, capacity at a fixed outage and
//!   best cooperating-set selection.
//! * [`network`]: synthetic small-cell deployments and the path-loss model
//!   that turns them into per-user received power profiles.
//! * [`experiment`]: configuration, the figure reproductions and the
//!   invariant suites driven by the `comp-outage` binary.

pub mod analytic;
pub mod error;
pub mod experiment;
pub mod montecarlo;
pub mod network;
pub mod numeric;
pub mod optimize;

pub use analytic::{
    capacity_cdf, evaluate_outage, gen_chi2_ccdf, gen_chi2_pdf, outage_probability, siso_outage,
    Conditioning, ConditioningReport, LinkProfile, OutageEstimate, OutageModel, OutageQuery,
    PowerSet,
};
pub use error::{Error, Result};
pub use optimize::{
    capacity_at_fixed_outage, maximize_goodput, select_best_set, Criterion, FixedOutage,
    RateOptimum, SearchBounds, SetSelection,
};
