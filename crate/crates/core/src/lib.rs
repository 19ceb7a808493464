//! boxlab — a simulation and verification laboratory for non-local
//! correlation boxes.
//!
//! The crate is organised around the operational notion of a *behavior*
//! (a conditional probability table for a set of labelled boxes) and the
//! counterfactual notion of an *ontic ensemble* (a distribution over
//! complete input→output assignments). On top of those sit the CHSH and
//! monogamy machinery, the information-causality game, and the Shannon
//! bookkeeping everything reduces to.
//!
//! Conventions used throughout:
//! - probabilities are exact `f64` tables; tolerances are documented per item
//! - entropies and informations are base-2 (bits), with 0·log 0 = 0
//! - binary outputs map to ±1 correlator values as 0 → +1, 1 → −1

pub mod bell;
pub mod boxes;
pub mod counterfactual;
pub mod icausality;
pub mod lp;
pub mod prob;
pub mod quantum;
