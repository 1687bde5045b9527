//! Strong-disorder renormalization of random antiferromagnetic spin-S chains
//! and the scaling of the Tsallis block entropy in the random singlet phase.
//!
//! The pipeline is: [`disorder`] draws couplings, [`sdrg`] decimates them into
//! singlets, [`blocks`] counts singlets crossing each block boundary,
//! [`entropy`] turns counts into ensemble-averaged `S_q(L)`, and [`scaling`]
//! extracts the extensivity index `q_ext`. [`oracle`] holds exact small-system
//! references used by the tests.

pub mod blocks;
pub mod config;
pub mod disorder;
pub mod entropy;
pub mod error;
pub mod oracle;
pub mod pipeline;
pub mod scaling;
pub mod sdrg;
pub mod selftest;

pub use error::{Error, Result};
