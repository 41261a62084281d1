//! Open-circuit fault diagnosis for three-phase four-wire PWM rectifiers.
//!
//! The crate is split along the pipeline:
//!
//! * [`sim`] simulates the rectifier with closed-loop control and injects
//!   IGBT open-circuit faults by forcing gate commands off.
//! * [`features`] normalizes phase currents per window and expands them into
//!   original, additive or multiplicative feature sets.
//! * [`forest`] is a from-scratch random forest (CART, Gini, bagging,
//!   majority vote) with out-of-bag and ensemble-error diagnostics.
//! * [`diagnosis`] runs the online loop: resample to 10 kHz, classify each
//!   sample, aggregate 200-sample windows and trip the protection.
//!
//! Data-parallel loops (scenario batches, tree training, batch prediction)
//! go through [`par`], which uses rayon when the `parallel` feature is on and
//! falls back to plain iteration otherwise.

pub mod code;
pub mod config;
pub mod diagnosis;
pub mod error;
pub mod features;
pub mod forest;
pub mod par;
pub mod sim;

pub use code::FaultCode;
pub use error::{Error, Result};
