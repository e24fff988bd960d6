//! Sensorless PMSM speed control with an attitude-based flux observer.
//!
//! The crate is layered bottom-up: [`so2`] provides the unit-circle group,
//! [`plant`] the motor model, [`observer`] the attitude and current observers
//! with the current controller, [`speed_loop`] the outer PI loop,
//! [`excitation`] the Gramian analysis of the injected excitation, and [`sim`]
//! the closed-loop harness that ties them together.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod excitation;
pub mod observer;
pub mod plant;
pub mod sim;
pub mod so2;
pub mod speed_loop;

pub use error::{Error, Result};
