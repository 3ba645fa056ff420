//! Training-and-evaluation engine for attribute-based zero-shot learning:
//! a self-interaction attribute encoder with inverse regularization, trained
//! with Reptile meta-updates and reservoir replay, evaluated under standard
//! GZSL and the fixed/dynamic continual-GZSL protocols.

pub mod continual;
pub mod data;
pub mod encoder;
pub mod error;
pub mod evalkit;
pub mod numkit;
pub mod objective;
pub mod rng;
pub mod trainer;
pub mod verify;

pub use error::{Error, Result};
