pub mod analysis;
pub mod bench;
pub mod calibration;
pub mod emitter;
pub mod error;
pub mod io;
pub mod photon;
pub mod pipeline;
pub mod qfc;
pub mod rng;
pub mod units;

pub use error::{Error, Result};
