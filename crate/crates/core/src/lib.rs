//! Construction, verification, decoding and simulation of generalized Silver
//! space-time block codes for `2^a` transmit antennas.

pub mod channel;
pub mod code;
pub mod decoder;
pub mod error;
pub mod frame;
pub mod info;
pub mod linalg;
pub mod rate1;
pub mod silver;
pub mod sim;

pub use error::{Error, Result};
