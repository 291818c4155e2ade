#![no_std]

extern crate alloc;

mod error;
pub mod linalg;
pub mod augment;
pub mod hinf;
pub mod pipeline;
pub mod statespace;
pub mod sim;
pub mod trigger;

pub use error::{Error, Result};
