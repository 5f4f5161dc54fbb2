//! Joint user-group/timeslot scheduling and hovering-time allocation for a
//! multi-antenna UAV serving clustered ground users.

pub mod agent;
pub mod bench;
pub mod channel;
pub mod env;
pub mod error;
pub mod exact;
pub mod group;
pub mod heur;

pub use error::{Error, Result};
