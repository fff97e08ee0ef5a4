//! Rate–memory tradeoffs for coded caching in file selection networks.
//!
//! A server holds `N` files with a popularity profile; `L` users each cache
//! `R_c` files' worth of content and then request files i.i.d. from the
//! profile. The crate evaluates and optimizes centralized and decentralized
//! caching schemes, computes the matching lower bounds, and checks the
//! closed-form rates against an explicit bit-level simulation.

pub mod bounds;
pub mod cli;
pub mod centralized;
pub mod decentralized;
pub mod error;
pub mod exact;
pub mod numeric;
pub mod popularity;
pub mod request;
pub mod simulator;
pub mod tradeoff;

pub use error::{Error, Result};
pub use popularity::{PopularityProfile, PopularitySpec};
pub use request::{RequestVector, WorstCase};
