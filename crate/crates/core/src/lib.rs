//! Groupoids, their normal subgroupoid systems and quotients, checked both
//! exactly (finite tables) and numerically (single-chart Lie groupoids).

pub mod dirac;
pub mod error;
pub mod fingroupoid;
pub mod geomcore;
pub mod leafspace;
pub mod liegroupoid;
pub mod linalg;
pub mod multdist;
pub mod numerics;
pub mod report;
pub mod rng;
pub mod runner;
pub mod scenarios;

pub use error::{Error, Result};
pub use numerics::Numerics;
pub use report::CheckReport;
