//! Comparison schemes: grid-exhaustive optimum (and its energy-efficiency
//! counterpart), uniform random selection, and KKT active-set enumeration.

mod exhaustive;
mod kkt;
mod random;

pub use exhaustive::{exhaustive_max_ee, exhaustive_optimal, ExhaustiveMode};
pub use kkt::{kkt_alloc, kkt_search, KktCandidate, KktSearch, CONSTRAINT_COUNT, STATIONARITY_TOL};
pub use random::{random_alloc, random_alloc_with, RandomDraw};
