//! Test support shared by the switchlens test suites.
//!
//! The oracles here deliberately avoid the library's mining code paths:
//! they enumerate every candidate and count containment directly.

pub mod apriori;
pub mod fixtures;
pub mod logs;
pub mod sam;
pub mod table;
