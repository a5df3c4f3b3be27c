//! Ensembles of constituency parsers built by bagging and by
//! constituent-level boosting, combined by constituent voting, plus tools
//! that use the boosting distribution to find inconsistent treebank
//! annotations.

pub mod bagging;
pub mod boosting;
pub mod combine;
pub mod ensemble;
pub mod eval;
pub mod experiments;
pub mod grammar;
pub mod qc;
pub mod seed;
pub mod treebank;
