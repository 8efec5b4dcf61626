//! Solvers and cross-checks for semilinear parabolic obstacle problems with
//! measure data: penalization, an exact complementarity oracle, a Monte
//! Carlo Feynman-Kac verifier and an explicit Dynkin-game program.

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod dynkin;
pub mod expr;
pub mod grid;
pub mod linalg;
pub mod measure;
pub mod operator;
pub mod output;
pub mod penalized;
pub mod problem;
#[cfg(test)]
mod properties;
pub mod reference;
pub mod slice;
pub mod stochastic;
pub mod vi;
