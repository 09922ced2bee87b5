//! Simulator for quantum dynamic programming: recursions whose step unitaries
//! depend on the current state, compiled with memory-usage queries instead of
//! unfolding.

pub mod algos;
pub mod channels;
pub mod cli;
pub mod engine;
pub mod imr;
pub mod linalg;
