pub mod generators;
pub mod io;
pub mod problem;
pub mod rng;
pub mod simulator;
pub mod solver;
pub mod theory;
pub mod trace;
pub mod verification;
