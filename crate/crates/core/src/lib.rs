pub mod asymptotics;
pub mod cli;
pub mod distributions;
pub mod error;
pub mod estimate;
pub mod mc;
pub mod model;
pub mod quadrature;
pub mod stats;
pub mod tailcalc;
