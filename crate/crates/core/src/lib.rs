pub mod cascade;
pub mod config;
pub mod error;
pub mod full;
pub mod linalg;
pub mod mesh;
pub(crate) mod operators;
pub mod physics;
pub mod scan;
pub mod series;
pub mod solver;
pub mod units;
pub mod validate;
