//! Tenfold-way classification of tight-binding Hamiltonians and numerical
//! Clifford-index invariants on finite lattice boxes.

pub mod class;
pub mod cli;
pub mod clifford;
pub mod linalg;
pub mod model;
pub mod pairing;
pub mod symmetry;
