//! Phase-aware scheduling for AQFP circuits.

pub mod bench;
pub mod costmodel;
pub mod ilp;
pub mod legalize;
pub mod mapping;
pub mod netlist;
pub mod verify;
