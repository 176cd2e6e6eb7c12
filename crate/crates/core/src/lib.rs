pub mod bearing;
pub mod error;
pub mod graph;
pub mod recovery;
pub mod coverage;
pub mod dynamics;
pub mod terminal;
pub mod mpc;
pub mod sim;
