pub mod abe;
pub mod channel;
pub mod cli;
pub mod client;
pub mod harness;
pub mod mst;
pub mod nodes;
pub mod policy;
pub mod suite;
pub mod wire;
