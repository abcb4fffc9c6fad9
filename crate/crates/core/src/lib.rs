pub mod agent;
pub mod channel;
pub mod cli;
pub mod geometry;
pub mod neural;
pub mod pathplan;
pub mod plot;
pub mod rng;
pub mod semcom;
pub mod server;
pub mod sim;
pub mod world;
