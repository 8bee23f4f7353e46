pub mod analytics;
pub mod channel;
pub mod codec;
pub mod config;
pub mod experiments;
pub mod geometry;
pub mod metrics;
pub mod mobility;
pub mod rsu;
pub mod scenes;
pub mod sim;
pub mod stmodel;
