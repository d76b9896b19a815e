pub mod geometry;
pub mod world;
pub mod controller;
pub mod pipeline;
pub mod harness;
pub mod gateway;
