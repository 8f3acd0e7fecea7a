pub mod calibration;
pub mod camera;
pub mod error;
pub mod geometry;
pub mod graph;
pub mod metadata;
pub mod qa;
pub mod render;
pub mod schema;
pub mod scoring;
pub mod synthetic;
