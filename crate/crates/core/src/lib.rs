pub mod physics;
pub mod render;
pub mod vision;
pub mod derender;
pub mod mental;
pub mod cot;
pub mod analysis;
pub mod config;
pub mod pipeline;
