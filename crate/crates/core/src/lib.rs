pub mod depth_io;
pub mod error;
pub mod geometry;
pub mod occupancy;
pub mod predictor;
pub mod sim;
pub mod tracker;
pub mod umap;
