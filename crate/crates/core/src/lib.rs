pub mod chem;
pub mod data;
pub mod flow;
pub mod generation;
pub mod graph;
pub mod latent;
pub mod numeric;
pub mod training;
