pub mod agent;
pub mod diffusion;
pub mod distance;
pub mod distributions;
pub mod knowledge;
pub mod projection;
pub mod sim;
