pub mod fractal;
pub mod pricing;
pub mod scenario;
pub mod solver;
pub mod special;
