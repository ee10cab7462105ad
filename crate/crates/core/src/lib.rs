pub mod dispersion;
pub mod error;
pub mod exec;
pub mod kernel;
pub mod oscillatory;
pub mod special;
pub mod decay_fit;
pub mod propagator;
pub mod strichartz;
pub mod nonlinear;
pub mod scenario;
