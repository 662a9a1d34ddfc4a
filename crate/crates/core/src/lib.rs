pub mod apps;
pub mod association;
pub mod augment;
pub mod dataset;
pub mod eval;
pub mod io;
pub mod loss;
pub mod mask;
