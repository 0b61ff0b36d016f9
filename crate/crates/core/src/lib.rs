pub mod cgm;
pub mod data;
pub mod discovery;
pub mod error;
pub mod estimation;
pub mod graph;
pub mod json;
pub mod kernel_stats;
pub mod linalg;
pub mod rng;
pub mod scenario;
pub mod scm;
