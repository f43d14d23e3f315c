pub mod cli;
pub mod ingest;
pub mod linalg;
pub mod model;
pub mod newton;
pub mod oracle;
pub mod ot_solver;
pub mod smoothing;
pub mod wb_solver;
