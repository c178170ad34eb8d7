pub mod assess;
pub mod backends;
pub mod callpath;
pub mod corpus;
pub mod harness;
pub mod javasrc;
pub mod metrics;
pub mod pipeline;
pub mod process;
pub mod signature;
pub mod testgen;
pub mod workspace;
