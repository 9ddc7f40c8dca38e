pub mod modarith;
pub mod matgroup;
pub mod enumerate;
pub mod lift;
pub mod cohomology;
pub mod report;
pub mod curves;
pub mod classifier;
