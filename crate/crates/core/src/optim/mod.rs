pub mod driver;
pub mod gradcheck;
pub mod linesearch;
pub mod params;
pub mod problem;

pub use driver::{co_optimize, IterationRecord, OptimConfig, OptimizationReport, Stage, Stop};
pub use gradcheck::{gradcheck, probe_target, GradcheckOptions};
pub use params::{parse_groups, Group, ParameterVector};
pub use problem::{pack_gradient, synthesize_target, warm_start, Evaluation, Forward, Objective, PatternMode, Problem, Realized};

#[cfg(test)]
mod tests;
