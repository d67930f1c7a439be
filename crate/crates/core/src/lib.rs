#![allow(clippy::needless_range_loop)]

pub mod codec;
pub mod codegen;
pub mod coopgraph;
pub mod field;
pub mod linalg;
pub mod oracle;
pub mod presets;
pub mod topology;
