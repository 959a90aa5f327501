//! Batch analysis front end: file readers, the report pipeline and the
//! command-line interface.

pub mod commands;
pub mod pipeline;
pub mod plots;
pub mod table;
