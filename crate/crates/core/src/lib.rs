//! MiniCilk: lowers fork-join task programs to continuation-passing task
//! systems, runs them, and emits HLS processing elements.

pub mod frontend;
pub mod implicit_ir;
pub mod dae;
pub mod cps;
pub mod runtime;
pub mod bench;
pub mod graph;
pub mod hardcilk;
pub mod pipeline;
