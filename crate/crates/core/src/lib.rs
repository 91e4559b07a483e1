pub mod bench;
pub mod flowgraph;
pub mod infer;
pub mod pipeline;
pub mod resolve;
pub mod runtime;
pub mod selector;
pub mod syntax;
pub mod transform;
