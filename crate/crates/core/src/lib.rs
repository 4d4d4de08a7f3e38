pub mod callgraph;
pub mod corpus;
pub mod http;
pub mod llmclient;
pub mod metrics;
pub mod parser;
pub mod pipeline;
pub mod promptgen;
pub mod retrieval;
pub mod semfacts;
