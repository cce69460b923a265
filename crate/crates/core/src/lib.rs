pub mod dataset;
pub mod descriptors;
pub mod metrics;
pub mod mol;
pub mod pattern;
pub mod prompt;
pub mod tokenizer;
