//! Core of the assertgen pipeline: test-assert entries, the prompt dialogue,
//! and assert similarity metrics. Needs only `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod dialogue;
pub mod lexer;
pub mod metrics;
pub mod model;
pub mod placeholder;
pub mod prompt;
pub mod similarity;

pub use dialogue::{
    generate_for_entry, AssertExecutor, BackendError, ChatBackend, ExecutorError, GenerationConfig,
};
pub use model::*;
