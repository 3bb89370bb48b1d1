//! Self-adaptive natural-language command grounding.
//!
//! The agent maps user commands onto API actions through a store of seed
//! commands, scores how novel each command is, asks for clarification when it
//! cannot ground one, and learns new seed commands and facts while in use.

pub mod agent;
pub mod config;
pub mod knowledge;
pub mod matcher;
pub mod model;
pub mod parallel;
pub mod reference;
pub mod sim;
pub mod snapshot;
pub mod store;
pub mod tokens;
pub mod world;

pub use tokens::{tokenize, Token};
