//! Verification and repair of trigger-action home automation rules.
pub mod automaton;
pub mod checker;
pub mod env;
pub mod fixtures;
pub mod lex;
pub mod props;
pub mod repair;
pub mod report;
pub mod rule;
pub mod scenario;
