//! Model files, trace files and the command-line front end.

pub mod cli;
pub mod error;
pub mod lexer;
pub mod model;
pub mod print;
pub mod report;
pub mod trace_io;
pub mod typeck;
