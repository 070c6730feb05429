//! Workbench for interrupt-driven concurrency: a small language with
//! hardware pseudo-variables, the eChronos OS model written in it, an
//! explicit-state checker and a verification-condition generator.

pub mod control;
pub mod echronos;
pub mod explorer;
pub mod hw;
pub mod kernel;
pub mod vcgen;
