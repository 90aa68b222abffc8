//! Coordination substrates for multi-robot systems.
//!
//! * [`kernel`]: values, tuples, templates and attribute predicates.
//! * [`stigmergy`]: replicated key-value store with Lamport timestamps.
//! * [`tuplespace`]: components with repositories, attributes and processes.
//! * [`interp`]: interpreted systems and their textual description language.
//! * [`world`]: arena geometry and movement.
//! * [`formula`]: temporal formulas over named propositions.
//! * [`engine`]: seeded simulator, explicit-state checker, estimator.
//! * [`scenarios`]: foraging and flocking case studies built on the above.

pub mod engine;
pub mod formula;
pub mod interp;
pub mod kernel;
pub mod scenarios;
pub mod stigmergy;
pub mod tuplespace;
pub mod world;
