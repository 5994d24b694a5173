//! Neuro-symbolic geometry problem solving.
//!
//! The pipeline parses problem prose into formal propositions, resolves `$`
//! placeholders against a diagram parse through a rectifier/verifier loop,
//! schedules theorems, and deduces a numeric answer with a step trace.

pub mod formal;
pub mod diagram;
pub mod text;
pub mod gateway;
pub mod disambiguation;
pub mod reasoner;
pub mod harness;
