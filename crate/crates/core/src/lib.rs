//! Memory-augmented agent engine with RL-trained policies.
//!
//! The engine maintains a structured memory bank that a *manager* policy
//! evolves through `{ADD, UPDATE, DELETE, NOOP}` operations, and an *answer*
//! policy that distills retrieved memories before producing an answer. Both
//! policies train with PPO or GRPO from outcome-only exact-match rewards.
//!
//! Module map:
//! - [`memory`] — bank data model, operation validation/application, wire
//!   format, persistence, operation log.
//! - [`retrieval`] — deterministic embeddings and top-k similarity search.
//! - [`policy`] — the manager and answer policies (parametric desk-scale
//!   implementations plus LLM-backed variants).
//! - [`rl`] — rewards, clipped surrogate, group advantages, PPO/GRPO update
//!   steps with analytic gradients.
//! - [`metrics`] — answer normalization, token F1, BLEU-1, judge protocol,
//!   report aggregation.
//! - [`dataset`] — dialogue corpus loading, splits, training-tuple
//!   construction, and the synthetic environment with ground-truth
//!   operations.
//! - [`pipeline`] — end-to-end bank construction, answering, training
//!   loops, and evaluation.
//! - [`gateway`] — optional LLM endpoint boundary with a scripted offline
//!   stub.
//! - [`cli`] — command-line entry points.

pub mod cli;
pub mod dataset;
pub mod gateway;
pub mod memory;
pub mod metrics;
pub mod pipeline;
pub mod policy;
pub mod retrieval;
pub mod rl;
