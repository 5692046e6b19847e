//! Detection, quantification and removal of artificial unicity: redundancy
//! hidden behind surrogate keys in relational snapshots.
//!
//! The pipeline has three stages, each usable on its own:
//!
//! 1. [`elicitation`]: tag surrogate keys and natural keys, guided by the
//!    redundancy profiles of [`profiling`].
//! 2. [`auclean`]: rewrite surrogate values to class representatives along
//!    the propagation graph, so equal entities share one surrogate.
//! 3. [`normalize`]: split unstable attributes out, chase conflicting values
//!    and reduce every relation to a set.
//!
//! [`pipeline`] replays a [`decision::DecisionLog`] through all three;
//! [`deteriorate`] builds benchmark snapshots with known redundancy.

pub mod auclean;
pub mod decision;
pub mod deteriorate;
pub mod elicitation;
pub mod fraction;
pub mod model;
pub mod normalize;
pub mod pipeline;
pub mod profiling;
pub mod similarity;

pub use decision::{Decision, DecisionLog, DecisionRecord};
pub use fraction::Fraction;
pub use model::{DatabaseSnapshot, Relation, RelationSchema, Value};
