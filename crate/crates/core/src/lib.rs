//! Semi-structured knowledge management for task-oriented dialog.
//!
//! Structured entity records are fused with free-text documents into a
//! [`kb::KnowledgeBase`]. A belief state extended with a `ruk` triple and a
//! topic drives an exact structured query plus fuzzy entity and document
//! matching ([`knowops`]). Around that sit a topic-word index built with
//! TF-IDF and CA-TF-IDF filtering ([`topic`]), a pluggable turn pipeline
//! ([`pipeline`]), consistency corruption ([`corrupt`]) and a metric suite
//! ([`metrics`], [`eval`]).
//!
//! ```
//! use sskm::belief::parse_belief_span;
//! use sskm::knowops::{format_query_span, structured_query};
//! use sskm::kb::{Domain, Entity, KnowledgeBase};
//!
//! let kb = KnowledgeBase::from_domains(vec![Domain::new("restaurant", ["name", "food", "area"])
//!     .with_entity(Entity::new("r1", "pizza hut").with_attr("food", "italian").with_attr("area", "centre"))
//!     .with_entity(Entity::new("r2", "zizzi").with_attr("food", "italian").with_attr("area", "centre"))])
//! .unwrap();
//! let state = parse_belief_span("restaurant { food = italian , area = centre }").unwrap();
//! let result = structured_query(&kb, &state).unwrap();
//! assert_eq!(format_query_span(&result), "restaurant 2 match");
//! ```

pub mod belief;
pub mod cli;
pub mod corpus;
pub mod corrupt;
pub mod error;
pub mod eval;
pub mod kb;
pub mod knowops;
pub mod metrics;
pub mod pipeline;
pub mod synth;
pub mod text;
pub mod topic;

pub use error::{Error, Result};
