//! Multi-agent causal influence diagrams over finite domains: modelling,
//! exact inference, policy optimization, incentive analysis, twin-network
//! counterfactuals and a catalogue of AI-safety framework models.

pub mod counterfactual;
pub mod dot;
pub mod dsl;
pub mod error;
pub mod incentives;
pub mod inference;
pub mod limits;
pub mod model;
pub mod policy;
pub mod solve;
pub mod zoo;

pub use error::{CidError, Result};
pub use limits::Limits;
pub use model::{AgentId, CidModel, Domain, Edge, EdgeKind, ModelBuilder, NodeId, NodeKind, ValidationReport};
pub use policy::{DecisionRule, PolicyProfile};
