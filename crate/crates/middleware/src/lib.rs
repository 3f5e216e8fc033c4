//! HTTP middleware for agent consent: the callee service (axum) and the
//! caller client (reqwest), plus the AgentCard extension and wire types
//! they share.

pub mod callee;
pub mod caller;
pub mod card;
pub mod demo;
pub mod wire;

pub use callee::{CalleeConfig, CalleeService, RunningCallee, ServiceError};
pub use caller::{AcapCaller, CallerConfig, CallerError, CallerSettings, SkillOutcome};
pub use card::{AdherenceMode, AgentCard, SkillDescriptor};
pub use wire::{ErrorBody, GateCode, SkillGateError};
