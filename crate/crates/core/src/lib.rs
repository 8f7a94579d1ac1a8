//! Reputation-based social norms for peer-to-peer file sharing: stationary
//! reputation dynamics, incentive constraints, protocol design and a
//! Monte Carlo simulator.

pub mod designer;
pub mod incentives;
pub mod model;
pub mod sim;
pub mod stationary;

pub use designer::{DesignResult, DesignSpec, Problem};
pub use incentives::{IncentiveError, IncentiveReport, Regime, UtilityProfile};
pub use model::{Action, NetworkEnv, ParamError, PeerKind, ProtocolParams, Reputation};
pub use sim::{SimConfig, SimError, SimTrace};
pub use stationary::{ReputationDistribution, StationaryError};
