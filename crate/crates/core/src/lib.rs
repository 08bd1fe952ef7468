//! NENU PAM constellation shaping and BICM-OFDM link simulation with clipping and filtering.

pub mod channel;
pub mod coding;
pub mod error;
pub mod metrics;
pub mod ofdm;
pub mod receiver;
pub mod report;
pub mod seed;
pub mod shaping;
pub mod special;
pub mod system;

pub use error::{Error, Result};
pub use metrics::{BmiEstimate, BmiEvaluator, OptimizationResult, SearchStrategy};
pub use ofdm::{Caf, Ofdm, OfdmParams};
pub use report::SimReport;
pub use shaping::{design, Constellation};
pub use system::{BerConfig, BerPoint, BmiSystem, ChannelKind, LinkParams, LinkSystem, McBmiConfig, PaprConfig};
