//! Mining query reformulations from search logs and suggesting rewrites
//! with a subword transducer.

pub mod analytics;
pub mod beam;
pub mod bpe;
pub mod event_log;
pub mod metrics;
pub mod miner;
pub mod session;
pub mod transducer;
pub mod wire;
